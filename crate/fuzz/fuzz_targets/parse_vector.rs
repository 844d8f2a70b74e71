#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(v) = giamg::io::parse_vector(text, Path::new("fuzz.vec")) {
        let again = giamg::io::parse_vector(&giamg::io::format_vector(&v), Path::new("again.vec"))
            .expect("formatted vector parses");
        assert_eq!(v, again);
    }
});
