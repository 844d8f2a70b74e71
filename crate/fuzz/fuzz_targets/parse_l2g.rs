#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = giamg::io::parse_l2g(text, Path::new("fuzz.l2g")) {
        let again = giamg::io::parse_l2g(&giamg::io::format_l2g(&m), Path::new("again.l2g"))
            .expect("formatted map parses");
        assert_eq!(m, again);
    }
});
