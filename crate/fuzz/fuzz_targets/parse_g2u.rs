#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = giamg::io::parse_g2u(text, Path::new("fuzz.g2u")) {
        let again = giamg::io::parse_g2u(&giamg::io::format_g2u(&m), Path::new("again.g2u"))
            .expect("formatted map parses");
        assert_eq!(m, again);
    }
});
