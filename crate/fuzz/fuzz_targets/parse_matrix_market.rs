#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(a) = giamg::io::parse_matrix_market(text, Path::new("fuzz.mtx")) {
        // Whatever parses must survive a write/read cycle unchanged.
        let again = giamg::io::parse_matrix_market(&giamg::io::format_matrix_market(&a), Path::new("again.mtx"))
            .expect("formatted matrix parses");
        assert_eq!(a, again);
    }
});
