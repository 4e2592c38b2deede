#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(report) = opfix_core::io::read_report(text) {
        let mut buf = Vec::new();
        opfix_core::io::write_report(&mut buf, &report).unwrap();
    }
});
