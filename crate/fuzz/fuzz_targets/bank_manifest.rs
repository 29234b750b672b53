#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(m) = gbmseg::io::BankManifest::parse(text) {
            assert_eq!(gbmseg::io::BankManifest::parse(&m.to_json()).expect("re-parses"), m);
        }
    }
});
