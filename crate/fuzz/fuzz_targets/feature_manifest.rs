#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(m) = gbmseg::io::FeatureManifest::parse(text) {
            if let Ok(out) = m.to_text() {
                assert_eq!(gbmseg::io::FeatureManifest::parse(&out).expect("re-parses"), m);
            }
        }
    }
});
