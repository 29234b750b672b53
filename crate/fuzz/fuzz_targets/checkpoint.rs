#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(c) = gbmseg::io::Checkpoint::decode(data) {
        let again = gbmseg::io::Checkpoint::decode(&c.encode().expect("re-encodes")).expect("re-decodes");
        assert_eq!(again.params, c.params);
    }
});
