#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(r) = gbmseg::io::Rvol::decode(data) {
        let bytes = r.encode().expect("decoded record re-encodes");
        assert_eq!(&bytes[..], &data[..bytes.len()]);
        let _ = r.to_multichannel(None);
        let _ = r.to_labels();
    }
});
