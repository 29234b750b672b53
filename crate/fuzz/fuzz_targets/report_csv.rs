#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = gbmseg::metrics::read_report_csv(data) {
        let _ = gbmseg::metrics::histogram(&rows, 7);
    }
});
