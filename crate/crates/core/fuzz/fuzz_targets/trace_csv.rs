#![no_main]

use dcsim::trace::read_trace;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = read_trace(data) {
        for r in rows {
            assert!(r.up <= 1 && r.active <= 1);
            assert!(r.throughput_mbps >= 0.0 && r.redundant_mbps >= 0.0);
        }
    }
});
