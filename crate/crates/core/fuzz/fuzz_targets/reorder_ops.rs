#![no_main]

use std::collections::BTreeSet;

use dcsim::mptcp::{Insert, ReorderBuffer};
use libfuzzer_sys::fuzz_target;

// first byte picks the capacity, then one u16 sequence number per byte pair
fuzz_target!(|data: &[u8]| {
    let Some((&cap, rest)) = data.split_first() else { return };
    let mut buf = ReorderBuffer::new(cap as usize % 64 + 1);
    let mut done = BTreeSet::new();
    for chunk in rest.chunks_exact(2) {
        let seq = u16::from_le_bytes([chunk[0], chunk[1]]) as u64;
        let before = buf.contains(seq);
        match buf.insert(seq, seq) {
            Insert::Duplicate => assert!(before),
            Insert::Accepted { released, dropped } => {
                assert!(!before);
                assert!(released.windows(2).all(|w| w[0].0 < w[1].0));
                for (s, item) in released {
                    assert_eq!(s, item);
                    assert!(done.insert(s), "{s} handed out twice");
                }
                for s in dropped {
                    assert!(done.insert(s), "{s} handed out twice");
                }
            }
        }
        // everything below the cursor was released or skipped exactly once
        assert_eq!(done.len() as u64, buf.expected());
        assert!(done.last().is_none_or(|&m| m < buf.expected()));
        assert!(buf.held() <= buf.capacity());
    }
});
