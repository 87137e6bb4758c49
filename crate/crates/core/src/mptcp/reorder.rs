//! Receiver-side reordering across sub-flows.

use std::collections::BTreeMap;

/// Result of offering one segment to a [`ReorderBuffer`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Insert<T> {
    /// Already delivered or already held.
    Duplicate,
    Accepted {
        /// Released to the application, in sequence order.
        released: Vec<(u64, T)>,
        /// Missing sequence numbers skipped because the buffer overflowed.
        dropped: Vec<u64>,
    },
}

/// Holds out-of-order segments and releases the contiguous prefix.
///
/// Never releases a sequence number twice. When more than `capacity`
/// segments are held the missing head-of-line segment is given up on.
#[derive(Debug, Clone)]
pub struct ReorderBuffer<T> {
    expected: u64,
    held: BTreeMap<u64, T>,
    capacity: usize,
}

impl<T> ReorderBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "reorder capacity must be positive");
        Self { expected: 0, held: BTreeMap::new(), capacity }
    }

    pub fn expected(&self) -> u64 {
        self.expected
    }

    pub fn held(&self) -> usize {
        self.held.len()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn contains(&self, seq: u64) -> bool {
        seq < self.expected || self.held.contains_key(&seq)
    }

    pub fn insert(&mut self, seq: u64, item: T) -> Insert<T> {
        if self.contains(seq) {
            return Insert::Duplicate;
        }
        self.held.insert(seq, item);
        let mut released = Vec::new();
        let mut dropped = Vec::new();
        self.drain_into(&mut released);
        while self.held.len() > self.capacity {
            let first = *self.held.keys().next().expect("non-empty");
            dropped.extend(self.expected..first);
            self.expected = first;
            self.drain_into(&mut released);
        }
        Insert::Accepted { released, dropped }
    }

    fn drain_into(&mut self, out: &mut Vec<(u64, T)>) {
        while let Some(item) = self.held.remove(&self.expected) {
            out.push((self.expected, item));
            self.expected += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn released(ins: Insert<()>) -> Vec<u64> {
        match ins {
            Insert::Accepted { released, .. } => released.into_iter().map(|r| r.0).collect(),
            Insert::Duplicate => panic!("unexpected duplicate"),
        }
    }

    #[test]
    fn out_of_order_pair_released_in_order() {
        let mut b = ReorderBuffer::new(8);
        assert_eq!(released(b.insert(1, ())), Vec::<u64>::new());
        assert_eq!(released(b.insert(0, ())), vec![0, 1]);
    }

    #[test]
    fn duplicate_copy_delivered_once() {
        let mut b = ReorderBuffer::new(8);
        for s in 0..5 {
            b.insert(s, ());
        }
        assert_eq!(released(b.insert(5, ())), vec![5]);
        assert_eq!(b.insert(5, ()), Insert::Duplicate);
        b.insert(7, ());
        assert_eq!(b.insert(7, ()), Insert::Duplicate);
    }

    #[test]
    fn unfilled_gap_overflows_and_drops_head() {
        let mut b = ReorderBuffer::new(3);
        for s in 1..=3 {
            assert_eq!(released(b.insert(s, ())), Vec::<u64>::new());
        }
        match b.insert(4, ()) {
            Insert::Accepted { released, dropped } => {
                assert_eq!(dropped, vec![0]);
                assert_eq!(released.iter().map(|r| r.0).collect::<Vec<_>>(), vec![1, 2, 3, 4]);
            }
            Insert::Duplicate => panic!(),
        }
        // the skipped segment arriving late is not delivered
        assert_eq!(b.insert(0, ()), Insert::Duplicate);
    }

    proptest! {
        /// Any arrival order with duplicates yields a strictly increasing,
        /// gap-free release stream when nothing overflows.
        #[test]
        fn releases_prefix_in_order(perm in Just((0u64..200).collect::<Vec<_>>()).prop_shuffle(),
                                    dups in proptest::collection::vec(0u64..200, 0..50)) {
            let mut b = ReorderBuffer::new(1000);
            let mut out = Vec::new();
            let arrivals = perm.iter().copied().chain(dups.iter().copied());
            for s in arrivals {
                if let Insert::Accepted { released, dropped } = b.insert(s, ()) {
                    prop_assert!(dropped.is_empty());
                    out.extend(released.into_iter().map(|r| r.0));
                }
            }
            prop_assert_eq!(out, (0..200).collect::<Vec<_>>());
        }

        /// Under overflow the stream stays strictly increasing and every
        /// sequence number is either released or reported dropped, once.
        #[test]
        fn overflow_accounts_for_every_sequence(arrivals in proptest::collection::vec(0u64..100, 0..300),
                                                cap in 1usize..16) {
            let mut b = ReorderBuffer::new(cap);
            let mut out = Vec::new();
            let mut dropped_all = Vec::new();
            for s in arrivals {
                if let Insert::Accepted { released, dropped } = b.insert(s, ()) {
                    out.extend(released.into_iter().map(|r| r.0));
                    dropped_all.extend(dropped);
                }
            }
            prop_assert!(out.windows(2).all(|w| w[0] < w[1]));
            let mut all: Vec<u64> = out.iter().chain(dropped_all.iter()).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..b.expected()).collect::<Vec<_>>());
            prop_assert!(b.held() <= cap);
        }
    }
}
