//! Heap entries ordered by `(distance, id)` and an epoch-stamped visit set.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Candidate {
    pub dist: f32,
    pub id: u32,
}

impl Candidate {
    #[inline]
    pub fn new(dist: f32, id: u32) -> Self {
        Candidate { dist, id }
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    #[inline]
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.id.cmp(&other.id))
    }
}

/// Max-heap: `peek` is the farthest element.
pub(crate) type FarHeap = BinaryHeap<Candidate>;
/// Min-heap: `peek` is the nearest element.
pub(crate) type NearHeap = BinaryHeap<Reverse<Candidate>>;

/// Per-node marks that reset in O(1) by bumping the epoch.
#[derive(Debug, Clone)]
pub(crate) struct EpochMarks {
    stamps: Vec<u32>,
    epoch: u32,
}

impl EpochMarks {
    pub fn new(n: usize) -> Self {
        EpochMarks {
            stamps: vec![0; n],
            epoch: 0,
        }
    }

    pub fn reset(&mut self) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamps.fill(0);
            self.epoch = 1;
        }
    }

    #[inline]
    pub fn contains(&self, id: u32) -> bool {
        self.stamps[id as usize] == self.epoch
    }

    #[inline]
    pub fn insert(&mut self, id: u32) {
        self.stamps[id as usize] = self.epoch;
    }

    #[cfg(test)]
    pub fn set_epoch(&mut self, epoch: u32) {
        self.epoch = epoch;
    }
}
