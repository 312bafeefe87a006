//! HNSW graph whose base layer keeps the exact length of every edge.
//!
//! Upper layers hold plain neighbor ids and are only used for the greedy
//! descent to a base-layer entry point. The base layer is stored in CSR form:
//! `l0_offsets[c]..l0_offsets[c + 1]` indexes both `l0_ids` and `l0_dists`.

mod build;
mod file;

pub use build::{hnsw_build, hnsw_build_parallel, BuildParams};
pub use file::{load_index, save_index, INDEX_MAGIC, INDEX_VERSION};

use crate::error::{Error, Result};
use crate::profile::AngleProfile;
use crate::vector::{Metric, VectorId, VectorStore};

#[derive(Debug, Clone, PartialEq)]
pub struct HnswIndex {
    pub(crate) store: VectorStore,
    pub(crate) metric: Metric,
    pub(crate) m: usize,
    pub(crate) efc: usize,
    pub(crate) seed: u64,
    pub(crate) entry_point: u32,
    pub(crate) levels: Vec<u8>,
    pub(crate) l0_offsets: Vec<u64>,
    pub(crate) l0_ids: Vec<u32>,
    pub(crate) l0_dists: Vec<f32>,
    /// `upper[node][layer - 1]`, present only for nodes with level > 0.
    pub(crate) upper: Vec<Vec<Vec<u32>>>,
    pub(crate) profile: Option<AngleProfile>,
}

/// Byte accounting of an index held in memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexFootprint {
    pub vector_bytes: u64,
    pub graph_bytes: u64,
    pub cached_distance_bytes: u64,
}

impl IndexFootprint {
    /// Cached-distance bytes relative to vectors plus graph.
    pub fn cache_overhead(&self) -> f64 {
        self.cached_distance_bytes as f64 / (self.vector_bytes + self.graph_bytes) as f64
    }
}

impl HnswIndex {
    pub fn store(&self) -> &VectorStore {
        &self.store
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.store.dim()
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn efc(&self) -> usize {
        self.efc
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn entry_point(&self) -> VectorId {
        VectorId(self.entry_point)
    }

    pub fn max_level(&self) -> usize {
        self.levels[self.entry_point as usize] as usize
    }

    pub fn level(&self, c: VectorId) -> usize {
        self.levels[c.index()] as usize
    }

    pub fn max_degree(&self, layer: usize) -> usize {
        if layer == 0 {
            2 * self.m
        } else {
            self.m
        }
    }

    pub fn profile(&self) -> Option<&AngleProfile> {
        self.profile.as_ref()
    }

    pub fn set_profile(&mut self, profile: AngleProfile) {
        self.profile = Some(profile);
    }

    /// Base-layer neighbor ids and their cached distances.
    #[inline]
    pub(crate) fn layer0(&self, c: u32) -> (&[u32], &[f32]) {
        let lo = self.l0_offsets[c as usize] as usize;
        let hi = self.l0_offsets[c as usize + 1] as usize;
        (&self.l0_ids[lo..hi], &self.l0_dists[lo..hi])
    }

    #[inline]
    pub(crate) fn upper_neighbors(&self, c: u32, layer: usize) -> &[u32] {
        &self.upper[c as usize][layer - 1]
    }

    /// Base-layer adjacency of `c` with the cached edge lengths.
    pub fn neighbors_with_dists(&self, c: VectorId) -> Result<Vec<(VectorId, f32)>> {
        if c.index() >= self.len() {
            return Err(Error::param(format!("node {c} out of range")));
        }
        let (ids, dists) = self.layer0(c.0);
        Ok(ids
            .iter()
            .zip(dists)
            .map(|(&n, &d)| (VectorId(n), d))
            .collect())
    }

    /// Neighbor ids of `c` on `layer` (0 = base).
    pub fn neighbors(&self, c: VectorId, layer: usize) -> Vec<VectorId> {
        if layer == 0 {
            self.layer0(c.0).0.iter().copied().map(VectorId).collect()
        } else if layer <= self.level(c) {
            self.upper_neighbors(c.0, layer)
                .iter()
                .copied()
                .map(VectorId)
                .collect()
        } else {
            Vec::new()
        }
    }

    pub fn layer0_edge_count(&self) -> usize {
        self.l0_ids.len()
    }

    pub fn footprint(&self) -> IndexFootprint {
        let n = self.len() as u64;
        let upper_ids: u64 = self
            .upper
            .iter()
            .flatten()
            .map(|l| 4 + 4 * l.len() as u64)
            .sum();
        IndexFootprint {
            vector_bytes: 4 * self.store.as_slice().len() as u64,
            // per-node degree word and level byte, plus every neighbor id
            graph_bytes: n * 5 + 4 * self.l0_ids.len() as u64 + upper_ids,
            cached_distance_bytes: 4 * self.l0_dists.len() as u64,
        }
    }
}
