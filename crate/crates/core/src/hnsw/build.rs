use std::cmp::Reverse;

use parking_lot::Mutex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::HnswIndex;
use crate::error::{Error, Result};
use crate::queue::{Candidate, EpochMarks, FarHeap, NearHeap};
use crate::vector::{Metric, VectorStore};

/// Construction parameters. `m` caps upper-layer degree; the base layer
/// allows `2 * m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildParams {
    pub m: usize,
    pub efc: usize,
    pub metric: Metric,
    pub seed: u64,
}

impl Default for BuildParams {
    fn default() -> Self {
        BuildParams {
            m: 32,
            efc: 256,
            metric: Metric::Euclidean,
            seed: 42,
        }
    }
}

impl BuildParams {
    fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::param(format!(
                "M must be at least 2, got {}",
                self.m
            )));
        }
        if self.efc < self.m {
            return Err(Error::param(format!(
                "efc ({}) must be at least M ({})",
                self.efc, self.m
            )));
        }
        Ok(())
    }
}

/// Builds the index by inserting points `0..n` in order on the calling
/// thread. The result depends only on the store and `params`.
pub fn hnsw_build(store: VectorStore, params: BuildParams) -> Result<HnswIndex> {
    let builder = Builder::new(store, params)?;
    let mut marks = EpochMarks::new(builder.len());
    for id in 1..builder.len() as u32 {
        builder.insert(id, &mut marks);
    }
    Ok(builder.finish())
}

/// Builds the index with `threads` workers inserting concurrently under
/// per-node locks. Levels are still drawn from `params.seed`, but edge sets
/// depend on scheduling. `threads == 0` uses all available cores.
pub fn hnsw_build_parallel(
    store: VectorStore,
    params: BuildParams,
    threads: usize,
) -> Result<HnswIndex> {
    if threads == 1 {
        return hnsw_build(store, params);
    }
    let builder = Builder::new(store, params)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::param(e.to_string()))?;
    let n = builder.len();
    pool.install(|| {
        (1..n as u32)
            .into_par_iter()
            .for_each_init(|| EpochMarks::new(n), |marks, id| builder.insert(id, marks));
    });
    Ok(builder.finish())
}

#[derive(Debug, Default)]
struct NodeLinks {
    base: Vec<(u32, f32)>,
    upper: Vec<Vec<u32>>,
}

#[derive(Debug, Clone, Copy)]
struct EntryPoint {
    id: u32,
    level: usize,
}

struct Builder {
    store: VectorStore,
    params: BuildParams,
    levels: Vec<u8>,
    links: Vec<Mutex<NodeLinks>>,
    entry: Mutex<EntryPoint>,
}

fn draw_levels(n: usize, m: usize, seed: u64) -> Vec<u8> {
    let mult = 1.0 / (m as f64).ln();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            // uniform on (0, 1]
            let u = 1.0 - rng.gen::<f64>();
            (-u.ln() * mult).floor().min(u8::MAX as f64) as u8
        })
        .collect()
}

impl Builder {
    fn new(store: VectorStore, params: BuildParams) -> Result<Self> {
        params.validate()?;
        if store.is_empty() {
            return Err(Error::EmptyStore);
        }
        if u32::try_from(store.len()).is_err() {
            return Err(Error::param("store exceeds u32 ids"));
        }
        let store = store.prepare_for(params.metric)?;
        let levels = draw_levels(store.len(), params.m, params.seed);
        let links = levels
            .iter()
            .map(|&l| {
                Mutex::new(NodeLinks {
                    base: Vec::new(),
                    upper: vec![Vec::new(); l as usize],
                })
            })
            .collect();
        let entry = EntryPoint {
            id: 0,
            level: levels[0] as usize,
        };
        Ok(Builder {
            store,
            params,
            levels,
            links,
            entry: Mutex::new(entry),
        })
    }

    fn len(&self) -> usize {
        self.levels.len()
    }

    #[inline]
    fn dist(&self, a: u32, b: u32) -> f32 {
        self.store.pair_distance(self.params.metric, a, b)
    }

    fn cap(&self, layer: usize) -> usize {
        if layer == 0 {
            2 * self.params.m
        } else {
            self.params.m
        }
    }

    fn copy_neighbors(&self, c: u32, layer: usize, out: &mut Vec<u32>) {
        out.clear();
        let links = self.links[c as usize].lock();
        if layer == 0 {
            out.extend(links.base.iter().map(|&(id, _)| id));
        } else {
            out.extend_from_slice(&links.upper[layer - 1]);
        }
    }

    fn insert(&self, q: u32, marks: &mut EpochMarks) {
        let level = self.levels[q as usize] as usize;
        let guard = self.entry.lock();
        let entry = *guard;
        // a new top-level node holds the entry lock for its whole insertion
        let _hold = (level > entry.level).then_some(guard);

        let mut cur = Candidate::new(self.dist(q, entry.id), entry.id);
        let mut scratch = Vec::new();
        for layer in (level + 1..=entry.level).rev() {
            let mut changed = true;
            while changed {
                changed = false;
                self.copy_neighbors(cur.id, layer, &mut scratch);
                for &n in &scratch {
                    let d = self.dist(q, n);
                    if d < cur.dist {
                        cur = Candidate::new(d, n);
                        changed = true;
                    }
                }
            }
        }

        for layer in (0..=level.min(entry.level)).rev() {
            let found = self.search_layer(q, cur, layer, marks, &mut scratch);
            let selected = self.select_neighbors(&found, self.params.m);
            cur = selected[0];
            self.connect(q, layer, &selected);
        }

        if let Some(mut guard) = _hold {
            *guard = EntryPoint { id: q, level };
        }
    }

    /// Beam search of width `efc` on one layer. Returns candidates sorted
    /// nearest first.
    fn search_layer(
        &self,
        q: u32,
        ep: Candidate,
        layer: usize,
        marks: &mut EpochMarks,
        scratch: &mut Vec<u32>,
    ) -> Vec<Candidate> {
        let ef = self.params.efc;
        marks.reset();
        marks.insert(ep.id);
        let mut top = FarHeap::with_capacity(ef + 1);
        let mut cands = NearHeap::new();
        top.push(ep);
        cands.push(Reverse(ep));
        let mut bound = ep.dist;
        while let Some(Reverse(c)) = cands.pop() {
            if c.dist > bound && top.len() >= ef {
                break;
            }
            self.copy_neighbors(c.id, layer, scratch);
            for &n in scratch.iter() {
                if marks.contains(n) {
                    continue;
                }
                marks.insert(n);
                let d = self.dist(q, n);
                if top.len() < ef || d < bound {
                    let cand = Candidate::new(d, n);
                    cands.push(Reverse(cand));
                    top.push(cand);
                    if top.len() > ef {
                        top.pop();
                    }
                    bound = top.peek().map_or(d, |t| t.dist);
                }
            }
        }
        top.into_sorted_vec()
    }

    /// Keeps a candidate only if it is closer to the base point than to any
    /// neighbor already kept. `sorted` must be nearest first.
    fn select_neighbors(&self, sorted: &[Candidate], m: usize) -> Vec<Candidate> {
        if sorted.len() < m {
            return sorted.to_vec();
        }
        let mut kept: Vec<Candidate> = Vec::with_capacity(m);
        for &cand in sorted {
            if kept.len() >= m {
                break;
            }
            if kept.iter().all(|r| self.dist(cand.id, r.id) >= cand.dist) {
                kept.push(cand);
            }
        }
        kept
    }

    fn connect(&self, q: u32, layer: usize, selected: &[Candidate]) {
        {
            let mut links = self.links[q as usize].lock();
            if layer == 0 {
                links.base = selected.iter().map(|c| (c.id, c.dist)).collect();
            } else {
                links.upper[layer - 1] = selected.iter().map(|c| c.id).collect();
            }
        }
        let cap = self.cap(layer);
        for &nb in selected {
            let e = nb.id;
            let mut links = self.links[e as usize].lock();
            if layer == 0 {
                if links.base.iter().any(|&(id, _)| id == q) {
                    continue;
                }
                if links.base.len() < cap {
                    links.base.push((q, nb.dist));
                    continue;
                }
                // edge lengths are exact and symmetric, so they carry over
                let mut cands: Vec<Candidate> = links
                    .base
                    .iter()
                    .map(|&(id, d)| Candidate::new(d, id))
                    .chain(std::iter::once(Candidate::new(nb.dist, q)))
                    .collect();
                cands.sort_unstable();
                links.base = self
                    .select_neighbors(&cands, cap)
                    .into_iter()
                    .map(|c| (c.id, c.dist))
                    .collect();
            } else {
                let list = &mut links.upper[layer - 1];
                if list.contains(&q) {
                    continue;
                }
                if list.len() < cap {
                    list.push(q);
                    continue;
                }
                let mut cands: Vec<Candidate> = list
                    .iter()
                    .map(|&id| Candidate::new(self.dist(e, id), id))
                    .chain(std::iter::once(Candidate::new(nb.dist, q)))
                    .collect();
                cands.sort_unstable();
                *list = self
                    .select_neighbors(&cands, cap)
                    .into_iter()
                    .map(|c| c.id)
                    .collect();
            }
        }
    }

    fn finish(self) -> HnswIndex {
        let entry = self.entry.into_inner();
        let links: Vec<NodeLinks> = self.links.into_iter().map(Mutex::into_inner).collect();
        let mut l0_offsets = Vec::with_capacity(links.len() + 1);
        l0_offsets.push(0u64);
        let total: usize = links.iter().map(|l| l.base.len()).sum();
        let mut l0_ids = Vec::with_capacity(total);
        let mut l0_dists = Vec::with_capacity(total);
        let mut upper = Vec::with_capacity(links.len());
        for node in links {
            for (id, d) in node.base {
                l0_ids.push(id);
                l0_dists.push(d);
            }
            l0_offsets.push(l0_ids.len() as u64);
            upper.push(node.upper);
        }
        HnswIndex {
            store: self.store,
            metric: self.params.metric,
            m: self.params.m,
            efc: self.params.efc,
            seed: self.params.seed,
            entry_point: entry.id,
            levels: self.levels,
            l0_offsets,
            l0_ids,
            l0_dists,
            upper,
            profile: None,
        }
    }
}
