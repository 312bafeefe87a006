//! Query routing over an [`HnswIndex`].
//!
//! All modes share the same upper-layer greedy descent and the same
//! base-layer beam search with a min-queue of candidates and a top-results
//! queue capped at `efs`. They differ only in what happens before the exact
//! distance to a not-yet-visited neighbor `n` of the expanded node `c`:
//!
//! * [`RoutingMode::Baseline`] always computes it.
//! * [`RoutingMode::CRouting`] estimates `dist(n, q)` with the law of cosines
//!   from `dist(c, q)`, the cached edge length `dist(c, n)` and a fixed angle
//!   θ. If the estimate reaches the upper bound, `n` is marked pruned and
//!   skipped. A pruned node reached again from another node is not
//!   re-estimated; it gets an exact distance instead.
//! * [`RoutingMode::CRoutingO`] prunes the same way but a pruned node is
//!   never reconsidered.
//! * [`RoutingMode::Triangle`] prunes on the lower bound `|dist(c,n) − dist(c,q)|`.
//!
//! Estimation only starts once the top-results queue holds `efs` entries.

use std::cmp::Reverse;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::hnsw::HnswIndex;
use crate::queue::{Candidate, EpochMarks, FarHeap, NearHeap};
use crate::vector::{DistanceCounter, Query, VectorId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RoutingMode {
    Baseline,
    CRouting,
    /// Pruning without error correction.
    CRoutingO,
    Triangle,
}

impl RoutingMode {
    pub const ALL: [RoutingMode; 4] = [
        RoutingMode::Baseline,
        RoutingMode::CRouting,
        RoutingMode::CRoutingO,
        RoutingMode::Triangle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RoutingMode::Baseline => "baseline",
            RoutingMode::CRouting => "crouting",
            RoutingMode::CRoutingO => "crouting_o",
            RoutingMode::Triangle => "triangle",
        }
    }

    /// Whether the mode needs a pruning angle.
    pub fn uses_angle(self) -> bool {
        matches!(self, RoutingMode::CRouting | RoutingMode::CRoutingO)
    }

    pub fn prunes(self) -> bool {
        self != RoutingMode::Baseline
    }
}

impl fmt::Display for RoutingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RoutingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RoutingMode::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownMode(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchParams {
    pub efs: usize,
    pub k: usize,
    pub mode: RoutingMode,
    /// Pruning angle in radians; ignored by modes that do not estimate.
    pub theta: f64,
}

impl SearchParams {
    pub fn baseline(k: usize, efs: usize) -> Self {
        SearchParams {
            efs,
            k,
            mode: RoutingMode::Baseline,
            theta: 0.0,
        }
    }

    pub fn with_mode(self, mode: RoutingMode, theta: f64) -> Self {
        SearchParams {
            mode,
            theta,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > self.efs {
            return Err(Error::param(format!(
                "need 1 <= k <= efs, got k = {}, efs = {}",
                self.k, self.efs
            )));
        }
        if !(0.0..=std::f64::consts::PI).contains(&self.theta) {
            return Err(Error::param(format!(
                "theta {} outside [0, pi]",
                self.theta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchStats {
    /// Exact distance evaluations on all layers.
    pub hops: u64,
    pub prune_checks: u64,
    pub pruned: u64,
    /// Pruned nodes that later received an exact distance.
    pub revisits: u64,
    pub elapsed: Duration,
}

impl SearchStats {
    pub fn accumulate(&mut self, other: &SearchStats) {
        self.hops += other.hops;
        self.prune_checks += other.prune_checks;
        self.pruned += other.pruned;
        self.revisits += other.revisits;
        self.elapsed += other.elapsed;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: VectorId,
    pub distance: f32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    /// Nearest first, ties by id.
    pub neighbors: Vec<Neighbor>,
    pub stats: SearchStats,
}

impl QueryResult {
    pub fn ids(&self) -> Vec<VectorId> {
        self.neighbors.iter().map(|n| n.id).collect()
    }
}

/// Hooks into the base-layer loop. All methods default to no-ops, and the
/// unit type implements the trait for uninstrumented searches.
pub trait SearchObserver {
    /// Called whenever the upper bound is recomputed; `full` is true once the
    /// top-results queue holds `efs` entries.
    fn upper_bound(&mut self, _bound: f32, _full: bool) {}

    /// An exact base-layer distance `dist(n, q)` computed while expanding `c`.
    fn exact(&mut self, _c: u32, _dist_cq: f32, _n: u32, _dist_cn: f32, _dist_nq: f32) {}

    /// An estimator evaluation for neighbor `n` of `c`. `estimate` is the
    /// estimated `dist(n, q)`.
    fn estimate(&mut self, _c: u32, _n: u32, _estimate: f32, _bound: f32, _pruned: bool) {}
}

impl SearchObserver for () {}

/// Law-of-cosines length of the third side opposite the angle between
/// sides `a` and `b`.
#[inline]
pub fn appx_dist(a: f64, b: f64, cos_theta: f64) -> f64 {
    appx_dist_sq(a, b, cos_theta).sqrt()
}

#[inline]
fn appx_dist_sq(a: f64, b: f64, cos_theta: f64) -> f64 {
    (a * a + b * b - 2.0 * a * b * cos_theta).max(0.0)
}

/// Reusable per-thread search state over one index.
pub struct Searcher<'a> {
    index: &'a HnswIndex,
    visited: EpochMarks,
    pruned: EpochMarks,
    candidates: NearHeap,
    top: FarHeap,
}

impl<'a> Searcher<'a> {
    pub fn new(index: &'a HnswIndex) -> Self {
        let n = index.len();
        Searcher {
            index,
            visited: EpochMarks::new(n),
            pruned: EpochMarks::new(n),
            candidates: NearHeap::new(),
            top: FarHeap::new(),
        }
    }

    pub fn search(&mut self, q: &[f32], params: &SearchParams) -> Result<QueryResult> {
        self.search_observed(q, params, &mut ())
    }

    pub fn search_observed<O: SearchObserver>(
        &mut self,
        q: &[f32],
        params: &SearchParams,
        observer: &mut O,
    ) -> Result<QueryResult> {
        params.validate()?;
        if self.index.is_empty() {
            return Err(Error::EmptyStore);
        }
        self.index.store().check_query(q)?;
        let start = Instant::now();
        let query = Query::new(self.index.metric(), q);
        let mut counter = DistanceCounter::new();
        let entry = self.descend(&query, &mut counter);
        let mut stats = self.base_layer(&query, entry, params, &mut counter, observer);
        stats.hops = counter.exact_calls();

        let mut found: Vec<Candidate> = self.top.drain().collect();
        found.sort_unstable();
        let neighbors = found
            .iter()
            .take(params.k)
            .map(|c| Neighbor {
                id: VectorId(c.id),
                distance: c.dist,
            })
            .collect();
        stats.elapsed = start.elapsed();
        Ok(QueryResult { neighbors, stats })
    }

    #[inline]
    fn exact(&self, id: u32, q: &Query<'_>, counter: &mut DistanceCounter) -> f32 {
        counter.bump();
        self.index.store().distance_to(self.index.metric(), id, q)
    }

    /// Greedy ef = 1 descent through the upper layers.
    fn descend(&self, q: &Query<'_>, counter: &mut DistanceCounter) -> Candidate {
        let ep = self.index.entry_point;
        let mut cur = Candidate::new(self.exact(ep, q, counter), ep);
        for layer in (1..=self.index.max_level()).rev() {
            let mut changed = true;
            while changed {
                changed = false;
                for &n in self.index.upper_neighbors(cur.id, layer) {
                    let d = self.exact(n, q, counter);
                    if d < cur.dist {
                        cur = Candidate::new(d, n);
                        changed = true;
                    }
                }
            }
        }
        cur
    }

    fn base_layer<O: SearchObserver>(
        &mut self,
        q: &Query<'_>,
        entry: Candidate,
        params: &SearchParams,
        counter: &mut DistanceCounter,
        observer: &mut O,
    ) -> SearchStats {
        let efs = params.efs;
        let mode = params.mode;
        let cos_theta = params.theta.cos();
        let mut stats = SearchStats::default();

        self.visited.reset();
        self.pruned.reset();
        self.candidates.clear();
        self.top.clear();

        self.visited.insert(entry.id);
        self.candidates.push(Reverse(entry));
        self.top.push(entry);

        while let Some(Reverse(c)) = self.candidates.pop() {
            let mut bound = self.top.peek().map_or(f32::INFINITY, |t| t.dist);
            if c.dist > bound {
                break;
            }
            let (ids, edge_lens) = self.index.layer0(c.id);
            for (&n, &dist_cn) in ids.iter().zip(edge_lens) {
                if self.visited.contains(n) {
                    continue;
                }
                let was_pruned = self.pruned.contains(n);
                if mode.prunes() && !was_pruned && self.top.len() >= efs {
                    let skip = match mode {
                        RoutingMode::Triangle => {
                            stats.prune_checks += 1;
                            let lower = (dist_cn - c.dist).abs();
                            observer.estimate(c.id, n, lower, bound, lower >= bound);
                            lower >= bound
                        }
                        _ if c.dist > 0.0 && dist_cn > 0.0 => {
                            stats.prune_checks += 1;
                            let est_sq = appx_dist_sq(c.dist as f64, dist_cn as f64, cos_theta);
                            let ub = bound as f64;
                            let skip = est_sq >= ub * ub;
                            observer.estimate(c.id, n, est_sq.sqrt() as f32, bound, skip);
                            skip
                        }
                        // degenerate triangle: fall through to the exact distance
                        _ => false,
                    };
                    if skip {
                        stats.pruned += 1;
                        if mode == RoutingMode::CRouting {
                            self.pruned.insert(n);
                        } else {
                            self.visited.insert(n);
                        }
                        continue;
                    }
                }
                if was_pruned {
                    stats.revisits += 1;
                }
                self.visited.insert(n);
                let d = self.exact(n, q, counter);
                observer.exact(c.id, c.dist, n, dist_cn, d);
                if d < bound || self.top.len() < efs {
                    let cand = Candidate::new(d, n);
                    self.candidates.push(Reverse(cand));
                    self.top.push(cand);
                    if self.top.len() > efs {
                        self.top.pop();
                    }
                    bound = self.top.peek().map_or(d, |t| t.dist);
                    observer.upper_bound(bound, self.top.len() >= efs);
                }
            }
        }
        stats
    }
}

fn run(index: &HnswIndex, q: &[f32], params: &SearchParams) -> Result<QueryResult> {
    Searcher::new(index).search(q, params)
}

/// Plain greedy beam search. `params.mode` must be [`RoutingMode::Baseline`].
pub fn greedy_search(index: &HnswIndex, q: &[f32], params: &SearchParams) -> Result<QueryResult> {
    if params.mode != RoutingMode::Baseline {
        return Err(Error::param(format!(
            "greedy_search requires baseline mode, got {}",
            params.mode
        )));
    }
    run(index, q, params)
}

/// Pruned search; `params.mode` must be one of the pruning modes.
pub fn crouting_search(index: &HnswIndex, q: &[f32], params: &SearchParams) -> Result<QueryResult> {
    if !params.mode.prunes() {
        return Err(Error::param("crouting_search requires a pruning mode"));
    }
    run(index, q, params)
}

/// Top-`k` query with the routing strategy named by `mode`.
pub fn knn_query(
    index: &HnswIndex,
    q: &[f32],
    k: usize,
    efs: usize,
    mode: &str,
    theta: f64,
) -> Result<QueryResult> {
    let mode: RoutingMode = mode.parse()?;
    let params = SearchParams {
        efs,
        k,
        mode,
        theta,
    };
    match mode {
        RoutingMode::Baseline => greedy_search(index, q, &params),
        _ => crouting_search(index, q, &params),
    }
}
