//! Recall/QPS/hop sweeps over `efs` and routing modes.

use std::collections::{HashMap, HashSet};
use std::io::Write;
use std::time::{Duration, Instant};

use crate::dataset::GroundTruth;
use crate::error::{Error, Result};
use crate::hnsw::HnswIndex;
use crate::search::{RoutingMode, SearchObserver, SearchParams, Searcher};
use crate::vector::{Query, VectorId, VectorStore};

pub const DEFAULT_K: usize = 10;

pub const CSV_HEADER: &str =
    "mode,efs,k,recall,qps,hops_total,speedup,avg_rel_err,incorrect_prune_ratio";

/// `|top-k(result) ∩ top-k(truth)| / k`.
pub fn recall_at_k(result: &[VectorId], truth: &[VectorId], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::param("k must be positive"));
    }
    if result.len() < k || truth.len() < k {
        return Err(Error::param(format!(
            "need at least {k} ids, got {} results and {} truth",
            result.len(),
            truth.len()
        )));
    }
    let truth: HashSet<VectorId> = truth[..k].iter().copied().collect();
    let hits = result[..k].iter().filter(|id| truth.contains(id)).count();
    Ok(hits as f64 / k as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub efs_list: Vec<usize>,
    pub modes: Vec<RoutingMode>,
    pub k: usize,
    /// Pruning angle; required when any mode uses one.
    pub theta: Option<f64>,
    pub repetitions: usize,
    /// Minimum estimator events gathered for the error statistics.
    pub error_sample_events: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            efs_list: vec![10, 20, 40, 80, 160],
            modes: vec![RoutingMode::Baseline, RoutingMode::CRouting],
            k: DEFAULT_K,
            theta: None,
            repetitions: 3,
            error_sample_events: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub mode: RoutingMode,
    pub efs: usize,
    pub k: usize,
    pub recall: f64,
    pub qps: f64,
    pub hops_total: u64,
    /// Baseline hops at the same `efs` divided by this row's hops.
    pub speedup: f64,
    pub avg_rel_err: Option<f64>,
    pub incorrect_prune_ratio: Option<f64>,
    pub pruned_total: u64,
    pub revisits_total: u64,
}

impl SweepRow {
    /// CSV line matching [`CSV_HEADER`]. Missing statistics are empty.
    pub fn csv_line(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        format!(
            "{},{},{},{:.6},{:.3},{},{:.6},{},{}",
            self.mode,
            self.efs,
            self.k,
            self.recall,
            self.qps,
            self.hops_total,
            self.speedup,
            opt(self.avg_rel_err),
            opt(self.incorrect_prune_ratio),
        )
    }
}

pub fn write_csv<W: Write>(rows: &[SweepRow], mut w: W) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for row in rows {
        writeln!(w, "{}", row.csv_line())?;
    }
    Ok(())
}

/// Totals of one pass over all queries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassSummary {
    pub recall: f64,
    pub hops_total: u64,
    pub pruned_total: u64,
    pub revisits_total: u64,
    pub elapsed: Duration,
}

/// Runs every query once on the calling thread.
pub fn run_pass(
    index: &HnswIndex,
    queries: &VectorStore,
    gt: &GroundTruth,
    params: &SearchParams,
) -> Result<PassSummary> {
    check_inputs(index, queries, gt, params.k)?;
    let mut searcher = Searcher::new(index);
    let mut recall_sum = 0.0;
    let (mut hops, mut pruned, mut revisits) = (0u64, 0u64, 0u64);
    let start = Instant::now();
    for (qi, q) in queries.iter().enumerate() {
        let res = searcher.search(q, params)?;
        recall_sum += recall_at_k(&res.ids(), gt.row(qi), params.k)?;
        hops += res.stats.hops;
        pruned += res.stats.pruned;
        revisits += res.stats.revisits;
    }
    let elapsed = start.elapsed();
    Ok(PassSummary {
        recall: recall_sum / queries.len() as f64,
        hops_total: hops,
        pruned_total: pruned,
        revisits_total: revisits,
        elapsed,
    })
}

fn check_inputs(
    index: &HnswIndex,
    queries: &VectorStore,
    gt: &GroundTruth,
    k: usize,
) -> Result<()> {
    if queries.is_empty() {
        return Err(Error::param("no queries"));
    }
    if gt.len() != queries.len() {
        return Err(Error::param(format!(
            "ground truth has {} rows for {} queries",
            gt.len(),
            queries.len()
        )));
    }
    if gt.k() < k {
        return Err(Error::param(format!("ground truth k = {} < {k}", gt.k())));
    }
    if queries.dim() != index.dim() {
        return Err(Error::DimensionMismatch {
            expected: index.dim(),
            actual: queries.dim(),
        });
    }
    Ok(())
}

/// Estimation error statistics gathered outside the counted path.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ErrorStats {
    pub events: u64,
    pub rel_err_sum: f64,
    pub pruned: u64,
    pub incorrect_prunes: u64,
}

impl ErrorStats {
    pub fn mean_relative_error(&self) -> Option<f64> {
        (self.events > 0).then(|| self.rel_err_sum / self.events as f64)
    }

    /// Share of prunes whose true distance was below the bound.
    pub fn incorrect_prune_ratio(&self) -> Option<f64> {
        (self.pruned > 0).then(|| self.incorrect_prunes as f64 / self.pruned as f64)
    }
}

struct ErrorRecorder<'a> {
    index: &'a HnswIndex,
    query: Query<'a>,
    stats: &'a mut ErrorStats,
}

impl SearchObserver for ErrorRecorder<'_> {
    fn estimate(&mut self, _c: u32, n: u32, estimate: f32, bound: f32, pruned: bool) {
        let truth = self
            .index
            .store()
            .distance_to(self.index.metric(), n, &self.query) as f64;
        if truth > 0.0 {
            self.stats.events += 1;
            self.stats.rel_err_sum += (truth - estimate as f64).abs() / truth;
        }
        if pruned {
            self.stats.pruned += 1;
            if truth < bound as f64 {
                self.stats.incorrect_prunes += 1;
            }
        }
    }
}

/// Runs queries in order with error instrumentation until at least
/// `min_events` estimator events are seen or the queries run out.
pub fn measure_estimation_error(
    index: &HnswIndex,
    queries: &VectorStore,
    params: &SearchParams,
    min_events: u64,
) -> Result<ErrorStats> {
    let mut stats = ErrorStats::default();
    let mut searcher = Searcher::new(index);
    for q in queries.iter() {
        let mut recorder = ErrorRecorder {
            index,
            query: Query::new(index.metric(), q),
            stats: &mut stats,
        };
        searcher.search_observed(q, params, &mut recorder)?;
        if stats.events >= min_events {
            break;
        }
    }
    Ok(stats)
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// One row per `(mode, efs)`, modes in the order given. Hop counts and
/// recall are deterministic; QPS is the median over `repetitions` passes.
pub fn run_sweep(
    index: &HnswIndex,
    queries: &VectorStore,
    gt: &GroundTruth,
    cfg: &SweepConfig,
) -> Result<Vec<SweepRow>> {
    check_inputs(index, queries, gt, cfg.k)?;
    if cfg.repetitions == 0 {
        return Err(Error::param("repetitions must be positive"));
    }
    let theta = if cfg.modes.iter().any(|m| m.uses_angle()) {
        cfg.theta
            .ok_or_else(|| Error::param("a pruning angle is required for crouting modes"))?
    } else {
        cfg.theta.unwrap_or(0.0)
    };

    let mut baseline_hops: HashMap<usize, u64> = HashMap::new();
    let mut rows = Vec::with_capacity(cfg.modes.len() * cfg.efs_list.len());
    for &mode in &cfg.modes {
        for &efs in &cfg.efs_list {
            let params = SearchParams {
                efs,
                k: cfg.k,
                mode,
                theta,
            };
            let mut timings = Vec::with_capacity(cfg.repetitions);
            let mut summary = None;
            for _ in 0..cfg.repetitions {
                let pass = run_pass(index, queries, gt, &params)?;
                timings.push(queries.len() as f64 / pass.elapsed.as_secs_f64().max(1e-12));
                summary = Some(pass);
            }
            let summary = summary.expect("at least one repetition");

            let base = match baseline_hops.get(&efs) {
                Some(&h) => h,
                None => {
                    let h = if mode == RoutingMode::Baseline {
                        summary.hops_total
                    } else {
                        run_pass(index, queries, gt, &SearchParams::baseline(cfg.k, efs))?
                            .hops_total
                    };
                    baseline_hops.insert(efs, h);
                    h
                }
            };

            let (avg_rel_err, incorrect_prune_ratio) = if mode.prunes() {
                let err =
                    measure_estimation_error(index, queries, &params, cfg.error_sample_events)?;
                (err.mean_relative_error(), err.incorrect_prune_ratio())
            } else {
                (None, None)
            };

            rows.push(SweepRow {
                mode,
                efs,
                k: cfg.k,
                recall: summary.recall,
                qps: median(timings),
                hops_total: summary.hops_total,
                speedup: base as f64 / summary.hops_total.max(1) as f64,
                avg_rel_err,
                incorrect_prune_ratio,
                pruned_total: summary.pruned_total,
                revisits_total: summary.revisits_total,
            });
        }
    }
    Ok(rows)
}
