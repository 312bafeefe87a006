use std::f64::consts::PI;
use std::sync::OnceLock;

use crouting::dataset::{brute_force_ground_truth, synth_gaussian};
use crouting::hnsw::{hnsw_build, BuildParams};
use crouting::profile::{default_sample_size, sample_angles};
use crouting::search::{
    appx_dist, crouting_search, greedy_search, knn_query, SearchObserver, Searcher,
};
use crouting::{HnswIndex, RoutingMode, SearchParams, VectorId, VectorStore};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fixture() -> &'static (HnswIndex, VectorStore) {
    static CELL: OnceLock<(HnswIndex, VectorStore)> = OnceLock::new();
    CELL.get_or_init(|| {
        let base = synth_gaussian(3000, 32, 21).unwrap();
        let params = BuildParams {
            m: 12,
            efc: 100,
            ..BuildParams::default()
        };
        let index = hnsw_build(base, params).unwrap();
        let queries = synth_gaussian(100, 32, 22).unwrap();
        (index, queries)
    })
}

fn theta90(index: &HnswIndex) -> f64 {
    sample_angles(index, default_sample_size(index.len()).max(20), 5)
        .unwrap()
        .percentile(90.0)
        .unwrap()
}

#[test]
fn zero_angle_matches_greedy_search() {
    let (index, queries) = fixture();
    for efs in [10, 40] {
        let base = SearchParams::baseline(10, efs);
        let zero = base.with_mode(RoutingMode::CRouting, 0.0);
        for q in queries.iter() {
            let a = greedy_search(index, q, &base).unwrap();
            let b = crouting_search(index, q, &zero).unwrap();
            assert_eq!(a.neighbors, b.neighbors);
            assert!(b.stats.hops <= a.stats.hops);
            assert_eq!(b.stats.revisits, 0);
        }
    }
}

#[test]
fn repeated_query_is_identical() {
    let (index, queries) = fixture();
    let theta = theta90(index);
    let q = queries.vector(VectorId(3));
    let mut searcher = Searcher::new(index);
    let params = SearchParams::baseline(10, 30).with_mode(RoutingMode::CRouting, theta);
    let a = searcher.search(q, &params).unwrap();
    let b = searcher.search(q, &params).unwrap();
    assert_eq!(a.neighbors, b.neighbors);
    assert_eq!(
        (a.stats.hops, a.stats.pruned, a.stats.revisits),
        (b.stats.hops, b.stats.pruned, b.stats.revisits)
    );
    let fresh = knn_query(index, q, 10, 30, "crouting", theta).unwrap();
    assert_eq!(fresh.neighbors, a.neighbors);
}

#[test]
fn stats_invariants_hold() {
    let (index, queries) = fixture();
    let theta = theta90(index);
    for mode in RoutingMode::ALL {
        let params = SearchParams::baseline(10, 20).with_mode(mode, theta);
        for q in queries.iter() {
            let s = Searcher::new(index).search(q, &params).unwrap().stats;
            assert!(s.pruned <= s.prune_checks);
            assert!(s.revisits <= s.pruned);
            assert!(s.hops >= 10);
            if mode == RoutingMode::Baseline {
                assert_eq!(s.prune_checks, 0);
            }
            if mode != RoutingMode::CRouting {
                assert_eq!(s.revisits, 0);
            }
        }
    }
}

#[derive(Default)]
struct BoundTrace {
    full_bounds: Vec<f32>,
}

impl SearchObserver for BoundTrace {
    fn upper_bound(&mut self, bound: f32, full: bool) {
        if full {
            self.full_bounds.push(bound);
        }
    }
}

#[test]
fn upper_bound_never_grows_once_full() {
    let (index, queries) = fixture();
    let theta = theta90(index);
    let mut searcher = Searcher::new(index);
    for mode in [RoutingMode::Baseline, RoutingMode::CRouting] {
        let params = SearchParams::baseline(10, 25).with_mode(mode, theta);
        for q in queries.iter() {
            let mut trace = BoundTrace::default();
            searcher.search_observed(q, &params, &mut trace).unwrap();
            assert!(!trace.full_bounds.is_empty());
            assert!(trace.full_bounds.windows(2).all(|w| w[1] <= w[0]));
        }
    }
}

#[derive(Default)]
struct ExactCounter {
    base_layer: u64,
}

impl SearchObserver for ExactCounter {
    fn exact(&mut self, _c: u32, _a: f32, _n: u32, _b: f32, _d: f32) {
        self.base_layer += 1;
    }
}

#[test]
fn hop_count_covers_only_exact_calls() {
    // one call for the entry point, plus the descent calls, plus one per
    // base-layer exact evaluation reported to the observer
    let (index, queries) = fixture();
    let theta = theta90(index);
    let params = SearchParams::baseline(10, 40).with_mode(RoutingMode::CRouting, theta);
    let mut searcher = Searcher::new(index);
    let q = queries.vector(VectorId(0));
    let mut seen = ExactCounter::default();
    let res = searcher.search_observed(q, &params, &mut seen).unwrap();
    let mut base_seen = ExactCounter::default();
    let baseline = searcher
        .search_observed(q, &SearchParams::baseline(10, 40), &mut base_seen)
        .unwrap();
    // upper-layer descent is identical in both modes
    assert_eq!(
        res.stats.hops - seen.base_layer,
        baseline.stats.hops - base_seen.base_layer
    );
    assert!(seen.base_layer < base_seen.base_layer);
    assert!(res.stats.prune_checks > 0);
}

#[test]
fn correction_path_runs_on_gaussian_workload() {
    let (index, _) = fixture();
    let theta = theta90(index);
    let queries = synth_gaussian(1000, 32, 99).unwrap();
    let params = SearchParams::baseline(10, 40).with_mode(RoutingMode::CRouting, theta);
    let mut searcher = Searcher::new(index);
    let revisits: u64 = queries
        .iter()
        .map(|q| searcher.search(q, &params).unwrap().stats.revisits)
        .sum();
    assert!(revisits > 0);
}

#[test]
fn ablation_ordering_on_small_workload() {
    let (index, _) = fixture();
    let theta = theta90(index);
    let queries = synth_gaussian(1000, 32, 77).unwrap();
    let gt = brute_force_ground_truth(index.store(), &queries, 10, index.metric()).unwrap();
    let efs = 40;
    let mut recall = Vec::new();
    let mut hops = Vec::new();
    for mode in [
        RoutingMode::CRoutingO,
        RoutingMode::CRouting,
        RoutingMode::Baseline,
    ] {
        let params = SearchParams::baseline(10, efs).with_mode(mode, theta);
        let pass = crouting::bench::run_pass(index, &queries, &gt, &params).unwrap();
        recall.push(pass.recall);
        hops.push(pass.hops_total);
    }
    assert!(
        recall[0] <= recall[1] && recall[1] <= recall[2],
        "{recall:?}"
    );
    assert!(hops[0] <= hops[1] && hops[1] <= hops[2], "{hops:?}");
}

#[test]
fn triangle_mode_is_exact_and_nearly_useless() {
    let (index, queries) = fixture();
    let base = SearchParams::baseline(10, 40);
    let tri = base.with_mode(RoutingMode::Triangle, 0.0);
    let (mut base_hops, mut tri_hops) = (0, 0);
    for q in queries.iter() {
        let a = greedy_search(index, q, &base).unwrap();
        let b = crouting_search(index, q, &tri).unwrap();
        assert_eq!(a.neighbors, b.neighbors);
        base_hops += a.stats.hops;
        tri_hops += b.stats.hops;
    }
    assert!(tri_hops as f64 >= 0.99 * base_hops as f64);
}

fn random_point(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn len(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

proptest! {
    #[test]
    fn estimator_is_exact_with_true_angle(seed in any::<u64>(), d in 2usize..64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = random_point(&mut rng, d);
        let q = random_point(&mut rng, d);
        let n = random_point(&mut rng, d);
        let (cq, cn) = (sub(&q, &c), sub(&n, &c));
        let (a, b) = (len(&cq), len(&cn));
        let cos = cq.iter().zip(&cn).map(|(x, y)| x * y).sum::<f64>() / (a * b);
        let est = appx_dist(a, b, cos.clamp(-1.0, 1.0));
        let truth = len(&sub(&n, &q));
        prop_assert!((est - truth).abs() <= 1e-3 * truth.max(1e-6));
    }

    #[test]
    fn estimator_is_monotone_in_angle(a in 0.01f64..10.0, b in 0.01f64..10.0, t1 in 0.0..PI, t2 in 0.0..PI) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        prop_assert!(appx_dist(a, b, lo.cos()) <= appx_dist(a, b, hi.cos()) + 1e-12);
    }
}
