use std::sync::OnceLock;

use crouting::bench::{
    measure_estimation_error, run_pass, run_sweep, write_csv, SweepConfig, CSV_HEADER,
};
use crouting::dataset::{brute_force_ground_truth, synth_gaussian, GroundTruth};
use crouting::hnsw::{hnsw_build, BuildParams};
use crouting::{Error, HnswIndex, Metric, RoutingMode, SearchParams, VectorStore};

fn fixture() -> &'static (HnswIndex, VectorStore, GroundTruth) {
    static CELL: OnceLock<(HnswIndex, VectorStore, GroundTruth)> = OnceLock::new();
    CELL.get_or_init(|| {
        let base = synth_gaussian(2000, 24, 41).unwrap();
        let queries = synth_gaussian(60, 24, 42).unwrap();
        let gt = brute_force_ground_truth(&base, &queries, 10, Metric::Euclidean).unwrap();
        let index = hnsw_build(
            base,
            BuildParams {
                m: 10,
                efc: 64,
                ..BuildParams::default()
            },
        )
        .unwrap();
        (index, queries, gt)
    })
}

fn config() -> SweepConfig {
    SweepConfig {
        efs_list: vec![10, 30],
        modes: RoutingMode::ALL.to_vec(),
        theta: Some(1.2),
        repetitions: 2,
        error_sample_events: 1000,
        ..SweepConfig::default()
    }
}

fn strip_qps(line: &str) -> String {
    let mut cells: Vec<&str> = line.split(',').collect();
    cells[4] = "";
    cells.join(",")
}

#[test]
fn sweep_is_deterministic_except_qps() {
    let (index, queries, gt) = fixture();
    let render = || {
        let rows = run_sweep(index, queries, gt, &config()).unwrap();
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    };
    let (a, b) = (render(), render());
    assert_eq!(a.lines().next(), Some(CSV_HEADER));
    assert_eq!(a.lines().count(), 1 + 4 * 2);
    let a: Vec<String> = a.lines().map(strip_qps).collect();
    let b: Vec<String> = b.lines().map(strip_qps).collect();
    assert_eq!(a, b);
}

#[test]
fn speedup_is_relative_to_baseline_hops() {
    let (index, queries, gt) = fixture();
    let rows = run_sweep(index, queries, gt, &config()).unwrap();
    for row in &rows {
        let base = rows
            .iter()
            .find(|r| r.mode == RoutingMode::Baseline && r.efs == row.efs)
            .unwrap();
        let want = base.hops_total as f64 / row.hops_total as f64;
        assert!((row.speedup - want).abs() < 1e-12);
        if row.mode == RoutingMode::Baseline {
            assert_eq!(row.speedup, 1.0);
            assert!(row.avg_rel_err.is_none() && row.incorrect_prune_ratio.is_none());
        } else {
            assert!(row.avg_rel_err.is_some());
        }
    }
}

#[test]
fn speedup_does_not_depend_on_mode_order() {
    let (index, queries, gt) = fixture();
    let mut cfg = config();
    cfg.modes = vec![RoutingMode::CRouting, RoutingMode::Baseline];
    let rows = run_sweep(index, queries, gt, &cfg).unwrap();
    let mut cfg2 = config();
    cfg2.modes = vec![RoutingMode::CRouting];
    let alone = run_sweep(index, queries, gt, &cfg2).unwrap();
    assert_eq!(rows[0].speedup, alone[0].speedup);
}

#[test]
fn error_instrumentation_leaves_search_untouched() {
    let (index, queries, gt) = fixture();
    let params = SearchParams::baseline(10, 30).with_mode(RoutingMode::CRouting, 1.2);
    let before = run_pass(index, queries, gt, &params).unwrap();
    let err = measure_estimation_error(index, queries, &params, u64::MAX).unwrap();
    let after = run_pass(index, queries, gt, &params).unwrap();
    assert_eq!(before.recall, after.recall);
    assert_eq!(before.hops_total, after.hops_total);
    assert_eq!(err.pruned, before.pruned_total);
    assert!(err.incorrect_prunes <= err.pruned);
}

#[test]
fn angle_modes_need_theta() {
    let (index, queries, gt) = fixture();
    let mut cfg = config();
    cfg.theta = None;
    assert!(matches!(
        run_sweep(index, queries, gt, &cfg),
        Err(Error::InvalidParameter(_))
    ));
    cfg.modes = vec![RoutingMode::Baseline, RoutingMode::Triangle];
    assert!(run_sweep(index, queries, gt, &cfg).is_ok());
}

#[test]
fn mismatched_ground_truth_is_rejected() {
    let (index, queries, _) = fixture();
    let short = synth_gaussian(5, 24, 43).unwrap();
    let gt = brute_force_ground_truth(index.store(), &short, 10, Metric::Euclidean).unwrap();
    assert!(run_sweep(index, queries, &gt, &config()).is_err());
}
