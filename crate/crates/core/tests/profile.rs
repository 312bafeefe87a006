use std::f64::consts::PI;

use crouting::dataset::synth_gaussian;
use crouting::hnsw::{hnsw_build, BuildParams};
use crouting::profile::{sample_angles, sample_query_ids, AngleProfile, PROFILE_BINS, PROFILE_EFS};
use crouting::search::{SearchObserver, Searcher};
use crouting::{HnswIndex, SearchParams, VectorId};

/// Recomputes each search-path angle from the three vectors rather than from
/// the reported distances.
struct RawAngles<'a> {
    index: &'a HnswIndex,
    q: &'a [f32],
    out: Vec<f64>,
}

impl SearchObserver for RawAngles<'_> {
    fn exact(&mut self, c: u32, _a: f32, n: u32, _b: f32, _d: f32) {
        let vc = self.index.store().vector(VectorId(c));
        let vn = self.index.store().vector(VectorId(n));
        let (mut dot, mut lq, mut ln) = (0f64, 0f64, 0f64);
        #[allow(clippy::needless_range_loop)]
        for i in 0..vc.len() {
            let x = self.q[i] as f64 - vc[i] as f64;
            let y = vn[i] as f64 - vc[i] as f64;
            dot += x * y;
            lq += x * x;
            ln += y * y;
        }
        let nq: f64 = vn
            .iter()
            .zip(self.q)
            .map(|(x, y)| (*x as f64 - *y as f64).powi(2))
            .sum();
        if lq.sqrt() > 1e-9 && ln.sqrt() > 1e-9 && nq.sqrt() > 1e-9 {
            self.out
                .push((dot / (lq * ln).sqrt()).clamp(-1.0, 1.0).acos());
        }
    }
}

fn raw_samples(index: &HnswIndex, n_sample: usize, seed: u64) -> Vec<f64> {
    let params = SearchParams::baseline(1, PROFILE_EFS);
    let mut searcher = Searcher::new(index);
    let mut all = Vec::new();
    for id in sample_query_ids(index.len(), n_sample, seed) {
        let q = index.store().vector(VectorId(id));
        let mut obs = RawAngles {
            index,
            q,
            out: Vec::new(),
        };
        searcher.search_observed(q, &params, &mut obs).unwrap();
        all.extend(obs.out);
    }
    all.sort_by(f64::total_cmp);
    all
}

fn index() -> HnswIndex {
    let store = synth_gaussian(4000, 48, 31).unwrap();
    hnsw_build(
        store,
        BuildParams {
            m: 12,
            efc: 80,
            ..BuildParams::default()
        },
    )
    .unwrap()
}

#[test]
fn percentile_matches_sorted_raw_samples() {
    let index = index();
    let profile = sample_angles(&index, 12, 9).unwrap();
    let raw = raw_samples(&index, 12, 9);
    assert_eq!(profile.total(), raw.len() as u64);
    for p in [10.0, 50.0, 90.0, 95.0] {
        let rank = ((p / 100.0) * raw.len() as f64).ceil() as usize;
        let want = raw[rank.max(1) - 1];
        let got = profile.percentile(p).unwrap();
        assert!(
            (got - want).abs() <= AngleProfile::bin_width() + 1e-9,
            "p{p}: {got} vs {want}"
        );
    }
}

#[test]
fn percentile_is_stable_across_seeds() {
    let index = index();
    let a = sample_angles(&index, 20, 1)
        .unwrap()
        .percentile(90.0)
        .unwrap();
    let b = sample_angles(&index, 20, 2)
        .unwrap()
        .percentile(90.0)
        .unwrap();
    assert!((a - b).abs() <= 0.05, "{a} vs {b}");
}

#[test]
fn profile_bins_cover_half_turn() {
    assert_eq!(AngleProfile::bin_width() * PROFILE_BINS as f64, PI);
    let (lo, hi) = AngleProfile::bin_edges(PROFILE_BINS - 1);
    assert!(lo < PI && (hi - PI).abs() < 1e-12);
}

#[test]
fn csv_output_has_one_row_per_bin() {
    let index = index();
    let profile = sample_angles(&index, 4, 3).unwrap();
    let mut buf = Vec::new();
    profile.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("bin_low_rad,bin_high_rad,count"));
    let counts: u64 = lines
        .map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap())
        .sum();
    assert_eq!(counts, profile.total());
    assert_eq!(text.lines().count(), PROFILE_BINS + 1);
}

#[test]
fn random_pair_angles_center_on_right_angle() {
    let store = synth_gaussian(20_000, 128, 33).unwrap();
    let mean = crouting::profile::random_pair_angles(&store, 20_000, 34)
        .unwrap()
        .mean()
        .unwrap();
    assert!((mean - PI / 2.0).abs() <= 0.05, "{mean}");
}

#[test]
fn path_angle_mean_matches_raw_samples() {
    let index = index();
    let profile = sample_angles(&index, 8, 4).unwrap();
    let raw = raw_samples(&index, 8, 4);
    let raw_mean = raw.iter().sum::<f64>() / raw.len() as f64;
    let got = profile.mean().unwrap();
    assert!(
        (got - raw_mean).abs() <= AngleProfile::bin_width(),
        "{got} vs {raw_mean}"
    );
}
