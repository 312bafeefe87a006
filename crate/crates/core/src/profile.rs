//! Angle statistics for choosing the pruning angle.
//!
//! [`sample_angles`] runs unpruned searches from sampled base points and
//! records, for every exact base-layer distance, the angle at the expanded
//! node `c` between `c→q` and `c→n`, recovered from the three side lengths.
//! [`analytic_density`] is the density of the angle between two uniformly
//! random directions in `d` dimensions, used to check the empirical side.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hnsw::HnswIndex;
use crate::search::{SearchObserver, SearchParams, Searcher};
use crate::vector::{dot, VectorId, VectorStore};

pub const PROFILE_BINS: usize = 1024;

/// Beam width of the profiling searches.
pub const PROFILE_EFS: usize = 100;

/// Percentile used for the pruning angle unless overridden.
pub const DEFAULT_PERCENTILE: f64 = 90.0;

const SIDE_EPS: f64 = 1e-9;

/// Histogram of angles over `[0, π]` in [`PROFILE_BINS`] equal bins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AngleProfile {
    bins: Vec<u64>,
    total: u64,
    dim: usize,
    n_sample: u64,
}

impl AngleProfile {
    pub fn new(dim: usize) -> Self {
        AngleProfile {
            bins: vec![0; PROFILE_BINS],
            total: 0,
            dim,
            n_sample: 0,
        }
    }

    pub(crate) fn from_parts(
        bins: Vec<u64>,
        total: u64,
        dim: usize,
        n_sample: u64,
    ) -> Result<Self> {
        if bins.len() != PROFILE_BINS {
            return Err(Error::param(format!(
                "expected {PROFILE_BINS} bins, got {}",
                bins.len()
            )));
        }
        if bins.iter().sum::<u64>() != total {
            return Err(Error::param("bin counts do not sum to total"));
        }
        Ok(AngleProfile {
            bins,
            total,
            dim,
            n_sample,
        })
    }

    pub fn bins(&self) -> &[u64] {
        &self.bins
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of queries (or pairs) the profile was measured from.
    pub fn n_sample(&self) -> u64 {
        self.n_sample
    }

    pub fn bin_width() -> f64 {
        PI / PROFILE_BINS as f64
    }

    /// `[low, high)` edges of bin `i` in radians.
    pub fn bin_edges(i: usize) -> (f64, f64) {
        let w = Self::bin_width();
        (i as f64 * w, (i + 1) as f64 * w)
    }

    fn bin_of(theta: f64) -> usize {
        ((theta / Self::bin_width()) as usize).min(PROFILE_BINS - 1)
    }

    pub fn record(&mut self, theta: f64) {
        let theta = theta.clamp(0.0, PI);
        self.bins[Self::bin_of(theta)] += 1;
        self.total += 1;
    }

    /// Bin-wise sum of two profiles of the same dimensionality.
    pub fn merge(&mut self, other: &AngleProfile) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: other.dim,
            });
        }
        for (a, b) in self.bins.iter_mut().zip(&other.bins) {
            *a += b;
        }
        self.total += other.total;
        self.n_sample += other.n_sample;
        Ok(())
    }

    /// Upper edge of the first bin whose cumulative count reaches `p`
    /// percent of the total.
    pub fn percentile(&self, p: f64) -> Result<f64> {
        if !(0.0..=100.0).contains(&p) {
            return Err(Error::param(format!("percentile {p} outside [0, 100]")));
        }
        if self.total == 0 {
            return Err(Error::EmptyProfile);
        }
        let target = p / 100.0 * self.total as f64;
        let mut cum = 0u64;
        for (i, &c) in self.bins.iter().enumerate() {
            cum += c;
            if cum as f64 >= target {
                return Ok(Self::bin_edges(i).1);
            }
        }
        Ok(PI)
    }

    /// Mean angle using bin centers.
    pub fn mean(&self) -> Result<f64> {
        if self.total == 0 {
            return Err(Error::EmptyProfile);
        }
        let w = Self::bin_width();
        let sum: f64 = self
            .bins
            .iter()
            .enumerate()
            .map(|(i, &c)| c as f64 * (i as f64 + 0.5) * w)
            .sum();
        Ok(sum / self.total as f64)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "bin_low_rad,bin_high_rad,count")?;
        for (i, &c) in self.bins.iter().enumerate() {
            let (lo, hi) = Self::bin_edges(i);
            writeln!(w, "{lo:.9},{hi:.9},{c}")?;
        }
        Ok(())
    }

    /// Per-bin empirical density next to the random-direction density for
    /// this profile's dimensionality (taken at the bin center).
    pub fn write_density_report<W: Write>(&self, mut w: W) -> Result<()> {
        if self.total == 0 {
            return Err(Error::EmptyProfile);
        }
        let width = Self::bin_width();
        writeln!(
            w,
            "bin_low_rad,bin_high_rad,count,empirical_density,analytic_density"
        )?;
        for (i, &c) in self.bins.iter().enumerate() {
            let (lo, hi) = Self::bin_edges(i);
            let empirical = c as f64 / (self.total as f64 * width);
            let analytic = analytic_density(0.5 * (lo + hi), self.dim.max(2))?;
            writeln!(w, "{lo:.9},{hi:.9},{c},{empirical:.9},{analytic:.9}")?;
        }
        Ok(())
    }
}

/// Angle at the vertex between sides `a` and `b`, opposite side `c`.
pub fn angle_from_sides(a: f64, b: f64, c: f64) -> f64 {
    ((a * a + b * b - c * c) / (2.0 * a * b))
        .clamp(-1.0, 1.0)
        .acos()
}

/// ⌈0.1% of `n`⌉, at least one.
pub fn default_sample_size(n: usize) -> usize {
    n.div_ceil(1000).max(1)
}

struct AngleRecorder<'p> {
    profile: &'p mut AngleProfile,
}

impl SearchObserver for AngleRecorder<'_> {
    fn exact(&mut self, _c: u32, dist_cq: f32, _n: u32, dist_cn: f32, dist_nq: f32) {
        let (a, b, c) = (dist_cq as f64, dist_cn as f64, dist_nq as f64);
        if a > SIDE_EPS && b > SIDE_EPS && c > SIDE_EPS {
            self.profile.record(angle_from_sides(a, b, c));
        }
    }
}

/// Base-point ids used as pseudo-queries by [`sample_angles`]: `n_sample`
/// uniform draws from `0..n`, with replacement.
pub fn sample_query_ids(n: usize, n_sample: usize, seed: u64) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_sample).map(|_| rng.gen_range(0..n as u32)).collect()
}

/// Profiles search-path angles from `n_sample` uniformly drawn base points
/// used as queries. Searches are unpruned with beam width [`PROFILE_EFS`].
pub fn sample_angles(index: &HnswIndex, n_sample: usize, seed: u64) -> Result<AngleProfile> {
    if n_sample < 1 {
        return Err(Error::param("n_sample must be at least 1"));
    }
    if index.is_empty() {
        return Err(Error::EmptyStore);
    }
    let picks = sample_query_ids(index.len(), n_sample, seed);
    let params = SearchParams::baseline(1, PROFILE_EFS);
    let dim = index.dim();
    let partials = picks
        .par_chunks(16)
        .map_init(
            || Searcher::new(index),
            |searcher, chunk| -> Result<AngleProfile> {
                let mut profile = AngleProfile::new(dim);
                for &id in chunk {
                    let q = index.store().vector(VectorId(id));
                    searcher.search_observed(
                        q,
                        &params,
                        &mut AngleRecorder {
                            profile: &mut profile,
                        },
                    )?;
                }
                Ok(profile)
            },
        )
        .collect::<Result<Vec<_>>>()?;
    let mut profile = AngleProfile::new(dim);
    for p in &partials {
        profile.merge(p)?;
    }
    profile.n_sample = n_sample as u64;
    Ok(profile)
}

/// Angles between `m_pairs` seeded random pairs of distinct stored vectors.
/// Pairs involving a zero vector are skipped.
pub fn random_pair_angle_samples(
    store: &VectorStore,
    m_pairs: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let n = store.len();
    if n < 2 {
        return Err(Error::param("need at least two vectors"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(m_pairs);
    for _ in 0..m_pairs {
        let i = rng.gen_range(0..n);
        let mut j = rng.gen_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let (a, b) = (
            store.vector(VectorId(i as u32)),
            store.vector(VectorId(j as u32)),
        );
        if let Some(theta) = vector_angle(a, b) {
            out.push(theta);
        }
    }
    Ok(out)
}

/// Histogram of [`random_pair_angle_samples`].
pub fn random_pair_angles(store: &VectorStore, m_pairs: usize, seed: u64) -> Result<AngleProfile> {
    let mut profile = AngleProfile::new(store.dim());
    for theta in random_pair_angle_samples(store, m_pairs, seed)? {
        profile.record(theta);
    }
    profile.n_sample = m_pairs as u64;
    Ok(profile)
}

/// Angle between two vectors, `None` if either is zero.
pub fn vector_angle(a: &[f32], b: &[f32]) -> Option<f64> {
    let denom = (dot(a, a) * dot(b, b)).sqrt();
    (denom > 0.0).then(|| (dot(a, b) / denom).clamp(-1.0, 1.0).acos())
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0` by the Lanczos approximation (g = 7, 9 terms).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection: Γ(x)Γ(1−x) = π / sin(πx)
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut sum = LANCZOS_COEF[0];
    for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        sum += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + sum.ln()
}

/// Density of the angle between two random directions in `d` dimensions:
/// `Γ(d/2) / (Γ((d−1)/2)·√π) · sin^(d−2) η`.
pub fn analytic_density(eta: f64, d: usize) -> Result<f64> {
    if d < 2 {
        return Err(Error::param(format!(
            "dimension must be at least 2, got {d}"
        )));
    }
    if !(0.0..=PI).contains(&eta) {
        return Err(Error::param(format!("angle {eta} outside [0, pi]")));
    }
    let df = d as f64;
    let log_norm = ln_gamma(df / 2.0) - ln_gamma((df - 1.0) / 2.0) - 0.5 * PI.ln();
    if d == 2 {
        return Ok(log_norm.exp());
    }
    let s = eta.sin();
    if s <= 0.0 {
        return Ok(0.0);
    }
    Ok((log_norm + (df - 2.0) * s.ln()).exp())
}

/// Tabulated CDF of [`analytic_density`], integrated with composite
/// Simpson's rule and linearly interpolated between grid points.
#[derive(Debug, Clone)]
pub struct AnalyticCdf {
    step: f64,
    values: Vec<f64>,
}

impl AnalyticCdf {
    pub fn new(d: usize) -> Result<Self> {
        const PANELS: usize = 8192;
        let step = PI / PANELS as f64;
        let mut values = Vec::with_capacity(PANELS + 1);
        values.push(0.0);
        let mut acc = 0.0;
        for i in 0..PANELS {
            let lo = i as f64 * step;
            let hi = ((i + 1) as f64 * step).min(PI);
            let mid = 0.5 * (lo + hi);
            acc += (hi - lo) / 6.0
                * (analytic_density(lo, d)?
                    + 4.0 * analytic_density(mid, d)?
                    + analytic_density(hi, d)?);
            values.push(acc);
        }
        Ok(AnalyticCdf { step, values })
    }

    pub fn cdf(&self, eta: f64) -> f64 {
        if eta <= 0.0 {
            return 0.0;
        }
        let pos = eta / self.step;
        let i = pos.floor() as usize;
        if i + 1 >= self.values.len() {
            return *self.values.last().unwrap();
        }
        let frac = pos - i as f64;
        self.values[i] + frac * (self.values[i + 1] - self.values[i])
    }
}

/// Two-sided Kolmogorov–Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

pub fn sample_std_dev(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}
