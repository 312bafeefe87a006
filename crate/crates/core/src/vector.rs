//! Vector storage and the distance kernels shared by construction and search.
//!
//! Every metric is reported as a Euclidean side length. Inner-product and
//! cosine distances are mapped through
//! `‖c−q‖² = ‖c‖² + ‖q‖² + 2·(1 − c·q) − 2`, so the cosine-law estimator in
//! [`crate::search`] sees the same geometry regardless of metric.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Index of a vector inside a [`VectorStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VectorId(pub u32);

impl VectorId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<u32> for VectorId {
    fn from(v: u32) -> Self {
        VectorId(v)
    }
}

impl fmt::Display for VectorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Metric {
    #[default]
    Euclidean,
    InnerProduct,
    /// Inner product on unit-normalized vectors.
    Cosine,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Euclidean => "euclidean",
            Metric::InnerProduct => "inner_product",
            Metric::Cosine => "cosine",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Metric::Euclidean => 0,
            Metric::InnerProduct => 1,
            Metric::Cosine => 2,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Metric::Euclidean),
            1 => Some(Metric::InnerProduct),
            2 => Some(Metric::Cosine),
            _ => None,
        }
    }

    fn uses_norms(self) -> bool {
        !matches!(self, Metric::Euclidean)
    }

    /// Distance between `a` and `q` given their L2 norms (ignored for
    /// Euclidean). Accumulates in f64.
    #[inline]
    pub(crate) fn eval(self, a: &[f32], norm_a: f64, q: &[f32], norm_q: f64) -> f32 {
        match self {
            Metric::Euclidean => squared_l2(a, q).sqrt() as f32,
            Metric::InnerProduct | Metric::Cosine => {
                euclidean_from_ip(norm_a, norm_q, 1.0 - dot(a, q)) as f32
            }
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" | "l2" => Ok(Metric::Euclidean),
            "inner_product" | "ip" => Ok(Metric::InnerProduct),
            "cosine" | "angular" => Ok(Metric::Cosine),
            _ => Err(Error::UnknownMetric(s.to_string())),
        }
    }
}

/// Counts full-length distance evaluations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DistanceCounter {
    exact_calls: u64,
}

impl DistanceCounter {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn exact_calls(&self) -> u64 {
        self.exact_calls
    }

    #[inline]
    pub(crate) fn bump(&mut self) {
        self.exact_calls += 1;
    }
}

/// Dense row-major storage of `len` vectors of `dim` f32 components.
///
/// Stores built for inner-product or cosine metrics also carry the L2 norm
/// of every row (see [`VectorStore::prepare_for`]).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VectorStore {
    dim: usize,
    data: Vec<f32>,
    norms: Option<Vec<f64>>,
}

impl VectorStore {
    /// Store with no vectors and no dimension.
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            if data.is_empty() {
                return Ok(Self::empty());
            }
            return Err(Error::param("dimension must be positive"));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::param(format!(
                "data length {} is not a multiple of dimension {dim}",
                data.len()
            )));
        }
        Ok(VectorStore {
            dim,
            data,
            norms: None,
        })
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Ok(Self::empty());
        };
        let dim = first.as_ref().len();
        let mut data = Vec::with_capacity(dim * rows.len());
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(dim, data)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn vector(&self, id: VectorId) -> &[f32] {
        let start = id.index() * self.dim;
        &self.data[start..start + self.dim]
    }

    pub fn get(&self, id: VectorId) -> Option<&[f32]> {
        (id.index() < self.len()).then(|| self.vector(id))
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        // chunks_exact panics on a zero chunk size
        self.data.chunks_exact(self.dim.max(1))
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn norms(&self) -> Option<&[f64]> {
        self.norms.as_deref()
    }

    /// L2 norm of a stored vector, from the cache when present.
    pub fn norm(&self, id: VectorId) -> f64 {
        match &self.norms {
            Some(norms) => norms[id.index()],
            None => l2_norm(self.vector(id)),
        }
    }

    /// Populates the norm cache.
    pub fn with_norms(mut self) -> Self {
        if self.norms.is_none() {
            self.norms = Some(self.iter().map(l2_norm).collect());
        }
        self
    }

    /// Scales every nonzero row to unit length.
    pub fn normalized(mut self) -> Self {
        if self.dim > 0 {
            for row in self.data.chunks_exact_mut(self.dim) {
                let n = l2_norm(row);
                if n > 0.0 {
                    for x in row.iter_mut() {
                        *x = (*x as f64 / n) as f32;
                    }
                }
            }
        }
        self.norms = None;
        self
    }

    /// Readies the store for `metric`: caches norms for inner-product and
    /// cosine, and rejects cosine stores whose rows are not unit length.
    pub fn prepare_for(self, metric: Metric) -> Result<Self> {
        if !metric.uses_norms() {
            return Ok(self);
        }
        let store = self.with_norms();
        if metric == Metric::Cosine {
            if let Some(norms) = store.norms() {
                if let Some((id, &norm)) = norms
                    .iter()
                    .enumerate()
                    .find(|(_, n)| (**n - 1.0).abs() > 1e-3)
                {
                    return Err(Error::NotNormalized { id, norm });
                }
            }
        }
        Ok(store)
    }

    pub(crate) fn check_query(&self, q: &[f32]) -> Result<()> {
        if self.is_empty() {
            return Err(Error::EmptyStore);
        }
        if q.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: q.len(),
            });
        }
        Ok(())
    }

    /// Uncounted distance between two stored vectors.
    #[inline]
    pub(crate) fn pair_distance(&self, metric: Metric, a: u32, b: u32) -> f32 {
        let (a, b) = (VectorId(a), VectorId(b));
        let (na, nb) = if metric.uses_norms() {
            (self.norm(a), self.norm(b))
        } else {
            (0.0, 0.0)
        };
        metric.eval(self.vector(a), na, self.vector(b), nb)
    }

    /// Uncounted distance from a stored vector to a prepared query.
    #[inline]
    pub(crate) fn distance_to(&self, metric: Metric, a: u32, q: &Query<'_>) -> f32 {
        let id = VectorId(a);
        let na = if metric.uses_norms() {
            self.norm(id)
        } else {
            0.0
        };
        metric.eval(self.vector(id), na, q.data, q.norm)
    }
}

/// Query vector with its norm computed once.
#[derive(Debug, Clone, Copy)]
pub struct Query<'a> {
    pub(crate) data: &'a [f32],
    pub(crate) norm: f64,
}

impl<'a> Query<'a> {
    pub fn new(metric: Metric, data: &'a [f32]) -> Self {
        let norm = if metric.uses_norms() {
            l2_norm(data)
        } else {
            0.0
        };
        Query { data, norm }
    }
}

/// Counted exact distance between stored vector `a` and the query `q`.
pub fn distance(
    store: &VectorStore,
    a: VectorId,
    q: &[f32],
    metric: Metric,
    counter: &mut DistanceCounter,
) -> Result<f32> {
    store.check_query(q)?;
    if a.index() >= store.len() {
        return Err(Error::param(format!(
            "vector id {a} out of range for store of {}",
            store.len()
        )));
    }
    counter.bump();
    Ok(store.distance_to(metric, a.0, &Query::new(metric, q)))
}

/// Euclidean side length recovered from an inner-product distance
/// `ip_dist = 1 − c·q` and the two norms.
#[inline]
pub fn euclidean_from_ip(norm_c: f64, norm_q: f64, ip_dist: f64) -> f64 {
    (norm_c * norm_c + norm_q * norm_q + 2.0 * ip_dist - 2.0)
        .max(0.0)
        .sqrt()
}

/// L2 norm of a stored vector.
pub fn norm(store: &VectorStore, a: VectorId) -> f64 {
    store.norm(a)
}

const LANES: usize = 8;

#[inline]
pub fn squared_l2(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0f64; LANES];
    let mut ca = a.chunks_exact(LANES);
    let mut cb = b.chunks_exact(LANES);
    for (xa, xb) in (&mut ca).zip(&mut cb) {
        for i in 0..LANES {
            let d = xa[i] as f64 - xb[i] as f64;
            acc[i] += d * d;
        }
    }
    let mut sum: f64 = acc.iter().sum();
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        let d = *x as f64 - *y as f64;
        sum += d * d;
    }
    sum
}

#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0f64; LANES];
    let mut ca = a.chunks_exact(LANES);
    let mut cb = b.chunks_exact(LANES);
    for (xa, xb) in (&mut ca).zip(&mut cb) {
        for i in 0..LANES {
            acc[i] += xa[i] as f64 * xb[i] as f64;
        }
    }
    let mut sum: f64 = acc.iter().sum();
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        sum += *x as f64 * *y as f64;
    }
    sum
}

#[inline]
pub fn l2_norm(a: &[f32]) -> f64 {
    dot(a, a).sqrt()
}
