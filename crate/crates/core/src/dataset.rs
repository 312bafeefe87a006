//! TEXMEX vector files (`.fvecs`, `.bvecs`, `.ivecs`), synthetic data and
//! brute-force ground truth.
//!
//! Each record is a little-endian `i32` dimension followed by that many
//! components: `f32` for fvecs, `u8` for bvecs, `i32` for ivecs. Every record
//! in a file must share the same dimension.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian, WriteBytesExt};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::vector::{Metric, Query, VectorId, VectorStore};

/// Splits a TEXMEX byte buffer into `(dim, payload)` records.
fn parse_records<'a>(
    kind: &'static str,
    bytes: &'a [u8],
    elem_size: usize,
) -> Result<(usize, Vec<&'a [u8]>)> {
    let mut records = Vec::new();
    let mut dim: Option<usize> = None;
    let mut pos = 0;
    while pos < bytes.len() {
        if bytes.len() - pos < 4 {
            return Err(Error::format(
                kind,
                format!("truncated header at byte {pos}"),
            ));
        }
        let d = LittleEndian::read_i32(&bytes[pos..pos + 4]);
        if d <= 0 {
            return Err(Error::format(
                kind,
                format!("non-positive dimension {d} at byte {pos}"),
            ));
        }
        let d = d as usize;
        match dim {
            None => dim = Some(d),
            Some(expected) if expected != d => {
                return Err(Error::format(
                    kind,
                    format!(
                        "record {} has dimension {d}, expected {expected}",
                        records.len()
                    ),
                ));
            }
            _ => {}
        }
        pos += 4;
        let len = d * elem_size;
        if bytes.len() - pos < len {
            return Err(Error::format(
                kind,
                format!("truncated record {}", records.len()),
            ));
        }
        records.push(&bytes[pos..pos + len]);
        pos += len;
    }
    Ok((dim.unwrap_or(0), records))
}

pub fn parse_fvecs(bytes: &[u8]) -> Result<VectorStore> {
    let (dim, records) = parse_records("fvecs", bytes, 4)?;
    let mut data = vec![0f32; dim * records.len()];
    for (rec, out) in records.iter().zip(data.chunks_exact_mut(dim.max(1))) {
        LittleEndian::read_f32_into(rec, out);
    }
    VectorStore::new(dim, data)
}

/// bvecs components are widened to f32.
pub fn parse_bvecs(bytes: &[u8]) -> Result<VectorStore> {
    let (dim, records) = parse_records("bvecs", bytes, 1)?;
    let data = records
        .iter()
        .flat_map(|rec| rec.iter().map(|&b| b as f32))
        .collect();
    VectorStore::new(dim, data)
}

pub fn parse_ivecs(bytes: &[u8]) -> Result<Vec<Vec<i32>>> {
    let (dim, records) = parse_records("ivecs", bytes, 4)?;
    Ok(records
        .iter()
        .map(|rec| {
            let mut row = vec![0i32; dim];
            LittleEndian::read_i32_into(rec, &mut row);
            row
        })
        .collect())
}

pub fn read_fvecs(path: impl AsRef<Path>) -> Result<VectorStore> {
    parse_fvecs(&fs::read(path)?)
}

pub fn read_bvecs(path: impl AsRef<Path>) -> Result<VectorStore> {
    parse_bvecs(&fs::read(path)?)
}

pub fn read_ivecs(path: impl AsRef<Path>) -> Result<Vec<Vec<i32>>> {
    parse_ivecs(&fs::read(path)?)
}

/// Reads a vector file, choosing the element type from the extension
/// (`.bvecs` → bytes, anything else → f32).
pub fn read_vectors(path: impl AsRef<Path>) -> Result<VectorStore> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("bvecs") => read_bvecs(path),
        _ => read_fvecs(path),
    }
}

fn dim_header(dim: usize) -> Result<i32> {
    i32::try_from(dim).map_err(|_| Error::param(format!("dimension {dim} exceeds i32")))
}

pub fn write_fvecs(path: impl AsRef<Path>, store: &VectorStore) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    let d = dim_header(store.dim())?;
    for row in store.iter().take(store.len()) {
        w.write_i32::<LittleEndian>(d)?;
        for &x in row {
            w.write_f32::<LittleEndian>(x)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Fails unless every component is an integer in `0..=255`.
pub fn write_bvecs(path: impl AsRef<Path>, store: &VectorStore) -> Result<()> {
    if let Some(x) = store
        .as_slice()
        .iter()
        .find(|x| !(0.0..=255.0).contains(*x) || x.fract() != 0.0)
    {
        return Err(Error::param(format!(
            "value {x} is not representable as a byte"
        )));
    }
    let mut w = BufWriter::new(fs::File::create(path)?);
    let d = dim_header(store.dim())?;
    for row in store.iter().take(store.len()) {
        w.write_i32::<LittleEndian>(d)?;
        let bytes: Vec<u8> = row.iter().map(|&x| x as u8).collect();
        w.write_all(&bytes)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_ivecs(path: impl AsRef<Path>, rows: &[Vec<i32>]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    if let Some(first) = rows.first() {
        if first.is_empty() {
            return Err(Error::param("ivecs records must be non-empty"));
        }
        for row in rows {
            if row.len() != first.len() {
                return Err(Error::DimensionMismatch {
                    expected: first.len(),
                    actual: row.len(),
                });
            }
        }
    }
    for row in rows {
        w.write_i32::<LittleEndian>(dim_header(row.len())?)?;
        for &x in row {
            w.write_i32::<LittleEndian>(x)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `n` vectors of i.i.d. standard-normal components from a seeded ChaCha8
/// stream. Identical arguments give bit-identical stores.
pub fn synth_gaussian(n: usize, d: usize, seed: u64) -> Result<VectorStore> {
    if d == 0 {
        return Err(Error::param("dimension must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n * d)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    VectorStore::new(d, data)
}

/// Exact k nearest base ids per query, ordered by distance then id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    k: usize,
    rows: Vec<Vec<VectorId>>,
}

impl GroundTruth {
    pub fn new(k: usize, rows: Vec<Vec<VectorId>>) -> Result<Self> {
        if k == 0 {
            return Err(Error::param("k must be positive"));
        }
        if let Some(row) = rows.iter().find(|r| r.len() != k) {
            return Err(Error::param(format!(
                "row has {} ids, expected {k}",
                row.len()
            )));
        }
        Ok(GroundTruth { k, rows })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, query: usize) -> &[VectorId] {
        &self.rows[query]
    }

    pub fn rows(&self) -> &[Vec<VectorId>] {
        &self.rows
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let rows: Vec<Vec<i32>> = self
            .rows
            .iter()
            .map(|r| r.iter().map(|id| id.0 as i32).collect())
            .collect();
        write_ivecs(path, &rows)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let rows = read_ivecs(path)?;
        let k = rows.first().map_or(0, Vec::len);
        if k == 0 {
            return Err(Error::format("ivecs", "ground truth file has no records"));
        }
        let rows = rows
            .into_iter()
            .map(|r| {
                r.into_iter()
                    .map(|x| {
                        u32::try_from(x)
                            .map(VectorId)
                            .map_err(|_| Error::format("ivecs", format!("negative id {x}")))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        GroundTruth::new(k, rows)
    }
}

#[derive(PartialEq)]
struct Scored(f32, u32);

impl Eq for Scored {}

impl PartialOrd for Scored {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scored {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

/// Exhaustive k-NN of every query against `base`. Queries are scanned in
/// parallel; each output row is independent.
pub fn brute_force_ground_truth(
    base: &VectorStore,
    queries: &VectorStore,
    k: usize,
    metric: Metric,
) -> Result<GroundTruth> {
    if k == 0 {
        return Err(Error::param("k must be positive"));
    }
    if k > base.len() {
        return Err(Error::param(format!(
            "k = {k} exceeds base size {}",
            base.len()
        )));
    }
    if !queries.is_empty() && queries.dim() != base.dim() {
        return Err(Error::DimensionMismatch {
            expected: base.dim(),
            actual: queries.dim(),
        });
    }
    let base = if metric == Metric::Euclidean || base.norms().is_some() {
        std::borrow::Cow::Borrowed(base)
    } else {
        std::borrow::Cow::Owned(base.clone().with_norms())
    };
    let rows = queries
        .iter()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|q| {
            let query = Query::new(metric, q);
            let mut heap = BinaryHeap::with_capacity(k + 1);
            for id in 0..base.len() as u32 {
                let d = base.distance_to(metric, id, &query);
                let cand = Scored(d, id);
                if heap.len() < k {
                    heap.push(cand);
                } else if cand < *heap.peek().unwrap() {
                    heap.pop();
                    heap.push(cand);
                }
            }
            heap.into_sorted_vec()
                .into_iter()
                .map(|s| VectorId(s.1))
                .collect()
        })
        .collect();
    GroundTruth::new(k, rows)
}
