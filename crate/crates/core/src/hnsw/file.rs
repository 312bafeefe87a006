//! Versioned little-endian snapshot of an [`HnswIndex`].
//!
//! ```text
//! magic "CRHNSWIX" | version u32 | dim u32 | n u64 | m u32 | efc u32
//! metric u8 | seed u64 | entry u32
//! levels: n × u8
//! base layer: n × degree u32, then per node degree × (id u32, dist f32)
//! upper layers: per node with level > 0, per layer: degree u32, ids
//! profile flag u8; if 1: dim u32 | n_sample u64 | total u64 | bins × u64
//! ```
//!
//! Vectors are not stored; [`load_index`] takes the store the index was
//! built over and checks it against the header.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use super::HnswIndex;
use crate::error::{Error, Result};
use crate::profile::{AngleProfile, PROFILE_BINS};
use crate::vector::{Metric, VectorStore};

pub const INDEX_MAGIC: [u8; 8] = *b"CRHNSWIX";
pub const INDEX_VERSION: u32 = 1;

pub fn save_index(index: &HnswIndex, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_index(index, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_index(path: impl AsRef<Path>, store: VectorStore) -> Result<HnswIndex> {
    let mut r = BufReader::new(File::open(path)?);
    read_index(&mut r, store)
}

pub(crate) fn write_index<W: Write>(index: &HnswIndex, w: &mut W) -> Result<()> {
    let n = index.len();
    w.write_all(&INDEX_MAGIC)?;
    w.write_u32::<LE>(INDEX_VERSION)?;
    w.write_u32::<LE>(index.dim() as u32)?;
    w.write_u64::<LE>(n as u64)?;
    w.write_u32::<LE>(index.m as u32)?;
    w.write_u32::<LE>(index.efc as u32)?;
    w.write_u8(index.metric.code())?;
    w.write_u64::<LE>(index.seed)?;
    w.write_u32::<LE>(index.entry_point)?;
    w.write_all(&index.levels)?;

    for c in 0..n {
        let deg = index.l0_offsets[c + 1] - index.l0_offsets[c];
        w.write_u32::<LE>(deg as u32)?;
    }
    for (&id, &d) in index.l0_ids.iter().zip(&index.l0_dists) {
        w.write_u32::<LE>(id)?;
        w.write_f32::<LE>(d)?;
    }
    for layers in &index.upper {
        for list in layers {
            w.write_u32::<LE>(list.len() as u32)?;
            for &id in list {
                w.write_u32::<LE>(id)?;
            }
        }
    }

    match &index.profile {
        None => w.write_u8(0)?,
        Some(p) => {
            w.write_u8(1)?;
            w.write_u32::<LE>(p.dim() as u32)?;
            w.write_u64::<LE>(p.n_sample())?;
            w.write_u64::<LE>(p.total())?;
            for &b in p.bins() {
                w.write_u64::<LE>(b)?;
            }
        }
    }
    Ok(())
}

fn corrupt(reason: impl Into<String>) -> Error {
    Error::format("index", reason)
}

pub(crate) fn read_index<R: Read>(r: &mut R, store: VectorStore) -> Result<HnswIndex> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if magic != INDEX_MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = r.read_u32::<LE>()?;
    if version != INDEX_VERSION {
        return Err(corrupt(format!(
            "unsupported version {version} (expected {INDEX_VERSION})"
        )));
    }
    let dim = r.read_u32::<LE>()? as usize;
    let n = r.read_u64::<LE>()? as usize;
    if store.dim() != dim || store.len() != n {
        return Err(Error::StoreMismatch(format!(
            "index has {n} vectors of dim {dim}, store has {} of dim {}",
            store.len(),
            store.dim()
        )));
    }
    let m = r.read_u32::<LE>()? as usize;
    let efc = r.read_u32::<LE>()? as usize;
    let metric_code = r.read_u8()?;
    let metric = Metric::from_code(metric_code)
        .ok_or_else(|| corrupt(format!("unknown metric code {metric_code}")))?;
    let seed = r.read_u64::<LE>()?;
    let entry_point = r.read_u32::<LE>()?;
    if entry_point as usize >= n {
        return Err(corrupt("entry point out of range"));
    }

    let mut levels = vec![0u8; n];
    r.read_exact(&mut levels)?;

    let mut l0_offsets = Vec::with_capacity(n + 1);
    l0_offsets.push(0u64);
    for _ in 0..n {
        let deg = r.read_u32::<LE>()? as u64;
        if deg > 2 * m as u64 {
            return Err(corrupt("base-layer degree exceeds cap"));
        }
        l0_offsets.push(l0_offsets.last().unwrap() + deg);
    }
    let edges = *l0_offsets.last().unwrap() as usize;
    let mut l0_ids = Vec::with_capacity(edges);
    let mut l0_dists = Vec::with_capacity(edges);
    for _ in 0..edges {
        let id = r.read_u32::<LE>()?;
        if id as usize >= n {
            return Err(corrupt("neighbor id out of range"));
        }
        l0_ids.push(id);
        l0_dists.push(r.read_f32::<LE>()?);
    }

    let mut upper = Vec::with_capacity(n);
    for &level in &levels {
        let mut layers = Vec::with_capacity(level as usize);
        for _ in 0..level {
            let deg = r.read_u32::<LE>()? as usize;
            if deg > m {
                return Err(corrupt("upper-layer degree exceeds cap"));
            }
            let mut list = Vec::with_capacity(deg);
            for _ in 0..deg {
                let id = r.read_u32::<LE>()?;
                if id as usize >= n {
                    return Err(corrupt("neighbor id out of range"));
                }
                list.push(id);
            }
            layers.push(list);
        }
        upper.push(layers);
    }

    let profile = match r.read_u8()? {
        0 => None,
        1 => {
            let pdim = r.read_u32::<LE>()? as usize;
            let n_sample = r.read_u64::<LE>()?;
            let total = r.read_u64::<LE>()?;
            let mut bins = vec![0u64; PROFILE_BINS];
            r.read_u64_into::<LE>(&mut bins)?;
            Some(
                AngleProfile::from_parts(bins, total, pdim, n_sample)
                    .map_err(|e| corrupt(e.to_string()))?,
            )
        }
        other => return Err(corrupt(format!("bad profile flag {other}"))),
    };

    let store = store.prepare_for(metric)?;
    Ok(HnswIndex {
        store,
        metric,
        m,
        efc,
        seed,
        entry_point,
        levels,
        l0_offsets,
        l0_ids,
        l0_dists,
        upper,
        profile,
    })
}
