//! HNSW approximate nearest-neighbor search with cosine-law routing.
//!
//! The base layer of the graph stores the exact length of every edge. During
//! search, the distance from the query to a neighbor `n` of the expanded node
//! `c` is first estimated from `dist(c, q)`, the stored `dist(c, n)` and a
//! fixed angle calibrated per dataset ([`profile`]). Neighbors whose estimate
//! cannot beat the current upper bound are skipped without touching their
//! vectors; a skipped neighbor that is reached again later gets an exact
//! distance.
//!
//! ```no_run
//! use crouting::{dataset, hnsw, profile, search};
//!
//! let base = dataset::synth_gaussian(10_000, 64, 1)?;
//! let queries = dataset::synth_gaussian(10, 64, 2)?;
//! let mut index = hnsw::hnsw_build(base, hnsw::BuildParams::default())?;
//! let n_sample = profile::default_sample_size(index.len());
//! let angles = profile::sample_angles(&index, n_sample, 7)?;
//! let theta = angles.percentile(profile::DEFAULT_PERCENTILE)?;
//! index.set_profile(angles);
//!
//! let params = search::SearchParams::baseline(10, 100)
//!     .with_mode(search::RoutingMode::CRouting, theta);
//! let res = search::crouting_search(&index, queries.vector(0.into()), &params)?;
//! println!("{:?} in {} distance calls", res.ids(), res.stats.hops);
//! # Ok::<(), crouting::Error>(())
//! ```

pub mod bench;
pub mod dataset;
mod error;
pub mod hnsw;
pub mod profile;
mod queue;
pub mod search;
pub mod vector;

pub use error::{Error, Result};
pub use hnsw::{BuildParams, HnswIndex};
pub use search::{QueryResult, RoutingMode, SearchParams, SearchStats};
pub use vector::{Metric, VectorId, VectorStore};
