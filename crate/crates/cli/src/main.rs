use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use crouting::bench::{run_sweep, write_csv, SweepConfig, DEFAULT_K};
use crouting::dataset::{self, GroundTruth};
use crouting::hnsw::{self, BuildParams, HnswIndex};
use crouting::profile::{self, DEFAULT_PERCENTILE};
use crouting::{Metric, RoutingMode, VectorStore};

#[derive(Parser)]
#[command(
    name = "crouting-bench",
    version,
    about = "Build, profile and benchmark HNSW indexes with cosine-law routing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an index over a base set.
    Build(BuildArgs),
    /// Sample search-path angles and store the histogram in the index file.
    Profile(ProfileArgs),
    /// Exact k nearest neighbors by brute force.
    GroundTruth(GroundTruthArgs),
    /// Recall / QPS / hop sweep over efs and routing modes.
    Sweep(SweepArgs),
    /// Empirical angle histogram next to the analytic density.
    AngleReport(AngleReportArgs),
    /// Write a standard-normal dataset.
    Synth(SynthArgs),
}

/// `ANN_SEED`, when set, overrides the `--seed` flag.
#[derive(Args)]
struct SeedArg {
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

impl SeedArg {
    fn resolve(&self) -> Result<u64> {
        match std::env::var("ANN_SEED") {
            Ok(s) => s
                .trim()
                .parse()
                .with_context(|| format!("ANN_SEED is not an integer: {s:?}")),
            Err(_) => Ok(self.seed),
        }
    }
}

#[derive(Args)]
struct BuildArgs {
    /// Base vectors (.fvecs or .bvecs).
    #[arg(long)]
    base: PathBuf,
    #[arg(long = "M", default_value_t = 32)]
    m: usize,
    #[arg(long, default_value_t = 256)]
    efc: usize,
    /// l2, ip or cosine.
    #[arg(long, default_value = "l2")]
    metric: Metric,
    #[command(flatten)]
    seed: SeedArg,
    /// Insertion threads; 1 gives a reproducible graph, 0 uses all cores.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ProfileArgs {
    #[arg(long)]
    index: PathBuf,
    /// Base vectors the index was built from.
    #[arg(long)]
    base: PathBuf,
    /// Pseudo-queries to sample; defaults to 0.1% of the base size.
    #[arg(long)]
    n_sample: Option<usize>,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args)]
struct GroundTruthArgs {
    #[arg(long)]
    base: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    #[arg(long, default_value = "l2")]
    metric: Metric,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    base: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "10,20,40,80,160")]
    efs: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "baseline,crouting")]
    modes: Vec<RoutingMode>,
    /// Percentile of the stored angle profile used as the pruning angle.
    #[arg(long, default_value_t = DEFAULT_PERCENTILE)]
    theta_percentile: f64,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    /// Estimator events gathered for the error columns.
    #[arg(long, default_value_t = 1000)]
    error_events: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AngleReportArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    base: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    #[command(flatten)]
    seed: SeedArg,
    /// Scale every vector to unit length.
    #[arg(long)]
    normalize: bool,
    #[arg(long)]
    out: PathBuf,
}

fn read_vectors(path: &Path) -> Result<VectorStore> {
    dataset::read_vectors(path).with_context(|| format!("reading vectors from {}", path.display()))
}

fn open_index(index: &Path, base: &Path) -> Result<HnswIndex> {
    let store = read_vectors(base)?;
    hnsw::load_index(index, store).with_context(|| format!("loading index {}", index.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn build(args: BuildArgs) -> Result<()> {
    let store = read_vectors(&args.base)?;
    let params = BuildParams {
        m: args.m,
        efc: args.efc,
        metric: args.metric,
        seed: args.seed.resolve()?,
    };
    let n = store.len();
    let start = Instant::now();
    let index = hnsw::hnsw_build_parallel(store, params, args.threads)?;
    let elapsed = start.elapsed();
    hnsw::save_index(&index, &args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    let fp = index.footprint();
    eprintln!(
        "built {n} vectors in {elapsed:.2?}: max level {}, {} base-layer edges, distance cache {:.1}% of footprint",
        index.max_level(),
        index.layer0_edge_count(),
        100.0 * fp.cache_overhead()
    );
    Ok(())
}

fn run_profile(args: ProfileArgs) -> Result<()> {
    let mut index = open_index(&args.index, &args.base)?;
    let n_sample = args
        .n_sample
        .unwrap_or_else(|| profile::default_sample_size(index.len()));
    let start = Instant::now();
    let angles = profile::sample_angles(&index, n_sample, args.seed.resolve()?)?;
    let elapsed = start.elapsed();
    eprintln!(
        "sampled {} angles from {n_sample} queries in {elapsed:.2?}: mean {:.4} rad, p{DEFAULT_PERCENTILE} {:.4} rad",
        angles.total(),
        angles.mean()?,
        angles.percentile(DEFAULT_PERCENTILE)?
    );
    index.set_profile(angles);
    hnsw::save_index(&index, &args.index)
        .with_context(|| format!("writing {}", args.index.display()))?;
    Ok(())
}

fn ground_truth(args: GroundTruthArgs) -> Result<()> {
    let base = read_vectors(&args.base)?;
    let queries = read_vectors(&args.queries)?;
    let base = base.prepare_for(args.metric)?;
    let gt = dataset::brute_force_ground_truth(&base, &queries, args.k, args.metric)?;
    gt.save(&args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let index = open_index(&args.index, &args.base)?;
    let queries = read_vectors(&args.queries)?;
    let gt =
        GroundTruth::load(&args.gt).with_context(|| format!("reading {}", args.gt.display()))?;
    let theta = if args.modes.iter().any(|m| m.uses_angle()) {
        let Some(profile) = index.profile() else {
            bail!("index has no angle profile; run `crouting-bench profile` first");
        };
        let theta = profile.percentile(args.theta_percentile)?;
        eprintln!("pruning angle {theta:.4} rad (p{})", args.theta_percentile);
        Some(theta)
    } else {
        None
    };
    let cfg = SweepConfig {
        efs_list: args.efs,
        modes: args.modes,
        k: args.k,
        theta,
        repetitions: args.reps,
        error_sample_events: args.error_events,
    };
    let rows = run_sweep(&index, &queries, &gt, &cfg)?;
    let mut out = create(&args.out)?;
    write_csv(&rows, &mut out)?;
    out.flush()?;
    Ok(())
}

fn angle_report(args: AngleReportArgs) -> Result<()> {
    let index = open_index(&args.index, &args.base)?;
    let Some(profile) = index.profile() else {
        bail!("index has no angle profile; run `crouting-bench profile` first");
    };
    let mut out = create(&args.out)?;
    profile.write_density_report(&mut out)?;
    out.flush()?;
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let mut store = dataset::synth_gaussian(args.n, args.d, args.seed.resolve()?)?;
    if args.normalize {
        store = store.normalized();
    }
    dataset::write_fvecs(&args.out, &store)
        .with_context(|| format!("writing {}", args.out.display()))?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Build(a) => build(a),
        Command::Profile(a) => run_profile(a),
        Command::GroundTruth(a) => ground_truth(a),
        Command::Sweep(a) => sweep(a),
        Command::AngleReport(a) => angle_report(a),
        Command::Synth(a) => synth(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
