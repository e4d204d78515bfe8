use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fxclust::formats;
use fxclust::ingest::{
    align, parse_rates, read_metadata, redenominate, write_wide_csv, AlignPolicy, ColumnMap,
    Orientation,
};
use fxclust::pipeline::{dataset_returns, load_bridge, RunConfig, ThresholdMode};
use fxclust::render::render_polar;
use fxclust::synth::{planted_panel, random_walk_panel};
use fxclust::{Error, Result};
use fxclust_core::{
    agglomerate, best_threshold, cdcc, cut, distance_matrix, hcluster::best_threshold_by,
    ClusterCount, Dendrogram, DistanceMatrix, Linkage, Metric, DEFAULT_BIN_WIDTH,
};

/// Hierarchical clustering of price series by the similarity of their
/// return distributions.
#[derive(Parser)]
#[command(name = "fxclust", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate, align and optionally re-denominate a rates file, writing the
    /// canonical wide CSV.
    Ingest(IngestArgs),
    /// Pairwise distance matrix of a rates file (CSV, or JSON for `.json`).
    Distances(DistancesArgs),
    /// Dendrogram of a distance matrix (JSON, or Newick for `.nwk`).
    Cluster(ClusterArgs),
    /// Cluster assignment of a dendrogram at a threshold.
    Cut(CutArgs),
    /// Cophenetic distance correlation of two dendrograms.
    Cdcc(CdccArgs),
    /// Full pipeline into an output directory.
    Run(Box<RunArgs>),
    /// Polar SVG of a dendrogram.
    Render(RenderArgs),
    /// Seeded synthetic rates file.
    Synth(SynthArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Rates file, wide (date,CODE...) or long (date,asset,price)
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "intersect")]
    align: AlignPolicy,
    /// Sidecar metadata CSV keyed by code
    #[arg(long)]
    meta: Option<PathBuf>,
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Bridge series quoting new-numeraire per old-numeraire
    #[arg(long)]
    bridge: Option<PathBuf>,
    /// numeraire-per-asset or asset-per-numeraire; required with --bridge
    #[arg(long)]
    orientation: Option<Orientation>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DistancesArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "js")]
    metric: Metric,
    #[arg(long, default_value_t = DEFAULT_BIN_WIDTH)]
    bin_width: f64,
    /// Return horizon in rows
    #[arg(long, default_value_t = 1)]
    dt: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ClusterArgs {
    /// Distance matrix, CSV or JSON
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "complete")]
    linkage: Linkage,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CutArgs {
    /// Dendrogram JSON
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "auto")]
    dth: ThresholdMode,
    /// Count singletons as clusters when choosing the auto threshold
    #[arg(long)]
    count_singletons: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CdccArgs {
    /// Two dendrogram JSON files
    #[arg(long, num_args = 1, required = true)]
    input: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// key = value file; flags given here override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<String>,
    #[arg(long)]
    meta: Option<String>,
    #[arg(long)]
    bridge: Option<String>,
    #[arg(long)]
    orientation: Option<String>,
    #[arg(long)]
    numeraire: Option<String>,
    #[arg(long)]
    align: Option<String>,
    #[arg(long)]
    dt: Option<String>,
    #[arg(long)]
    bin_width: Option<String>,
    #[arg(long)]
    metric: Option<String>,
    #[arg(long)]
    linkage: Option<String>,
    #[arg(long)]
    periods: Option<String>,
    #[arg(long)]
    dth: Option<String>,
    #[arg(long)]
    count_singletons: bool,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    no_render: bool,
    #[arg(long)]
    skew_threshold: Option<String>,
    #[arg(long)]
    dump_returns: bool,
}

#[derive(Args)]
struct RenderArgs {
    /// Dendrogram JSON
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "auto")]
    dth: ThresholdMode,
    #[arg(long)]
    meta: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    assets: usize,
    #[arg(long, default_value_t = 1000)]
    dates: usize,
    /// Two planted groups of this many assets instead of random walks
    #[arg(long)]
    planted: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn is_json(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn load(data: &DataArgs) -> Result<fxclust::Dataset> {
    let mut ds = align(
        &parse_rates(&data.input, &ColumnMap::default())?,
        data.align,
    )?;
    if let Some(m) = &data.meta {
        ds.attach_metadata(&read_metadata(m)?);
    }
    Ok(ds)
}

fn read_matrix(path: &Path) -> Result<DistanceMatrix> {
    let text = read(path)?;
    if is_json(path) {
        formats::matrix_from_json(&text)
    } else {
        formats::matrix_from_csv(&text)
    }
}

fn read_dendrogram(path: &Path) -> Result<Dendrogram> {
    formats::dendrogram_from_json(&read(path)?)
}

fn cut_at(dg: &Dendrogram, mode: ThresholdMode, all_parts: bool) -> fxclust_core::ClusterCut {
    match mode {
        ThresholdMode::Fixed(t) => cut(dg, t),
        ThresholdMode::Auto if all_parts => best_threshold_by(dg, ClusterCount::AllParts).1,
        ThresholdMode::Auto => best_threshold(dg).1,
    }
}

fn run_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &args.config {
        cfg.apply_file_text(&read(path)?)?;
    }
    let overrides = [
        ("input", &args.input),
        ("meta", &args.meta),
        ("bridge", &args.bridge),
        ("orientation", &args.orientation),
        ("numeraire", &args.numeraire),
        ("align", &args.align),
        ("dt", &args.dt),
        ("bin-width", &args.bin_width),
        ("metric", &args.metric),
        ("linkage", &args.linkage),
        ("periods", &args.periods),
        ("dth", &args.dth),
        ("out", &args.out),
        ("skew-threshold", &args.skew_threshold),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    if args.count_singletons {
        cfg.count_singletons = true;
    }
    if args.no_render {
        cfg.render = false;
    }
    if args.dump_returns {
        cfg.dump_returns = true;
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(a) => {
            let mut ds = load(&a.data)?;
            if let Some(b) = &a.bridge {
                ds.orientation = a.orientation;
                ds = redenominate(&ds, &load_bridge(b)?)?;
            }
            emit(a.out.as_deref(), &write_wide_csv(&ds))
        }
        Command::Distances(a) => {
            let ds = load(&a.data)?;
            let returns = dataset_returns(&ds, a.dt)?;
            let dm = distance_matrix(&returns, a.metric, a.bin_width)?;
            let text = match &a.out {
                Some(p) if is_json(p) => formats::matrix_to_json(&dm)?,
                _ => formats::matrix_to_csv(&dm)?,
            };
            emit(a.out.as_deref(), &text)
        }
        Command::Cluster(a) => {
            let dg = agglomerate(&read_matrix(&a.input)?, a.linkage)?;
            let text = match &a.out {
                Some(p) if p.extension().is_some_and(|e| e == "nwk") => {
                    formats::dendrogram_to_newick(&dg)
                }
                _ => formats::dendrogram_to_json(&dg)?,
            };
            emit(a.out.as_deref(), &text)
        }
        Command::Cut(a) => {
            let dg = read_dendrogram(&a.input)?;
            let c = cut_at(&dg, a.dth, a.count_singletons);
            log::info!(
                "threshold {}: {} clusters, {} isolated",
                c.threshold,
                c.n_clusters_ge2,
                c.n_isolated
            );
            emit(a.out.as_deref(), &formats::cut_to_csv(&c)?)
        }
        Command::Cdcc(a) => {
            let [x, y] = a.input.as_slice() else {
                return Err(Error::Config("cdcc takes exactly two --input files".into()));
            };
            let value = cdcc(&read_dendrogram(x)?, &read_dendrogram(y)?)?;
            emit(a.out.as_deref(), &format!("{value}\n"))
        }
        Command::Run(a) => {
            let cfg = run_config(&a)?;
            let report = fxclust::run(&cfg)?;
            for p in &report.periods {
                println!(
                    "period {} ({} to {}): threshold {}, {} clusters, {} isolated",
                    p.index, p.start, p.end, p.threshold, p.n_clusters_ge2, p.n_isolated
                );
            }
            if let Some(n) = &report.numeraire_comparison {
                println!("cdcc {} vs {}: {}", n.base, n.bridge, n.cdcc);
            }
            println!("wrote {}", cfg.out_dir.display());
            Ok(())
        }
        Command::Render(a) => {
            let dg = read_dendrogram(&a.input)?;
            let c = cut_at(&dg, a.dth, false);
            let meta: Vec<_> = match &a.meta {
                Some(m) => read_metadata(m)?.into_values().collect(),
                None => Vec::new(),
            };
            emit(a.out.as_deref(), &render_polar(&dg, &c, &meta))
        }
        Command::Synth(a) => {
            let series = match a.planted {
                Some(g) => planted_panel(g, a.dates, a.seed).0,
                None => random_walk_panel(a.assets, a.dates, a.seed),
            };
            let ds = align(&series, AlignPolicy::Intersect)?;
            emit(a.out.as_deref(), &write_wide_csv(&ds))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
