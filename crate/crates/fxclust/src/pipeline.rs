//! End-to-end runs: ingest, window, measure, cluster, cut, compare, write.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use fxclust_core::{
    agglomerate, best_threshold, cdcc, cut, distance_matrix, hcluster::best_threshold_by, moments,
    ClusterCount, ClusterCut, Dendrogram, DistanceMatrix, Linkage, Metric, ReturnSeries,
    DEFAULT_BIN_WIDTH,
};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result, StageExt};
use crate::formats;
use crate::ingest::{
    align, parse_rates, read_metadata, redenominate, AlignPolicy, ColumnMap, Dataset, Orientation,
    RateSeries,
};
use crate::render::render_polar;

/// How the dendrogram cut threshold is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdMode {
    /// Threshold maximizing the number of clusters (see [`best_threshold`]).
    Auto,
    Fixed(f64),
}

impl FromStr for ThresholdMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(ThresholdMode::Auto);
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() && v >= 0.0 => Ok(ThresholdMode::Fixed(v)),
            _ => Err(Error::Config(format!(
                "threshold must be 'auto' or a non-negative number, got {s:?}"
            ))),
        }
    }
}

impl fmt::Display for ThresholdMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThresholdMode::Auto => f.write_str("auto"),
            ThresholdMode::Fixed(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub rates: PathBuf,
    pub meta: Option<PathBuf>,
    pub bridge: Option<PathBuf>,
    pub orientation: Option<Orientation>,
    pub numeraire: String,
    pub align: AlignPolicy,
    pub dt_steps: usize,
    pub bin_width: f64,
    pub metric: Metric,
    pub linkage: Linkage,
    pub periods: usize,
    pub threshold: ThresholdMode,
    /// Count singletons as clusters when searching for the best threshold.
    pub count_singletons: bool,
    pub out_dir: PathBuf,
    pub render: bool,
    pub skew_threshold: f64,
    /// Also write one audit CSV of returns per asset.
    pub dump_returns: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            rates: PathBuf::new(),
            meta: None,
            bridge: None,
            orientation: None,
            numeraire: "base".to_owned(),
            align: AlignPolicy::Intersect,
            dt_steps: 1,
            bin_width: DEFAULT_BIN_WIDTH,
            metric: Metric::JsSqrt,
            linkage: Linkage::Complete,
            periods: 1,
            threshold: ThresholdMode::Auto,
            count_singletons: false,
            out_dir: PathBuf::from("out"),
            render: true,
            skew_threshold: 1.0,
            dump_returns: false,
        }
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!(
            "{key}: expected a boolean, got {v:?}"
        ))),
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

impl RunConfig {
    /// Sets one option by its command-line flag name (without dashes).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "input" => self.rates = PathBuf::from(v),
            "meta" => self.meta = Some(PathBuf::from(v)),
            "bridge" => self.bridge = Some(PathBuf::from(v)),
            "orientation" => self.orientation = Some(v.parse()?),
            "numeraire" => self.numeraire = v.to_owned(),
            "align" => self.align = v.parse()?,
            "dt" => self.dt_steps = parse_num(key, v)?,
            "bin-width" => self.bin_width = parse_num(key, v)?,
            "metric" => self.metric = v.parse()?,
            "linkage" => self.linkage = v.parse()?,
            "periods" => self.periods = parse_num(key, v)?,
            "dth" => self.threshold = v.parse()?,
            "count-singletons" => self.count_singletons = parse_bool(key, v)?,
            "out" => self.out_dir = PathBuf::from(v),
            "render" => self.render = parse_bool(key, v)?,
            "skew-threshold" => self.skew_threshold = parse_num(key, v)?,
            "dump-returns" => self.dump_returns = parse_bool(key, v)?,
            other => return Err(Error::Config(format!("unknown option {other:?}"))),
        }
        Ok(())
    }

    /// Applies a flat `key = value` file. Blank lines and `#` comments are
    /// ignored; keys are the long command-line flag names.
    pub fn apply_file_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            self.set(k.trim().trim_start_matches("--"), v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.periods < 1 {
            return Err(Error::Config("periods must be at least 1".into()));
        }
        if self.dt_steps < 1 {
            return Err(Error::Config("dt must be at least 1".into()));
        }
        if !(self.bin_width > 0.0 && self.bin_width.is_finite()) {
            return Err(Error::Config("bin-width must be positive".into()));
        }
        if self.metric == Metric::Cophenetic {
            return Err(Error::Config("cophenetic is not a return metric".into()));
        }
        if self.rates.as_os_str().is_empty() {
            return Err(Error::Config("no input file".into()));
        }
        Ok(())
    }
}

/// `k` contiguous windows of `floor(n / k)` dates; the trailing `n mod k`
/// dates are dropped and their count returned.
pub fn split_periods(ds: &Dataset, k: usize) -> Result<(Vec<Dataset>, usize)> {
    let n = ds.n_dates();
    if k == 0 || n < 3 * k {
        return Err(Error::TooFewDates {
            dates: n,
            periods: k,
        });
    }
    let len = n / k;
    let windows = (0..k)
        .map(|i| ds.slice(i * len..(i + 1) * len))
        .collect::<Result<Vec<_>>>()?;
    Ok((windows, n - k * len))
}

/// Assets whose return skewness exceeds `threshold` in absolute value, most
/// skewed first. A threshold of zero or less lists every asset. Series whose
/// moments cannot be computed are skipped.
pub fn skew_screen(returns: &[ReturnSeries], threshold: f64) -> Vec<String> {
    let mut flagged: Vec<(f64, &str)> = returns
        .iter()
        .filter_map(|r| {
            moments(&r.normalized)
                .ok()
                .map(|m| (m.skewness.abs(), r.code.as_str()))
        })
        .filter(|(s, _)| threshold <= 0.0 || *s > threshold)
        .collect();
    flagged.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    flagged.into_iter().map(|(_, c)| c.to_owned()).collect()
}

/// Return series of every asset in the dataset.
pub fn dataset_returns(ds: &Dataset, dt_steps: usize) -> Result<Vec<ReturnSeries>> {
    ds.assets()
        .iter()
        .map(|a| {
            ReturnSeries::from_prices(a.code(), a.prices(), dt_steps).map_err(|e| {
                log::warn!("{}: {e}", a.code());
                Error::from(e)
            })
        })
        .collect()
}

/// Everything computed for one window of the data.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub returns: Vec<ReturnSeries>,
    pub matrix: DistanceMatrix,
    pub dendrogram: Dendrogram,
    pub cut: ClusterCut,
}

pub fn analyze(ds: &Dataset, cfg: &RunConfig) -> Result<Analysis> {
    let returns = dataset_returns(ds, cfg.dt_steps).stage("returns")?;
    let matrix = distance_matrix(&returns, cfg.metric, cfg.bin_width).stage("distances")?;
    let dendrogram = agglomerate(&matrix, cfg.linkage).stage("cluster")?;
    let cut = match cfg.threshold {
        ThresholdMode::Fixed(t) => cut(&dendrogram, t),
        ThresholdMode::Auto if cfg.count_singletons => {
            best_threshold_by(&dendrogram, ClusterCount::AllParts).1
        }
        ThresholdMode::Auto => best_threshold(&dendrogram).1,
    };
    Ok(Analysis {
        returns,
        matrix,
        dendrogram,
        cut,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodReport {
    pub index: usize,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub n_dates: usize,
    pub matrix_path: String,
    pub dendrogram_path: String,
    pub newick_path: String,
    pub cut_path: String,
    pub svg_path: Option<String>,
    pub threshold: f64,
    pub n_clusters_ge2: usize,
    pub n_isolated: usize,
    /// Members of every cluster with at least two assets.
    pub clusters: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentRow {
    pub code: String,
    /// Variance of the raw log returns.
    pub variance: f64,
    /// Skewness of the normalized returns.
    pub skewness: f64,
    /// Non-excess kurtosis of the normalized returns.
    pub kurtosis: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NumeraireComparison {
    pub base: String,
    pub bridge: String,
    pub n_dates: usize,
    pub cdcc: f64,
    pub base_dendrogram_path: String,
    pub bridge_dendrogram_path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSettings {
    pub metric: String,
    pub linkage: String,
    pub bin_width: f64,
    pub dt_steps: usize,
    pub align: String,
    pub threshold: String,
    pub numeraire: String,
    pub n_assets: usize,
    pub n_dates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub settings: RunSettings,
    pub periods: Vec<PeriodReport>,
    pub dropped_dates: usize,
    /// Cophenetic distance correlation between period dendrograms.
    pub cdcc: Vec<Vec<f64>>,
    pub moments: Vec<MomentRow>,
    pub skew_outliers: Vec<String>,
    pub numeraire_comparison: Option<NumeraireComparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
}

/// Collects written files so the manifest can hash them.
struct Outputs {
    root: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    fn write(&mut self, rel: &str, contents: impl Into<Vec<u8>>) -> Result<String> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let bytes = contents.into();
        std::fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
        self.files.push((rel.to_owned(), bytes));
        Ok(rel.to_owned())
    }

    fn manifest(&self) -> Vec<ManifestEntry> {
        let mut entries: Vec<ManifestEntry> = self
            .files
            .iter()
            .map(|(path, bytes)| ManifestEntry {
                path: path.clone(),
                sha256: hex::encode(Sha256::digest(bytes)),
            })
            .collect();
        entries.sort_by(|a, b| a.path.cmp(&b.path));
        entries
    }
}

/// Loads the rates file, attaches metadata, and aligns the series.
pub fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    let series = parse_rates(&cfg.rates, &ColumnMap::default()).stage("ingest")?;
    let mut ds = align(&series, cfg.align).stage("align")?;
    ds.numeraire = cfg.numeraire.clone();
    ds.orientation = cfg.orientation;
    if let Some(meta) = &cfg.meta {
        ds.attach_metadata(&read_metadata(meta).stage("metadata")?);
    }
    Ok(ds)
}

/// Reads a bridge series: the first price column of a rates file, whose
/// header names the new numeraire.
pub fn load_bridge(path: &Path) -> Result<RateSeries> {
    parse_rates(path, &ColumnMap::default())
        .stage("bridge")?
        .into_iter()
        .next()
        .ok_or_else(|| Error::Config("bridge file has no price column".into()))
}

/// Same assets restricted to the dates of `axis`, which must be a subset of
/// the dataset's axis.
fn restrict(ds: &Dataset, axis: &[NaiveDate]) -> Result<Dataset> {
    let assets = ds
        .assets()
        .iter()
        .map(|a| {
            let prices = axis
                .iter()
                .map(|d| {
                    a.price_on(*d).ok_or_else(|| {
                        Error::InvalidDataset(format!("{} has no price on {d}", a.code()))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            RateSeries::new(a.meta.clone(), axis.to_vec(), prices)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(assets, axis.to_vec(), ds.numeraire.clone(), ds.orientation)
}

fn write_analysis(
    out: &mut Outputs,
    dir: &str,
    a: &Analysis,
    ds: &Dataset,
    render: bool,
) -> Result<(String, String, String, String, Option<String>)> {
    let matrix = out.write(
        &format!("{dir}/matrix.csv"),
        formats::matrix_to_csv(&a.matrix)?,
    )?;
    out.write(
        &format!("{dir}/matrix.json"),
        formats::matrix_to_json(&a.matrix)?,
    )?;
    let dendro = out.write(
        &format!("{dir}/dendrogram.json"),
        formats::dendrogram_to_json(&a.dendrogram)?,
    )?;
    let newick = out.write(
        &format!("{dir}/dendrogram.nwk"),
        formats::dendrogram_to_newick(&a.dendrogram),
    )?;
    let cut = out.write(&format!("{dir}/cut.csv"), formats::cut_to_csv(&a.cut)?)?;
    let svg = if render {
        Some(out.write(
            &format!("{dir}/dendrogram.svg"),
            render_polar(&a.dendrogram, &a.cut, &ds.metadata()),
        )?)
    } else {
        None
    };
    Ok((matrix, dendro, newick, cut, svg))
}

fn moments_csv(rows: &[MomentRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["code", "variance", "skewness", "kurtosis"])?;
    for r in rows {
        w.write_record([
            r.code.clone(),
            r.variance.to_string(),
            r.skewness.to_string(),
            r.kurtosis.to_string(),
        ])?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::io("<memory>", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("utf-8"))
}

/// Runs the whole pipeline and writes every artifact under `cfg.out_dir`,
/// finishing with `report.json` and a `manifest.json` of content hashes.
pub fn run(cfg: &RunConfig) -> Result<RunReport> {
    cfg.validate()?;
    let ds = load_dataset(cfg)?;
    run_dataset(&ds, cfg)
}

/// [`run`] on an already loaded dataset.
pub fn run_dataset(ds: &Dataset, cfg: &RunConfig) -> Result<RunReport> {
    let mut out = Outputs {
        root: cfg.out_dir.clone(),
        files: Vec::new(),
    };
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;

    let (windows, dropped) = split_periods(ds, cfg.periods).stage("split")?;
    if dropped > 0 {
        log::info!(
            "dropped {dropped} trailing dates to make {} equal periods",
            cfg.periods
        );
    }
    let analyses = windows
        .par_iter()
        .map(|w| analyze(w, cfg))
        .collect::<Result<Vec<_>>>()?;

    let mut periods = Vec::with_capacity(analyses.len());
    for (i, (a, w)) in analyses.iter().zip(&windows).enumerate() {
        let (matrix_path, dendrogram_path, newick_path, cut_path, svg_path) =
            write_analysis(&mut out, &format!("period_{}", i + 1), a, w, cfg.render)?;
        let clusters = a
            .cut
            .clusters()
            .into_iter()
            .filter(|c| c.len() >= 2)
            .map(|c| c.into_iter().map(|l| a.cut.labels[l].clone()).collect())
            .collect();
        periods.push(PeriodReport {
            index: i + 1,
            start: w.date_axis()[0],
            end: *w.date_axis().last().expect("non-empty"),
            n_dates: w.n_dates(),
            matrix_path,
            dendrogram_path,
            newick_path,
            cut_path,
            svg_path,
            threshold: a.cut.threshold,
            n_clusters_ge2: a.cut.n_clusters_ge2,
            n_isolated: a.cut.n_isolated,
            clusters,
        });
    }

    let k = analyses.len();
    let mut table = vec![vec![1.0; k]; k];
    for i in 0..k {
        for j in 0..i {
            let v = cdcc(&analyses[i].dendrogram, &analyses[j].dendrogram).stage("cdcc")?;
            table[i][j] = v;
            table[j][i] = v;
        }
    }

    let full_returns = if k == 1 {
        analyses[0].returns.clone()
    } else {
        dataset_returns(ds, cfg.dt_steps).stage("returns")?
    };
    let moment_rows = full_returns
        .iter()
        .map(|r| {
            let shape = moments(&r.normalized)?;
            let raw = moments(&r.raw)?;
            Ok(MomentRow {
                code: r.code.clone(),
                variance: raw.variance,
                skewness: shape.skewness,
                kurtosis: shape.kurtosis,
            })
        })
        .collect::<std::result::Result<Vec<_>, fxclust_core::Error>>()
        .stage("moments")?;
    out.write("moments.csv", moments_csv(&moment_rows)?)?;
    if cfg.dump_returns {
        let dates = &ds.date_axis()[cfg.dt_steps..];
        for r in &full_returns {
            out.write(
                &format!("returns/{}.csv", r.code),
                formats::returns_to_csv(r, dates)?,
            )?;
        }
    }
    let skew_outliers = skew_screen(&full_returns, cfg.skew_threshold);

    let numeraire_comparison = match &cfg.bridge {
        Some(path) => Some(compare_numeraires(ds, &load_bridge(path)?, cfg, &mut out)?),
        None => None,
    };

    let report = RunReport {
        settings: RunSettings {
            metric: cfg.metric.to_string(),
            linkage: cfg.linkage.to_string(),
            bin_width: cfg.bin_width,
            dt_steps: cfg.dt_steps,
            align: cfg.align.to_string(),
            threshold: cfg.threshold.to_string(),
            numeraire: ds.numeraire.clone(),
            n_assets: ds.n_assets(),
            n_dates: ds.n_dates(),
        },
        periods,
        dropped_dates: dropped,
        cdcc: table,
        moments: moment_rows,
        skew_outliers,
        numeraire_comparison,
    };
    out.write("report.json", serde_json::to_string_pretty(&report)? + "\n")?;
    let manifest = out.manifest();
    let text = serde_json::to_string_pretty(&serde_json::json!({ "files": manifest }))? + "\n";
    std::fs::write(cfg.out_dir.join("manifest.json"), text)
        .map_err(|e| Error::io(cfg.out_dir.join("manifest.json"), e))?;
    Ok(report)
}

/// Full-span dendrograms in the original and in the bridge numeraire, on the
/// dates both share.
fn compare_numeraires(
    ds: &Dataset,
    bridge: &RateSeries,
    cfg: &RunConfig,
    out: &mut Outputs,
) -> Result<NumeraireComparison> {
    let converted = redenominate(ds, bridge).stage("redenominate")?;
    let base = restrict(ds, converted.date_axis()).stage("redenominate")?;
    let a = analyze(&base, cfg)?;
    let b = analyze(&converted, cfg)?;
    let dir_a = format!("numeraire/{}", sanitize(&ds.numeraire));
    let dir_b = format!("numeraire/{}", sanitize(&converted.numeraire));
    let (_, base_dendrogram_path, ..) = write_analysis(out, &dir_a, &a, &base, cfg.render)?;
    let (_, bridge_dendrogram_path, ..) = write_analysis(out, &dir_b, &b, &converted, cfg.render)?;
    Ok(NumeraireComparison {
        base: ds.numeraire.clone(),
        bridge: converted.numeraire.clone(),
        n_dates: converted.n_dates(),
        cdcc: cdcc(&a.dendrogram, &b.dendrogram).stage("cdcc")?,
        base_dendrogram_path,
        bridge_dendrogram_path,
    })
}

fn sanitize(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if s.is_empty() {
        "base".to_owned()
    } else {
        s
    }
}
