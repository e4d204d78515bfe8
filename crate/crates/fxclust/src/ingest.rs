//! Reading, validating, aligning and re-denominating daily price panels.
//!
//! Two CSV layouts are accepted and told apart by the header:
//!
//! * wide: one date column plus one column per asset, empty cells meaning
//!   "no quote that day";
//! * long: exactly the columns `date,asset,price` (any order, any case).

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Floating,
    FixedPeg,
    CrawlingPeg,
    HorizontalBand,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarketClass {
    Developed,
    Emerging,
    Frontier,
    #[default]
    Unclassified,
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s
            .trim()
            .to_ascii_lowercase()
            .replace([' ', '-'], "_")
            .as_str()
        {
            "floating" => Ok(Regime::Floating),
            "fixed_peg" => Ok(Regime::FixedPeg),
            "crawling_peg" => Ok(Regime::CrawlingPeg),
            "horizontal_band" => Ok(Regime::HorizontalBand),
            other => Err(Error::Config(format!("unknown regime {other:?}"))),
        }
    }
}

impl FromStr for MarketClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "developed" => Ok(MarketClass::Developed),
            "emerging" => Ok(MarketClass::Emerging),
            "frontier" => Ok(MarketClass::Frontier),
            "" | "unclassified" => Ok(MarketClass::Unclassified),
            other => Err(Error::Config(format!("unknown market class {other:?}"))),
        }
    }
}

/// Descriptive metadata of one asset. Only `code` is required.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AssetMeta {
    pub code: String,
    pub name: String,
    pub regime: Option<Regime>,
    pub market_class: MarketClass,
    pub region: String,
    /// USD per person per year; only used to size labels.
    pub gdp_per_capita: Option<f64>,
}

impl AssetMeta {
    pub fn new(code: impl Into<String>) -> Self {
        AssetMeta {
            code: code.into(),
            ..Default::default()
        }
    }
}

/// Which way prices are quoted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Numeraire units per one unit of the asset (e.g. USD per EUR).
    NumerairePerAsset,
    /// Asset units per one unit of the numeraire (e.g. JPY per USD).
    AssetPerNumeraire,
}

impl FromStr for Orientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "numeraire-per-asset" | "numeraire_per_asset" => Ok(Orientation::NumerairePerAsset),
            "asset-per-numeraire" | "asset_per_numeraire" => Ok(Orientation::AssetPerNumeraire),
            other => Err(Error::Config(format!("unknown orientation {other:?}"))),
        }
    }
}

/// Dated prices of one asset; dates strictly increasing, prices positive.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSeries {
    pub meta: AssetMeta,
    dates: Vec<NaiveDate>,
    prices: Vec<f64>,
}

impl RateSeries {
    pub fn new(meta: AssetMeta, dates: Vec<NaiveDate>, prices: Vec<f64>) -> Result<Self> {
        if dates.len() != prices.len() {
            return Err(Error::InvalidDataset(format!(
                "{}: {} dates but {} prices",
                meta.code,
                dates.len(),
                prices.len()
            )));
        }
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidDataset(format!(
                "{}: dates not strictly increasing at {}",
                meta.code, w[1]
            )));
        }
        if let Some(p) = prices.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
            return Err(Error::InvalidDataset(format!(
                "{}: non-positive price {p}",
                meta.code
            )));
        }
        Ok(RateSeries {
            meta,
            dates,
            prices,
        })
    }

    pub fn code(&self) -> &str {
        &self.meta.code
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    /// Price on `date`, if quoted.
    pub fn price_on(&self, date: NaiveDate) -> Option<f64> {
        self.dates.binary_search(&date).ok().map(|i| self.prices[i])
    }
}

/// Assets on one shared date axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    assets: Vec<RateSeries>,
    date_axis: Vec<NaiveDate>,
    pub numeraire: String,
    pub orientation: Option<Orientation>,
}

impl Dataset {
    /// Requires at least 2 assets, at least 3 dates, and every asset quoted on
    /// exactly the dates of `date_axis`.
    pub fn new(
        assets: Vec<RateSeries>,
        date_axis: Vec<NaiveDate>,
        numeraire: impl Into<String>,
        orientation: Option<Orientation>,
    ) -> Result<Self> {
        if assets.len() < 2 {
            return Err(Error::InvalidDataset(format!(
                "need at least 2 assets, got {}",
                assets.len()
            )));
        }
        if date_axis.len() < 3 {
            return Err(Error::EmptyIntersection {
                common: date_axis.len(),
            });
        }
        let mut seen = BTreeSet::new();
        for a in &assets {
            if a.dates != date_axis {
                return Err(Error::InvalidDataset(format!(
                    "{} is not on the dataset date axis",
                    a.code()
                )));
            }
            if !seen.insert(a.code()) {
                return Err(Error::InvalidDataset(format!(
                    "duplicate asset code {}",
                    a.code()
                )));
            }
        }
        Ok(Dataset {
            assets,
            date_axis,
            numeraire: numeraire.into(),
            orientation,
        })
    }

    pub fn assets(&self) -> &[RateSeries] {
        &self.assets
    }

    pub fn into_assets(self) -> Vec<RateSeries> {
        self.assets
    }

    pub fn date_axis(&self) -> &[NaiveDate] {
        &self.date_axis
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    pub fn n_dates(&self) -> usize {
        self.date_axis.len()
    }

    pub fn codes(&self) -> Vec<String> {
        self.assets.iter().map(|a| a.meta.code.clone()).collect()
    }

    pub fn metadata(&self) -> Vec<AssetMeta> {
        self.assets.iter().map(|a| a.meta.clone()).collect()
    }

    /// Rows `range` of the date axis as a new dataset.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Dataset> {
        let axis = self.date_axis[range.clone()].to_vec();
        let assets = self
            .assets
            .iter()
            .map(|a| {
                RateSeries::new(
                    a.meta.clone(),
                    axis.clone(),
                    a.prices[range.clone()].to_vec(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(assets, axis, self.numeraire.clone(), self.orientation)
    }

    /// Replaces metadata of assets whose code appears in `meta`.
    pub fn attach_metadata(&mut self, meta: &HashMap<String, AssetMeta>) {
        attach_metadata(&mut self.assets, meta);
    }
}

pub fn attach_metadata(series: &mut [RateSeries], meta: &HashMap<String, AssetMeta>) {
    for s in series {
        if let Some(m) = meta.get(&s.meta.code) {
            s.meta = m.clone();
        }
    }
}

/// Which columns of a wide file to read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMap {
    pub date: String,
    /// Price columns to keep; empty means every column except the date.
    pub prices: Vec<String>,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            date: "date".to_owned(),
            prices: Vec::new(),
        }
    }
}

pub fn parse_rates(path: impl AsRef<Path>, columns: &ColumnMap) -> Result<Vec<RateSeries>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_rates_reader(file, columns)
}

pub fn parse_rates_str(text: &str, columns: &ColumnMap) -> Result<Vec<RateSeries>> {
    parse_rates_reader(text.as_bytes(), columns)
}

/// One series per price column, or per asset in long layout.
pub fn parse_rates_reader<R: Read>(reader: R, columns: &ColumnMap) -> Result<Vec<RateSeries>> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let lower: Vec<String> = header.iter().map(|h| h.to_ascii_lowercase()).collect();
    let is_long = lower.len() == 3
        && ["date", "asset", "price"]
            .iter()
            .all(|c| lower.iter().any(|h| h == c));
    let raw = if is_long {
        read_long(&mut rdr, &lower)?
    } else {
        read_wide(&mut rdr, &header, columns)?
    };
    raw.into_iter()
        .map(|(code, mut rows)| {
            rows.sort_by_key(|r| r.0);
            if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(Error::DuplicateDate {
                    series: code,
                    date: w[1].0,
                    line: w[0].2.max(w[1].2),
                });
            }
            let (dates, prices) = rows.into_iter().map(|(d, p, _)| (d, p)).unzip();
            RateSeries::new(AssetMeta::new(code), dates, prices)
        })
        .collect()
}

type RawRows = Vec<(String, Vec<(NaiveDate, f64, u64)>)>;

fn record_line(rec: &csv::StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

fn parse_date(s: &str, line: u64) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| Error::MalformedRow {
        line,
        reason: format!("bad date {s:?}: {e}"),
    })
}

fn parse_price(s: &str, column: &str, line: u64) -> Result<f64> {
    let v: f64 = s.parse().map_err(|_| Error::MalformedRow {
        line,
        reason: format!("bad price {s:?} in column {column}"),
    })?;
    if !v.is_finite() {
        return Err(Error::MalformedRow {
            line,
            reason: format!("non-finite price in column {column}"),
        });
    }
    if v <= 0.0 {
        return Err(Error::NonPositivePrice {
            line,
            column: column.to_owned(),
            value: v,
        });
    }
    Ok(v)
}

fn read_wide<R: Read>(
    rdr: &mut csv::Reader<R>,
    header: &[String],
    columns: &ColumnMap,
) -> Result<RawRows> {
    let date_col = header
        .iter()
        .position(|h| h.eq_ignore_ascii_case(&columns.date))
        .ok_or_else(|| Error::Config(format!("no date column {:?}", columns.date)))?;
    let price_cols: Vec<usize> = if columns.prices.is_empty() {
        (0..header.len()).filter(|&i| i != date_col).collect()
    } else {
        columns
            .prices
            .iter()
            .map(|c| {
                header
                    .iter()
                    .position(|h| h == c)
                    .ok_or_else(|| Error::Config(format!("no price column {c:?}")))
            })
            .collect::<Result<_>>()?
    };
    if price_cols.is_empty() {
        return Err(Error::Config("no price columns".to_owned()));
    }
    let mut out: RawRows = price_cols
        .iter()
        .map(|&i| (header[i].clone(), Vec::new()))
        .collect();
    for rec in rdr.records() {
        let rec = rec?;
        let line = record_line(&rec);
        if rec.len() != header.len() {
            return Err(Error::MalformedRow {
                line,
                reason: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        let date = parse_date(&rec[date_col], line)?;
        for (slot, &col) in price_cols.iter().enumerate() {
            let cell = &rec[col];
            if cell.is_empty() {
                continue;
            }
            let price = parse_price(cell, &header[col], line)?;
            out[slot].1.push((date, price, line));
        }
    }
    Ok(out)
}

fn read_long<R: Read>(rdr: &mut csv::Reader<R>, lower: &[String]) -> Result<RawRows> {
    let col = |name: &str| lower.iter().position(|h| h == name).expect("checked");
    let (dc, ac, pc) = (col("date"), col("asset"), col("price"));
    let mut out: RawRows = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = record_line(&rec);
        if rec.len() != 3 {
            return Err(Error::MalformedRow {
                line,
                reason: format!("expected 3 fields, found {}", rec.len()),
            });
        }
        let date = parse_date(&rec[dc], line)?;
        let asset = rec[ac].to_owned();
        if asset.is_empty() {
            return Err(Error::MalformedRow {
                line,
                reason: "empty asset code".to_owned(),
            });
        }
        if rec[pc].is_empty() {
            continue;
        }
        let price = parse_price(&rec[pc], &asset, line)?;
        let slot = *index.entry(asset.clone()).or_insert_with(|| {
            out.push((asset, Vec::new()));
            out.len() - 1
        });
        out[slot].1.push((date, price, line));
    }
    Ok(out)
}

/// Reads the sidecar metadata CSV
/// (`code,name,regime,market_class,region,gdp_per_capita`).
pub fn read_metadata(path: impl AsRef<Path>) -> Result<HashMap<String, AssetMeta>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_metadata_reader(file)
}

pub fn read_metadata_reader<R: Read>(reader: R) -> Result<HashMap<String, AssetMeta>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|h| h.to_ascii_lowercase())
        .collect();
    let find = |name: &str| header.iter().position(|h| h == name);
    let code_col =
        find("code").ok_or_else(|| Error::Config("metadata has no code column".into()))?;
    let (name_col, regime_col, market_col, region_col, gdp_col) = (
        find("name"),
        find("regime"),
        find("market_class"),
        find("region"),
        find("gdp_per_capita"),
    );
    let mut out = HashMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = record_line(&rec);
        let get = |c: Option<usize>| c.and_then(|i| rec.get(i)).unwrap_or("");
        let code = get(Some(code_col)).to_owned();
        let regime = match get(regime_col) {
            "" => None,
            s => Some(s.parse()?),
        };
        let gdp = match get(gdp_col) {
            "" => None,
            s => {
                let v: f64 = s.parse().map_err(|_| Error::MalformedRow {
                    line,
                    reason: format!("bad gdp_per_capita {s:?}"),
                })?;
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::MalformedRow {
                        line,
                        reason: format!("gdp_per_capita must be positive, got {v}"),
                    });
                }
                Some(v)
            }
        };
        let meta = AssetMeta {
            name: get(name_col).to_owned(),
            regime,
            market_class: get(market_col).parse()?,
            region: get(region_col).to_owned(),
            gdp_per_capita: gdp,
            code: code.clone(),
        };
        if out.insert(code.clone(), meta).is_some() {
            return Err(Error::MalformedRow {
                line,
                reason: format!("duplicate metadata for {code}"),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignPolicy {
    /// Keep only dates quoted by every series.
    #[default]
    Intersect,
    /// Union of dates from the latest first observation on, gaps filled with
    /// the last observed price.
    ForwardFill,
}

impl FromStr for AlignPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "intersect" => Ok(AlignPolicy::Intersect),
            "ffill" | "forward_fill" | "forward-fill" => Ok(AlignPolicy::ForwardFill),
            other => Err(Error::Config(format!("unknown align policy {other:?}"))),
        }
    }
}

impl fmt::Display for AlignPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AlignPolicy::Intersect => "intersect",
            AlignPolicy::ForwardFill => "ffill",
        })
    }
}

/// Puts every series on one date axis. The result has an empty numeraire
/// name and no orientation; callers fill those in.
pub fn align(series: &[RateSeries], policy: AlignPolicy) -> Result<Dataset> {
    if series.len() < 2 {
        return Err(Error::InvalidDataset(format!(
            "need at least 2 series, got {}",
            series.len()
        )));
    }
    if let Some(s) = series.iter().find(|s| s.len() < 3) {
        return Err(Error::InvalidDataset(format!(
            "{} has {} dates, need at least 3",
            s.code(),
            s.len()
        )));
    }
    let axis: Vec<NaiveDate> = match policy {
        AlignPolicy::Intersect => {
            let mut common: BTreeSet<NaiveDate> = series[0].dates.iter().copied().collect();
            for s in &series[1..] {
                let these: BTreeSet<NaiveDate> = s.dates.iter().copied().collect();
                common = common.intersection(&these).copied().collect();
            }
            common.into_iter().collect()
        }
        AlignPolicy::ForwardFill => {
            let start = series.iter().map(|s| s.dates[0]).max().expect("non-empty");
            let all: BTreeSet<NaiveDate> = series
                .iter()
                .flat_map(|s| s.dates.iter().copied())
                .filter(|d| *d >= start)
                .collect();
            all.into_iter().collect()
        }
    };
    if axis.len() < 3 {
        return Err(Error::EmptyIntersection { common: axis.len() });
    }
    let assets = series
        .iter()
        .map(|s| {
            let prices = match policy {
                AlignPolicy::Intersect => axis
                    .iter()
                    .map(|d| s.price_on(*d).expect("date in intersection"))
                    .collect(),
                AlignPolicy::ForwardFill => forward_fill(s, &axis),
            };
            RateSeries::new(s.meta.clone(), axis.clone(), prices)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(assets, axis, String::new(), None)
}

fn forward_fill(s: &RateSeries, axis: &[NaiveDate]) -> Vec<f64> {
    // the axis starts no earlier than the series' first observation
    let mut k = 0;
    let mut last = s.prices[0];
    axis.iter()
        .map(|d| {
            while k < s.dates.len() && s.dates[k] <= *d {
                last = s.prices[k];
                k += 1;
            }
            last
        })
        .collect()
}

/// Re-expresses every price in the bridge's numeraire.
///
/// `bridge` quotes new-numeraire units per old-numeraire unit; its code names
/// the new numeraire. The output is always numeraire-per-asset, on the dates
/// shared by the dataset and the bridge.
pub fn redenominate(ds: &Dataset, bridge: &RateSeries) -> Result<Dataset> {
    let orientation = ds.orientation.ok_or(Error::OrientationUnknown)?;
    let rows: Vec<(usize, f64)> = ds
        .date_axis
        .iter()
        .enumerate()
        .filter_map(|(i, d)| bridge.price_on(*d).map(|b| (i, b)))
        .collect();
    if rows.len() < 3 {
        return Err(Error::EmptyIntersection { common: rows.len() });
    }
    let axis: Vec<NaiveDate> = rows.iter().map(|(i, _)| ds.date_axis[*i]).collect();
    let assets = ds
        .assets
        .iter()
        .map(|a| {
            let prices = rows
                .iter()
                .map(|&(i, b)| match orientation {
                    Orientation::NumerairePerAsset => a.prices[i] * b,
                    Orientation::AssetPerNumeraire => b / a.prices[i],
                })
                .collect();
            RateSeries::new(a.meta.clone(), axis.clone(), prices)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(
        assets,
        axis,
        bridge.code().to_owned(),
        Some(Orientation::NumerairePerAsset),
    )
}

/// Canonical wide CSV: `date` then one column per asset in dataset order,
/// prices in shortest round-trip form.
pub fn write_wide_csv(ds: &Dataset) -> String {
    let mut out = String::from("date");
    for a in &ds.assets {
        out.push(',');
        out.push_str(a.code());
    }
    out.push('\n');
    for (i, d) in ds.date_axis.iter().enumerate() {
        out.push_str(&d.format("%Y-%m-%d").to_string());
        for a in &ds.assets {
            out.push(',');
            out.push_str(&a.prices[i].to_string());
        }
        out.push('\n');
    }
    out
}
