//! Histograms on a shared grid and the pairwise distances built on them.
//!
//! All divergences use the natural logarithm. Switching to base 2 would
//! rescale every distance and every clustering threshold.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::LN_2;
use core::fmt;
use core::str::FromStr;

use crate::returns::{moments, ReturnSeries};
use crate::{Error, Result};

/// Default bin width for normalized returns.
pub const DEFAULT_BIN_WIDTH: f64 = 0.05;

/// Upper bound of the square-root Jensen-Shannon distance, `sqrt(ln 2)`.
pub const MAX_SIMILARITY_DISTANCE: f64 = 0.832_554_611_157_697_8;

/// Discrete probability distribution on the grid `[k * w, (k + 1) * w)`,
/// anchored at zero.
///
/// Only occupied bins are stored, sorted by bin index, so sparse tails cost
/// nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    bin_width: f64,
    bins: Vec<(i64, f64)>,
}

impl Histogram {
    /// Bins `values` with `floor(x / bin_width)` and normalizes the counts.
    pub fn from_values(values: &[f64], bin_width: f64) -> Result<Self> {
        check_width(bin_width)?;
        if values.is_empty() {
            return Err(Error::SeriesTooShort { needed: 1, got: 0 });
        }
        let mut idx = Vec::with_capacity(values.len());
        for &x in values {
            if !x.is_finite() {
                return Err(Error::NonFinite);
            }
            idx.push(libm::floor(x / bin_width) as i64);
        }
        idx.sort_unstable();
        let n = values.len() as f64;
        let mut bins: Vec<(i64, f64)> = Vec::new();
        let mut start = 0;
        while start < idx.len() {
            let k = idx[start];
            let mut end = start + 1;
            while end < idx.len() && idx[end] == k {
                end += 1;
            }
            bins.push((k, (end - start) as f64 / n));
            start = end;
        }
        Ok(Histogram { bin_width, bins })
    }

    /// Builds a histogram from explicit probabilities of consecutive bins
    /// starting at bin `first`. Zero entries are dropped.
    pub fn from_probabilities(bin_width: f64, first: i64, probs: &[f64]) -> Result<Self> {
        check_width(bin_width)?;
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::NonFinite);
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidMatrix(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        let bins = probs
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(i, p)| (first + i as i64, *p))
            .collect();
        Ok(Histogram { bin_width, bins })
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    /// Occupied bins as `(index, probability)`, ascending by index.
    pub fn bins(&self) -> &[(i64, f64)] {
        &self.bins
    }

    /// Probability of bin `k` (zero when unoccupied).
    pub fn probability(&self, k: i64) -> f64 {
        self.bins
            .binary_search_by_key(&k, |b| b.0)
            .map(|i| self.bins[i].1)
            .unwrap_or(0.0)
    }

    /// First and last occupied bin.
    pub fn support(&self) -> Option<(i64, i64)> {
        Some((self.bins.first()?.0, self.bins.last()?.0))
    }

    pub fn total(&self) -> f64 {
        self.bins.iter().map(|b| b.1).sum()
    }

    fn same_grid(&self, other: &Histogram) -> Result<()> {
        if self.bin_width.to_bits() == other.bin_width.to_bits() {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

fn check_width(w: f64) -> Result<()> {
    if w.is_finite() && w > 0.0 {
        Ok(())
    } else {
        Err(Error::NonPositiveBinWidth)
    }
}

/// Walks the union of occupied bins of two histograms in ascending order.
fn merge_bins<'a>(p: &'a Histogram, q: &'a Histogram) -> impl Iterator<Item = (f64, f64)> + 'a {
    let (a, b) = (&p.bins, &q.bins);
    let (mut i, mut j) = (0, 0);
    core::iter::from_fn(move || match (a.get(i), b.get(j)) {
        (Some(x), Some(y)) if x.0 == y.0 => {
            i += 1;
            j += 1;
            Some((x.1, y.1))
        }
        (Some(x), Some(y)) if x.0 < y.0 => {
            i += 1;
            Some((x.1, 0.0))
        }
        (Some(_), Some(y)) => {
            j += 1;
            Some((0.0, y.1))
        }
        (Some(x), None) => {
            i += 1;
            Some((x.1, 0.0))
        }
        (None, Some(y)) => {
            j += 1;
            Some((0.0, y.1))
        }
        (None, None) => None,
    })
}

/// `sum_x p(x) ln(p(x) / q(x))` with `0 ln(0 / q) = 0`.
///
/// Returns [`Error::UndefinedKl`] when `p` has mass on a bin where `q` has
/// none.
pub fn kl_divergence(p: &Histogram, q: &Histogram) -> Result<f64> {
    p.same_grid(q)?;
    let mut sum = 0.0;
    for (pi, qi) in merge_bins(p, q) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Err(Error::UndefinedKl);
        }
        sum += pi * libm::log(pi / qi);
    }
    Ok(sum.max(0.0))
}

/// KL divergence after adding `epsilon` to every bin occupied by either
/// histogram and renormalizing both.
pub fn kl_divergence_smoothed(p: &Histogram, q: &Histogram, epsilon: f64) -> Result<f64> {
    p.same_grid(q)?;
    if epsilon.is_nan() || epsilon <= 0.0 || !epsilon.is_finite() {
        return Err(Error::NonFinite);
    }
    let pairs: Vec<(f64, f64)> = merge_bins(p, q).collect();
    let extra = epsilon * pairs.len() as f64;
    let (pz, qz) = (1.0 + extra, 1.0 + extra);
    let sum: f64 = pairs
        .iter()
        .map(|(pi, qi)| {
            let a = (pi + epsilon) / pz;
            let b = (qi + epsilon) / qz;
            a * libm::log(a / b)
        })
        .sum();
    Ok(sum.max(0.0))
}

/// Per-bin contribution `p ln(2p / (p + q)) + q ln(2q / (p + q))`.
///
/// Written in terms of `d = (p - q) / (p + q)` so that swapping `p` and `q`
/// swaps the two summands exactly and near-equal bins keep their precision.
fn js_term(p: f64, q: f64) -> f64 {
    if p == 0.0 {
        q * LN_2
    } else if q == 0.0 {
        p * LN_2
    } else {
        let d = (p - q) / (p + q);
        p * libm::log1p(d) + q * libm::log1p(-d)
    }
}

/// `JS(p, q) = KL(p, m) / 2 + KL(q, m) / 2` with `m = (p + q) / 2`.
///
/// Always finite, in `[0, ln 2]`, and exactly symmetric.
pub fn js_divergence(p: &Histogram, q: &Histogram) -> Result<f64> {
    p.same_grid(q)?;
    let sum: f64 = merge_bins(p, q).map(|(a, b)| js_term(a, b)).sum();
    Ok((0.5 * sum).clamp(0.0, LN_2))
}

/// Square root of the Jensen-Shannon divergence, a metric on distributions.
pub fn similarity_distance(p: &Histogram, q: &Histogram) -> Result<f64> {
    js_divergence(p, q).map(libm::sqrt)
}

/// Relative kurtosis difference `|a - b| / ((a + b) / 2)`.
pub fn kurtosis_distance(k_i: f64, k_j: f64) -> Result<f64> {
    if !(k_i > 0.0 && k_j > 0.0) || !k_i.is_finite() || !k_j.is_finite() {
        return Err(Error::NonPositiveKurtosis);
    }
    Ok((k_i - k_j).abs() / ((k_i + k_j) / 2.0))
}

/// Pearson correlation of two equal-length series.
pub fn pearson_correlation(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 3 {
        return Err(Error::SeriesTooShort {
            needed: 3,
            got: x.len(),
        });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxx += da * da;
        syy += db * db;
        sxy += da * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateSeries);
    }
    Ok((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// `sqrt(2 (1 - C))` where `C` is the Pearson correlation; in `[0, 2]`.
pub fn pearson_distance(r_i: &[f64], r_j: &[f64]) -> Result<f64> {
    let c = pearson_correlation(r_i, r_j)?;
    Ok(libm::sqrt(2.0 * (1.0 - c)))
}

/// Which distance a [`DistanceMatrix`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    /// Square-root Jensen-Shannon divergence between return histograms.
    JsSqrt,
    /// Relative difference of (non-excess) kurtosis.
    KurtosisDelta,
    /// `sqrt(2 (1 - C))` of normalized returns.
    Pearson,
    /// Cophenetic distances read off a dendrogram.
    Cophenetic,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::JsSqrt => "js_sqrt",
            Metric::KurtosisDelta => "kurtosis_delta",
            Metric::Pearson => "pearson",
            Metric::Cophenetic => "cophenetic",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "js_sqrt" | "js" => Ok(Metric::JsSqrt),
            "kurtosis_delta" | "kurtosis" => Ok(Metric::KurtosisDelta),
            "pearson" => Ok(Metric::Pearson),
            "cophenetic" => Ok(Metric::Cophenetic),
            other => Err(Error::InvalidMatrix(format!("unknown metric {other:?}"))),
        }
    }
}

/// Symmetric matrix of pairwise distances with a zero diagonal, stored
/// densely in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    labels: Vec<String>,
    metric: Metric,
    values: Vec<f64>,
}

impl DistanceMatrix {
    /// Validates and wraps a dense row-major `n x n` matrix.
    pub fn new(labels: Vec<String>, metric: Metric, values: Vec<f64>) -> Result<Self> {
        let n = labels.len();
        if values.len() != n * n {
            return Err(Error::InvalidMatrix(format!(
                "{} labels but {} entries",
                n,
                values.len()
            )));
        }
        let dm = DistanceMatrix {
            labels,
            metric,
            values,
        };
        dm.validate()?;
        Ok(dm)
    }

    /// Builds a matrix from the strict lower triangle, row by row:
    /// `(1,0), (2,0), (2,1), (3,0), ...`.
    pub fn from_lower_triangle(labels: Vec<String>, metric: Metric, lower: &[f64]) -> Result<Self> {
        let n = labels.len();
        if lower.len() != n * n.saturating_sub(1) / 2 {
            return Err(Error::InvalidMatrix(format!(
                "{} labels need {} lower-triangle entries, got {}",
                n,
                n * n.saturating_sub(1) / 2,
                lower.len()
            )));
        }
        let mut values = alloc::vec![0.0; n * n];
        let mut it = lower.iter();
        for i in 1..n {
            for j in 0..i {
                let v = *it.next().unwrap();
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        Self::new(labels, metric, values)
    }

    /// Fills every pair `i > j` with `f(i, j)` and mirrors it.
    pub fn try_from_fn<F>(labels: Vec<String>, metric: Metric, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> Result<f64>,
    {
        let n = labels.len();
        let mut values = alloc::vec![0.0; n * n];
        for i in 1..n {
            for j in 0..i {
                let v = f(i, j)?;
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        Self::new(labels, metric, values)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.labels.len();
        if n < 2 {
            return Err(Error::InvalidMatrix("need at least 2 labels".to_owned()));
        }
        for i in 0..n {
            if self.values[i * n + i] != 0.0 {
                return Err(Error::InvalidMatrix(format!("nonzero diagonal at {i}")));
            }
            for j in 0..i {
                let v = self.values[i * n + j];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidMatrix(format!(
                        "entry ({i}, {j}) = {v} is negative or not finite"
                    )));
                }
                if v.to_bits() != self.values[j * n + i].to_bits() {
                    return Err(Error::InvalidMatrix(format!("asymmetric at ({i}, {j})")));
                }
                if self.metric == Metric::JsSqrt && v > MAX_SIMILARITY_DISTANCE + 1e-12 {
                    return Err(Error::InvalidMatrix(format!(
                        "entry ({i}, {j}) = {v} exceeds sqrt(ln 2)"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.labels.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.labels.len();
        &self.values[i * n..(i + 1) * n]
    }

    /// Strict lower triangle in the order used by
    /// [`DistanceMatrix::from_lower_triangle`].
    pub fn lower_triangle(&self) -> Vec<f64> {
        let n = self.labels.len();
        let mut out = Vec::with_capacity(n * (n - 1) / 2);
        for i in 1..n {
            out.extend_from_slice(&self.values[i * n..i * n + i]);
        }
        out
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Same distances with rows and columns reordered so that new index `k`
    /// is old index `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let n = self.len();
        if order.len() != n {
            return Err(Error::LengthMismatch {
                left: order.len(),
                right: n,
            });
        }
        let labels = order.iter().map(|&i| self.labels[i].clone()).collect();
        let mut values = alloc::vec![0.0; n * n];
        for (a, &i) in order.iter().enumerate() {
            for (b, &j) in order.iter().enumerate() {
                values[a * n + b] = self.get(i, j);
            }
        }
        Self::new(labels, self.metric, values)
    }
}

/// Pairwise distance matrix of return series under `metric`.
///
/// `JsSqrt` builds one histogram per series on the shared zero-anchored grid
/// of width `bin_width`; `KurtosisDelta` uses the kurtosis of the normalized
/// returns; `Pearson` correlates the normalized returns.
pub fn distance_matrix(
    returns: &[ReturnSeries],
    metric: Metric,
    bin_width: f64,
) -> Result<DistanceMatrix> {
    if returns.len() < 2 {
        return Err(Error::SeriesTooShort {
            needed: 2,
            got: returns.len(),
        });
    }
    let labels: Vec<String> = returns.iter().map(|r| r.code.clone()).collect();
    match metric {
        Metric::JsSqrt => {
            let hists = returns
                .iter()
                .map(|r| Histogram::from_values(&r.normalized, bin_width))
                .collect::<Result<Vec<_>>>()?;
            DistanceMatrix::try_from_fn(labels, metric, |i, j| {
                similarity_distance(&hists[i], &hists[j])
            })
        }
        Metric::KurtosisDelta => {
            let kurt = returns
                .iter()
                .map(|r| moments(&r.normalized).map(|m| m.kurtosis))
                .collect::<Result<Vec<_>>>()?;
            DistanceMatrix::try_from_fn(labels, metric, |i, j| kurtosis_distance(kurt[i], kurt[j]))
        }
        Metric::Pearson => DistanceMatrix::try_from_fn(labels, metric, |i, j| {
            pearson_distance(&returns[i].normalized, &returns[j].normalized)
        }),
        Metric::Cophenetic => Err(Error::InvalidMatrix(
            "cophenetic distances come from a dendrogram, not from returns".to_owned(),
        )),
    }
}
