//! Log returns, leave-one-out normalization and distribution moments.

use alloc::string::String;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Smallest leave-one-out volatility accepted before a series is declared
/// degenerate.
pub const DEFAULT_SIGMA_FLOOR: f64 = 1e-12;

/// Returns of one asset: raw log returns, their full-sample mean, the
/// per-time leave-one-out volatility and the normalized returns.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    pub code: String,
    pub raw: Vec<f64>,
    pub mean: f64,
    pub loo_sigma: Vec<f64>,
    pub normalized: Vec<f64>,
}

impl ReturnSeries {
    /// Normalizes an already computed raw return series.
    pub fn from_raw(code: impl Into<String>, raw: Vec<f64>) -> Result<Self> {
        let (mean, loo_sigma) = loo_volatility(&raw)?;
        let normalized = raw
            .iter()
            .zip(&loo_sigma)
            .map(|(x, s)| (x - mean) / s)
            .collect();
        Ok(ReturnSeries {
            code: code.into(),
            raw,
            mean,
            loo_sigma,
            normalized,
        })
    }

    /// Log returns over `dt_steps` followed by normalization.
    pub fn from_prices(code: impl Into<String>, prices: &[f64], dt_steps: usize) -> Result<Self> {
        Self::from_raw(code, log_returns(prices, dt_steps)?)
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }
}

/// `ln P[t + dt] - ln P[t]` for every `t` where both prices exist.
pub fn log_returns(prices: &[f64], dt_steps: usize) -> Result<Vec<f64>> {
    if dt_steps == 0 || prices.len() <= dt_steps {
        return Err(Error::SeriesTooShort {
            needed: dt_steps.max(1) + 1,
            got: prices.len(),
        });
    }
    if prices.iter().any(|p| !p.is_finite() || *p <= 0.0) {
        return Err(Error::NonFinite);
    }
    let logs: Vec<f64> = prices.iter().map(|p| libm::log(*p)).collect();
    Ok(logs
        .iter()
        .zip(&logs[dt_steps..])
        .map(|(a, b)| b - a)
        .collect())
}

/// Full-sample mean and leave-one-out volatility with the default floor.
pub fn loo_volatility(raw: &[f64]) -> Result<(f64, Vec<f64>)> {
    loo_volatility_with_floor(raw, DEFAULT_SIGMA_FLOOR)
}

/// `sigma[t] = sqrt( sum_{t' != t} (raw[t'] - mean)^2 / (T - 2) )`.
///
/// The mean is the full-sample mean, not a leave-one-out mean. The sum is
/// evaluated in O(T) as the total squared deviation minus the self term.
pub fn loo_volatility_with_floor(raw: &[f64], floor: f64) -> Result<(f64, Vec<f64>)> {
    let n = raw.len();
    if n < 3 {
        return Err(Error::SeriesTooShort { needed: 3, got: n });
    }
    if raw.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let mean = raw.iter().sum::<f64>() / n as f64;
    let total: f64 = raw.iter().map(|x| (x - mean) * (x - mean)).sum();
    let denom = (n - 2) as f64;
    let mut sigma = Vec::with_capacity(n);
    for x in raw {
        let d = x - mean;
        let rest = (total - d * d).max(0.0);
        let s = libm::sqrt(rest / denom);
        if s.is_nan() || s < floor || s == 0.0 {
            return Err(Error::DegenerateSeries);
        }
        sigma.push(s);
    }
    Ok((mean, sigma))
}

/// `(raw[t] - mean) / sigma[t]` using [`loo_volatility`].
pub fn normalize(raw: &[f64]) -> Result<Vec<f64>> {
    let (mean, sigma) = loo_volatility(raw)?;
    Ok(raw
        .iter()
        .zip(&sigma)
        .map(|(x, s)| (x - mean) / s)
        .collect())
}

/// Population moments about the sample mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub variance: f64,
    pub skewness: f64,
    /// Non-excess kurtosis `m4 / m2^2` (3 for a normal distribution).
    pub kurtosis: f64,
}

pub fn moments(values: &[f64]) -> Result<Moments> {
    let n = values.len();
    if n < 4 {
        return Err(Error::SeriesTooShort { needed: 4, got: n });
    }
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in values {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    // relative to the scale of the data, so constant series with rounding
    // noise in the mean are still caught
    let scale = values.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if m2 <= (scale * 1e-14) * (scale * 1e-14) || m2 == 0.0 {
        return Err(Error::DegenerateSeries);
    }
    Ok(Moments {
        variance: m2,
        skewness: m3 / (m2 * libm::sqrt(m2)),
        kurtosis: m4 / (m2 * m2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn constant_prices_give_zero_returns() {
        assert_eq!(log_returns(&[3.5, 3.5, 3.5], 1).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn exact_log_returns() {
        let e = core::f64::consts::E;
        let r = log_returns(&[1.0, e, e * e], 1).unwrap();
        assert!((r[0] - 1.0).abs() < 1e-15 && (r[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn one_percent_move() {
        // ln(1.02) to 20 digits: 0.019802627296179713026
        let r = log_returns(&[100.0, 102.0], 1).unwrap();
        assert!((r[0] - 0.019_802_627_296_179_713).abs() < 1e-15);
    }

    #[test]
    fn multi_step_returns() {
        let r = log_returns(&[1.0, 2.0, 4.0, 8.0], 2).unwrap();
        assert_eq!(r.len(), 2);
        assert!((r[0] - libm::log(4.0)).abs() < 1e-15);
    }

    #[test]
    fn too_short_or_bad_prices() {
        assert!(matches!(
            log_returns(&[1.0], 1),
            Err(Error::SeriesTooShort { .. })
        ));
        assert!(matches!(
            log_returns(&[1.0, 2.0], 2),
            Err(Error::SeriesTooShort { .. })
        ));
        assert!(log_returns(&[1.0, 2.0], 0).is_err());
        assert_eq!(log_returns(&[1.0, -2.0], 1), Err(Error::NonFinite));
    }

    #[test]
    fn hand_case_one_two_three() {
        let (mean, sigma) = loo_volatility(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(mean, 2.0);
        assert_eq!(sigma, vec![1.0, libm::sqrt(2.0), 1.0]);
        assert_eq!(normalize(&[1.0, 2.0, 3.0]).unwrap(), vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn constant_raw_is_degenerate() {
        assert_eq!(
            loo_volatility(&[0.2, 0.2, 0.2]),
            Err(Error::DegenerateSeries)
        );
        assert!(matches!(
            loo_volatility(&[1.0, 2.0]),
            Err(Error::SeriesTooShort { .. })
        ));
    }

    #[test]
    fn antisymmetric_input_gives_antisymmetric_output() {
        let x = 0.37;
        let r = normalize(&[-x, 0.0, x]).unwrap();
        assert_eq!(r[0], -r[2]);
        assert_eq!(r[1], 0.0);
    }

    #[test]
    fn two_point_distribution_moments() {
        let v: Vec<f64> = (0..100)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let m = moments(&v).unwrap();
        assert_eq!(m.variance, 1.0);
        assert_eq!(m.skewness, 0.0);
        assert_eq!(m.kurtosis, 1.0);
    }

    #[test]
    fn outlier_raises_kurtosis() {
        let mut v: Vec<f64> = (0..50).map(|i| libm::sin(i as f64)).collect();
        let before = moments(&v).unwrap().kurtosis;
        v.push(25.0);
        assert!(moments(&v).unwrap().kurtosis > before);
    }

    #[test]
    fn moments_need_four_values() {
        assert!(matches!(
            moments(&[1.0, 2.0, 3.0]),
            Err(Error::SeriesTooShort { .. })
        ));
        assert_eq!(moments(&[1.0; 8]), Err(Error::DegenerateSeries));
    }
}
