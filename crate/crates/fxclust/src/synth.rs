//! Seeded synthetic price panels for demos, benchmarks and tests.

use chrono::{Days, NaiveDate};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StudentT};

use crate::ingest::{AssetMeta, RateSeries};

/// `n` consecutive calendar days starting 2000-01-01.
pub fn daily_dates(n: usize) -> Vec<NaiveDate> {
    let start = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date");
    (0..n as u64)
        .map(|k| start.checked_add_days(Days::new(k)).expect("date in range"))
        .collect()
}

/// Prices `p0 * exp(cumsum(returns))`, with `p0` first.
pub fn prices_from_returns(p0: f64, returns: &[f64]) -> Vec<f64> {
    let mut log_p = p0.ln();
    let mut out = Vec::with_capacity(returns.len() + 1);
    out.push(p0);
    for r in returns {
        log_p += r;
        out.push(log_p.exp());
    }
    out
}

pub fn asset_code(i: usize) -> String {
    format!("S{i:03}")
}

/// Independent random walks whose innovations are Student-t with degrees of
/// freedom spread between 2.5 and 12.5, so tail weights differ across assets.
pub fn random_walk_panel(n_assets: usize, n_dates: usize, seed: u64) -> Vec<RateSeries> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dates = daily_dates(n_dates);
    (0..n_assets)
        .map(|i| {
            let df = 2.5 + 10.0 * i as f64 / n_assets.max(1) as f64;
            let t = StudentT::new(df).expect("positive dof");
            let vol = rng.random_range(0.002..0.02);
            let p0 = rng.random_range(0.01..200.0);
            let returns: Vec<f64> = (1..n_dates).map(|_| vol * t.sample(&mut rng)).collect();
            RateSeries::new(
                AssetMeta::new(asset_code(i)),
                dates.clone(),
                prices_from_returns(p0, &returns),
            )
            .expect("synthetic series is valid")
        })
        .collect()
}

/// Two groups of `group_size` assets. Group 0 has Gaussian returns, group 1
/// Student-t returns with 3 degrees of freedom. Every member of a group is an
/// independent random time-shuffle of one shared group sample, so members
/// share the same return distribution exactly while their day-to-day moves
/// are unrelated. Returns the series and the planted group of each.
pub fn planted_panel(
    group_size: usize,
    n_dates: usize,
    seed: u64,
) -> (Vec<RateSeries>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dates = daily_dates(n_dates);
    let normal = Normal::new(0.0, 0.01).expect("valid normal");
    let heavy = StudentT::new(3.0).expect("positive dof");
    let base: [Vec<f64>; 2] = [
        (1..n_dates).map(|_| normal.sample(&mut rng)).collect(),
        (1..n_dates)
            .map(|_| 0.01 * heavy.sample(&mut rng))
            .collect(),
    ];
    let mut series = Vec::new();
    let mut truth = Vec::new();
    for (g, sample) in base.iter().enumerate() {
        for _ in 0..group_size {
            let mut r = sample.clone();
            r.shuffle(&mut rng);
            let i = series.len();
            series.push(
                RateSeries::new(
                    AssetMeta::new(asset_code(i)),
                    dates.clone(),
                    prices_from_returns(1.0, &r),
                )
                .expect("synthetic series is valid"),
            );
            truth.push(g);
        }
    }
    (series, truth)
}
