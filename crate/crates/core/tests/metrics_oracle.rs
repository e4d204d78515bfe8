#![allow(clippy::excessive_precision)]

mod common;

use std::f64::consts::LN_2;

use fxclust_core::metrics::{pearson_correlation, MAX_SIMILARITY_DISTANCE};
use fxclust_core::{
    distance_matrix, js_divergence, kl_divergence, pearson_distance, similarity_distance,
    Histogram, Metric, ReturnSeries, DEFAULT_BIN_WIDTH,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};

const W: f64 = DEFAULT_BIN_WIDTH;

fn hist(p: &[f64]) -> Histogram {
    Histogram::from_probabilities(W, -3, p).unwrap()
}

#[test]
fn hand_values_against_high_precision() {
    // mpmath, 30 digits
    let kl = kl_divergence(&hist(&[0.5, 0.5]), &hist(&[0.25, 0.75])).unwrap();
    assert!((kl - 0.143_841_036_225_890_463_7).abs() < 1e-9);
    let js = js_divergence(&hist(&[1.0, 0.0]), &hist(&[0.5, 0.5])).unwrap();
    assert!((js - 0.215_761_554_338_835_695_6).abs() < 1e-9);
    let d = similarity_distance(&hist(&[1.0, 0.0]), &hist(&[0.5, 0.5])).unwrap();
    assert!((d - 0.464_501_404_022_459_005_9).abs() < 1e-9);
}

#[test]
fn gaussian_bin_zero_matches_cdf() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let v: Vec<f64> = (0..1_000_000)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let h = Histogram::from_values(&v, W).unwrap();
    // Phi(0.05) - Phi(0)
    let expected = 0.019_938_805_838_372_46;
    assert!(((h.probability(0) - expected) / expected).abs() < 0.02);
    assert!((h.total() - 1.0).abs() < 1e-12);
}

#[test]
fn js_matches_dense_oracle_and_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..2000 {
        let len = rng.random_range(1..30);
        let p = common::random_probs(&mut rng, len, 0.3);
        let q = common::random_probs(&mut rng, len, 0.3);
        let js = js_divergence(&hist(&p), &hist(&q)).unwrap();
        assert!((js - common::dense_js(&p, &q)).abs() < 1e-12);
        assert!((0.0..=LN_2).contains(&js));
        assert_eq!(js, js_divergence(&hist(&q), &hist(&p)).unwrap());
    }
}

#[test]
fn triangle_inequality_on_random_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10_000 {
        let len = rng.random_range(2..16);
        let [p, q, s] = [0, 1, 2].map(|_| hist(&common::random_probs(&mut rng, len, 0.25)));
        let pq = similarity_distance(&p, &q).unwrap();
        let qs = similarity_distance(&q, &s).unwrap();
        let ps = similarity_distance(&p, &s).unwrap();
        assert!(ps <= pq + qs + 1e-12);
    }
}

#[test]
fn kl_is_non_negative_and_zero_on_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..2000 {
        let len = rng.random_range(1..20);
        let p = common::random_probs(&mut rng, len, 0.3);
        let q = common::random_probs(&mut rng, len, 0.0);
        assert!(kl_divergence(&hist(&p), &hist(&q)).unwrap() >= 0.0);
        assert_eq!(kl_divergence(&hist(&p), &hist(&p)).unwrap(), 0.0);
    }
}

#[test]
fn independent_noise_has_distance_near_sqrt_two() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x: Vec<f64> = (0..10_000)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let y: Vec<f64> = (0..10_000)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let d = pearson_distance(&x, &y).unwrap();
    assert!((d - 2f64.sqrt()).abs() < 0.02, "{d}");
}

fn random_returns(rng: &mut ChaCha8Rng, n: usize, len: usize) -> Vec<ReturnSeries> {
    let t = StudentT::new(4.0).unwrap();
    (0..n)
        .map(|i| {
            let raw: Vec<f64> = (0..len).map(|_| 0.01 * t.sample(rng)).collect();
            ReturnSeries::from_raw(format!("A{i:02}"), raw).unwrap()
        })
        .collect()
}

#[test]
fn matrix_matches_per_pair_calls() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let rs = random_returns(&mut rng, 3, 400);
    let js = distance_matrix(&rs, Metric::JsSqrt, W).unwrap();
    let pe = distance_matrix(&rs, Metric::Pearson, W).unwrap();
    let hs: Vec<Histogram> = rs
        .iter()
        .map(|r| Histogram::from_values(&r.normalized, W).unwrap())
        .collect();
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                assert_eq!(js.get(i, j), similarity_distance(&hs[i], &hs[j]).unwrap());
                assert_eq!(
                    pe.get(i, j),
                    pearson_distance(&rs[i].normalized, &rs[j].normalized).unwrap()
                );
            }
        }
    }
}

#[test]
fn full_scale_matrix_is_valid() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let rs = random_returns(&mut rng, 75, 7416);
    let dm = distance_matrix(&rs, Metric::JsSqrt, W).unwrap();
    assert_eq!(dm.lower_triangle().len(), 2775);
    for i in 0..75 {
        assert_eq!(dm.get(i, i), 0.0);
        for j in 0..75 {
            assert_eq!(dm.get(i, j), dm.get(j, i));
            assert!(dm.get(i, j) <= MAX_SIMILARITY_DISTANCE + 1e-12);
        }
    }
}

#[test]
fn js_matrix_ignores_price_units() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let prices: Vec<Vec<f64>> = (0..4)
        .map(|_| {
            let mut p = 1.0;
            (0..300)
                .map(|_| {
                    p *= (0.01 * rng.random_range(-1.0..1.0f64)).exp();
                    p
                })
                .collect()
        })
        .collect();
    let build = |k: f64| {
        let rs: Vec<ReturnSeries> = prices
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let scaled: Vec<f64> = p.iter().map(|x| x * k).collect();
                ReturnSeries::from_prices(format!("A{i}"), &scaled, 1).unwrap()
            })
            .collect();
        distance_matrix(&rs, Metric::JsSqrt, W).unwrap()
    };
    let (a, b) = (build(1.0), build(1000.0));
    // bin edges may shift by rounding, so compare through the distances
    for (x, y) in a.lower_triangle().iter().zip(b.lower_triangle()) {
        assert!((x - y).abs() < 0.05, "{x} vs {y}");
    }
}

proptest! {
    #[test]
    fn pearson_ignores_positive_affine_maps(
        x in prop::collection::vec(-5.0f64..5.0, 5..50),
        seed in any::<u64>(),
        a in 0.01f64..100.0,
        b in -50.0f64..50.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<f64> = x.iter().map(|v| v + rng.random_range(-2.0..2.0)).collect();
        let moved: Vec<f64> = y.iter().map(|v| a * v + b).collect();
        prop_assume!(pearson_correlation(&x, &y).is_ok());
        let d0 = pearson_distance(&x, &y).unwrap();
        let d1 = pearson_distance(&x, &moved).unwrap();
        prop_assert!((d0 - d1).abs() < 1e-9);
    }
}
