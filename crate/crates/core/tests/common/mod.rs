//! Independent reference implementations used only by tests.
#![allow(dead_code)]

use fxclust_core::{DistanceMatrix, Linkage, Metric};
use rand::Rng;

/// `sigma[t]` by summing over every `t' != t` explicitly.
pub fn naive_loo_sigma(raw: &[f64]) -> Vec<f64> {
    let n = raw.len();
    let mean = raw.iter().sum::<f64>() / n as f64;
    (0..n)
        .map(|t| {
            let s: f64 = (0..n)
                .filter(|&u| u != t)
                .map(|u| (raw[u] - mean).powi(2))
                .sum();
            (s / (n - 2) as f64).sqrt()
        })
        .collect()
}

/// Dense JS divergence written directly from the KL definition against the
/// mixture, with `0 ln 0 = 0`.
pub fn dense_js(p: &[f64], q: &[f64]) -> f64 {
    let kl = |a: &[f64], m: &[f64]| -> f64 {
        a.iter()
            .zip(m)
            .filter(|(x, _)| **x > 0.0)
            .map(|(x, y)| x * (x / y).ln())
            .sum()
    };
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    0.5 * kl(p, &m) + 0.5 * kl(q, &m)
}

/// Random probability vector of length `len` with roughly `zero_frac` empty bins.
pub fn random_probs<R: Rng>(rng: &mut R, len: usize, zero_frac: f64) -> Vec<f64> {
    loop {
        let w: Vec<f64> = (0..len)
            .map(|_| {
                if rng.random::<f64>() < zero_frac {
                    0.0
                } else {
                    rng.random::<f64>()
                }
            })
            .collect();
        let s: f64 = w.iter().sum();
        if s > 0.0 {
            return w.iter().map(|x| x / s).collect();
        }
    }
}

pub fn labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("L{i:02}")).collect()
}

pub fn random_matrix<R: Rng>(rng: &mut R, n: usize) -> DistanceMatrix {
    let lower: Vec<f64> = (0..n * (n - 1) / 2).map(|_| rng.random::<f64>()).collect();
    DistanceMatrix::from_lower_triangle(labels(n), Metric::Pearson, &lower).unwrap()
}

/// One merge of the reference clustering: node ids and height.
#[derive(Debug, Clone, Copy)]
pub struct RefMerge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
}

/// Agglomerative clustering recomputed from scratch at every step over
/// explicit member lists. Ties go to the smallest `(min id, max id)` pair.
pub fn brute_force_linkage(dm: &DistanceMatrix, linkage: Linkage) -> Vec<RefMerge> {
    let n = dm.len();
    let mut clusters: Vec<(usize, Vec<usize>)> = (0..n).map(|i| (i, vec![i])).collect();
    let mut out = Vec::new();
    for step in 0..n - 1 {
        let mut best: Option<(f64, (usize, usize), usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let cross: Vec<f64> = clusters[a]
                    .1
                    .iter()
                    .flat_map(|&i| clusters[b].1.iter().map(move |&j| (i, j)))
                    .map(|(i, j)| dm.get(i, j))
                    .collect();
                let d = match linkage {
                    Linkage::Single => cross.iter().cloned().fold(f64::INFINITY, f64::min),
                    Linkage::Complete => cross.iter().cloned().fold(0.0, f64::max),
                    Linkage::Average => cross.iter().sum::<f64>() / cross.len() as f64,
                };
                let (x, y) = (clusters[a].0, clusters[b].0);
                let ids = (x.min(y), x.max(y));
                let better = match best {
                    None => true,
                    Some((bd, bids, _, _)) => d < bd || (d == bd && ids < bids),
                };
                if better {
                    best = Some((d, ids, a, b));
                }
            }
        }
        let (height, (left, right), a, b) = best.unwrap();
        let mut members = clusters[a].1.clone();
        members.extend(clusters[b].1.iter().copied());
        clusters.remove(b);
        clusters.remove(a);
        clusters.push((n + step, members));
        out.push(RefMerge {
            left,
            right,
            height,
        });
    }
    out
}

/// Partition (sorted member lists, sorted) after applying every reference
/// merge whose height is strictly below `threshold`.
pub fn reference_partition(n: usize, merges: &[RefMerge], threshold: f64) -> Vec<Vec<usize>> {
    let mut members: Vec<Option<Vec<usize>>> = (0..n).map(|i| Some(vec![i])).collect();
    for m in merges {
        let ok = m.height < threshold
            && members.get(m.left).is_some_and(|x| x.is_some())
            && members.get(m.right).is_some_and(|x| x.is_some());
        if ok {
            let mut joined = members[m.left].take().unwrap();
            joined.extend(members[m.right].take().unwrap());
            members.push(Some(joined));
        } else {
            members.push(None);
        }
    }
    let mut parts: Vec<Vec<usize>> = members.into_iter().flatten().collect();
    for p in &mut parts {
        p.sort_unstable();
    }
    parts.sort();
    parts
}

/// Partition of a cut as sorted member lists, sorted.
pub fn cut_partition(cut: &fxclust_core::ClusterCut) -> Vec<Vec<usize>> {
    let mut parts = cut.clusters();
    for p in &mut parts {
        p.sort_unstable();
    }
    parts.sort();
    parts
}

/// Pearson correlation evaluated directly from its definition.
pub fn direct_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx.sqrt() * syy.sqrt())
}
