//! Agglomerative hierarchical clustering and dendrogram analysis.
//!
//! Node ids follow the usual convention: `0..n` are leaves in label order and
//! `n + k` is the cluster created by the `k`-th merge.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::metrics::{pearson_correlation, DistanceMatrix, Metric};
use crate::{Error, Result};

/// Inter-cluster distance rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Linkage {
    /// Minimum distance between any two members.
    Single,
    /// Maximum distance between any two members.
    Complete,
    /// Unweighted mean over all cross pairs (UPGMA).
    Average,
}

impl Linkage {
    pub const ALL: [Linkage; 3] = [Linkage::Single, Linkage::Complete, Linkage::Average];

    pub fn as_str(self) -> &'static str {
        match self {
            Linkage::Single => "single",
            Linkage::Complete => "complete",
            Linkage::Average => "average",
        }
    }

    /// Lance-Williams update: distance from cluster `k` to the union of `i`
    /// and `j`.
    fn update(self, d_ki: f64, d_kj: f64, size_i: usize, size_j: usize) -> f64 {
        match self {
            Linkage::Single => d_ki.min(d_kj),
            Linkage::Complete => d_ki.max(d_kj),
            Linkage::Average => {
                let (si, sj) = (size_i as f64, size_j as f64);
                (si * d_ki + sj * d_kj) / (si + sj)
            }
        }
    }
}

impl fmt::Display for Linkage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Linkage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(Linkage::Single),
            "complete" => Ok(Linkage::Complete),
            "average" => Ok(Linkage::Average),
            other => Err(Error::InvalidMatrix(format!("unknown linkage {other:?}"))),
        }
    }
}

/// One agglomeration step. `left < right` for merges produced by
/// [`agglomerate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
}

/// Binary merge tree over `n` labelled leaves with `n - 1` merges.
#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    labels: Vec<String>,
    merges: Vec<Merge>,
}

impl Dendrogram {
    /// Checks that every merge refers to existing nodes, that no node is
    /// used twice, and that heights are finite and non-negative.
    pub fn new(labels: Vec<String>, merges: Vec<Merge>) -> Result<Self> {
        let n = labels.len();
        if n < 2 {
            return Err(Error::InvalidMatrix(
                "dendrogram needs at least 2 leaves".to_owned(),
            ));
        }
        if merges.len() != n - 1 {
            return Err(Error::InvalidMatrix(format!(
                "{} leaves need {} merges, got {}",
                n,
                n - 1,
                merges.len()
            )));
        }
        let mut used = vec![false; 2 * n - 1];
        for (k, m) in merges.iter().enumerate() {
            let limit = n + k;
            for child in [m.left, m.right] {
                if child >= limit {
                    return Err(Error::InvalidMatrix(format!(
                        "merge {k} refers to node {child} which does not exist yet"
                    )));
                }
                if core::mem::replace(&mut used[child], true) {
                    return Err(Error::InvalidMatrix(format!(
                        "node {child} is merged twice"
                    )));
                }
            }
            if m.left == m.right {
                return Err(Error::InvalidMatrix(format!(
                    "merge {k} joins a node with itself"
                )));
            }
            if !m.height.is_finite() || m.height < 0.0 {
                return Err(Error::InvalidMatrix(format!(
                    "merge {k} has height {}",
                    m.height
                )));
            }
        }
        Ok(Dendrogram { labels, merges })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    /// Number of leaves.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn root(&self) -> usize {
        2 * self.labels.len() - 2
    }

    pub fn max_height(&self) -> f64 {
        self.merges.iter().fold(0.0, |a, m| a.max(m.height))
    }

    /// Height of node `id`; leaves sit at zero.
    pub fn node_height(&self, id: usize) -> f64 {
        let n = self.labels.len();
        if id < n {
            0.0
        } else {
            self.merges[id - n].height
        }
    }

    /// Children of an internal node, `None` for leaves.
    pub fn children(&self, id: usize) -> Option<(usize, usize)> {
        let n = self.labels.len();
        (id >= n).then(|| {
            let m = self.merges[id - n];
            (m.left, m.right)
        })
    }

    /// Leaves under `id`, left subtree first.
    pub fn leaves_under(&self, id: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(node) = stack.pop() {
            match self.children(node) {
                Some((l, r)) => {
                    stack.push(r);
                    stack.push(l);
                }
                None => out.push(node),
            }
        }
        out
    }

    /// Leaves in drawing order (depth first, left before right).
    pub fn leaf_order(&self) -> Vec<usize> {
        self.leaves_under(self.root())
    }

    /// True when merge heights never decrease in merge order.
    pub fn is_monotone(&self) -> bool {
        self.merges.windows(2).all(|w| w[0].height <= w[1].height)
    }

    /// Same topology with every height replaced by `f(height)`.
    pub fn map_heights(&self, mut f: impl FnMut(f64) -> f64) -> Result<Self> {
        let merges = self
            .merges
            .iter()
            .map(|m| Merge {
                height: f(m.height),
                ..*m
            })
            .collect();
        Self::new(self.labels.clone(), merges)
    }
}

/// Agglomerative clustering of `dm` under `linkage`.
///
/// Each step merges the closest pair of active clusters. Ties go to the pair
/// with the lexicographically smallest `(min node id, max node id)`. The
/// inter-cluster distances are maintained with the Lance-Williams update, so
/// the whole run is O(n^3).
pub fn agglomerate(dm: &DistanceMatrix, linkage: Linkage) -> Result<Dendrogram> {
    dm.validate()?;
    let n = dm.len();
    let mut dist: Vec<f64> = (0..n).flat_map(|i| dm.row(i).iter().copied()).collect();
    let mut node: Vec<usize> = (0..n).collect();
    let mut size = vec![1usize; n];
    let mut active: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n - 1);
    let mut last_height = 0.0f64;

    for step in 0..n - 1 {
        let mut best: Option<(f64, (usize, usize), usize, usize)> = None;
        for (ai, &si) in active.iter().enumerate() {
            for &sj in &active[ai + 1..] {
                let v = dist[si * n + sj];
                let ids = order_pair(node[si], node[sj]);
                let better = match best {
                    None => true,
                    Some((bv, bids, _, _)) => v < bv || (v == bv && ids < bids),
                };
                if better {
                    best = Some((v, ids, si, sj));
                }
            }
        }
        let (height, (left, right), si, sj) = best.expect("at least two active clusters");
        let (keep, drop) = (si.min(sj), si.max(sj));
        for &sk in &active {
            if sk == keep || sk == drop {
                continue;
            }
            let v = linkage.update(
                dist[sk * n + keep],
                dist[sk * n + drop],
                size[keep],
                size[drop],
            );
            dist[sk * n + keep] = v;
            dist[keep * n + sk] = v;
        }
        size[keep] += size[drop];
        node[keep] = n + step;
        active.retain(|&s| s != drop);
        // the average update can round a hair below the previous height
        last_height = last_height.max(height);
        merges.push(Merge {
            left,
            right,
            height: last_height,
        });
    }
    Dendrogram::new(dm.labels().to_vec(), merges)
}

fn order_pair(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Flat partition obtained by cutting a dendrogram at a threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterCut {
    pub threshold: f64,
    pub labels: Vec<String>,
    /// Cluster id per leaf; ids are numbered by first appearance in label
    /// order.
    pub assignment: Vec<usize>,
    pub n_clusters_ge2: usize,
    pub n_isolated: usize,
}

impl ClusterCut {
    pub fn n_clusters(&self) -> usize {
        self.n_clusters_ge2 + self.n_isolated
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_clusters()];
        for &c in &self.assignment {
            sizes[c] += 1;
        }
        sizes
    }

    /// Leaf indices of every cluster, by cluster id.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_clusters()];
        for (leaf, &c) in self.assignment.iter().enumerate() {
            out[c].push(leaf);
        }
        out
    }

    pub fn is_isolated(&self, leaf: usize) -> bool {
        self.cluster_sizes()[self.assignment[leaf]] == 1
    }
}

/// Leaves share a cluster iff every merge on the path between them has
/// height strictly below `d_th`.
pub fn cut(dg: &Dendrogram, d_th: f64) -> ClusterCut {
    let n = dg.len();
    let mut parent: Vec<usize> = (0..n).collect();
    // applied[k]: merge k and all merges below it are under the threshold
    let mut applied = vec![false; n - 1];
    let mut rep = vec![0usize; 2 * n - 1];
    for (i, r) in rep.iter_mut().enumerate().take(n) {
        *r = i;
    }
    for (k, m) in dg.merges().iter().enumerate() {
        rep[n + k] = rep[m.left];
        let child_ok = |c: usize| c < n || applied[c - n];
        if m.height < d_th && child_ok(m.left) && child_ok(m.right) {
            applied[k] = true;
            let (a, b) = (
                find(&mut parent, rep[m.left]),
                find(&mut parent, rep[m.right]),
            );
            if a != b {
                parent[b] = a;
            }
        }
    }
    let mut root_to_id: Vec<Option<usize>> = vec![None; n];
    let mut assignment = Vec::with_capacity(n);
    let mut next = 0;
    for leaf in 0..n {
        let r = find(&mut parent, leaf);
        let id = *root_to_id[r].get_or_insert_with(|| {
            next += 1;
            next - 1
        });
        assignment.push(id);
    }
    let mut sizes = vec![0usize; next];
    for &c in &assignment {
        sizes[c] += 1;
    }
    let n_isolated = sizes.iter().filter(|&&s| s == 1).count();
    ClusterCut {
        threshold: d_th,
        labels: dg.labels().to_vec(),
        assignment,
        n_clusters_ge2: next - n_isolated,
        n_isolated,
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// What [`best_threshold_by`] maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClusterCount {
    /// Clusters with at least two members; singletons are isolated nodes.
    #[default]
    NonSingleton,
    /// Every part of the partition, singletons included.
    AllParts,
}

/// Candidate thresholds: midpoints between consecutive distinct merge
/// heights, plus one threshold above the highest merge (half the last gap
/// above it, or half the height itself when all merges share one height).
pub fn candidate_thresholds(dg: &Dendrogram) -> Vec<f64> {
    let mut heights: Vec<f64> = dg.merges().iter().map(|m| m.height).collect();
    heights.sort_by(f64::total_cmp);
    heights.dedup();
    let mut out: Vec<f64> = heights.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let top = *heights.last().expect("at least one merge");
    let step = match heights.len() {
        1 if top > 0.0 => 0.5 * top,
        1 => 0.5,
        m => 0.5 * (top - heights[m - 2]),
    };
    out.push(top + step);
    out
}

/// Threshold giving the largest number of clusters with two or more members;
/// ties go to the smallest threshold.
pub fn best_threshold(dg: &Dendrogram) -> (f64, ClusterCut) {
    best_threshold_by(dg, ClusterCount::NonSingleton)
}

pub fn best_threshold_by(dg: &Dendrogram, count: ClusterCount) -> (f64, ClusterCut) {
    let score = |c: &ClusterCut| match count {
        ClusterCount::NonSingleton => c.n_clusters_ge2,
        ClusterCount::AllParts => c.n_clusters(),
    };
    let mut best: Option<ClusterCut> = None;
    for t in candidate_thresholds(dg) {
        let c = cut(dg, t);
        if best.as_ref().is_none_or(|b| score(&c) > score(b)) {
            best = Some(c);
        }
    }
    let best = best.expect("at least one candidate");
    (best.threshold, best)
}

/// Height of the lowest common ancestor merge for every pair of leaves.
pub fn cophenetic_matrix(dg: &Dendrogram) -> DistanceMatrix {
    let n = dg.len();
    let mut values = vec![0.0; n * n];
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    members.reserve(n - 1);
    for m in dg.merges() {
        for &a in &members[m.left] {
            for &b in &members[m.right] {
                values[a * n + b] = m.height;
                values[b * n + a] = m.height;
            }
        }
        let mut joined = members[m.left].clone();
        joined.extend_from_slice(&members[m.right]);
        members.push(joined);
    }
    DistanceMatrix::new(dg.labels().to_vec(), Metric::Cophenetic, values)
        .expect("validated dendrogram yields a valid cophenetic matrix")
}

/// Cophenetic distance correlation coefficient: Pearson correlation of the
/// cophenetic distances of two dendrograms over the same labels.
///
/// Labels are matched by name, so the leaf order may differ.
pub fn cdcc(a: &Dendrogram, b: &Dendrogram) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LabelMismatch);
    }
    let ca = cophenetic_matrix(a);
    let cb = cophenetic_matrix(b);
    let map: Vec<usize> = a
        .labels()
        .iter()
        .map(|l| cb.index_of(l).ok_or(Error::LabelMismatch))
        .collect::<Result<_>>()?;
    let mut seen = vec![false; b.len()];
    for &j in &map {
        if core::mem::replace(&mut seen[j], true) {
            return Err(Error::LabelMismatch);
        }
    }
    let n = a.len();
    let mut xa = Vec::with_capacity(n * (n - 1) / 2);
    let mut xb = Vec::with_capacity(n * (n - 1) / 2);
    for i in 1..n {
        for j in 0..i {
            xa.push(ca.get(i, j));
            xb.push(cb.get(map[i], map[j]));
        }
    }
    if xa.len() < 3 {
        return Err(Error::DegenerateHeights);
    }
    pearson_correlation(&xa, &xb).map_err(|e| match e {
        Error::DegenerateSeries => Error::DegenerateHeights,
        other => other,
    })
}

/// Result of comparing single-linkage merge heights with MST edge weights.
#[derive(Debug, Clone, PartialEq)]
pub struct MstReport {
    pub pass: bool,
    pub max_discrepancy: f64,
    /// Sorted ascending.
    pub mst_weights: Vec<f64>,
    /// Sorted ascending.
    pub single_linkage_heights: Vec<f64>,
}

/// Tolerance used by [`mst_check`].
pub const MST_TOLERANCE: f64 = 1e-12;

/// Builds a minimum spanning tree with Prim's algorithm and checks that its
/// sorted edge weights equal the sorted single-linkage merge heights.
pub fn mst_check(dm: &DistanceMatrix) -> Result<MstReport> {
    dm.validate()?;
    let n = dm.len();
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    best[0] = 0.0;
    let mut weights = Vec::with_capacity(n - 1);
    for step in 0..n {
        let u = (0..n)
            .filter(|&v| !in_tree[v])
            .min_by(|&x, &y| best[x].total_cmp(&best[y]))
            .expect("vertex left");
        in_tree[u] = true;
        if step > 0 {
            weights.push(best[u]);
        }
        for v in 0..n {
            if !in_tree[v] && dm.get(u, v) < best[v] {
                best[v] = dm.get(u, v);
            }
        }
    }
    weights.sort_by(f64::total_cmp);
    let dg = agglomerate(dm, Linkage::Single)?;
    let mut heights: Vec<f64> = dg.merges().iter().map(|m| m.height).collect();
    heights.sort_by(f64::total_cmp);
    let max_discrepancy = weights
        .iter()
        .zip(&heights)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(MstReport {
        pass: max_discrepancy < MST_TOLERANCE,
        max_discrepancy,
        mst_weights: weights,
        single_linkage_heights: heights,
    })
}
