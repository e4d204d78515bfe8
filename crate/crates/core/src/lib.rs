//! Hierarchical clustering of time series by the similarity of their
//! fluctuation distributions.
//!
//! The crate is `no_std` and only needs `alloc`. It covers the numeric core:
//!
//! * [`returns`]: log returns, leave-one-out normalization and moments.
//! * [`metrics`]: shared-grid histograms, KL / Jensen-Shannon divergences,
//!   the square-root JS similarity distance, the kurtosis relative difference,
//!   the Pearson correlation distance, and pairwise [`DistanceMatrix`] builds.
//! * [`hcluster`]: agglomerative clustering (single, complete and average
//!   linkage), threshold cuts, cophenetic matrices, the cophenetic distance
//!   correlation coefficient and a minimum-spanning-tree cross-check.
//!
//! All logarithms are natural logarithms, so the Jensen-Shannon divergence is
//! bounded by `ln 2` and the similarity distance by `sqrt(ln 2)`.
//!
//! File formats, ingestion, and the command line live in the `fxclust` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

mod error;
pub mod hcluster;
pub mod metrics;
pub mod returns;

pub use error::{Error, Result};
pub use hcluster::{
    agglomerate, best_threshold, cdcc, cophenetic_matrix, cut, mst_check, ClusterCount, ClusterCut,
    Dendrogram, Linkage, Merge, MstReport,
};
pub use metrics::{
    distance_matrix, js_divergence, kl_divergence, kurtosis_distance, pearson_distance,
    similarity_distance, DistanceMatrix, Histogram, Metric, DEFAULT_BIN_WIDTH,
};
pub use returns::{log_returns, loo_volatility, moments, normalize, Moments, ReturnSeries};
