//! File formats, ingestion, rendering and the end-to-end pipeline built on
//! [`fxclust_core`].

pub mod error;
pub mod formats;
pub mod ingest;
pub mod pipeline;
pub mod render;
pub mod synth;

pub use error::{Error, Result};
pub use ingest::{
    align, parse_rates, read_metadata, redenominate, AlignPolicy, AssetMeta, ColumnMap, Dataset,
    Orientation, RateSeries,
};
pub use pipeline::{run, skew_screen, split_periods, RunConfig, RunReport, ThresholdMode};
