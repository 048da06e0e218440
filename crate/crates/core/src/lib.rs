//! Dataset-quality toolkit for classification manifests.
//!
//! Streams manifests into per-class histograms, computes class-balance
//! indicators (left-skewedness, long-tailedness), builds controlled dataset
//! variants (vertical/horizontal scaling, head truncation, tail rebalancing,
//! blending), and ranks or validates candidate datasets by their indicators.

pub mod hash;
pub mod histogram;
pub mod indicators;
pub mod manifest;
pub mod scan;
pub mod transforms;
pub mod synth;
pub mod predictor;
pub mod evalproto;
pub mod cli;

pub use histogram::{build_histogram, ClassHistogram, LabelMode};
pub use indicators::{audit, left_skewedness, long_tailedness, IndicatorConfig, IndicatorReport};
pub use manifest::{emit_manifest, parse_manifest, Manifest, ManifestFormat, SampleRecord};
