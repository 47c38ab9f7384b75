//! Configuration-driven sweeps over the nanosphere squeezing model, with one
//! pipeline per figure and deterministic CSV, JSON and SVG output.

pub mod cli;
pub mod config;
pub mod error;
pub mod grid;
pub mod output;
pub mod pipelines;
pub mod presets;

pub use config::ScanConfig;
pub use error::{PointError, ScanError};
pub use grid::ResultGrid;
pub use pipelines::run;
