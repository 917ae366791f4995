//! Configuration parsing, CSV snapshots and diagnostics, SVG plots.

pub mod config;
pub mod csv;
pub mod snapshot;
pub mod svg;

pub use config::{load_config, load_plan, parse_config, parse_plan, ConfigError, RunConfig, Subscription};
pub use csv::{fmt_f64, write_atomic, CsvError};
pub use snapshot::{param_hash, read_snapshot, write_snapshot, SnapshotError, SnapshotHeader};
pub use svg::{rate_plot, series_plot, PlotError, Series};
