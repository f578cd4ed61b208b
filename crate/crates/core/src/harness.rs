//! Batch evaluation over CSV manifests.
//!
//! A manifest lists `(reference, distorted, mos, database[, distortion])`
//! rows. [`score_manifest`] scores every row with a set of metrics,
//! [`build_report`] turns score rows into per-database and per-distortion
//! correlation tables with Fisher-z significance verdicts against a baseline.

mod manifest;
mod report;
mod score;

pub use manifest::{load_manifest, read_manifest, ManifestEntry};
pub use report::{
    build_report, read_scatter_csv, scatter_file_name, write_scatter_csv, CorrelationCell,
    EvaluationReport, Polarity, ReportOptions, ScatterPoint, ScatterSeries, SignificanceEntry,
};
pub use score::{score_manifest, MetricKind, MetricSpec, ScoreRow, ScoreTable};
