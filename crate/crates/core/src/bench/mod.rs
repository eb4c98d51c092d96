//! Benchmark harness: partial scans cut from meshes, noise, metrics and result tables.

mod metrics;
mod report;
mod run;
mod synth;

pub use metrics::{EvalConfig, Multimodal, Scores, evaluate, multimodal_metrics};
pub use report::{ResultRow, aggregate, format_table, read_csv, write_csv};
pub use run::{BenchObject, BenchReport, BenchmarkSpec, GuidanceMode, ObjectRun, run_benchmark, run_object};
pub use synth::{DepthScan, ScanSetup, add_noise, scan_view, synth_partial_from_mesh};
