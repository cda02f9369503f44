//! Config-driven parameter sweeps, rate computation and reports.

pub mod config;
pub mod report;
pub mod study;
pub mod verify;

pub use config::{parse_number, ExampleSpec, ExperimentConfig, Reference, Scaled, StudyKind};
pub use report::{markdown, read_csv, write_csv, write_report, Metadata, Report, ReportFormat, Row};
pub use study::{compute_rates, fitted_rate, run_study, run_study_partial, CellParams};
pub use verify::{random_elliptic, run_verify, Check};
