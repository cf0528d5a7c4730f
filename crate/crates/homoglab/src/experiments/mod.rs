//! Study orchestration: configs, boundary-data families, single runs and
//! full rate studies, and the CSV/JSON report emitters.

mod boundary;
mod config;
mod report;
mod study;

pub use boundary::{arclength_to_point, BoundaryData};
pub use config::{BoundarySelector, ExperimentConfig, SourceSelector, StudyKind};
pub use report::{
    emit_report, fit_rate, format_float, ConvergenceReport, FitOutcome, ReportRow, CSV_HEADER,
};
pub use study::{
    coefficient_from_config, expansion_consistency_l2, run_oscillating_study, run_single,
    run_single_with, run_study, run_th1_study, CellContext,
};
