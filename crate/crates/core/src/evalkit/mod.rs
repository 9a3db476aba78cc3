//! Evaluation harness: splits, linear probes, metrics and reports.

mod features;
mod metrics;
mod probe;
mod report;
mod split;
mod task;

pub use features::{bow_representation, format_provenance, parse_provenance, Provenance, Representation};
pub use metrics::{average_ranks, macro_f1, mae, pearson, positive_class, spearman_rho, Prf};
pub use probe::{
    train_probe, LinearProbe, ProbeKind, ProbeOptions, Standardizer, TunedProbe, CLASSIFIER_GRID, REGRESSOR_GRID,
};
pub use report::{read_report_csv, write_report_csv, EvalReport, TaskKind, REPORT_HEADER};
pub use split::{make_split, SplitSpec};
pub use task::{check_leakage, evaluate_task, run_task, ProbeSettings, TaskData, TaskOutcome, TaskTarget};
