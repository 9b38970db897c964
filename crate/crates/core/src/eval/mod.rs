//! Figures of merit and the solver-versus-network benchmark.

mod bench;
mod metrics;
mod report;

pub use bench::{
    admm_estimate, bench_compare, evaluate_admm, evaluate_slog, slog_estimate, test_instance, BenchConfig, BenchRow,
    Estimate, EvalReport, Method, TestInstance,
};
pub use metrics::{
    alignment_scale, best_sign, community_accuracy, community_estimate, relative_error_aligned,
    relative_error_signed, support_accuracy, DEFAULT_KAPPA,
};
pub use report::{read_csv, rows_to_csv, summarize, write_csv, Stat, SummaryEntry, CSV_HEADER};
