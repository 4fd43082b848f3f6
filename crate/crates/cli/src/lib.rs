//! Command-line front end: configuration loading, runs, CSV traces, reports
//! and gnuplot scripts.

pub mod app;
pub mod oracle;
pub mod plot;
pub mod report;
pub mod trace_io;

pub use app::{EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, OUT_DIR_ENV, main_with};
pub use plot::{emit_plot_script, plot_script};
pub use report::RunReport;
pub use trace_io::{read_trace, write_trace};
