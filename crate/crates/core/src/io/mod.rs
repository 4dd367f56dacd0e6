//! Scenario files and CSV tables.

mod scenario_file;
mod tables;

pub use scenario_file::{load_scenario, parse_scenario, AUTO_TRADE_STEP_MHZ};
pub use tables::{
    read_summary, read_trace, write_findings, write_summary, write_table, write_trace, SummaryRow, TraceWriter,
    FINDINGS_HEADER, SUMMARY_HEADER, TRACE_HEADER,
};
