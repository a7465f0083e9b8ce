//! Scenario files in, CSV tables out.

pub mod report;
pub mod scenario;

pub use report::{format_sig9, write_channel_dump, write_csv};
pub use scenario::{parse_scenario, parse_scenario_str, to_text, Parsed};
