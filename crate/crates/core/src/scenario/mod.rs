//! Batch scenarios: configuration files, result records, figures, and the
//! runner behind the command-line tool.

mod config;
mod figure;
mod record;
mod run;

pub use config::{ConfigError, MarketSection, Outputs, ScenarioConfig, Sweep, MIN_FIRST_PASS_RESOLUTION, MIN_RESOLUTION};
pub use figure::{emit_figure, figure_name};
pub use record::{
    profit_rows, CaseKind, EquilibriumFields, ProfitRow, ResultRecord, ResultsFile, SocialOptimumValues, Status,
    ThresholdValues, Timing, SCHEMA_VERSION,
};
pub use run::{run_scenario, solve_scenario, write_outputs, RunSummary};
