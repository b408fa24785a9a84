//! Runs a small scenario from TOML and writes all of its outputs to a
//! directory (default `scenario-out`).

use spatial_entry::scenario::{run_scenario, ScenarioConfig};

const CONFIG: &str = r#"
id = "example"
n_max = 2
market_sizes = [60.0, 150.0, 300.0]
consumer_resolution = 24
location_resolution = 9

[outputs]
svg = true
csv = true
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "scenario-out".into());
    let config = ScenarioConfig::from_toml(CONFIG)?;
    let summary = run_scenario(&config, out.as_ref(), 2)?;
    for rec in &summary.records {
        println!("case {} n = {} M = {}: {:?} {:?}", rec.case, rec.n, rec.market_size, rec.status, rec.regime());
    }
    for path in &summary.files {
        println!("wrote {}", path.display());
    }
    std::process::exit(summary.exit_code());
}
