use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use spatial_entry::scenario::{run_scenario, ScenarioConfig, Sweep};

/// Solve sequential-entry location equilibria and write results.json,
/// figures, and profit tables.
#[derive(Debug, Parser)]
#[command(version)]
struct Args {
    /// Scenario file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Largest firm count.
    #[arg(long)]
    n: Option<usize>,
    /// Market sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    market_size: Option<Vec<f64>>,
    /// Geometric sweep `lo:hi:steps`.
    #[arg(long)]
    sweep: Option<String>,
    /// Write SVG figures.
    #[arg(long)]
    figures: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

fn parse_sweep(s: &str) -> Option<Sweep> {
    let mut parts = s.split(':');
    let sweep = Sweep { lo: parts.next()?.parse().ok()?, hi: parts.next()?.parse().ok()?, steps: parts.next()?.parse().ok()? };
    parts.next().is_none().then_some(sweep)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let mut config = match &args.config {
        Some(path) => match ScenarioConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("{}: {e}", path.display());
                return ExitCode::from(2);
            }
        },
        None => ScenarioConfig::default(),
    };
    if let Some(n) = args.n {
        config.n_max = n;
    }
    if let Some(m) = args.market_size {
        config.market_sizes = m;
        config.sweep = None;
        config.thresholds = false;
    }
    if let Some(s) = &args.sweep {
        let Some(sweep) = parse_sweep(s) else {
            eprintln!("--sweep: expected lo:hi:steps, got {s}");
            return ExitCode::from(2);
        };
        config.sweep = Some(sweep);
        config.thresholds = false;
    }
    if args.figures {
        config.outputs.svg = true;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Err(e) = config.validate() {
        eprintln!("{e}");
        return ExitCode::from(2);
    }
    let summary = match run_scenario(&config, &args.out_dir, args.threads) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("writing {}: {e}", args.out_dir.display());
            return ExitCode::FAILURE;
        }
    };
    for path in &summary.files {
        println!("{}", path.display());
    }
    let failures = summary.failures();
    if failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("{} case(s) did not converge:", failures.len());
        for f in &failures {
            eprintln!("  {f}");
        }
        ExitCode::from(3)
    }
}
