//! Price equilibria for the built-in reference layouts.

use spatial_entry::entry::reference_layouts;
use spatial_entry::market::{market_outcome, ConsumerGrid, MarketParams};
use spatial_entry::pricing::price_equilibrium;

fn main() -> spatial_entry::Result<()> {
    let params = MarketParams::with_market_size(300.0);
    let grid = ConsumerGrid::new(48)?;
    for (name, config) in reference_layouts() {
        let report = price_equilibrium(&config, &params, &grid);
        let outcome = market_outcome(&config, &report.prices, &params, &grid)?;
        let prices: Vec<String> = report.prices.0.iter().map(|p| format!("{p:.4}")).collect();
        let profits: Vec<String> = outcome.profit.iter().map(|p| format!("{p:.2}")).collect();
        println!(
            "{name:16} converged {} spread {:.1e} prices [{}] profits [{}]",
            report.converged,
            report.multistart_spread,
            prices.join(", "),
            profits.join(", ")
        );
    }
    Ok(())
}
