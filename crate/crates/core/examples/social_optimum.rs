//! Transport-cost minimizing layouts against the reference layouts.

use spatial_entry::entry::reference_layouts;
use spatial_entry::market::MarketParams;
use spatial_entry::welfare::{social_cost, social_optimum_with, OptimumOptions};

fn main() -> spatial_entry::Result<()> {
    let params = MarketParams::with_market_size(1.0);
    for (name, config) in reference_layouts() {
        let cost = social_cost(&config, &params)?.cost;
        let opts = OptimumOptions { random_starts: 8, warm_starts: vec![config.clone()], ..Default::default() };
        let best = social_optimum_with(config.len(), &params, &opts)?;
        println!("{name:16} cost {cost:.5}, optimum {:.5} (spread of local optima {:.5})", best.result.cost, best.spread);
    }
    Ok(())
}
