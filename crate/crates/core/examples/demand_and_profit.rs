//! Demand and profit for a duopoly at fixed prices, from whole-cell
//! assignment and from the smooth demand field.

use spatial_entry::market::{demand_exact_equal_prices, demand_grid, market_outcome, Configuration, ConsumerGrid, MarketParams, PriceVector};

fn main() -> spatial_entry::Result<()> {
    let params = MarketParams::with_market_size(100.0);
    let config = Configuration::from_pairs(&[(0.25, 0.5), (0.75, 0.5)])?;
    println!("exact equal-price demand: {:?}", demand_exact_equal_prices(&config, &params)?);
    let grid = ConsumerGrid::new(64)?;
    for prices in [vec![0.3, 0.3], vec![0.3, 0.4]] {
        let prices = PriceVector(prices);
        let (hard, _) = demand_grid(&config, &prices, &params, &grid)?;
        let smooth = market_outcome(&config, &prices, &params, &grid)?;
        println!(
            "prices {:?}: cell assignment {:?}, smooth {:?}, profits {:?}, coverage {:.4}",
            prices.0, hard, smooth.demand, smooth.profit, smooth.coverage
        );
    }
    Ok(())
}
