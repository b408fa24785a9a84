//! Where a new firm locates against fixed incumbents.

use spatial_entry::entry::{entrant_best_response, LocationGrid};
use spatial_entry::market::{Configuration, ConsumerGrid, MarketParams};

fn main() -> spatial_entry::Result<()> {
    let params = MarketParams::with_market_size(200.0);
    let lattice = LocationGrid::new(9)?;
    let grid = ConsumerGrid::new(24)?;
    for pairs in [&[][..], &[(0.5, 0.5)][..], &[(0.25, 0.5), (0.75, 0.5)][..]] {
        let incumbents = Configuration::from_pairs(pairs)?;
        let (at, profit) = entrant_best_response(&incumbents, &params, &lattice, &grid)?;
        println!("incumbents {pairs:?}: entrant at ({:.3}, {:.3}) earns {profit:.3}", at.x, at.y);
    }
    Ok(())
}
