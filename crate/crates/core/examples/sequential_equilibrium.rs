//! Sequential entry with and without the threat of one more entrant.

use spatial_entry::entry::{Evaluator, LocationGrid, Solver};
use spatial_entry::market::{ConsumerGrid, MarketParams};

fn main() -> spatial_entry::Result<()> {
    let params = MarketParams::default();
    let eval = Evaluator::new(&params, ConsumerGrid::new(24)?);
    let solver = Solver::new(&eval, LocationGrid::new(9)?);
    for (n, m) in [(1, 100.0), (2, 200.0), (2, 250.0)] {
        let p = MarketParams { market_size: m, ..params };
        let threat = solver.sequential(n, &p)?;
        let calm = solver.just_entered(n, &p)?;
        let show = |r: &spatial_entry::entry::EquilibriumResult| {
            r.configuration.locations.iter().map(|q| format!("({:.3}, {:.3})", q.x, q.y)).collect::<Vec<_>>().join(" ")
        };
        println!("n = {n}, M = {m}");
        println!("  with threat: {} [{}], next entrant best {:.2}", show(&threat), threat.regime.label(), threat.best_entrant_profit);
        println!("  no threat:   {}, profits {:?}", show(&calm), calm.profits);
    }
    println!("{:?}", eval.stats());
    Ok(())
}
