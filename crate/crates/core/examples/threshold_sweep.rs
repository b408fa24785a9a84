//! Entry and maximal-deterrence market sizes on a coarse lattice.

use spatial_entry::entry::{threshold_sweep_with, Evaluator, LocationGrid, Solver};
use spatial_entry::market::{ConsumerGrid, MarketParams};

fn main() -> spatial_entry::Result<()> {
    let params = MarketParams::default();
    let eval = Evaluator::new(&params, ConsumerGrid::new(24)?);
    let solver = Solver::new(&eval, LocationGrid::new(5)?);
    for n in 1..=4 {
        let t = threshold_sweep_with(n, &params, (1.0, 20_000.0), &solver)?;
        println!(
            "n = {n}: M_enter = {:.2}, M_max_deter = {:.2} ({} evaluations, monotone {})",
            t.m_enter,
            t.m_max_deter,
            t.enter.evaluations + t.deter.evaluations,
            t.enter.monotone && t.deter.monotone
        );
    }
    Ok(())
}
