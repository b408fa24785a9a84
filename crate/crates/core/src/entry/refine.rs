use serde::{Deserialize, Serialize};

use super::evaluator::Evaluator;
use super::game::Candidates;
use super::lattice::{LocationGrid, Site};
use super::{EquilibriumResult, Solver};
use crate::error::Result;
use crate::market::MarketParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefineOptions {
    /// Stride of the entrant's first scan on the fine lattice.
    pub entrant_stride: u16,
    /// Recentering rounds for [`refine_equilibrium`].
    pub max_rounds: usize,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self { entrant_stride: 4, max_rounds: 6 }
    }
}

/// Re-solves a coarse equilibrium on `fine`, letting each firm choose among
/// its current site and the four adjacent fine sites, with later firms
/// re-optimizing in the same way; repeats until the layout stops moving.
///
/// With `threat` the `(n + 1)`-th entrant searches the whole fine lattice;
/// otherwise exactly `n` firms enter.
pub fn refine_equilibrium(
    coarse: &EquilibriumResult,
    params: &MarketParams,
    fine: &LocationGrid,
    eval: &Evaluator,
    threat: bool,
    opts: &RefineOptions,
) -> Result<EquilibriumResult> {
    let n = coarse.n;
    let mut sites: Vec<Site> = coarse.configuration.locations.iter().map(|&p| fine.nearest(p)).collect();
    let mut result = None;
    for _ in 0..opts.max_rounds.max(1) {
        let mut plan: Vec<Candidates> = sites.iter().map(|&s| Candidates::Only(fine.plus(s))).collect();
        plan.push(Candidates::Search { stride: opts.entrant_stride });
        let solver = Solver::new(eval, *fine).with_plan(plan);
        let r = if threat { solver.sequential(n, params)? } else { solver.just_entered(n, params)? };
        let next: Vec<Site> = r.configuration.locations.iter().map(|&p| fine.nearest(p)).collect();
        let settled = same_set_up_to_symmetry(fine, &next, &sites);
        sites = next;
        result = Some(r);
        if settled {
            break;
        }
    }
    Ok(result.expect("at least one round"))
}

fn same_set_up_to_symmetry(lattice: &LocationGrid, a: &[Site], b: &[Site]) -> bool {
    crate::geometry::Symmetry::ALL
        .into_iter()
        .any(|g| a.iter().zip(b).all(|(&x, &y)| lattice.transform(g, x) == y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::ConsumerGrid;

    #[test]
    fn refinement_keeps_an_exact_monopoly_center() {
        let params = MarketParams::default();
        let eval = Evaluator::new(&params, ConsumerGrid::new(20).unwrap());
        let coarse = LocationGrid::new(5).unwrap();
        let fine = LocationGrid::new(9).unwrap();
        let p = MarketParams { market_size: 50.0, ..params };
        let r = Solver::new(&eval, coarse).sequential(1, &p).unwrap();
        let f = refine_equilibrium(&r, &p, &fine, &eval, true, &RefineOptions::default()).unwrap();
        assert_eq!(f.configuration.locations, vec![crate::geometry::Point::new(0.5, 0.5)]);
        assert_eq!(f.location_resolution, 9);
    }
}
