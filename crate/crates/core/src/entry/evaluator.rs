use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use super::lattice::{exact, ExactPoint, LocationGrid, Site};
use crate::geometry::Point;
use crate::market::{Configuration, ConsumerGrid, DemandField, MarketParams};
use crate::pricing::{heuristic_prices, solve_field, solve_prices_local, verify_equilibrium, PriceSolverOptions, PriceStart};

/// Equilibrium of one location set at unit market size.
///
/// Prices do not depend on `M`, and variable profit scales linearly in it,
/// so one solve serves every market size.
#[derive(Debug)]
pub(crate) struct Solved {
    points: Vec<ExactPoint>,
    prices: Vec<f64>,
    unit_profit: Vec<f64>,
    found: bool,
    verified: OnceLock<bool>,
}

/// Solved set mapped back to the caller's firm order.
#[derive(Debug, Clone, PartialEq)]
pub struct SolvedView {
    pub prices: Vec<f64>,
    /// `(p - c) D` per unit of market size.
    pub unit_profit: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluatorStats {
    pub lookups: u64,
    pub solves: u64,
    pub no_equilibrium: u64,
    pub verifications: u64,
}

/// Lattice side and canonical incumbent set.
type LastKey = (u16, Vec<Site>);

/// Memoized price equilibria keyed by location set up to square symmetry.
///
/// Safe to share across threads; contents depend only on the keys requested.
pub struct Evaluator {
    params: MarketParams,
    grid: ConsumerGrid,
    options: PriceSolverOptions,
    cache: Mutex<HashMap<Vec<ExactPoint>, Arc<Solved>>>,
    last: Mutex<HashMap<LastKey, Arc<LastEntrant>>>,
    lookups: AtomicU64,
    solves: AtomicU64,
    no_equilibrium: AtomicU64,
    verifications: AtomicU64,
}

impl Evaluator {
    pub fn new(params: &MarketParams, grid: ConsumerGrid) -> Self {
        Self {
            params: MarketParams { market_size: 1.0, ..*params },
            grid,
            options: PriceSolverOptions::default(),
            cache: Mutex::new(HashMap::new()),
            last: Mutex::new(HashMap::new()),
            lookups: AtomicU64::new(0),
            solves: AtomicU64::new(0),
            no_equilibrium: AtomicU64::new(0),
            verifications: AtomicU64::new(0),
        }
    }

    pub fn with_options(mut self, options: PriceSolverOptions) -> Self {
        self.options = options;
        self
    }

    /// Parameters at unit market size.
    pub fn params(&self) -> &MarketParams {
        &self.params
    }

    pub fn grid(&self) -> &ConsumerGrid {
        &self.grid
    }

    pub fn stats(&self) -> EvaluatorStats {
        EvaluatorStats {
            lookups: self.lookups.load(Ordering::Relaxed),
            solves: self.solves.load(Ordering::Relaxed),
            no_equilibrium: self.no_equilibrium.load(Ordering::Relaxed),
            verifications: self.verifications.load(Ordering::Relaxed),
        }
    }

    pub fn cached_sets(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }

    /// Solved set for lattice sites, with its canonical point order.
    ///
    /// Site order is numeric coordinate order on every lattice, so the
    /// canonical image computed on lattice indices is lattice independent.
    pub(crate) fn solve_sites(&self, lattice: &LocationGrid, sites: &[Site]) -> Lookup {
        self.lookups.fetch_add(1, Ordering::Relaxed);
        let (canon, g) = lattice.canonical(sites);
        let order: Vec<usize> = sites
            .iter()
            .map(|&s| canon.binary_search(&lattice.transform(g, s)).expect("image is in the canonical set"))
            .collect();
        let key: Vec<ExactPoint> = canon.iter().map(|&s| exact(lattice, s)).collect();
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&key) {
            return Lookup { solved: Arc::clone(hit), order };
        }
        let solved = Arc::new(self.compute(key.clone()));
        let stored = Arc::clone(self.cache.lock().expect("cache lock").entry(key).or_insert(solved));
        Lookup { solved: stored, order }
    }

    fn compute(&self, points: Vec<ExactPoint>) -> Solved {
        self.solves.fetch_add(1, Ordering::Relaxed);
        let config = Configuration { locations: points.iter().map(|&(x, y)| Point::new(x.value(), y.value())).collect() };
        let field = DemandField::new(&config, &self.params, &self.grid);
        let c = self.params.marginal_cost;
        let prices = if config.len() == 1 {
            let opts = PriceSolverOptions { starts: vec![PriceStart::MarginalCost], ..self.options.clone() };
            let report = solve_field(&field, &self.params, &opts);
            report.converged.then_some(report.prices.0)
        } else {
            solve_prices_local(&field, &self.params, &heuristic_prices(&config, &self.params))
        };
        match prices {
            Some(prices) => {
                let (demand, _) = field.demand(&prices);
                let unit_profit = prices.iter().zip(&demand).map(|(p, d)| (p - c) * d).collect();
                let verified = OnceLock::new();
                if config.len() == 1 {
                    let _ = verified.set(true);
                }
                Solved { points, prices, unit_profit, found: true, verified }
            }
            None => {
                self.no_equilibrium.fetch_add(1, Ordering::Relaxed);
                Solved { points, prices: Vec::new(), unit_profit: Vec::new(), found: false, verified: OnceLock::from(false) }
            }
        }
    }

    /// Best final entrant against a canonical incumbent set on `lattice`,
    /// computed by `scan` once and shared across market sizes.
    pub(crate) fn last_entrant(
        &self,
        lattice: &LocationGrid,
        incumbents: &[Site],
        scan: impl FnOnce() -> LastEntrant,
    ) -> (Arc<LastEntrant>, bool) {
        let key = (lattice.side(), incumbents.to_vec());
        if let Some(hit) = self.last.lock().expect("cache lock").get(&key) {
            return (Arc::clone(hit), false);
        }
        let fresh = Arc::new(scan());
        (Arc::clone(self.last.lock().expect("cache lock").entry(key).or_insert(fresh)), true)
    }

    /// Whether the set's local price solution survives a global
    /// best-response check; computed once per set.
    pub(crate) fn verified(&self, solved: &Solved) -> bool {
        *solved.verified.get_or_init(|| {
            self.verifications.fetch_add(1, Ordering::Relaxed);
            let config = Configuration {
                locations: solved.points.iter().map(|&(x, y)| Point::new(x.value(), y.value())).collect(),
            };
            let field = DemandField::new(&config, &self.params, &self.grid);
            let ok = verify_equilibrium(&field, &self.params, &solved.prices, &self.options);
            if !ok {
                self.no_equilibrium.fetch_add(1, Ordering::Relaxed);
            }
            ok
        })
    }
}

/// Last entrant's best site in the incumbents' canonical frame, with its
/// variable profit per unit of market size.
#[derive(Debug, Clone, Default)]
pub(crate) struct LastEntrant {
    pub(crate) best: Option<(Site, f64)>,
    pub(crate) ties: Vec<Site>,
    pub(crate) candidates: u64,
    pub(crate) skipped: u64,
}

/// A cache entry plus the position of each queried point in it.
#[derive(Debug, Clone)]
pub(crate) struct Lookup {
    pub(crate) solved: Arc<Solved>,
    order: Vec<usize>,
}

impl Lookup {
    pub(crate) fn found(&self) -> bool {
        self.solved.found
    }

    /// Unit-market variable profit of the `i`-th queried firm.
    pub(crate) fn unit_profit(&self, i: usize) -> f64 {
        self.solved.unit_profit[self.order[i]]
    }

    pub(crate) fn view(&self) -> SolvedView {
        SolvedView {
            prices: self.order.iter().map(|&k| self.solved.prices[k]).collect(),
            unit_profit: self.order.iter().map(|&k| self.solved.unit_profit[k]).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pricing::price_equilibrium;

    #[test]
    fn cache_is_shared_across_symmetric_images_and_orders() {
        let params = MarketParams::default();
        let eval = Evaluator::new(&params, ConsumerGrid::new(24).unwrap());
        let g = LocationGrid::new(9).unwrap();
        let a = eval.solve_sites(&g, &[Site::new(1, 4), Site::new(6, 2)]);
        let b = eval.solve_sites(&g, &[Site::new(7, 4), Site::new(2, 2)]);
        let c = eval.solve_sites(&g, &[Site::new(6, 2), Site::new(1, 4)]);
        assert!(a.found());
        assert_eq!(eval.stats().solves, 1);
        assert_eq!(a.view().prices, c.view().prices.iter().rev().copied().collect::<Vec<_>>());
        assert_eq!(b.unit_profit(0), a.unit_profit(0));
    }

    #[test]
    fn cached_profit_matches_direct_solve() {
        let params = MarketParams::default();
        let grid = ConsumerGrid::new(24).unwrap();
        let eval = Evaluator::new(&params, grid);
        let g = LocationGrid::new(9).unwrap();
        let sites = [Site::new(2, 4), Site::new(6, 4), Site::new(4, 7)];
        let view = eval.solve_sites(&g, &sites).view();
        let config = Configuration { locations: sites.iter().map(|&s| g.point(s)).collect() };
        let report = price_equilibrium(&config, &params, &grid);
        for (p, q) in view.prices.iter().zip(&report.prices.0) {
            assert!((p - q).abs() < 1e-5, "{p} vs {q}");
        }
    }
}
