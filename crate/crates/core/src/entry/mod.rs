//! Location stage: sequential entry onto a lattice of candidate sites,
//! solved by backward induction over memoized price equilibria.

mod evaluator;
mod game;
mod lattice;
mod refine;
mod thresholds;

use serde::{Deserialize, Serialize};

pub use evaluator::{Evaluator, EvaluatorStats, SolvedView};
pub use game::Candidates;
pub use lattice::{LocationGrid, Site};
pub use refine::{refine_equilibrium, RefineOptions};
pub use thresholds::{bisect_threshold, entry_barrier, threshold_sweep, threshold_sweep_with, Bracket, EntryBarrier, Thresholds};

use crate::error::{Error, Result};
use crate::geometry::{Point, Symmetry};
use crate::market::{Configuration, ConsumerGrid, DemandField, MarketParams, PriceVector};
use crate::pricing::{heuristic_prices, solve_prices_newton, PriceSolverOptions};
use crate::welfare::social_cost;
use game::Game;

/// Largest firm count the location game accepts.
pub const MAX_FIRMS: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// The configuration would be the same without any entry threat.
    JustEntered,
    /// Firms locate differently than they would without the threat, and the
    /// next entrant is blocked.
    Deterrence,
    /// The threat is not deterred: the extra potential entrant enters,
    /// possibly in place of an earlier one that stayed out.
    Interior,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::JustEntered => "just_entered",
            Regime::Deterrence => "deterrence",
            Regime::Interior => "interior",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GameDiagnostics {
    pub nodes: u64,
    pub candidates: u64,
    /// Candidates dropped for lack of a pure price equilibrium.
    pub skipped: u64,
    pub price_lookups: u64,
    pub price_solves: u64,
    /// Every location tying with firm `k`'s choice, per firm.
    pub argmax_sets: Vec<Vec<Point>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumResult {
    pub n: usize,
    pub market_size: f64,
    /// Locations in entry order.
    pub configuration: Configuration,
    pub prices: PriceVector,
    pub profits: Vec<f64>,
    pub regime: Regime,
    pub entrant_blocked: bool,
    pub best_entrant_profit: f64,
    pub best_entrant_location: Option<Point>,
    pub social_cost: f64,
    pub location_resolution: usize,
    pub diagnostics: GameDiagnostics,
}

/// Location-game solver over one lattice and one price cache.
pub struct Solver<'a> {
    eval: &'a Evaluator,
    lattice: LocationGrid,
    plan: Vec<Candidates>,
}

impl<'a> Solver<'a> {
    pub fn new(eval: &'a Evaluator, lattice: LocationGrid) -> Self {
        Self { eval, lattice, plan: Vec::new() }
    }

    /// Candidate rule for each entry position; missing positions use the
    /// whole lattice.
    pub fn with_plan(mut self, plan: Vec<Candidates>) -> Self {
        self.plan = plan;
        self
    }

    pub fn lattice(&self) -> &LocationGrid {
        &self.lattice
    }

    pub fn evaluator(&self) -> &Evaluator {
        self.eval
    }

    fn game(&self, params: &MarketParams, cap: usize) -> Game<'a> {
        let mut plan = self.plan.clone();
        plan.resize(cap, Candidates::All);
        plan.truncate(cap);
        Game::new(self.eval, self.lattice, params.market_size, params.fixed_cost, cap).with_plan(plan)
    }

    /// Sequential equilibrium with `n` incumbents facing a potential
    /// `(n + 1)`-th entrant that enters when profitable.
    pub fn sequential(&self, n: usize, params: &MarketParams) -> Result<EquilibriumResult> {
        check_n(n)?;
        params.validate()?;
        let mut threat = self.game(params, n + 1);
        let (path, sites) = walk(&mut threat, n + 1, params);
        if sites.len() < n {
            return Err(Error::InfeasibleN { n, market_size: params.market_size });
        }
        let incumbents = &sites[..n];
        let best = threat.solve(incumbents).best;
        let regime = if sites.len() > n || path[..n].iter().any(|d| !d.1) {
            Regime::Interior
        } else {
            let mut calm = self.game(params, n);
            let calm_sites = calm.play(&[]);
            if calm_sites.len() == n && same_up_to_symmetry(&self.lattice, &calm_sites, incumbents) {
                Regime::JustEntered
            } else {
                Regime::Deterrence
            }
        };
        self.result(n, params, incumbents, best, regime, &mut threat)
    }

    /// Sequential equilibrium of exactly `n` entrants with no further entry
    /// threat: the configuration right after the `n`-th firm enters.
    pub fn just_entered(&self, n: usize, params: &MarketParams) -> Result<EquilibriumResult> {
        check_n(n)?;
        params.validate()?;
        let mut calm = self.game(params, n);
        let sites = calm.play(&[]);
        if sites.len() < n {
            return Err(Error::InfeasibleN { n, market_size: params.market_size });
        }
        let best = self.entrant(&sites, params);
        self.result(n, params, &sites, best, Regime::JustEntered, &mut calm)
    }

    /// Sequential equilibrium when the `n` incumbents can block entry.
    pub fn deterrence(&self, n: usize, params: &MarketParams) -> Result<EquilibriumResult> {
        let result = self.sequential(n, params)?;
        if result.regime == Regime::Interior {
            let barrier = entry_barrier(n, &self.lattice, self.eval);
            if params.market_size * barrier.unit_profit >= params.fixed_cost {
                return Err(Error::DeterrenceImpossible { n, market_size: params.market_size });
            }
        }
        Ok(result)
    }

    /// Each potential entrant's best profit along the equilibrium path of
    /// the game with `cap` potential entrants, and whether it entered.
    fn entry_path(&self, cap: usize, params: &MarketParams) -> Vec<(f64, bool)> {
        walk(&mut self.game(params, cap), cap, params).0
    }

    /// Signed entry margin of the `n`-th firm when `n` potential entrants
    /// move in turn with no threat beyond them: the last one's profit when
    /// all `n` enter, otherwise the negative best profit of the last one to
    /// stay out.
    pub fn nth_entrant_profit(&self, n: usize, params: &MarketParams) -> f64 {
        let path = self.entry_path(n, params);
        match path.iter().rev().find(|d| !d.1) {
            None => path.last().map_or(-params.fixed_cost, |d| d.0),
            Some(&(profit, _)) => profit.min(-f64::EPSILON),
        }
    }

    /// Signed margin of the `(n + 1)`-th potential entrant after `n` firms
    /// that anticipate it: its best profit when the first `n` all enter,
    /// zero (no deterrence) when one of them stays out.
    pub fn deterrence_margin(&self, n: usize, params: &MarketParams) -> f64 {
        let path = self.entry_path(n + 1, params);
        if path[..n].iter().all(|d| d.1) {
            path[n].0
        } else {
            0.0
        }
    }

    /// Best site and profit for one more entrant after `incumbents`, with no
    /// entry after it.
    pub fn entrant_best_response(&self, incumbents: &[Site], params: &MarketParams) -> Option<(Site, f64)> {
        self.entrant(incumbents, params)
    }

    fn entrant(&self, incumbents: &[Site], params: &MarketParams) -> Option<(Site, f64)> {
        let mut game = self.game(params, incumbents.len() + 1);
        game.solve(incumbents).best
    }

    fn result(
        &self,
        n: usize,
        params: &MarketParams,
        sites: &[Site],
        best: Option<(Site, f64)>,
        regime: Regime,
        game: &mut Game<'_>,
    ) -> Result<EquilibriumResult> {
        let lattice = *game.lattice();
        let ties: Vec<Vec<Site>> = (0..n).map(|k| game.solve(&sites[..k]).ties).collect();
        let g = ordered_canonical(&lattice, sites);
        let map = |s: Site| lattice.point(lattice.transform(g, s));
        let view = self.eval.solve_sites(&lattice, sites).view();
        let configuration = Configuration::new(sites.iter().map(|&s| map(s)).collect())?;
        let profits = view.unit_profit.iter().map(|v| params.market_size * v - params.fixed_cost).collect();
        let best_entrant_profit = best.map_or(-params.fixed_cost, |b| b.1);
        let stats = self.eval.stats();
        let counters = game.counters;
        Ok(EquilibriumResult {
            n,
            market_size: params.market_size,
            social_cost: social_cost(&configuration, params)?.cost,
            configuration,
            prices: PriceVector(view.prices),
            profits,
            regime,
            entrant_blocked: best_entrant_profit < 0.0,
            best_entrant_profit,
            best_entrant_location: best.map(|b| map(b.0)),
            location_resolution: lattice.resolution(),
            diagnostics: GameDiagnostics {
                nodes: counters.nodes,
                candidates: counters.candidates,
                skipped: counters.skipped,
                price_lookups: stats.lookups,
                price_solves: stats.solves,
                argmax_sets: ties.into_iter().map(|t| t.into_iter().map(map).collect()).collect(),
            },
        })
    }
}

/// Equilibrium path of `game`: each potential entrant's best profit and
/// whether it entered, and the sites of those that did.
fn walk(game: &mut Game<'_>, cap: usize, params: &MarketParams) -> (Vec<(f64, bool)>, Vec<Site>) {
    let mut sites = Vec::new();
    let path = (1..=cap)
        .rev()
        .map(|left| match game.solve_left(&sites, left).best {
            Some((site, profit)) if profit >= 0.0 => {
                sites.push(site);
                (profit, true)
            }
            Some((_, profit)) => (profit, false),
            None => (-params.fixed_cost, false),
        })
        .collect();
    (path, sites)
}

fn check_n(n: usize) -> Result<()> {
    if (1..=MAX_FIRMS).contains(&n) {
        Ok(())
    } else {
        Err(Error::SiteCount { count: n, max: MAX_FIRMS })
    }
}

/// Symmetry making the entry-ordered site sequence lexicographically least.
fn ordered_canonical(lattice: &LocationGrid, sites: &[Site]) -> Symmetry {
    Symmetry::ALL
        .into_iter()
        .min_by_key(|&g| sites.iter().map(|&s| lattice.transform(g, s)).collect::<Vec<_>>())
        .expect("symmetry group is non-empty")
}

fn same_up_to_symmetry(lattice: &LocationGrid, a: &[Site], b: &[Site]) -> bool {
    let ga = ordered_canonical(lattice, a);
    let gb = ordered_canonical(lattice, b);
    a.len() == b.len() && a.iter().zip(b).all(|(&x, &y)| lattice.transform(ga, x) == lattice.transform(gb, y))
}

/// Sequential equilibrium with `n` incumbents under the entry threat.
pub fn sequential_equilibrium(
    n: usize,
    params: &MarketParams,
    loc_grid: &LocationGrid,
    grid: &ConsumerGrid,
) -> Result<EquilibriumResult> {
    let eval = Evaluator::new(params, *grid);
    Solver::new(&eval, *loc_grid).sequential(n, params)
}

/// Sequential equilibrium of `n` entrants with no later entry.
pub fn just_entered(n: usize, params: &MarketParams, loc_grid: &LocationGrid, grid: &ConsumerGrid) -> Result<EquilibriumResult> {
    let eval = Evaluator::new(params, *grid);
    Solver::new(&eval, *loc_grid).just_entered(n, params)
}

/// Sequential equilibrium when `n` incumbents face an entry threat they can
/// block.
pub fn deterrence_solve(n: usize, params: &MarketParams, loc_grid: &LocationGrid, grid: &ConsumerGrid) -> Result<EquilibriumResult> {
    let eval = Evaluator::new(params, *grid);
    Solver::new(&eval, *loc_grid).deterrence(n, params)
}

/// Most profitable lattice location for one more firm, and its profit.
///
/// Candidates within 1e-9 of an incumbent and candidates without a pure
/// price equilibrium are skipped. Ties go to the lexicographically least
/// location.
pub fn entrant_best_response(
    incumbents: &Configuration,
    params: &MarketParams,
    loc_grid: &LocationGrid,
    grid: &ConsumerGrid,
) -> Result<(Point, f64)> {
    params.validate()?;
    crate::geometry::validate_sites(&incumbents.locations)?;
    let candidates: Vec<Site> = if incumbents.is_empty() && loc_grid.symmetry_reduction() {
        loc_grid.fundamental_domain()
    } else {
        loc_grid.sites().collect()
    };
    let opts = PriceSolverOptions::default();
    let mut best: Option<(Site, f64)> = None;
    for site in candidates {
        let p = loc_grid.point(site);
        if incumbents.locations.iter().any(|q| q.distance(&p) <= 1e-9) {
            continue;
        }
        let config = incumbents.with_entrant(p)?;
        let field = DemandField::new(&config, params, grid);
        let solution = solve_prices_newton(&field, params, &heuristic_prices(&config, params), &opts);
        if !solution.converged {
            continue;
        }
        let (demand, _) = field.demand(&solution.prices);
        let k = config.len() - 1;
        let profit = (solution.prices[k] - params.marginal_cost) * demand[k] - params.fixed_cost;
        if best.is_none_or(|(_, b)| profit > b + 1e-9 * (1.0 + b.abs())) {
            best = Some((site, profit));
        }
    }
    let (site, profit) = best.ok_or(Error::InvalidParameter {
        name: "incumbents",
        reason: "no candidate location has a pure price equilibrium".into(),
    })?;
    Ok((loc_grid.point(site), profit))
}

/// Fixed layouts used as price-stage regression cases, in entry order.
pub fn reference_layouts() -> Vec<(&'static str, Configuration)> {
    let t = 1.0 / 3.0;
    let s = 1.0 / 6.0;
    let cases: [(&str, &[(f64, f64)]); 12] = [
        ("n1_deterrence", &[(0.5, 0.5)]),
        ("n1_off_center", &[(0.25, 0.75)]),
        ("n2_just_entered", &[(0.0, 0.5), (1.0, 0.5)]),
        ("n2_deterrence", &[(t, 0.5), (2.0 * t, 0.5)]),
        ("n3_just_entered", &[(0.426, 0.5), (0.889, 0.5), (0.074, 0.5)]),
        ("n3_deterrence", &[(0.25, 0.5), (0.75, 0.5), (0.5, 0.5)]),
        ("n4_just_entered", &[(0.0, 0.0), (1.0, 1.0), (0.0, 1.0), (1.0, 0.0)]),
        ("n4_deterrence", &[(0.25, 0.25), (0.75, 0.75), (0.25, 0.75), (0.75, 0.25)]),
        ("n5_just_entered", &[(0.25, 0.15), (0.75, 0.15), (0.25, 0.65), (0.75, 0.65), (0.5, 1.0)]),
        ("n5_deterrence", &[(0.25, 0.25), (0.75, 0.75), (0.25, 0.75), (0.75, 0.25), (0.5, 0.5)]),
        ("n6_just_entered", &[(0.0, 0.5), (1.0, 0.5), (0.0, 1.0), (1.0, 0.0), (0.0, 0.0), (1.0, 1.0)]),
        ("n6_deterrence", &[(s, 0.25), (0.5, 0.25), (5.0 * s, 0.25), (s, 0.75), (0.5, 0.75), (5.0 * s, 0.75)]),
    ];
    cases
        .iter()
        .map(|(name, pts)| (*name, Configuration::from_pairs(pts).expect("reference layouts are valid")))
        .collect()
}
