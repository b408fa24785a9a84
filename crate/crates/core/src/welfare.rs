//! Total transportation cost of serving every consumer from its nearest
//! firm, and its minimization over firm locations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Point};
use crate::market::{Configuration, MarketParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocialCostResult {
    /// `M t sum_i int_{V_i} |x_i - x| dA`.
    pub cost: f64,
    pub per_firm: Vec<f64>,
    /// Set when the configuration came from [`social_optimum`].
    pub optimal_flag: bool,
}

/// Transportation cost with consumers assigned to their nearest firm.
pub fn social_cost(config: &Configuration, params: &MarketParams) -> Result<SocialCostResult> {
    let cells = geometry::voronoi_cells(&config.locations)?;
    let scale = params.market_size * params.transport_cost;
    let per_firm: Vec<f64> = cells
        .iter()
        .zip(&config.locations)
        .map(|(cell, site)| scale * geometry::distance_integral(cell, site))
        .collect();
    Ok(SocialCostResult { cost: per_firm.iter().sum(), per_firm, optimal_flag: false })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimumOptions {
    pub random_starts: usize,
    pub seed: u64,
    pub initial_step: f64,
    pub final_step: f64,
    /// Extra starting configurations, e.g. location equilibria.
    pub warm_starts: Vec<Configuration>,
}

impl Default for OptimumOptions {
    fn default() -> Self {
        Self { random_starts: 32, seed: 0x5eed, initial_step: 1.0 / 8.0, final_step: 1.0 / 512.0, warm_starts: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocialOptimum {
    pub configuration: Configuration,
    pub result: SocialCostResult,
    /// Cost of the worst local optimum minus the best.
    pub spread: f64,
    /// Sorted costs of every local optimum reached.
    pub local_costs: Vec<f64>,
}

/// Best configuration found by multistart pattern search.
pub fn social_optimum(n: usize, params: &MarketParams) -> Result<SocialOptimum> {
    social_optimum_with(n, params, &OptimumOptions::default())
}

pub fn social_optimum_with(n: usize, params: &MarketParams, opts: &OptimumOptions) -> Result<SocialOptimum> {
    if !(1..=geometry::MAX_SITES).contains(&n) {
        return Err(Error::SiteCount { count: n, max: geometry::MAX_SITES });
    }
    if !(opts.final_step > 0.0 && opts.initial_step >= opts.final_step) {
        return Err(Error::InvalidParameter { name: "initial_step", reason: "need initial_step >= final_step > 0".into() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts: Vec<Vec<Point>> = opts
        .warm_starts
        .iter()
        .filter(|c| c.len() == n)
        .map(|c| c.locations.clone())
        .collect();
    for _ in 0..opts.random_starts {
        starts.push((0..n).map(|_| Point::new(rng.gen::<f64>(), rng.gen::<f64>())).collect());
    }
    let mut best: Option<(Vec<Point>, f64)> = None;
    let mut local_costs = Vec::with_capacity(starts.len());
    for start in starts {
        let Some((sites, cost)) = pattern_search(start, params, opts) else {
            continue;
        };
        local_costs.push(cost);
        if best.as_ref().is_none_or(|(_, b)| cost < *b) {
            best = Some((sites, cost));
        }
    }
    let (sites, _) = best.ok_or(Error::InvalidParameter { name: "random_starts", reason: "no valid start".into() })?;
    let configuration = Configuration::new(sites)?;
    let mut result = social_cost(&configuration, params)?;
    result.optimal_flag = true;
    local_costs.sort_by(f64::total_cmp);
    let spread = local_costs.last().unwrap_or(&0.0) - local_costs.first().unwrap_or(&0.0);
    Ok(SocialOptimum { configuration, result, spread, local_costs })
}

fn cost_of(sites: &[Point], params: &MarketParams) -> Option<f64> {
    let config = Configuration::new(sites.to_vec()).ok()?;
    social_cost(&config, params).ok().map(|r| r.cost)
}

/// Coordinate-wise compass search: try `+-step` on each coordinate, keep
/// improvements, halve the step when none helps.
fn pattern_search(mut sites: Vec<Point>, params: &MarketParams, opts: &OptimumOptions) -> Option<(Vec<Point>, f64)> {
    let mut cost = cost_of(&sites, params)?;
    let mut step = opts.initial_step;
    while step >= opts.final_step * (1.0 - 1e-12) {
        let mut improved = false;
        for k in 0..2 * sites.len() {
            for dir in [1.0, -1.0] {
                let mut trial = sites.clone();
                let p = &mut trial[k / 2];
                let coord = if k % 2 == 0 { &mut p.x } else { &mut p.y };
                let moved = (*coord + dir * step).clamp(0.0, 1.0);
                if moved == *coord {
                    continue;
                }
                *coord = moved;
                if let Some(c) = cost_of(&trial, params) {
                    if c < cost - 1e-15 {
                        sites = trial;
                        cost = c;
                        improved = true;
                        break;
                    }
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Some((sites, cost))
}
