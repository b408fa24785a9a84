//! Second-stage price competition for a fixed configuration.
//!
//! [`price_equilibrium`] runs damped simultaneous best responses from several
//! starts and reports how far apart the resulting equilibria are, so a
//! non-unique equilibrium shows up in the diagnostics instead of being hidden.
//! [`solve_prices_newton`] is a faster route to the same fixed point used in
//! bulk by the location search; it falls back to best-response iteration
//! whenever its own checks fail.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{Configuration, ConsumerGrid, DemandField, MarketParams, PriceVector};

/// Where a best-response run starts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PriceStart {
    /// Every firm at marginal cost.
    MarginalCost,
    /// Every firm at half the reservation value.
    HalfReservation,
    /// Independent uniform draws on `[c, a]` from a seeded generator.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSolverOptions {
    /// Weight on the new best response in `p <- (1 - l) p + l BR(p)`.
    pub damping: f64,
    /// Stop when every firm's best response is within this of its price.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Coarse price samples on `[c, a]` before golden-section refinement.
    pub scan_samples: usize,
    pub refine_tolerance: f64,
    pub starts: Vec<PriceStart>,
    pub seed: u64,
}

impl Default for PriceSolverOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tolerance: 1e-6,
            max_iterations: 500,
            scan_samples: 64,
            refine_tolerance: 1e-7,
            starts: vec![PriceStart::MarginalCost, PriceStart::HalfReservation, PriceStart::Random],
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSolveReport {
    pub prices: PriceVector,
    /// Price updates applied in the reported run.
    pub iterations: usize,
    /// Largest `|BR_i(p) - p_i|` at the last check of the reported run.
    pub max_update: f64,
    pub converged: bool,
    /// Largest price gap between equilibria reached from different starts.
    pub multistart_spread: f64,
}

/// Profit-maximizing price for firm `i` with every rival price held fixed.
pub fn best_response_price(
    i: usize,
    config: &Configuration,
    prices: &PriceVector,
    params: &MarketParams,
    grid: &ConsumerGrid,
) -> Result<f64> {
    if prices.len() != config.len() {
        return Err(Error::DimensionMismatch { expected: config.len(), actual: prices.len() });
    }
    if i >= config.len() {
        return Err(Error::DimensionMismatch { expected: config.len(), actual: i + 1 });
    }
    let field = DemandField::new(config, params, grid);
    Ok(best_response_in(&field, i, prices.as_slice(), params, &PriceSolverOptions::default()))
}

/// Coarse scan over `[c, a]`, then golden-section search on the bracket
/// around the best sample. Prices above the point where demand vanishes
/// are left out of the scan.
pub(crate) fn best_response_in(
    field: &DemandField,
    i: usize,
    prices: &[f64],
    params: &MarketParams,
    opts: &PriceSolverOptions,
) -> f64 {
    let c = params.marginal_cost;
    let a = params.reservation;
    let curve = field.own_price_curve(i, prices);
    if curve.is_empty() {
        return c;
    }
    let profit = |p: f64| (p - c) * curve.demand_at(p);
    let top = curve.choke_price().min(a);
    let samples = opts.scan_samples.max(3);
    let step = (top - c) / (samples - 1) as f64;
    let mut best_k = 0;
    let mut best_v = f64::NEG_INFINITY;
    for k in 0..samples {
        let v = profit(c + step * k as f64);
        if v > best_v {
            best_v = v;
            best_k = k;
        }
    }
    if best_v <= 0.0 {
        return c;
    }
    let mut lo = c + step * best_k.saturating_sub(1) as f64;
    let mut hi = (c + step * (best_k + 1) as f64).min(top);
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = profit(x1);
    let mut f2 = profit(x2);
    while hi - lo > opts.refine_tolerance {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = profit(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = profit(x1);
        }
    }
    let refined = 0.5 * (lo + hi);
    let scanned = c + step * best_k as f64;
    if profit(refined) >= best_v {
        refined
    } else {
        scanned
    }
}

fn start_prices(start: PriceStart, n: usize, params: &MarketParams, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let c = params.marginal_cost;
    let a = params.reservation;
    match start {
        PriceStart::MarginalCost => vec![c; n],
        PriceStart::HalfReservation => vec![0.5 * a; n],
        PriceStart::Random => (0..n).map(|_| rng.gen_range(c..=a)).collect(),
    }
}

struct Run {
    prices: Vec<f64>,
    iterations: usize,
    residual: f64,
    converged: bool,
}

fn best_response_dynamics(
    field: &DemandField,
    mut prices: Vec<f64>,
    params: &MarketParams,
    opts: &PriceSolverOptions,
) -> Run {
    let n = prices.len();
    // With a single firm there is no interaction to damp.
    let damping = if n == 1 { 1.0 } else { opts.damping };
    let mut iterations = 0;
    let mut residual;
    let mut converged = false;
    let mut responses = vec![0.0; n];
    loop {
        for (i, r) in responses.iter_mut().enumerate() {
            *r = best_response_in(field, i, &prices, params, opts);
        }
        residual = responses.iter().zip(&prices).map(|(r, p)| (r - p).abs()).fold(0.0, f64::max);
        if residual <= opts.tolerance {
            converged = true;
            break;
        }
        if iterations >= opts.max_iterations {
            break;
        }
        for (p, r) in prices.iter_mut().zip(&responses) {
            *p = (1.0 - damping) * *p + damping * r;
        }
        iterations += 1;
    }
    Run { prices, iterations, residual, converged }
}

/// Damped simultaneous best-response iteration from every configured start.
pub fn price_equilibrium(config: &Configuration, params: &MarketParams, grid: &ConsumerGrid) -> PriceSolveReport {
    price_equilibrium_with(config, params, grid, &PriceSolverOptions::default())
}

pub fn price_equilibrium_with(
    config: &Configuration,
    params: &MarketParams,
    grid: &ConsumerGrid,
    opts: &PriceSolverOptions,
) -> PriceSolveReport {
    let field = DemandField::new(config, params, grid);
    solve_field(&field, params, opts)
}

pub fn solve_field(field: &DemandField, params: &MarketParams, opts: &PriceSolverOptions) -> PriceSolveReport {
    let n = field.firm_count();
    if n == 0 {
        return PriceSolveReport {
            prices: PriceVector(Vec::new()),
            iterations: 0,
            max_update: 0.0,
            converged: true,
            multistart_spread: 0.0,
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let starts = if opts.starts.is_empty() { vec![PriceStart::MarginalCost] } else { opts.starts.clone() };
    let runs: Vec<Run> = starts
        .iter()
        .map(|&s| best_response_dynamics(field, start_prices(s, n, params, &mut rng), params, opts))
        .collect();
    let mut spread: f64 = 0.0;
    for (k, a) in runs.iter().enumerate() {
        for b in &runs[k + 1..] {
            let d = a.prices.iter().zip(&b.prices).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            spread = spread.max(d);
        }
    }
    let chosen = runs.iter().position(|r| r.converged).unwrap_or(0);
    let run = &runs[chosen];
    PriceSolveReport {
        prices: PriceVector(run.prices.clone()),
        iterations: run.iterations,
        max_update: run.residual,
        converged: runs.iter().all(|r| r.converged),
        multistart_spread: spread,
    }
}

/// Outcome of [`solve_prices_newton`].
#[derive(Debug, Clone, PartialEq)]
pub struct FastPriceSolution {
    pub prices: Vec<f64>,
    pub converged: bool,
    /// True when Newton failed and best-response iteration produced the result.
    pub used_fallback: bool,
}

/// Rough equilibrium guess: each firm prices at the transport cost of half
/// the distance to its nearest rival.
pub fn heuristic_prices(config: &Configuration, params: &MarketParams) -> Vec<f64> {
    let locs = &config.locations;
    locs.iter()
        .enumerate()
        .map(|(i, p)| {
            let nearest = locs
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, q)| p.distance(q))
                .fold(f64::INFINITY, f64::min);
            let gap = if nearest.is_finite() { nearest } else { 1.0 };
            params.marginal_cost + params.transport_cost * gap.max(0.05) * 0.75
        })
        .collect()
}

fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..n {
            let factor = a[row][col] / a[col][col];
            if factor != 0.0 {
                for k in col..n {
                    a[row][k] -= factor * a[col][k];
                }
                b[row] -= factor * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = ((row + 1)..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// First-order conditions `D_i + (p_i - c) dD_i/dp_i` for every firm.
fn foc_residual(field: &DemandField, prices: &[f64], c: f64) -> (Vec<f64>, Vec<crate::market::OwnPriceProfile>) {
    let profiles = field.price_profiles(prices);
    let r = profiles
        .iter()
        .zip(prices)
        .map(|(pr, &p)| pr.demand + (p - c) * pr.slope)
        .collect();
    (r, profiles)
}

/// Newton's method on the joint first-order conditions with backtracking.
///
/// Returns a root at which every firm's profit is locally concave in its own
/// price and every price lies strictly inside `(c, a)`, or `None`.
pub fn solve_prices_local(field: &DemandField, params: &MarketParams, guess: &[f64]) -> Option<Vec<f64>> {
    newton(field, params, guess).or_else(|| newton(field, params, &diagonal_steps(field, params, guess, 40)))
}

/// Damped per-firm Newton steps on each firm's own first-order condition,
/// which move toward the equilibrium basin more reliably than joint steps.
fn diagonal_steps(field: &DemandField, params: &MarketParams, guess: &[f64], iterations: usize) -> Vec<f64> {
    let c = params.marginal_cost;
    let a = params.reservation;
    let mut p: Vec<f64> = guess.iter().map(|&x| x.clamp(c, a)).collect();
    for _ in 0..iterations {
        let profiles = field.price_profiles(&p);
        let mut moved = 0.0f64;
        for (x, pr) in p.iter_mut().zip(&profiles) {
            let foc = pr.demand + (*x - c) * pr.slope;
            let soc = 2.0 * pr.slope + (*x - c) * pr.curvature;
            // Fall back to a gradient step where the profit is not concave.
            let step = if soc < 0.0 { -foc / soc } else { 0.1 * foc.signum() * (*x - c).max(0.01) };
            let next = (*x + 0.5 * step).clamp(c, a);
            moved = moved.max((next - *x).abs());
            *x = next;
        }
        if moved < 1e-6 {
            break;
        }
    }
    p
}

fn newton(field: &DemandField, params: &MarketParams, guess: &[f64]) -> Option<Vec<f64>> {
    let n = field.firm_count();
    let c = params.marginal_cost;
    let a = params.reservation;
    let scale = field.cell_weight() * field.cell_count() as f64 * 1e-10;
    let mut p: Vec<f64> = guess.iter().map(|&x| x.clamp(c, a)).collect();
    let (mut phi, mut profiles) = foc_residual(field, &p, c);
    let norm = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut ok = norm(&phi) <= scale;
    for _ in 0..60 {
        if ok {
            break;
        }
        let jac: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let pr = &profiles[i];
                (0..n)
                    .map(|j| {
                        if i == j {
                            2.0 * pr.slope + (p[i] - c) * pr.curvature
                        } else {
                            pr.cross_slope[j] + (p[i] - c) * pr.cross_curvature[j]
                        }
                    })
                    .collect()
            })
            .collect();
        let step = solve_linear(jac, phi.iter().map(|x| -x).collect())?;
        let current = norm(&phi);
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let trial: Vec<f64> = p.iter().zip(&step).map(|(x, d)| (x + lambda * d).clamp(c, a)).collect();
            let (tphi, tprof) = foc_residual(field, &trial, c);
            if norm(&tphi) < current {
                p = trial;
                phi = tphi;
                profiles = tprof;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
        ok = norm(&step) * lambda < 1e-11 || norm(&phi) <= scale;
    }
    if !ok {
        return None;
    }
    let concave = profiles.iter().zip(&p).all(|(pr, &x)| 2.0 * pr.slope + (x - c) * pr.curvature < 0.0);
    let interior = p.iter().all(|&x| x > c && x < a);
    (concave && interior).then_some(p)
}

/// True when no firm gains by moving its price away from `prices`: a coarse
/// scan finds no sample beating the current profit by more than a
/// rounding margin, or the refined best response lies within `10 tol`.
pub fn verify_equilibrium(field: &DemandField, params: &MarketParams, prices: &[f64], opts: &PriceSolverOptions) -> bool {
    let c = params.marginal_cost;
    (0..prices.len()).all(|i| {
        let curve = field.own_price_curve(i, prices);
        let current = (prices[i] - c) * curve.demand_at(prices[i]);
        let top = curve.choke_price().min(params.reservation);
        let samples = opts.scan_samples.max(3);
        let step = (top - c) / (samples - 1) as f64;
        let margin = 1e-9 * (1.0 + current.abs());
        let beaten = (0..samples).any(|k| {
            let p = c + step * k as f64;
            (p - c) * curve.demand_at(p) > current + margin
        });
        !beaten || (best_response_in(field, i, prices, params, opts) - prices[i]).abs() <= 10.0 * opts.tolerance
    })
}

/// Local Newton solve, checked against global best responses.
///
/// A root that some firm can beat with a distant price is reported as not
/// converged: no pure-strategy equilibrium lies near it. When Newton stalls,
/// damped best-response iteration with `fallback` options takes over.
pub fn solve_prices_newton(
    field: &DemandField,
    params: &MarketParams,
    guess: &[f64],
    fallback: &PriceSolverOptions,
) -> FastPriceSolution {
    if field.firm_count() <= 1 {
        let report = solve_field(field, params, &PriceSolverOptions { starts: vec![PriceStart::MarginalCost], ..fallback.clone() });
        return FastPriceSolution { prices: report.prices.0, converged: report.converged, used_fallback: false };
    }
    if let Some(p) = solve_prices_local(field, params, guess) {
        let converged = verify_equilibrium(field, params, &p, fallback);
        return FastPriceSolution { prices: p, converged, used_fallback: false };
    }
    let start: Vec<f64> = guess.iter().map(|&x| x.clamp(params.marginal_cost, params.reservation)).collect();
    let run = best_response_dynamics(field, start, params, fallback);
    FastPriceSolution { prices: run.prices, converged: run.converged, used_fallback: true }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::Configuration;

    fn grid(res: usize) -> ConsumerGrid {
        ConsumerGrid::new(res).unwrap()
    }

    #[test]
    fn zero_demand_firm_prices_at_cost() {
        // Marginal cost above the reservation value: no price >= c sells.
        let params = MarketParams { reservation: 0.5, marginal_cost: 2.0, ..MarketParams::default() };
        let config = Configuration::from_pairs(&[(0.2, 0.3), (0.8, 0.6)]).unwrap();
        let prices = PriceVector(vec![2.0, 2.0]);
        let br = best_response_price(0, &config, &prices, &params, &grid(16)).unwrap();
        assert_eq!(br, params.marginal_cost);
    }

    #[test]
    fn monopoly_best_response_matches_brute_force_scan() {
        let params = MarketParams::default();
        let config = Configuration::from_pairs(&[(0.5, 0.5)]).unwrap();
        let g = grid(32);
        let br = best_response_price(0, &config, &PriceVector(vec![0.0]), &params, &g).unwrap();
        let field = DemandField::new(&config, &params, &g);
        let curve = field.own_price_curve(0, &[0.0]);
        let (mut best_p, mut best_v) = (0.0, f64::NEG_INFINITY);
        for k in 0..=100_000 {
            let p = params.reservation * k as f64 / 100_000.0;
            let v = p * curve.demand_at(p);
            if v > best_v {
                best_v = v;
                best_p = p;
            }
        }
        assert!((br - best_p).abs() < 2e-4, "{br} vs {best_p}");
        assert!(br * curve.demand_at(br) >= best_v - 1e-9);
    }

    #[test]
    fn symmetric_firms_have_equal_best_responses() {
        let params = MarketParams::default();
        let config = Configuration::from_pairs(&[(0.25, 0.5), (0.75, 0.5)]).unwrap();
        let prices = PriceVector(vec![0.4, 0.4]);
        let g = grid(32);
        let b0 = best_response_price(0, &config, &prices, &params, &g).unwrap();
        let b1 = best_response_price(1, &config, &prices, &params, &g).unwrap();
        assert!((b0 - b1).abs() < 1e-7);
    }

    #[test]
    fn single_firm_converges_after_one_update() {
        let params = MarketParams::default();
        let config = Configuration::from_pairs(&[(0.3, 0.6)]).unwrap();
        let g = grid(32);
        let report = price_equilibrium(&config, &params, &g);
        assert!(report.converged);
        assert_eq!(report.iterations, 1);
        let br = best_response_price(0, &config, &report.prices, &params, &g).unwrap();
        assert!((br - report.prices.0[0]).abs() < 1e-12);
    }

    #[test]
    fn newton_agrees_with_best_response_dynamics() {
        let params = MarketParams::default();
        let g = grid(32);
        for pairs in [
            vec![(0.25, 0.5), (0.75, 0.5)],
            vec![(0.426, 0.5), (0.889, 0.5), (0.074, 0.5)],
            vec![(0.1, 0.2), (0.7, 0.9), (0.5, 0.4), (0.95, 0.05)],
        ] {
            let config = Configuration::from_pairs(&pairs).unwrap();
            let field = DemandField::new(&config, &params, &g);
            let slow = solve_field(&field, &params, &PriceSolverOptions::default());
            let fast = solve_prices_newton(&field, &params, &heuristic_prices(&config, &params), &PriceSolverOptions::default());
            assert!(fast.converged);
            for (a, b) in slow.prices.0.iter().zip(&fast.prices) {
                assert!((a - b).abs() < 5e-6, "{pairs:?}: {:?} vs {:?}", slow.prices, fast.prices);
            }
        }
    }

    #[test]
    fn linear_solver_solves() {
        let a = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        let x = solve_linear(a, vec![3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-12 && (x[1] - 1.4).abs() < 1e-12);
    }
}
