use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::evaluator::Evaluator;
use super::lattice::{LocationGrid, Site};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::market::{ConsumerGrid, MarketParams};
use super::Solver;

/// Best blocking layout of `n` incumbents on a lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryBarrier {
    pub n: usize,
    /// `min_X max_y v(y | X)`: the next entrant's best variable profit per
    /// unit of market size against the least favorable incumbent layout.
    pub unit_profit: f64,
    pub configuration: Vec<Point>,
    pub entrant: Option<Point>,
    pub location_resolution: usize,
    #[serde(skip)]
    pub(crate) sites: Vec<Site>,
}

impl EntryBarrier {
    /// Market size at which the best entrant against this layout breaks even.
    pub fn break_even(&self, fixed_cost: f64) -> f64 {
        fixed_cost / self.unit_profit
    }
}

/// Computes [`EntryBarrier`] by exhaustive search over incumbent sets up to
/// symmetry, cutting each set's entrant scan short once it cannot win.
pub fn entry_barrier(n: usize, lattice: &LocationGrid, eval: &Evaluator) -> EntryBarrier {
    let mut sets = Vec::new();
    let sites: Vec<Site> = lattice.sites().collect();
    combinations(&sites, n, 0, &mut Vec::new(), &mut |set| {
        if lattice.canonical(set).0 == set {
            sets.push(set.to_vec());
        }
    });
    let mut best: Option<(Vec<Site>, Site, f64)> = None;
    for set in sets {
        let mut excluded = HashSet::new();
        loop {
            let cutoff = best.as_ref().map_or(f64::INFINITY, |b| b.2);
            let Some((y, value)) = best_entrant(lattice, eval, &set, &excluded, cutoff) else {
                break;
            };
            let mut all = set.clone();
            all.push(y);
            if eval.verified(&eval.solve_sites(lattice, &all).solved) {
                best = Some((set.clone(), y, value));
                break;
            }
            excluded.insert(y);
        }
    }
    let (set, entrant, unit_profit) = match best {
        Some((s, y, v)) => (s, Some(y), v),
        None => (Vec::new(), None, f64::INFINITY),
    };
    EntryBarrier {
        n,
        unit_profit,
        configuration: set.iter().map(|&s| lattice.point(s)).collect(),
        entrant: entrant.map(|s| lattice.point(s)),
        location_resolution: lattice.resolution(),
        sites: set,
    }
}

fn combinations(sites: &[Site], k: usize, from: usize, current: &mut Vec<Site>, visit: &mut impl FnMut(&[Site])) {
    if current.len() == k {
        visit(current);
        return;
    }
    for i in from..sites.len() {
        if sites.len() - i < k - current.len() {
            break;
        }
        current.push(sites[i]);
        combinations(sites, k, i + 1, current, visit);
        current.pop();
    }
}

/// Entrant's best site against `set`, or `None` when it reaches `cutoff`.
/// Far sites are tried first so that strong entry points end the scan early.
pub(crate) fn best_entrant(
    lattice: &LocationGrid,
    eval: &Evaluator,
    set: &[Site],
    excluded: &HashSet<Site>,
    cutoff: f64,
) -> Option<(Site, f64)> {
    let stab = lattice.stabilizer(set);
    let points: Vec<Point> = set.iter().map(|&s| lattice.point(s)).collect();
    let mut candidates: Vec<(f64, Site)> = lattice
        .sites()
        .filter(|s| !set.contains(s) && !excluded.contains(s))
        .filter(|&s| stab.iter().all(|&g| lattice.transform(g, s) >= s))
        .map(|s| {
            let p = lattice.point(s);
            (points.iter().map(|q| q.distance(&p)).fold(f64::INFINITY, f64::min), s)
        })
        .collect();
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut best: Option<(Site, f64)> = None;
    let mut all = set.to_vec();
    all.push(Site::new(0, 0));
    for (_, y) in candidates {
        *all.last_mut().expect("entrant slot") = y;
        let lookup = eval.solve_sites(lattice, &all);
        if !lookup.found() {
            continue;
        }
        let v = lookup.unit_profit(set.len());
        if v >= cutoff {
            return None;
        }
        if best.is_none_or(|(s, b)| v > b || (v == b && y < s)) {
            best = Some((y, v));
        }
    }
    best
}

/// Bisection result for a break-even market size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    /// Largest market size seen with negative entrant profit.
    pub lo: f64,
    /// Smallest market size seen with non-negative entrant profit.
    pub hi: f64,
    pub evaluations: usize,
    /// Whether every evaluated profit sign was ordered in market size.
    pub monotone: bool,
}

/// Bisects `profit(M)` for its sign change until `hi - lo <= rel_tol * hi`.
///
/// Eight geometrically spaced samples across the range are checked for a
/// single sign change first; the result records whether every sign seen is
/// ordered in market size.
pub fn bisect_threshold(lo: f64, hi: f64, rel_tol: f64, mut profit: impl FnMut(f64) -> f64) -> Result<Bracket> {
    if !(lo > 0.0 && hi > lo && rel_tol > 0.0) {
        return Err(Error::InvalidParameter { name: "market_range", reason: format!("need 0 < {lo} < {hi}") });
    }
    let (f_lo, f_hi) = (profit(lo), profit(hi));
    if !(f_lo < 0.0 && f_hi >= 0.0) {
        return Err(Error::BracketingFailure { lo, hi, blocked_lo: f_lo < 0.0, blocked_hi: f_hi < 0.0 });
    }
    let mut seen = vec![(lo, false), (hi, true)];
    const SAMPLES: usize = 8;
    let ratio = (hi / lo).powf(1.0 / (SAMPLES + 1) as f64);
    for k in 1..=SAMPLES {
        let m = lo * ratio.powi(k as i32);
        seen.push((m, profit(m) >= 0.0));
    }
    seen.sort_by(|x, y| x.0.total_cmp(&y.0));
    let first_entry = seen.iter().position(|s| s.1).expect("hi enters");
    let (mut a, mut b) = (seen[first_entry - 1].0, seen[first_entry].0);
    while b - a > rel_tol * b {
        let mid = 0.5 * (a + b);
        let enters = profit(mid) >= 0.0;
        seen.push((mid, enters));
        if enters {
            b = mid;
        } else {
            a = mid;
        }
    }
    seen.sort_by(|x, y| x.0.total_cmp(&y.0));
    let monotone = seen.windows(2).all(|w| w[0].1 <= w[1].1);
    Ok(Bracket { lo: a, hi: b, evaluations: seen.len(), monotone })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub n: usize,
    /// Least market size at which the `n`-th firm enters in the sequential
    /// equilibrium.
    pub m_enter: f64,
    /// Greatest market size at which `n` firms all enter and still block
    /// the `(n + 1)`-th.
    pub m_max_deter: f64,
    pub enter: Bracket,
    pub deter: Bracket,
}

/// Entry and maximal-deterrence market sizes for `n` firms.
pub fn threshold_sweep(
    n: usize,
    params: &MarketParams,
    m_range: (f64, f64),
    loc_grid: &LocationGrid,
    grid: &ConsumerGrid,
) -> Result<Thresholds> {
    let eval = Evaluator::new(params, *grid);
    threshold_sweep_with(n, params, m_range, &Solver::new(&eval, *loc_grid))
}

/// [`threshold_sweep`] on an existing solver, sharing its price cache.
pub fn threshold_sweep_with(n: usize, params: &MarketParams, m_range: (f64, f64), solver: &Solver<'_>) -> Result<Thresholds> {
    if n == 0 || n >= super::MAX_FIRMS {
        return Err(Error::SiteCount { count: n, max: super::MAX_FIRMS - 1 });
    }
    let at = |m: f64| MarketParams { market_size: m, ..*params };
    let enter = bisect_threshold(m_range.0, m_range.1, 1e-3, |m| solver.nth_entrant_profit(n, &at(m)))?;
    let deter = bisect_threshold(enter.hi, m_range.1, 1e-3, |m| solver.deterrence_margin(n, &at(m)))?;
    Ok(Thresholds { n, m_enter: enter.hi, m_max_deter: deter.lo, enter, deter })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisection_brackets_a_linear_root() {
        let b = bisect_threshold(1.0, 100.0, 1e-3, |m| 0.5 * m - 10.0).unwrap();
        assert!(b.lo < 20.0 && 20.0 <= b.hi);
        assert!(b.hi - b.lo <= 1e-3 * b.hi);
        assert!(b.monotone);
    }

    #[test]
    fn bisection_reports_signs_when_not_bracketed() {
        let err = bisect_threshold(30.0, 100.0, 1e-3, |m| 0.5 * m - 10.0).unwrap_err();
        assert_eq!(err, Error::BracketingFailure { lo: 30.0, hi: 100.0, blocked_lo: false, blocked_hi: false });
    }

    #[test]
    fn bisection_flags_non_monotone_profit() {
        let b = bisect_threshold(1.0, 100.0, 1e-3, |m| if (40.0..70.0).contains(&m) { -1.0 } else { m - 20.0 }).unwrap();
        assert!(!b.monotone);
        assert!(b.lo < 20.0 && 20.0 <= b.hi);
    }

    #[test]
    fn monopoly_barrier_is_best_site_profit() {
        let params = MarketParams::default();
        let eval = Evaluator::new(&params, ConsumerGrid::new(20).unwrap());
        let lattice = LocationGrid::new(9).unwrap();
        let b0 = entry_barrier(0, &lattice, &eval);
        assert_eq!(b0.entrant, Some(Point::new(0.5, 0.5)));
        let b1 = entry_barrier(1, &lattice, &eval);
        assert_eq!(b1.configuration, vec![Point::new(0.5, 0.5)]);
        assert!(b1.unit_profit < b0.unit_profit);
    }

    #[test]
    fn combinations_count() {
        let sites: Vec<Site> = (0..6).map(|i| Site::new(i, 0)).collect();
        let mut count = 0;
        combinations(&sites, 3, 0, &mut Vec::new(), &mut |_| count += 1);
        assert_eq!(count, 20);
    }
}
