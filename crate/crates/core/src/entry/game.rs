use std::collections::HashMap;
use std::rc::Rc;

use super::evaluator::{Evaluator, LastEntrant, Lookup};
use super::lattice::{LocationGrid, Site};
use crate::geometry::Symmetry;

/// Where the firm entering at a given position may locate.
#[derive(Debug, Clone, PartialEq)]
pub enum Candidates {
    /// Every free lattice site, pruned by the incumbents' symmetries.
    All,
    /// A fixed list of sites.
    Only(Vec<Site>),
    /// Scan every `stride`-th site, then climb from the best few on the
    /// full lattice.
    Search { stride: u16 },
}

/// Solved subgame from one incumbent set, in that set's frame.
#[derive(Debug, Clone, Default)]
pub(crate) struct Node {
    /// Sites chosen by later entrants, in entry order.
    pub(crate) added: Vec<Site>,
    /// Next entrant's best site and profit, entering or not.
    pub(crate) best: Option<(Site, f64)>,
    /// Sites tying with `best` within rounding.
    pub(crate) ties: Vec<Site>,
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct GameCounters {
    pub(crate) nodes: u64,
    pub(crate) candidates: u64,
    pub(crate) skipped: u64,
}

/// Backward induction over `cap` potential entrants moving in turn.
///
/// Each potential entrant picks the site maximizing its own profit in the
/// final configuration reached when all later ones play the same way, and
/// enters when that profit is non-negative. One that stays out passes the
/// move to the next.
pub(crate) struct Game<'a> {
    eval: &'a Evaluator,
    lattice: LocationGrid,
    market_size: f64,
    fixed_cost: f64,
    cap: usize,
    plan: Vec<Candidates>,
    symmetric: bool,
    memo: HashMap<(Vec<Site>, usize), Rc<Node>>,
    pub(crate) counters: GameCounters,
}

struct Scored {
    site: Site,
    profit: f64,
    added: Vec<Site>,
    lookup: Lookup,
}

impl<'a> Game<'a> {
    pub(crate) fn new(eval: &'a Evaluator, lattice: LocationGrid, market_size: f64, fixed_cost: f64, cap: usize) -> Self {
        Self {
            eval,
            lattice,
            market_size,
            fixed_cost,
            cap,
            plan: vec![Candidates::All; cap],
            symmetric: lattice.symmetry_reduction(),
            memo: HashMap::new(),
            counters: GameCounters::default(),
        }
    }

    /// Candidate rule per entry position; symmetric pruning stays on only
    /// when every position uses the full lattice.
    pub(crate) fn with_plan(mut self, plan: Vec<Candidates>) -> Self {
        assert_eq!(plan.len(), self.cap, "one candidate rule per entry position");
        self.symmetric &= plan.iter().all(|c| *c == Candidates::All);
        self.plan = plan;
        self
    }

    pub(crate) fn lattice(&self) -> &LocationGrid {
        &self.lattice
    }

    /// Subgame outcome after `incumbents` when every remaining potential
    /// entrant is still to move, in the incumbents' frame.
    pub(crate) fn solve(&mut self, incumbents: &[Site]) -> Node {
        self.solve_left(incumbents, self.cap.saturating_sub(incumbents.len()))
    }

    /// Subgame outcome after `incumbents` with `left` potential entrants
    /// still to move.
    pub(crate) fn solve_left(&mut self, incumbents: &[Site], left: usize) -> Node {
        if !self.symmetric {
            let mut key = incumbents.to_vec();
            key.sort_unstable();
            return (*self.node(key, left)).clone();
        }
        let (key, g) = self.lattice.canonical(incumbents);
        let node = self.node(key, left);
        let back = g.inverse();
        let map = |s: Site| self.lattice.transform(back, s);
        Node {
            added: node.added.iter().map(|&s| map(s)).collect(),
            best: node.best.map(|(s, p)| (map(s), p)),
            ties: node.ties.iter().map(|&s| map(s)).collect(),
        }
    }

    /// Every site in entry order, starting from `incumbents`.
    pub(crate) fn play(&mut self, incumbents: &[Site]) -> Vec<Site> {
        let mut all = incumbents.to_vec();
        all.extend(self.solve(incumbents).added);
        all
    }

    fn node(&mut self, key: Vec<Site>, left: usize) -> Rc<Node> {
        let key = (key, left);
        if let Some(hit) = self.memo.get(&key) {
            return Rc::clone(hit);
        }
        let node = Rc::new(self.compute(&key.0, left));
        self.memo.insert(key, Rc::clone(&node));
        node
    }

    fn score(&mut self, incumbents: &[Site], site: Site, left: usize) -> Option<Scored> {
        self.counters.candidates += 1;
        let mut set = incumbents.to_vec();
        set.push(site);
        let added = if left > 1 { self.solve_left(&set, left - 1).added } else { Vec::new() };
        set.extend_from_slice(&added);
        let lookup = self.eval.solve_sites(&self.lattice, &set);
        if !lookup.found() {
            self.counters.skipped += 1;
            return None;
        }
        let profit = self.market_size * lookup.unit_profit(incumbents.len()) - self.fixed_cost;
        Some(Scored { site, profit, added, lookup })
    }

    fn compute(&mut self, incumbents: &[Site], left: usize) -> Node {
        self.counters.nodes += 1;
        if left == 0 {
            return Node::default();
        }
        if self.symmetric && left == 1 {
            return self.last_entrant(incumbents);
        }
        let rule = self.plan.get(incumbents.len()).or(self.plan.last()).cloned().unwrap_or(Candidates::All);
        let mut scored = match rule {
            Candidates::All => {
                let stab = if self.symmetric { self.lattice.stabilizer(incumbents) } else { vec![Symmetry::Identity] };
                let sites: Vec<Site> = self
                    .lattice
                    .sites()
                    .filter(|s| !incumbents.contains(s))
                    .filter(|&s| stab.iter().all(|&g| self.lattice.transform(g, s) >= s))
                    .collect();
                sites.into_iter().filter_map(|s| self.score(incumbents, s, left)).collect()
            }
            Candidates::Only(sites) => sites
                .into_iter()
                .filter(|s| !incumbents.contains(s))
                .filter_map(|s| self.score(incumbents, s, left))
                .collect(),
            Candidates::Search { stride } => self.search(incumbents, stride.max(1), left),
        };
        scored.sort_by(|a, b| b.profit.total_cmp(&a.profit).then(a.site.cmp(&b.site)));
        let Some(chosen) = scored.iter().position(|s| self.eval.verified(&s.lookup.solved)) else {
            self.counters.skipped += scored.len() as u64;
            let added = self.solve_left(incumbents, left - 1).added;
            return Node { added, ..Node::default() };
        };
        self.counters.skipped += chosen as u64;
        let top = &scored[chosen];
        let slack = 1e-9 * (1.0 + top.profit.abs());
        let ties = scored[chosen..].iter().take_while(|s| top.profit - s.profit <= slack).map(|s| s.site).collect();
        let best = Some((top.site, top.profit));
        let added = if top.profit >= 0.0 {
            std::iter::once(top.site).chain(top.added.iter().copied()).collect()
        } else {
            self.solve_left(incumbents, left - 1).added
        };
        Node { added, best, ties }
    }

    /// Final entrant's choice: only the ranking of unit profits matters, so
    /// it is shared across market sizes through the evaluator.
    fn last_entrant(&mut self, incumbents: &[Site]) -> Node {
        let (eval, lattice) = (self.eval, self.lattice);
        let (last, fresh) = eval.last_entrant(&lattice, incumbents, || {
            let stab = lattice.stabilizer(incumbents);
            let mut set = incumbents.to_vec();
            set.push(Site::new(0, 0));
            let mut out = LastEntrant::default();
            let mut scored: Vec<(f64, Site, Lookup)> = Vec::new();
            for s in lattice.sites() {
                if incumbents.contains(&s) || stab.iter().any(|&g| lattice.transform(g, s) < s) {
                    continue;
                }
                out.candidates += 1;
                *set.last_mut().expect("entrant slot") = s;
                let lookup = eval.solve_sites(&lattice, &set);
                if lookup.found() {
                    scored.push((lookup.unit_profit(incumbents.len()), s, lookup));
                } else {
                    out.skipped += 1;
                }
            }
            scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            match scored.iter().position(|x| eval.verified(&x.2.solved)) {
                Some(chosen) => {
                    out.skipped += chosen as u64;
                    let top = scored[chosen].0;
                    let slack = 1e-9 * (1.0 + top.abs());
                    out.ties = scored[chosen..].iter().take_while(|x| top - x.0 <= slack).map(|x| x.1).collect();
                    out.best = Some((scored[chosen].1, top));
                }
                None => out.skipped += scored.len() as u64,
            }
            out
        });
        if fresh {
            self.counters.candidates += last.candidates;
            self.counters.skipped += last.skipped;
        }
        let best = last.best.map(|(s, v)| (s, self.market_size * v - self.fixed_cost));
        let added = best.filter(|b| b.1 >= 0.0).map(|b| vec![b.0]).unwrap_or_default();
        Node { added, best, ties: last.ties.clone() }
    }

    fn search(&mut self, incumbents: &[Site], stride: u16, left: usize) -> Vec<Scored> {
        let side = self.lattice.side();
        let coarse: Vec<u16> = (0..=side).filter(|v| v % stride == 0 || *v == side).collect();
        let mut seen: HashMap<Site, Option<f64>> = HashMap::new();
        let mut out = Vec::new();
        let record = |game: &mut Self, s: Site, out: &mut Vec<Scored>, seen: &mut HashMap<Site, Option<f64>>| {
            if incumbents.contains(&s) {
                return None;
            }
            if let Some(v) = seen.get(&s) {
                return *v;
            }
            let scored = game.score(incumbents, s, left);
            let v = scored.as_ref().map(|x| x.profit);
            seen.insert(s, v);
            out.extend(scored);
            v
        };
        for &ix in &coarse {
            for &iy in &coarse {
                record(self, Site::new(ix, iy), &mut out, &mut seen);
            }
        }
        let mut starts: Vec<(f64, Site)> = out.iter().map(|s| (s.profit, s.site)).collect();
        starts.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(mut value, mut at) in starts.iter().take(3) {
            loop {
                let mut next = None;
                for s in self.lattice.neighborhood(at, 1) {
                    if let Some(v) = record(self, s, &mut out, &mut seen) {
                        if v > value {
                            value = v;
                            next = Some(s);
                        }
                    }
                }
                match next {
                    Some(s) => at = s,
                    None => break,
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{ConsumerGrid, MarketParams};

    fn evaluator() -> Evaluator {
        Evaluator::new(&MarketParams::default(), ConsumerGrid::new(20).unwrap())
    }

    #[test]
    fn monopolist_chooses_center() {
        let eval = evaluator();
        let g = LocationGrid::new(9).unwrap();
        let mut game = Game::new(&eval, g, 5.0, 25.0, 1);
        assert_eq!(game.play(&[]), vec![Site::new(4, 4)]);
    }

    #[test]
    fn symmetric_and_plain_games_agree() {
        let eval = evaluator();
        let g = LocationGrid::new(5).unwrap();
        let mut sym = Game::new(&eval, g, 40.0, 25.0, 2);
        let mut plain = Game::new(&eval, g.with_symmetry_reduction(false), 40.0, 25.0, 2);
        let a = sym.play(&[Site::new(1, 3)]);
        let b = plain.play(&[Site::new(1, 3)]);
        let profit = |sites: &[Site]| eval.solve_sites(&g, sites).view().unit_profit;
        assert_eq!(a.len(), b.len());
        let (pa, pb) = (profit(&a), profit(&b));
        for (x, y) in pa.iter().zip(&pb) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn search_finds_exhaustive_best_entrant() {
        let eval = evaluator();
        let g = LocationGrid::new(9).unwrap();
        let inc = [Site::new(4, 4)];
        let mut full = Game::new(&eval, g.with_symmetry_reduction(false), 100.0, 25.0, 2);
        let mut fast = Game::new(&eval, g, 100.0, 25.0, 2).with_plan(vec![Candidates::All, Candidates::Search { stride: 4 }]);
        let a = full.solve(&inc).best.unwrap();
        let b = fast.solve(&inc).best.unwrap();
        assert!((a.1 - b.1).abs() < 1e-9, "{a:?} {b:?}");
    }
}
