use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use super::config::ScenarioConfig;
use super::figure::{emit_figure, figure_name};
use super::record::{
    profit_rows, CaseKind, EquilibriumFields, ResultRecord, ResultsFile, SocialOptimumValues, Status, ThresholdValues,
    Timing,
};
use crate::entry::{refine_equilibrium, threshold_sweep_with, EquilibriumResult, Evaluator, LocationGrid, RefineOptions, Solver};
use crate::error::Error;
use crate::market::{ConsumerGrid, MarketParams};
use crate::welfare::{social_optimum_with, OptimumOptions};

/// Everything a scenario produced, in case order.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub records: Vec<ResultRecord>,
    pub timings: Vec<Timing>,
    pub files: Vec<PathBuf>,
}

impl RunSummary {
    /// Cases that did not converge, as `case n kind: message` lines.
    pub fn failures(&self) -> Vec<String> {
        self.records
            .iter()
            .filter(|r| r.status == Status::Failed)
            .map(|r| {
                format!("case {} (n = {}, {}): {}", r.case, r.n, r.kind.label(), r.message.as_deref().unwrap_or("failed"))
            })
            .collect()
    }

    /// 0 on success, 3 when any case failed to converge.
    pub fn exit_code(&self) -> i32 {
        if self.failures().is_empty() {
            0
        } else {
            3
        }
    }
}

/// Solves the scenario and writes its outputs under `out_dir`.
pub fn run_scenario(config: &ScenarioConfig, out_dir: &Path, threads: usize) -> io::Result<RunSummary> {
    let (records, timings) = solve_scenario(config, threads);
    let files = write_outputs(config, out_dir, &records, &timings)?;
    Ok(RunSummary { records, timings, files })
}

/// A record and the seconds it took.
type Timed = (ResultRecord, f64);

/// Solves every case; one worker per firm count, at most `threads` at once.
pub fn solve_scenario(config: &ScenarioConfig, threads: usize) -> (Vec<ResultRecord>, Vec<Timing>) {
    let jobs: Vec<usize> = (1..=config.n_max).collect();
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Vec<Timed>>>> = Mutex::new(vec![None; jobs.len()]);
    std::thread::scope(|scope| {
        for _ in 0..threads.clamp(1, jobs.len()) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(&n) = jobs.get(k) else { break };
                let out = solve_firm_count(config, n);
                slots.lock().expect("result slots")[k] = Some(out);
            });
        }
    });
    let mut records = Vec::new();
    let mut timings = Vec::new();
    for (case, (mut rec, seconds)) in slots.into_inner().expect("result slots").into_iter().flatten().flatten().enumerate() {
        rec.case = case;
        timings.push(Timing { case, kind: rec.kind, n: rec.n, seconds });
        records.push(rec);
    }
    (records, timings)
}

fn solve_firm_count(config: &ScenarioConfig, n: usize) -> Vec<Timed> {
    let params = config.market.params(1.0);
    let grid = ConsumerGrid::new(config.consumer_resolution).expect("validated consumer resolution");
    let fine = LocationGrid::new(config.location_resolution).expect("validated location resolution");
    let coarse = config.first_pass_resolution.map_or(fine, |r| LocationGrid::new(r).expect("validated first pass"));
    let eval = Evaluator::new(&params, grid);
    let solver = Solver::new(&eval, coarse);
    let case = Case { config, n, eval: &eval, solver: &solver, coarse, fine };
    let mut out = Vec::new();
    if config.thresholds {
        let start = Instant::now();
        let [lo, hi] = config.threshold_range;
        match threshold_sweep_with(n, &params, (lo, hi), &solver) {
            Ok(th) => {
                let values = ThresholdValues {
                    m_enter: th.m_enter,
                    m_max_deter: th.m_max_deter,
                    enter_monotone: th.enter.monotone,
                    deter_monotone: th.deter.monotone,
                    evaluations: th.enter.evaluations + th.deter.evaluations,
                };
                let sweep_time = start.elapsed().as_secs_f64();
                for (kind, m) in [(CaseKind::JustEntered, th.m_enter), (CaseKind::Deterrence, th.m_max_deter)] {
                    let start = Instant::now();
                    let mut rec = case.solve(kind, m);
                    if !(values.enter_monotone && values.deter_monotone) && rec.status == Status::Ok {
                        rec.status = Status::Failed;
                        rec.message = Some("entry indicator is not monotone in the market size".into());
                    }
                    rec.thresholds = Some(values.clone());
                    let seconds = start.elapsed().as_secs_f64() + if kind == CaseKind::JustEntered { sweep_time } else { 0.0 };
                    out.push((rec, seconds));
                }
            }
            Err(e) => {
                for kind in [CaseKind::JustEntered, CaseKind::Deterrence] {
                    let mut rec = case.empty(kind, 0.0);
                    rec.status = Status::Failed;
                    rec.message = Some(e.to_string());
                    out.push((rec, start.elapsed().as_secs_f64()));
                }
            }
        }
    } else {
        for m in config.market_size_values() {
            let start = Instant::now();
            let rec = case.solve(CaseKind::Sequential, m);
            out.push((rec, start.elapsed().as_secs_f64()));
        }
    }
    out
}

struct Case<'a> {
    config: &'a ScenarioConfig,
    n: usize,
    eval: &'a Evaluator,
    solver: &'a Solver<'a>,
    coarse: LocationGrid,
    fine: LocationGrid,
}

impl Case<'_> {
    fn empty(&self, kind: CaseKind, market_size: f64) -> ResultRecord {
        ResultRecord {
            scenario: self.config.id.clone(),
            case: 0,
            kind,
            status: Status::Ok,
            message: None,
            n: self.n,
            market_size,
            consumer_resolution: self.config.consumer_resolution,
            thresholds: None,
            social_optimum: None,
            equilibrium: None,
        }
    }

    fn solve(&self, kind: CaseKind, market_size: f64) -> ResultRecord {
        let params = self.config.market.params(market_size);
        let mut rec = self.empty(kind, market_size);
        let solved = match kind {
            CaseKind::JustEntered => self.solver.just_entered(self.n, &params),
            CaseKind::Sequential | CaseKind::Deterrence => self.solver.sequential(self.n, &params),
        };
        match solved {
            Ok(r) => {
                let (r, note) = self.refine(r, &params, kind != CaseKind::JustEntered);
                rec.message = note;
                if self.config.social_optimum {
                    rec.social_optimum = self.optimum(&r, &params);
                }
                rec.equilibrium = Some(EquilibriumFields::from(r));
            }
            Err(e @ Error::InfeasibleN { .. }) => {
                rec.status = Status::Infeasible;
                rec.message = Some(e.to_string());
            }
            Err(e) => {
                rec.status = Status::Failed;
                rec.message = Some(e.to_string());
            }
        }
        rec
    }

    /// Carries a first-pass equilibrium onto the output lattice, doubling
    /// the lattice density at each step when possible. A step that loses an
    /// entrant keeps the previous layout and says so.
    fn refine(&self, mut r: EquilibriumResult, params: &MarketParams, threat: bool) -> (EquilibriumResult, Option<String>) {
        let mut at = self.coarse;
        while at.resolution() < self.fine.resolution() {
            let next = match at.refined(2) {
                Ok(doubled) if self.fine.side().is_multiple_of(doubled.side()) => doubled,
                _ => self.fine,
            };
            match refine_equilibrium(&r, params, &next, self.eval, threat, &RefineOptions::default()) {
                Ok(fine) => r = fine,
                Err(e) => {
                    let note = format!("refinement onto the {}-lattice failed ({e}); kept the {}-lattice layout", next.resolution(), at.resolution());
                    return (r, Some(note));
                }
            }
            at = next;
        }
        (r, None)
    }

    fn optimum(&self, r: &EquilibriumResult, params: &MarketParams) -> Option<SocialOptimumValues> {
        let opts = OptimumOptions { seed: self.config.seed, warm_starts: vec![r.configuration.clone()], ..Default::default() };
        social_optimum_with(self.n, params, &opts).ok().map(|o| SocialOptimumValues {
            cost: o.result.cost,
            locations: o.configuration.locations.iter().map(|p| [p.x, p.y]).collect(),
            spread: o.spread,
        })
    }
}

/// Writes `results.json`, `timings.json`, and the requested figures and
/// profit table. Returns the paths written.
pub fn write_outputs(
    config: &ScenarioConfig,
    out_dir: &Path,
    records: &[ResultRecord],
    timings: &[Timing],
) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    let mut write = |path: PathBuf, bytes: &[u8]| -> io::Result<()> {
        fs::write(&path, bytes)?;
        files.push(path);
        Ok(())
    };
    if config.outputs.json {
        write(out_dir.join("results.json"), ResultsFile::new(&config.id, records.to_vec()).to_json().as_bytes())?;
        let mut t = serde_json::to_string_pretty(timings).map_err(io::Error::other)?;
        t.push('\n');
        write(out_dir.join("timings.json"), t.as_bytes())?;
    }
    if config.outputs.svg {
        let dir = out_dir.join("figures");
        fs::create_dir_all(&dir)?;
        let mut used = std::collections::HashSet::new();
        for rec in records.iter().filter(|r| r.equilibrium.is_some()) {
            let mut name = figure_name(rec);
            if !used.insert(name.clone()) {
                name = format!("{}_case{}.svg", name.trim_end_matches(".svg"), rec.case);
                used.insert(name.clone());
            }
            write(dir.join(name), emit_figure(rec).as_bytes())?;
        }
    }
    if config.outputs.csv {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in profit_rows(records) {
            w.serialize(row).map_err(io::Error::other)?;
        }
        let bytes = w.into_inner().map_err(|e| io::Error::other(e.to_string()))?;
        write(out_dir.join("profits.csv"), &bytes)?;
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n_max: usize, sizes: Vec<f64>) -> ScenarioConfig {
        ScenarioConfig {
            id: "small".into(),
            n_max,
            market_sizes: sizes,
            consumer_resolution: 16,
            location_resolution: 9,
            first_pass_resolution: Some(5),
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn monopoly_case_sits_in_the_center() {
        let (records, timings) = solve_scenario(&small(1, vec![100.0]), 1);
        assert_eq!(records.len(), 1);
        assert_eq!(timings.len(), 1);
        let e = records[0].equilibrium.as_ref().unwrap();
        assert_eq!(e.configuration.locations, vec![crate::geometry::Point::new(0.5, 0.5)]);
        assert_eq!(e.location_resolution, 9);
    }

    #[test]
    fn small_market_is_infeasible_not_failed() {
        let (records, _) = solve_scenario(&small(2, vec![50.0]), 2);
        assert_eq!(records[1].status, Status::Infeasible);
        assert!(records[1].equilibrium.is_none());
    }

    #[test]
    fn thread_count_does_not_change_records() {
        let cfg = small(2, vec![60.0, 200.0]);
        assert_eq!(solve_scenario(&cfg, 1).0, solve_scenario(&cfg, 3).0);
    }
}
