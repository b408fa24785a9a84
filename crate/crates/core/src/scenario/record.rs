use serde::{Deserialize, Serialize};

use crate::entry::{EquilibriumResult, GameDiagnostics, Regime};
use crate::geometry::Point;
use crate::market::{Configuration, PriceVector};

/// Current `results.json` schema version.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseKind {
    /// Sequential equilibrium under the entry threat at a given market size.
    Sequential,
    /// Exactly `n` entrants at the `n`-th entry threshold.
    JustEntered,
    /// `n` incumbents at their maximal deterrence market size.
    Deterrence,
}

impl CaseKind {
    pub fn label(self) -> &'static str {
        match self {
            CaseKind::Sequential => "sequential",
            CaseKind::JustEntered => "just_entered",
            CaseKind::Deterrence => "deterrence",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    /// Fewer than `n` firms enter at this market size.
    Infeasible,
    /// A solve or threshold search did not converge.
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdValues {
    pub m_enter: f64,
    pub m_max_deter: f64,
    pub enter_monotone: bool,
    pub deter_monotone: bool,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocialOptimumValues {
    pub cost: f64,
    pub locations: Vec<[f64; 2]>,
    pub spread: f64,
}

/// One solved case as written to `results.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub scenario: String,
    pub case: usize,
    pub kind: CaseKind,
    pub status: Status,
    pub message: Option<String>,
    pub n: usize,
    pub market_size: f64,
    pub consumer_resolution: usize,
    pub thresholds: Option<ThresholdValues>,
    pub social_optimum: Option<SocialOptimumValues>,
    #[serde(flatten)]
    pub equilibrium: Option<EquilibriumFields>,
}

/// [`EquilibriumResult`] without the fields a record already carries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumFields {
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

impl From<EquilibriumResult> for EquilibriumFields {
    fn from(r: EquilibriumResult) -> Self {
        Self {
            configuration: r.configuration,
            prices: r.prices,
            profits: r.profits,
            regime: r.regime,
            entrant_blocked: r.entrant_blocked,
            best_entrant_profit: r.best_entrant_profit,
            best_entrant_location: r.best_entrant_location,
            social_cost: r.social_cost,
            location_resolution: r.location_resolution,
            diagnostics: r.diagnostics,
        }
    }
}

impl ResultRecord {
    pub fn regime(&self) -> Option<Regime> {
        self.equilibrium.as_ref().map(|r| r.regime)
    }

    /// The solved equilibrium, when there is one.
    pub fn result(&self) -> Option<EquilibriumResult> {
        self.equilibrium.clone().map(|e| EquilibriumResult {
            n: self.n,
            market_size: self.market_size,
            configuration: e.configuration,
            prices: e.prices,
            profits: e.profits,
            regime: e.regime,
            entrant_blocked: e.entrant_blocked,
            best_entrant_profit: e.best_entrant_profit,
            best_entrant_location: e.best_entrant_location,
            social_cost: e.social_cost,
            location_resolution: e.location_resolution,
            diagnostics: e.diagnostics,
        })
    }
}

/// Contents of `results.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsFile {
    pub schema: u32,
    pub scenario: String,
    pub records: Vec<ResultRecord>,
}

impl ResultsFile {
    pub fn new(scenario: &str, records: Vec<ResultRecord>) -> Self {
        Self { schema: SCHEMA_VERSION, scenario: scenario.to_string(), records }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("records serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

/// Wall-clock seconds per case, kept apart from `results.json` so that the
/// latter is reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub case: usize,
    pub kind: CaseKind,
    pub n: usize,
    pub seconds: f64,
}

/// One CSV row: a firm in a solved case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfitRow {
    pub case: usize,
    pub kind: CaseKind,
    pub n: usize,
    pub market_size: f64,
    pub regime: Option<Regime>,
    pub firm: usize,
    pub x: f64,
    pub y: f64,
    pub price: f64,
    pub profit: f64,
}

pub fn profit_rows(records: &[ResultRecord]) -> Vec<ProfitRow> {
    records
        .iter()
        .filter_map(|rec| rec.equilibrium.as_ref().map(|r| (rec, r)))
        .flat_map(|(rec, r)| {
            r.configuration.locations.iter().enumerate().map(move |(i, p)| ProfitRow {
                case: rec.case,
                kind: rec.kind,
                n: rec.n,
                market_size: rec.market_size,
                regime: Some(r.regime),
                firm: i + 1,
                x: p.x,
                y: p.y,
                price: r.prices.0[i],
                profit: r.profits[i],
            })
        })
        .collect()
}
