use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::entry::{LocationGrid, MAX_FIRMS};
use crate::market::{ConsumerGrid, MarketParams};

/// Smallest consumer and location resolution a scenario accepts.
pub const MIN_RESOLUTION: usize = 9;

/// Smallest lattice allowed for a first pass that is refined afterwards.
pub const MIN_FIRST_PASS_RESOLUTION: usize = 5;

/// Market parameters other than the market size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarketSection {
    pub fixed_cost: f64,
    pub transport_cost: f64,
    pub reservation: f64,
    pub marginal_cost: f64,
}

impl Default for MarketSection {
    fn default() -> Self {
        let p = MarketParams::default();
        Self { fixed_cost: p.fixed_cost, transport_cost: p.transport_cost, reservation: p.reservation, marginal_cost: p.marginal_cost }
    }
}

impl MarketSection {
    pub fn params(&self, market_size: f64) -> MarketParams {
        MarketParams {
            market_size,
            fixed_cost: self.fixed_cost,
            transport_cost: self.transport_cost,
            reservation: self.reservation,
            marginal_cost: self.marginal_cost,
        }
    }
}

/// Geometric sweep of market sizes, `steps` values from `lo` to `hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        match self.steps {
            0 => Vec::new(),
            1 => vec![self.lo],
            k => {
                let ratio = (self.hi / self.lo).powf(1.0 / (k - 1) as f64);
                (0..k).map(|i| if i + 1 == k { self.hi } else { self.lo * ratio.powi(i as i32) }).collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub json: bool,
    pub svg: bool,
    pub csv: bool,
}

impl Default for Outputs {
    fn default() -> Self {
        Self { json: true, svg: false, csv: false }
    }
}

/// One scenario: which equilibria to solve and what to write.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub id: String,
    pub n_max: usize,
    /// Explicit market sizes; ignored when `sweep` is set.
    pub market_sizes: Vec<f64>,
    pub sweep: Option<Sweep>,
    /// Solve at each firm count's entry and maximal-deterrence thresholds
    /// instead of at fixed market sizes.
    pub thresholds: bool,
    /// Market-size interval searched for thresholds.
    pub threshold_range: [f64; 2],
    pub consumer_resolution: usize,
    pub location_resolution: usize,
    /// Coarser lattice solved first and then refined onto
    /// `location_resolution`.
    pub first_pass_resolution: Option<usize>,
    /// Also minimize social cost for each firm count.
    pub social_optimum: bool,
    pub seed: u64,
    pub market: MarketSection,
    pub outputs: Outputs,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            id: "scenario".into(),
            n_max: 2,
            market_sizes: vec![100.0],
            sweep: None,
            thresholds: false,
            threshold_range: [1.0, 20_000.0],
            consumer_resolution: 24,
            location_resolution: 9,
            first_pass_resolution: None,
            social_optimum: false,
            seed: 0x5eed,
            market: MarketSection::default(),
            outputs: Outputs::default(),
        }
    }
}

/// A rejected configuration, with the offending line when known.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}: {}", self.field, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start.min(text.len())].lines().count().max(1));
            let field = line
                .and_then(|l| text.lines().nth(l - 1))
                .and_then(|l| l.split_once('='))
                .map(|(k, _)| k.trim().to_string())
                .unwrap_or_else(|| "config".into());
            let message = e.message().trim().to_string();
            let unknown = message.strip_prefix("unknown field `").and_then(|r| r.split('`').next());
            match unknown {
                Some(key) => ConfigError { line: line_of(text, key).or(line), field: key.to_string(), message },
                None => ConfigError { line, field, message },
            }
        })?;
        config.validate().map_err(|mut e| {
            e.line = line_of(text, &e.field);
            e
        })?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            line: None,
            field: "config".into(),
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |field: &str, message: String| Err(ConfigError { line: None, field: field.into(), message });
        if !(1..=MAX_FIRMS).contains(&self.n_max) {
            return fail("n_max", format!("{} is outside 1..={MAX_FIRMS}", self.n_max));
        }
        if self.thresholds && self.n_max >= MAX_FIRMS {
            return fail("n_max", format!("threshold runs need n_max below {MAX_FIRMS}"));
        }
        if self.consumer_resolution < MIN_RESOLUTION {
            return fail("consumer_resolution", format!("{} is below {MIN_RESOLUTION}", self.consumer_resolution));
        }
        if let Err(e) = ConsumerGrid::new(self.consumer_resolution) {
            return fail("consumer_resolution", e.to_string());
        }
        if self.location_resolution < MIN_RESOLUTION {
            return fail("location_resolution", format!("{} is below {MIN_RESOLUTION}", self.location_resolution));
        }
        if let Err(e) = LocationGrid::new(self.location_resolution) {
            return fail("location_resolution", e.to_string());
        }
        if let Some(first) = self.first_pass_resolution {
            if first < MIN_FIRST_PASS_RESOLUTION || first > self.location_resolution {
                return fail(
                    "first_pass_resolution",
                    format!("{first} must lie in {MIN_FIRST_PASS_RESOLUTION}..={}", self.location_resolution),
                );
            }
            if let Err(e) = LocationGrid::new(first) {
                return fail("first_pass_resolution", e.to_string());
            }
        }
        if let Some(s) = self.sweep {
            if !(s.lo > 0.0 && s.hi >= s.lo && s.hi.is_finite()) {
                return fail("sweep", format!("need 0 < lo <= hi, got lo = {}, hi = {}", s.lo, s.hi));
            }
            if s.steps == 0 {
                return fail("sweep", "steps must be positive".into());
            }
        } else if !self.thresholds {
            if self.market_sizes.is_empty() {
                return fail("market_sizes", "give at least one market size or a sweep".into());
            }
            if let Some(m) = self.market_sizes.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
                return fail("market_sizes", format!("{m} is not a positive market size"));
            }
        }
        let [lo, hi] = self.threshold_range;
        if self.thresholds && !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return fail("threshold_range", format!("need 0 < lo < hi, got [{lo}, {hi}]"));
        }
        if let Err(e) = self.market.params(1.0).validate() {
            let field = match &e {
                crate::Error::InvalidParameter { name, .. } => *name,
                _ => "market",
            };
            return fail(field, e.to_string());
        }
        Ok(())
    }

    /// Market sizes of the fixed-size cases.
    pub fn market_size_values(&self) -> Vec<f64> {
        self.sweep.map_or_else(|| self.market_sizes.clone(), |s| s.values())
    }
}

/// First line assigning `field` (or opening it as a table).
fn line_of(text: &str, field: &str) -> Option<usize> {
    let key = field.rsplit('.').next().unwrap_or(field);
    text.lines().position(|l| {
        let l = l.trim_start();
        let bare = l.strip_prefix('[').map(|r| r.trim_start()).unwrap_or(l);
        bare.strip_prefix(key).is_some_and(|rest| {
            let rest = rest.trim_start();
            rest.starts_with('=') || rest.starts_with(']') || rest.starts_with('.')
        })
    })
    .map(|i| i + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ScenarioConfig::default().validate().unwrap();
    }

    #[test]
    fn parses_sections() {
        let cfg = ScenarioConfig::from_toml(
            "id = \"t\"\nn_max = 3\nmarket_sizes = [50.0, 150.0]\n\n[market]\nfixed_cost = 30.0\n\n[outputs]\nsvg = true\n",
        )
        .unwrap();
        assert_eq!(cfg.n_max, 3);
        assert_eq!(cfg.market.fixed_cost, 30.0);
        assert_eq!(cfg.market.reservation, 10.0);
        assert!(cfg.outputs.svg && cfg.outputs.json && !cfg.outputs.csv);
    }

    #[test]
    fn bad_resolution_names_field_and_line() {
        let err = ScenarioConfig::from_toml("id = \"t\"\nlocation_resolution = 4\n").unwrap_err();
        assert_eq!(err.field, "location_resolution");
        assert_eq!(err.line, Some(2));
        assert!(err.to_string().starts_with("line 2: location_resolution"));
    }

    #[test]
    fn unknown_key_is_rejected_with_line() {
        let err = ScenarioConfig::from_toml("n_max = 2\n\n[market]\nfixed = 3.0\n").unwrap_err();
        assert_eq!(err.line, Some(4), "{err}");
    }

    #[test]
    fn market_errors_point_at_the_key() {
        let err = ScenarioConfig::from_toml("n_max = 2\n[market]\ntransport_cost = -1.0\n").unwrap_err();
        assert_eq!(err.field, "transport_cost");
        assert_eq!(err.line, Some(3));
    }

    #[test]
    fn sweep_is_geometric_and_hits_both_ends() {
        let v = Sweep { lo: 10.0, hi: 1000.0, steps: 3 }.values();
        assert_eq!(v.len(), 3);
        assert_eq!(v[0], 10.0);
        assert!((v[1] - 100.0).abs() < 1e-9);
        assert_eq!(v[2], 1000.0);
    }

    #[test]
    fn too_many_firms() {
        let err = ScenarioConfig::from_toml("n_max = 8\n").unwrap_err();
        assert_eq!((err.field.as_str(), err.line), ("n_max", Some(1)));
    }
}
