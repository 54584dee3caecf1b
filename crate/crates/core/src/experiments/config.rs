//! Declarative experiment configuration (TOML).
//!
//! Unknown keys are rejected. Each scenario reads only the sections it
//! needs; see `configs/` for one canonical file per scenario.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::FunctionName;
use crate::graph::GeometricConfig;
use crate::perturb::PerturbationKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    SweepDelta,
    SweepDeadzone,
    SweepM,
    Perturbation,
    Hazard,
    OracleCheck,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::SweepDelta => "sweep-delta",
            Scenario::SweepDeadzone => "sweep-deadzone",
            Scenario::SweepM => "sweep-m",
            Scenario::Perturbation => "perturbation",
            Scenario::Hazard => "hazard",
            Scenario::OracleCheck => "oracle-check",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    /// Independent trials; trial `k` uses seed `base_seed + k`.
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Round budget per run.
    pub max_rounds: u64,
    #[serde(default = "default_function")]
    pub function: FunctionName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometrySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raising: Option<RaisingSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hazard: Option<HazardSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSection>,
}

fn default_trials() -> usize {
    1
}

fn default_function() -> FunctionName {
    FunctionName::Abf
}

/// Random geometric deployment; the seed comes from the trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub width: f64,
    pub height: f64,
    pub radius: f64,
    pub node_count: usize,
}

impl GeometrySection {
    pub fn with_seed(&self, seed: u64) -> GeometricConfig {
        GeometricConfig {
            width: self.width,
            height: self.height,
            radius: self.radius,
            node_count: self.node_count,
            seed,
        }
    }
}

/// Base raising parameters; sweep lists override individual entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RaisingSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deadzone: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Values of δ (sweep-delta).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<Vec<f64>>,
    /// Values of M, with δ = M (sweep-m).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<Vec<f64>>,
    /// Dead zones as multiples of K = (D(G) + D(G⁻) − 2)·ε
    /// (sweep-deadzone, perturbation).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deadzone_k: Option<Vec<f64>>,
    /// Add a plain-block (M = 0) baseline (perturbation).
    #[serde(default)]
    pub baseline: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSection {
    pub kind: PerturbationKind,
    /// ε as a fraction of the graph's e_min, resolved per trial.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_fraction: Option<f64>,
    /// ε in absolute units.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_abs: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl PerturbationSection {
    /// ε for a graph with smallest edge `e_min`.
    pub fn resolve_eps(&self, e_min: f64) -> f64 {
        match (self.eps_fraction, self.eps_abs) {
            (Some(fraction), _) => fraction * e_min,
            (None, Some(abs)) => abs,
            (None, None) => 0.0,
        }
    }
}

/// Initial estimates drawn uniformly from `[low, high]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default)]
    pub low: f64,
    /// Defaults to the diagonal of the deployment rectangle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub high: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HazardSection {
    /// Fixed position of the source (node 0).
    pub source: [f64; 2],
    pub zone_center: [f64; 2],
    pub zone_size: [f64; 2],
    /// General block runs with δ = M = factor · x_max.
    #[serde(default = "default_threshold_factor")]
    pub threshold_factor: f64,
}

fn default_threshold_factor() -> f64 {
    1.5
}

impl HazardSection {
    pub fn in_zone(&self, x: f64, y: f64) -> bool {
        (x - self.zone_center[0]).abs() <= self.zone_size[0] / 2.0
            && (y - self.zone_center[1]).abs() <= self.zone_size[1] / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    pub min_nodes: usize,
    pub max_nodes: usize,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    fn require<T: Copy>(&self, value: Option<T>, key: &str) -> Result<T> {
        value.ok_or_else(|| Error::Config(format!("{} requires `{key}`", self.scenario)))
    }

    pub fn geometry(&self) -> Result<GeometrySection> {
        self.require(self.geometry, "[geometry]")
    }

    pub fn raising_value(&self, key: &str) -> Result<f64> {
        let r = self.require(self.raising, "[raising]")?;
        let v = match key {
            "threshold" => r.threshold,
            "step" => r.step,
            "deadzone" => r.deadzone,
            _ => None,
        };
        self.require(v, &format!("raising.{key}"))
    }

    pub fn sweep_list(&self, key: &str) -> Result<Vec<f64>> {
        let s = self.sweep.as_ref().ok_or_else(|| Error::Config(format!("{} requires [sweep]", self.scenario)))?;
        let v = match key {
            "step" => s.step.clone(),
            "threshold" => s.threshold.clone(),
            "deadzone_k" => s.deadzone_k.clone(),
            _ => None,
        };
        v.ok_or_else(|| Error::Config(format!("{} requires `sweep.{key}`", self.scenario)))
    }

    pub fn perturbation(&self) -> Result<PerturbationSection> {
        self.require(self.perturbation, "[perturbation]")
    }

    pub fn hazard(&self) -> Result<HazardSection> {
        self.require(self.hazard, "[hazard]")
    }

    pub fn oracle(&self) -> Result<OracleSection> {
        self.require(self.oracle, "[oracle]")
    }

    /// Initial-estimate range, defaulting to `[0, diagonal]`.
    pub fn initial_range(&self) -> Result<(f64, f64)> {
        let g = self.geometry()?;
        let section = self.initial.unwrap_or(InitialSection { low: 0.0, high: None });
        Ok((section.low, section.high.unwrap_or_else(|| g.width.hypot(g.height))))
    }

    /// Checks values and that the scenario's required sections are present.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.max_rounds == 0 {
            return bad("max_rounds must be at least 1".into());
        }
        if let Some(g) = self.geometry {
            g.with_seed(0).validate().map_err(|e| Error::Config(format!("[geometry]: {e}")))?;
        }
        if let Some(r) = self.raising {
            if let Some(m) = r.threshold {
                if !(m >= 0.0 && m.is_finite()) {
                    return bad(format!("raising.threshold must be >= 0, got {m}"));
                }
            }
            if let Some(d) = r.step {
                if !(d > 0.0 && d.is_finite()) {
                    return bad(format!("raising.step must be > 0, got {d}"));
                }
            }
            if let Some(d) = r.deadzone {
                if !(d >= 0.0) {
                    return bad(format!("raising.deadzone must be >= 0, got {d}"));
                }
            }
        }
        if let Some(s) = &self.sweep {
            for (key, list) in [("step", &s.step), ("threshold", &s.threshold), ("deadzone_k", &s.deadzone_k)] {
                if let Some(list) = list {
                    if list.is_empty() {
                        return bad(format!("sweep.{key} must not be empty"));
                    }
                    let positive_required = key != "deadzone_k";
                    if list.iter().any(|&v| !(v.is_finite() && (v > 0.0 || (!positive_required && v >= 0.0)))) {
                        return bad(format!("sweep.{key} has an out-of-range value: {list:?}"));
                    }
                }
            }
        }
        if let Some(p) = self.perturbation {
            match (p.eps_fraction, p.eps_abs) {
                (Some(_), Some(_)) => return bad("give only one of perturbation.eps_fraction and eps_abs".into()),
                (Some(f), None) if !(0.0..1.0).contains(&f) => {
                    return bad(format!("perturbation.eps_fraction must lie in [0, 1), got {f}"))
                }
                (None, Some(a)) if !(a >= 0.0 && a.is_finite()) => {
                    return bad(format!("perturbation.eps_abs must be >= 0, got {a}"))
                }
                _ => {}
            }
        }
        if let Some(i) = self.initial {
            let high = i.high.unwrap_or(f64::INFINITY);
            if !(i.low >= 0.0 && i.low <= high) {
                return bad(format!("initial range [{}, {high}] is invalid", i.low));
            }
        }
        if let Some(h) = self.hazard {
            if !(h.threshold_factor > 1.0 && h.threshold_factor.is_finite()) {
                return bad("hazard.threshold_factor must exceed 1".into());
            }
            if !(h.zone_size[0] > 0.0 && h.zone_size[1] > 0.0) {
                return bad("hazard.zone_size must be positive".into());
            }
        }
        if let Some(o) = self.oracle {
            if o.min_nodes < 2 || o.min_nodes > o.max_nodes || o.max_nodes > crate::oracle::BRUTE_FORCE_LIMIT {
                return bad(format!(
                    "oracle node range must satisfy 2 <= min_nodes <= max_nodes <= {}",
                    crate::oracle::BRUTE_FORCE_LIMIT
                ));
            }
        }

        match self.scenario {
            Scenario::SweepDelta => {
                self.geometry()?;
                self.raising_value("threshold")?;
                self.raising_value("deadzone")?;
                self.sweep_list("step")?;
            }
            Scenario::SweepM => {
                self.geometry()?;
                self.raising_value("deadzone")?;
                self.sweep_list("threshold")?;
            }
            Scenario::SweepDeadzone => {
                self.geometry()?;
                self.raising_value("threshold")?;
                self.raising_value("step")?;
                self.sweep_list("deadzone_k")?;
                let p = self.perturbation()?;
                if p.kind != PerturbationKind::None {
                    return bad("sweep-deadzone runs unperturbed; [perturbation] only sets ε for K, so kind must be \"none\"".into());
                }
            }
            Scenario::Perturbation => {
                self.geometry()?;
                self.raising_value("threshold")?;
                self.raising_value("step")?;
                self.sweep_list("deadzone_k")?;
                self.perturbation()?;
            }
            Scenario::Hazard => {
                self.geometry()?;
                self.hazard()?;
                if self.function != FunctionName::Hazard {
                    return bad("hazard scenario requires function = \"hazard\"".into());
                }
            }
            Scenario::OracleCheck => {
                self.oracle()?;
            }
        }
        if matches!(
            self.scenario,
            Scenario::SweepDelta | Scenario::SweepM | Scenario::SweepDeadzone | Scenario::Perturbation
        ) && self.function != FunctionName::Abf
        {
            return bad(format!("{} supports function = \"abf\" only", self.scenario));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SWEEP: &str = r#"
scenario = "sweep-delta"
trials = 3
base_seed = 11
max_rounds = 500

[geometry]
width = 2.0
height = 0.5
radius = 0.25
node_count = 100

[raising]
threshold = 5.0
deadzone = 0.0

[sweep]
step = [1.0, 2.0, 3.0, 4.0, 5.0]
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = ExperimentConfig::from_toml(SWEEP).unwrap();
        assert_eq!(cfg.scenario, Scenario::SweepDelta);
        assert_eq!(cfg.function, FunctionName::Abf);
        let again = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn rejects_bad_values() {
        let unknown = SWEEP.replace("trials = 3", "trials = 3\ncolour = 1");
        assert!(matches!(ExperimentConfig::from_toml(&unknown), Err(Error::Config(_))));
        let neg = SWEEP.replace("[1.0, 2.0", "[0.0, 2.0");
        assert!(ExperimentConfig::from_toml(&neg).is_err());
        let missing = SWEEP.replace("deadzone = 0.0", "");
        assert!(ExperimentConfig::from_toml(&missing).is_err());
        let eps = format!("{SWEEP}\n[perturbation]\nkind = \"uniform_positive\"\neps_fraction = 1.0\n");
        assert!(ExperimentConfig::from_toml(&eps).is_err());
        let typo = SWEEP.replace("trials = 3", "trials = \"three\"");
        let err = ExperimentConfig::from_toml(&typo).unwrap_err().to_string();
        assert!(err.contains("line"), "{err}");
    }
}
