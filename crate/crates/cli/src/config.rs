//! Run configuration (TOML).

use serde::{Deserialize, Serialize};
use std::path::Path;

use waiter_core::dynamics::PlantParams;
use waiter_core::planner::{PlannerError, Scenario};
use waiter_core::smoothers::SmootherKind;

use crate::error::CliError;

fn default_dt() -> f64 {
    1e-3
}
fn default_tail() -> f64 {
    0.5
}
fn default_v_eps() -> f64 {
    1e-6
}
fn default_event_tol() -> f64 {
    1e-10
}
fn default_components() -> usize {
    32
}
fn default_max_theta() -> f64 {
    1e-6
}
fn default_max_slip() -> f64 {
    1e-6
}
fn default_points() -> usize {
    501
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Time kept at the goal after a point-to-point motion.
    #[serde(default = "default_tail")]
    pub tail: f64,
    #[serde(default = "default_v_eps")]
    pub v_eps: f64,
    #[serde(default = "default_event_tol")]
    pub event_tol: f64,
    #[serde(default)]
    pub seed: u64,
    pub noise: Option<NoiseSpec>,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            dt: default_dt(),
            tail: default_tail(),
            v_eps: default_v_eps(),
            event_tol: default_event_tol(),
            seed: 0,
            noise: None,
        }
    }
}

/// Band-limited additive noise: a sum of sinusoids with random frequencies
/// in `band` (rad/s) and random phases, with total RMS `amplitude`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub amplitude: f64,
    pub band: [f64; 2],
    #[serde(default = "default_components")]
    pub components: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    #[serde(default = "default_max_theta")]
    pub max_theta: f64,
    #[serde(default = "default_max_slip")]
    pub max_slip: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { max_theta: default_max_theta(), max_slip: default_max_slip() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreqRespSpec {
    /// Explicit grid; overrides `omega_max`/`points`.
    pub omegas: Option<Vec<f64>>,
    pub omega_max: Option<f64>,
    #[serde(default = "default_points")]
    pub points: usize,
    /// Smoothers to evaluate; the planned cascade stages when empty.
    #[serde(default)]
    pub smoothers: Vec<SmootherKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub plant: Option<PlantParams>,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub thresholds: Thresholds,
    pub freqresp: Option<FreqRespSpec>,
}

fn planner_to_cli(e: PlannerError) -> CliError {
    match e {
        PlannerError::Config { field, msg } => CliError::config(format!("scenario.{field}"), msg),
        other => CliError::Config(other.to_string()),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = toml::Deserializer::parse(text).map_err(|e| CliError::Config(e.to_string()))?;
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::config(path, e.into_inner().message().trim())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.scenario.validate().map_err(planner_to_cli)?;
        let n = &self.numerics;
        if !(n.dt.is_finite() && n.dt > 0.0) {
            return Err(CliError::config("numerics.dt", "must be positive"));
        }
        if !(n.tail.is_finite() && n.tail >= 0.0) {
            return Err(CliError::config("numerics.tail", "must be non-negative"));
        }
        if !(n.event_tol > 0.0) {
            return Err(CliError::config("numerics.event_tol", "must be positive"));
        }
        if !(n.v_eps >= 0.0) {
            return Err(CliError::config("numerics.v_eps", "must be non-negative"));
        }
        if let Some(noise) = &n.noise {
            if !(noise.amplitude.is_finite() && noise.amplitude >= 0.0) {
                return Err(CliError::config("numerics.noise.amplitude", "must be non-negative"));
            }
            let [lo, hi] = noise.band;
            if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
                return Err(CliError::config("numerics.noise.band", "must satisfy 0 <= low <= high"));
            }
            if noise.components == 0 {
                return Err(CliError::config("numerics.noise.components", "must be at least 1"));
            }
        }
        if let Some(p) = &self.plant {
            let check = if p.m > 0.0 { p.validate() } else { p.validate_solid() };
            check.map_err(|e| CliError::config("plant", e.to_string()))?;
        }
        if let Some(f) = &self.freqresp {
            if let Some(w) = &f.omegas {
                if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(CliError::config("freqresp.omegas", "values must be finite and >= 0"));
                }
            } else if !f.omega_max.is_some_and(|w| w.is_finite() && w > 0.0) {
                return Err(CliError::config("freqresp.omega_max", "needed (positive) when no explicit grid is given"));
            }
            if f.points < 2 && f.omegas.is_none() {
                return Err(CliError::config("freqresp.points", "must be at least 2"));
            }
            for (i, k) in f.smoothers.iter().enumerate() {
                k.validate().map_err(|e| CliError::config(format!("freqresp.smoothers[{i}]"), e.to_string()))?;
            }
        }
        Ok(())
    }

    /// Plant block, required by the simulator.
    pub fn plant(&self) -> Result<&PlantParams, CliError> {
        self.plant.as_ref().ok_or_else(|| CliError::config("plant", "simulation needs a plant block"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[scenario]
material = "solid"
motion = "point_to_point"
goal = [1.0, 0.0, 0.0]
v_max = 2.0
a_max = 5.0
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.numerics, Numerics::default());
        assert!(c.scenario.tilt);
        assert_eq!(c.scenario.start, [0.0; 3]);
    }

    #[test]
    fn type_errors_carry_field_path() {
        let bad = MINIMAL.replace("v_max = 2.0", "v_max = \"fast\"");
        let e = RunConfig::parse(&bad).unwrap_err();
        assert!(e.to_string().contains("scenario.v_max"), "{e}");
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn unknown_fields_rejected() {
        let bad = format!("{MINIMAL}\n[numerics]\nstep = 0.1\n");
        let e = RunConfig::parse(&bad).unwrap_err();
        assert!(e.to_string().contains("numerics"), "{e}");
    }

    #[test]
    fn cross_field_validation() {
        let liquid = MINIMAL.replace("\"solid\"", "\"liquid\"");
        let e = RunConfig::parse(&liquid).unwrap_err();
        assert!(e.to_string().contains("scenario.slosh"), "{e}");

        let no_goal = MINIMAL.replace("goal = [1.0, 0.0, 0.0]\n", "");
        assert!(RunConfig::parse(&no_goal).unwrap_err().to_string().contains("scenario.goal"));

        let bad_dt = format!("{MINIMAL}\n[numerics]\ndt = -1.0\n");
        assert!(RunConfig::parse(&bad_dt).unwrap_err().to_string().contains("numerics.dt"));
    }

    #[test]
    fn plant_block_parses() {
        let text = format!(
            "{MINIMAL}\n[plant]\nm = 0.1\nM = 0.5\nl = 0.05\nh = 0.05\nd_z = 0.0\nb_lc = 0.00035\nb_ct = 0.05\nmu = 0.3\ng = 9.81\n"
        );
        let c = RunConfig::parse(&text).unwrap();
        assert_eq!(c.plant().unwrap().m_container, 0.5);
    }
}
