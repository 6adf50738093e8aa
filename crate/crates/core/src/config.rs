//! TOML run configuration.
//!
//! ```toml
//! [model]
//! intake = { family = "uniform", params = { lo = 0.0, hi = 1.0 } }
//! inter_arrival = { family = "exponential", params = { rate = 1.0 } }
//! metabolic = { family = "dirac", params = { value = 1.0 } }
//! init = { x = { family = "dirac", params = { value = 2.0 } }, ... }
//!
//! [experiment]
//! horizon = 20.0
//! grid = { start = 1.0, stop = 20.0, step = 1.0 }
//! n_replicas = 100000
//! seed = 7
//! ```
//!
//! The full schema is in the README.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coupling::CouplingPhaseParams;
use crate::distributions::{DistributionSpec, Family, Role};
use crate::error::{Error, Result};
use crate::pdmp_sim::{InitialLaw, Model};
use crate::quadrature::{simpson_pieces, simpson_to_infinity, DEFAULT_TOL};
use crate::rates::{AgeCase, AgeParams, ContractionRoute, HolderData, InitialMoments, PhaseSplit, RateSettings};

/// A law as written in the config: `{ family, params, role }`, the role
/// being optional and checked against the slot it appears in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LawRecord {
    #[serde(flatten)]
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<Role>,
}

impl LawRecord {
    fn spec(&self, slot: &str, role: Role) -> Result<DistributionSpec> {
        if let Some(r) = self.role {
            if r != role {
                return Err(field(slot, format!("role {r:?} given where {role:?} is expected")));
            }
        }
        DistributionSpec::new(self.family, role).map_err(|e| field(slot, e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub intake: LawRecord,
    pub inter_arrival: LawRecord,
    pub metabolic: LawRecord,
    #[serde(default)]
    pub first_arrival: Option<LawRecord>,
    pub init: InitialLaw,
    pub init_tilde: InitialLaw,
    #[serde(default)]
    pub holder: Option<HolderData>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    /// Fixed phase-3 threshold; by default `exp(-v' (beta - alpha) t)`.
    pub epsilon_tv: Option<f64>,
    pub age: Option<AgeParams>,
    pub age_case: Option<AgeCase>,
    #[serde(default)]
    pub route: ContractionRoute,
    pub v3: Option<f64>,
    #[serde(default)]
    pub dri: bool,
}

/// Output times: an explicit list or an arithmetic range (inclusive).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl GridSpec {
    pub fn points(&self) -> Vec<f64> {
        match *self {
            GridSpec::List(ref v) => v.clone(),
            GridSpec::Range { start, stop, step } => {
                if !(step > 0.0) || stop < start {
                    return Vec::new();
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize;
                (0..=n).map(|i| start + i as f64 * step).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub horizon: f64,
    pub grid: GridSpec,
    pub n_replicas: usize,
    pub seed: u64,
    /// Worker threads; all available cores when absent.
    pub parallelism: Option<usize>,
    #[serde(default = "default_w_eps_fraction")]
    pub w_eps_fraction: f64,
    #[serde(default = "default_renewal_step")]
    pub renewal_step: f64,
    #[serde(default = "default_age_draws")]
    pub age_draws: usize,
}

fn default_w_eps_fraction() -> f64 {
    0.05
}

fn default_renewal_step() -> f64 {
    1e-3
}

fn default_age_draws() -> usize {
    1_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsConfig {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    /// Also write sampled paths and event logs.
    #[serde(default)]
    pub paths: bool,
    #[serde(default = "default_path_step")]
    pub path_step: f64,
    #[serde(default = "default_n_paths")]
    pub n_paths: usize,
    /// Write replica reports for every grid time, not only the last one.
    #[serde(default)]
    pub all_reports: bool,
}

fn default_directory() -> PathBuf {
    PathBuf::from("out")
}

fn default_path_step() -> f64 {
    0.1
}

fn default_n_paths() -> usize {
    1
}

impl Default for OutputsConfig {
    fn default() -> Self {
        Self {
            directory: default_directory(),
            paths: false,
            path_step: default_path_step(),
            n_paths: default_n_paths(),
            all_reports: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub coupling: CouplingConfig,
    pub experiment: ExperimentConfig,
    #[serde(default)]
    pub outputs: OutputsConfig,
}

fn field(name: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("field `{name}`: {msg}"))
}

impl RunConfig {
    /// Parses and validates. Syntax and type errors carry the line and
    /// column; semantic errors name the offending field.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
            .map_err(|e| Error::Config(format!("{}: {}", path.display(), e.to_string().trim_start_matches("config error: "))))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let model = self.build_model()?;
        let d = model.profile().d;
        self.model.init.validate(d).map_err(|e| field("model.init", e))?;
        self.model.init_tilde.validate(d).map_err(|e| field("model.init_tilde", e))?;
        let e = &self.experiment;
        if !(e.horizon > 0.0 && e.horizon.is_finite()) {
            return Err(field("experiment.horizon", format!("must be > 0, got {}", e.horizon)));
        }
        if e.n_replicas == 0 {
            return Err(field("experiment.n_replicas", "must be >= 1"));
        }
        if e.parallelism == Some(0) {
            return Err(field("experiment.parallelism", "must be >= 1"));
        }
        let grid = e.grid.points();
        if grid.is_empty() {
            return Err(field("experiment.grid", "is empty"));
        }
        if let Some(&t) = grid.iter().find(|&&t| !(t > 0.0 && t <= e.horizon)) {
            return Err(field("experiment.grid", format!("point {t} outside (0, horizon]")));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(field("experiment.grid", "must be strictly increasing"));
        }
        if !(e.w_eps_fraction > 0.0 && e.w_eps_fraction < 1.0) {
            return Err(field("experiment.w_eps_fraction", "must lie in (0, 1)"));
        }
        if !(e.renewal_step > 0.0) {
            return Err(field("experiment.renewal_step", "must be > 0"));
        }
        if e.age_draws == 0 {
            return Err(field("experiment.age_draws", "must be >= 1"));
        }
        let c = &self.coupling;
        for (name, v) in [("coupling.alpha", c.alpha), ("coupling.beta", c.beta)] {
            if let Some(v) = v {
                if !(v > 0.0 && v < 1.0) {
                    return Err(field(name, format!("must lie in (0, 1), got {v}")));
                }
            }
        }
        if let (Some(a), Some(b)) = (c.alpha, c.beta) {
            if a >= b {
                return Err(field("coupling.beta", "must exceed coupling.alpha"));
            }
        }
        if let Some(eps) = c.epsilon_tv {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(field("coupling.epsilon_tv", format!("must lie in (0, 1), got {eps}")));
            }
        }
        if self.outputs.paths && !(self.outputs.path_step > 0.0) {
            return Err(field("outputs.path_step", "must be > 0"));
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<Model> {
        let m = &self.model;
        let mut model = Model::new(
            m.intake.spec("model.intake", Role::Intake)?,
            m.inter_arrival.spec("model.inter_arrival", Role::InterArrival)?,
            m.metabolic.spec("model.metabolic", Role::Metabolic)?,
        )?;
        if let Some(first) = m.first_arrival {
            first.family.validate().map_err(|e| field("model.first_arrival", e))?;
            let spec = DistributionSpec { family: first.family, role: Role::InterArrival };
            model = model.with_first_arrival(spec);
            model.prepare()?;
        }
        Ok(model)
    }

    pub fn grid(&self) -> Vec<f64> {
        self.experiment.grid.points()
    }

    pub fn parallelism(&self) -> usize {
        self.experiment
            .parallelism
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }

    pub fn rate_settings(&self) -> RateSettings {
        let c = &self.coupling;
        RateSettings {
            alpha: c.alpha,
            beta: c.beta,
            age: c.age,
            age_case: c.age_case,
            holder: self.model.holder,
            v3: c.v3,
            route: c.route,
            w_eps_fraction: self.experiment.w_eps_fraction,
            renewal_step: self.experiment.renewal_step,
            dri: c.dri,
            age_draws: self.experiment.age_draws,
            seed: self.experiment.seed,
            ..RateSettings::default()
        }
    }

    /// Phase parameters for horizon `t`, given the split from the rate report.
    pub fn phase_params(&self, split: &PhaseSplit, t: f64) -> CouplingPhaseParams {
        CouplingPhaseParams {
            alpha: split.alpha,
            beta: split.beta,
            epsilon_tv: self.coupling.epsilon_tv.unwrap_or_else(|| split.epsilon_at(t)),
            age: self.coupling.age,
        }
    }

    pub fn moments(&self) -> InitialMoments {
        initial_moments(&self.model.init.x, &self.model.init_tilde.x)
    }
}

/// `E[X0 + X0~]` and `E[X0 v X0~]` for independent initial burdens.
pub fn initial_moments(x: &Family, x_tilde: &Family) -> InitialMoments {
    let mean_sum = x.mean() + x_tilde.mean();
    let mean_max = match (*x, *x_tilde) {
        (Family::Dirac { value: a }, Family::Dirac { value: b }) => a.max(b),
        _ => {
            // E[max] = int_0^inf 1 - F(s) F~(s) ds for non-negative laws.
            let tail = |s: f64| 1.0 - x.cdf(s) * x_tilde.cdf(s);
            let mut breaks = x.kinks();
            breaks.extend(x_tilde.kinks());
            let hi = x.support().1.max(x_tilde.support().1);
            if hi.is_finite() {
                simpson_pieces(&tail, 0.0, hi, &breaks, DEFAULT_TOL)
            } else {
                simpson_to_infinity(&tail, 0.0, &breaks, mean_sum.max(1.0), DEFAULT_TOL)
            }
        }
    };
    InitialMoments { mean_sum, mean_max }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub const REFERENCE: &str = r#"
[model]
intake = { family = "uniform", params = { lo = 0.0, hi = 1.0 } }
inter_arrival = { family = "exponential", params = { rate = 1 }, role = "inter_arrival" }
metabolic = { family = "dirac", params = { value = 1.0 } }

[model.init]
x = { family = "dirac", params = { value = 2.0 } }
theta = { family = "dirac", params = { value = 1.0 } }
age = { family = "dirac", params = { value = 0.0 } }

[model.init_tilde]
x = { family = "dirac", params = { value = 4.0 } }
theta = { family = "dirac", params = { value = 1.0 } }
age = { family = "dirac", params = { value = 0.0 } }

[experiment]
horizon = 20.0
grid = { start = 1.0, stop = 20.0, step = 1.0 }
n_replicas = 1000
seed = 7
"#;

    #[test]
    fn parses_reference() {
        let cfg = RunConfig::from_toml(REFERENCE).unwrap();
        assert_eq!(cfg.grid().len(), 20);
        assert_eq!(cfg.grid()[19], 20.0);
        assert_eq!(cfg.outputs, OutputsConfig::default());
        let m = cfg.moments();
        assert_eq!((m.mean_sum, m.mean_max), (6.0, 4.0));
        let again = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn diagnostics_name_line_and_field() {
        let bad = REFERENCE.replace("n_replicas = 1000", "n_replicas = \"many\"");
        let msg = RunConfig::from_toml(&bad).unwrap_err().to_string();
        assert!(msg.contains("line") && msg.contains("n_replicas"), "{msg}");

        let bad = REFERENCE.replace("n_replicas = 1000", "n_replicas = 0");
        let msg = RunConfig::from_toml(&bad).unwrap_err().to_string();
        assert!(msg.contains("experiment.n_replicas"), "{msg}");

        let bad = REFERENCE.replace("seed = 7\n", "");
        let msg = RunConfig::from_toml(&bad).unwrap_err().to_string();
        assert!(msg.contains("seed"), "{msg}");

        let bad = REFERENCE.replace("role = \"inter_arrival\"", "role = \"intake\"");
        let msg = RunConfig::from_toml(&bad).unwrap_err().to_string();
        assert!(msg.contains("model.inter_arrival"), "{msg}");

        let bad = REFERENCE.replace("stop = 20.0", "stop = 30.0");
        let msg = RunConfig::from_toml(&bad).unwrap_err().to_string();
        assert!(msg.contains("experiment.grid"), "{msg}");

        let bad = REFERENCE.replace("horizon = 20.0", "horizon = 20.0\nhorizn = 3");
        assert!(RunConfig::from_toml(&bad).unwrap_err().to_string().contains("horizn"));
    }

    #[test]
    fn max_moment_by_quadrature() {
        let u = Family::Uniform { lo: 0.0, hi: 1.0 };
        let m = initial_moments(&u, &u);
        assert!((m.mean_max - 2.0 / 3.0).abs() < 1e-8);
        let e = Family::Exponential { rate: 1.0 };
        let m = initial_moments(&e, &e);
        assert!((m.mean_max - 1.5).abs() < 1e-7);
    }
}
