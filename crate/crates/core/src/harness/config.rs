//! Scenario definitions: the builtin catalog and the TOML file format.
//!
//! ```toml
//! name = "example3"
//!
//! [problem]
//! builtin = "example3"            # or `regressor = [...]` + `true_params = [...]`
//!
//! [settings]
//! dt = 0.001
//! t_end = 50.0
//! record_every = 10
//!
//! [[estimators]]
//! variant = "GE"                  # GE | MGE | MRE | MGE_MRE | DREM
//! tau = 1.0
//!
//! [[estimators]]
//! variant = "MGE"
//! label = "MGE"                   # defaults to the variant name
//! tau = 1.0
//! mu = 0.55
//! theta_hat_0 = [0.0, 0.0, 0.0]   # defaults to zeros
//! filter_init = 0.0               # MRE family only, defaults to 0
//! ```

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signals::{builtin, Builtin, BUILTIN_NAMES};
use crate::sim::SimSettings;
use crate::types::{EstimationProblem, EstimatorConfig, RegressorSpec, Variant};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outputs {
    /// CSV path prefix; one `<prefix>_<label>.csv` per estimator.
    pub csv: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub problem: EstimationProblem,
    pub estimators: Vec<EstimatorConfig>,
    pub settings: SimSettings,
    pub outputs: Outputs,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.estimators.is_empty() {
            return Err(Error::config(format!(
                "scenario '{}' has no estimators",
                self.name
            )));
        }
        let mut seen = HashSet::new();
        for e in &self.estimators {
            if !seen.insert(e.label.as_str()) {
                return Err(Error::config(format!(
                    "duplicate estimator label '{}' in scenario '{}'",
                    e.label, self.name
                )));
            }
            if e.label.is_empty()
                || e.label
                    .contains(|c: char| c == '/' || c == '\\' || c.is_whitespace())
            {
                return Err(Error::config(format!(
                    "estimator label '{}' must be non-empty without separators or whitespace",
                    e.label
                )));
            }
            e.validate(self.problem.dim())
                .map_err(|err| err.with_label(&e.label))?;
        }
        self.settings.steps()?;
        Ok(())
    }
}

/// Simulation horizon and estimator line-up of each catalog scenario.
fn catalog_entry(name: &str) -> Option<(f64, &'static [Variant])> {
    use Variant::*;
    Some(match name {
        "example1" => (30.0, &[Mge]),
        "example2" => (60.0, &[Mge]),
        "example3" => (50.0, &[Ge, Mge]),
        "example4" => (100.0, &[Mre, MgeMre]),
        "example5" => (100.0, &[Mre, MgeMre]),
        "example6" => (100.0, &[Ge, Mre, MgeMre, Drem]),
        _ => return None,
    })
}

/// The builtin scenario `name` with its reference gains applied to every
/// estimator.
pub fn builtin_scenario(name: &str) -> Result<ScenarioConfig> {
    let Builtin {
        name: static_name,
        problem,
        tau,
        mu,
        ..
    } = builtin(name)?;
    let (t_end, variants) =
        catalog_entry(name).ok_or_else(|| Error::ScenarioNotFound(name.to_string()))?;
    let q = problem.dim();
    Ok(ScenarioConfig {
        name: static_name.to_string(),
        estimators: variants
            .iter()
            .map(|&v| EstimatorConfig::new(v, tau, mu, q))
            .collect(),
        problem,
        settings: SimSettings::new(t_end),
        outputs: Outputs::default(),
    })
}

pub fn builtin_scenarios() -> Vec<ScenarioConfig> {
    BUILTIN_NAMES
        .iter()
        .map(|n| builtin_scenario(n).expect("catalog is consistent"))
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    problem: ProblemFile,
    #[serde(default)]
    settings: SettingsFile,
    #[serde(default)]
    outputs: OutputsFile,
    #[serde(default)]
    estimators: Vec<EstimatorFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    builtin: Option<String>,
    regressor: Option<Vec<String>>,
    true_params: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SettingsFile {
    dt: Option<f64>,
    t_end: Option<f64>,
    record_every: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputsFile {
    csv: Option<PathBuf>,
    svg: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EstimatorFile {
    variant: Variant,
    label: Option<String>,
    tau: Option<f64>,
    mu: Option<f64>,
    theta_hat_0: Option<Vec<f64>>,
    filter_init: Option<f64>,
}

/// Parses a scenario from TOML text. Missing gains and horizon fall back to
/// the builtin defaults when `problem.builtin` is set.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig> {
    let file: ScenarioFile =
        toml::from_str(text).map_err(|e| Error::config(format!("scenario file: {e}")))?;
    let (problem, defaults) = match (&file.problem.builtin, &file.problem.regressor) {
        (Some(name), None) => {
            if file.problem.true_params.is_some() {
                return Err(Error::config(
                    "problem.true_params cannot override a builtin problem",
                ));
            }
            let b = builtin(name)?;
            let t_end = catalog_entry(name).map(|c| c.0);
            (b.problem, Some((b.tau, b.mu, t_end)))
        }
        (None, Some(components)) => {
            let theta = file
                .problem
                .true_params
                .clone()
                .ok_or_else(|| Error::config("problem.true_params is required"))?;
            (
                EstimationProblem::new(RegressorSpec::parse(components)?, theta)?,
                None,
            )
        }
        _ => {
            return Err(Error::config(
                "problem needs exactly one of `builtin` or `regressor`",
            ))
        }
    };
    let q = problem.dim();
    let estimators = file
        .estimators
        .iter()
        .map(|e| {
            let tau = e.tau.or(defaults.map(|d| d.0)).ok_or_else(|| {
                Error::config(format!("estimator {}: tau is required", e.variant))
            })?;
            let mu = e.mu.or(defaults.map(|d| d.1)).unwrap_or(0.0);
            let mut cfg = EstimatorConfig::new(e.variant, tau, mu, q);
            if let Some(l) = &e.label {
                cfg.label = l.clone();
            }
            if let Some(h) = &e.theta_hat_0 {
                cfg.theta_hat_0 = h.clone();
            }
            if let Some(f) = e.filter_init {
                cfg.filter_init = f;
            }
            Ok(cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let t_end = file
        .settings
        .t_end
        .or(defaults.and_then(|d| d.2))
        .ok_or_else(|| Error::config("settings.t_end is required"))?;
    let settings = SimSettings {
        dt: file.settings.dt.unwrap_or(SimSettings::DEFAULT_DT),
        t_end,
        record_every: file
            .settings
            .record_every
            .unwrap_or(SimSettings::DEFAULT_RECORD_EVERY),
    };
    let cfg = ScenarioConfig {
        name: file.name,
        problem,
        estimators,
        settings,
        outputs: Outputs {
            csv: file.outputs.csv,
            svg: file.outputs.svg,
        },
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scenario(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Format {
            path: path.to_path_buf(),
            msg,
        },
        other => other,
    })
}

/// A builtin name, or a path to a scenario file.
pub fn resolve_scenario(name_or_path: &str) -> Result<ScenarioConfig> {
    if BUILTIN_NAMES.contains(&name_or_path) {
        return builtin_scenario(name_or_path);
    }
    let path = Path::new(name_or_path);
    if path.is_file() {
        return load_scenario(path);
    }
    Err(Error::ScenarioNotFound(name_or_path.to_string()))
}
