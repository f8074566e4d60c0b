//! Shared domain types: regressor, estimation problem, estimator
//! configuration and state, and recorded trajectories.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::FilterState;
use crate::linalg::dot;
use crate::signals::SignalExpr;

/// Known regressor `ω(t) ∈ ℝ^q`, one expression per component.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressorSpec {
    components: Vec<SignalExpr>,
}

impl RegressorSpec {
    pub fn new(components: Vec<SignalExpr>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::config("regressor needs at least one component"));
        }
        Ok(Self { components })
    }

    pub fn parse<S: AsRef<str>>(components: &[S]) -> Result<Self> {
        Self::new(
            components
                .iter()
                .map(|s| SignalExpr::parse(s.as_ref()))
                .collect::<Result<_>>()?,
        )
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[SignalExpr] {
        &self.components
    }

    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(t, &mut out)?;
        Ok(out)
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        for (i, (expr, slot)) in self.components.iter().zip(out.iter_mut()).enumerate() {
            let v = expr.eval(t).map_err(|reason| Error::SignalEval {
                component: i,
                t,
                reason,
            })?;
            if !v.is_finite() {
                return Err(Error::SignalEval {
                    component: i,
                    t,
                    reason: format!("non-finite value {v}"),
                });
            }
            *slot = v;
        }
        Ok(())
    }
}

/// Regressor plus the true parameter vector; generates `g(t) = ω(t)ᵀϑ`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationProblem {
    regressor: RegressorSpec,
    true_params: Vec<f64>,
}

impl EstimationProblem {
    pub fn new(regressor: RegressorSpec, true_params: Vec<f64>) -> Result<Self> {
        if true_params.len() != regressor.dim() {
            return Err(Error::config(format!(
                "true parameter vector has length {} but regressor has q={}",
                true_params.len(),
                regressor.dim()
            )));
        }
        if true_params.iter().any(|x| !x.is_finite()) {
            return Err(Error::config("true parameters must be finite"));
        }
        Ok(Self {
            regressor,
            true_params,
        })
    }

    pub fn dim(&self) -> usize {
        self.regressor.dim()
    }

    pub fn regressor(&self) -> &RegressorSpec {
        &self.regressor
    }

    pub fn true_params(&self) -> &[f64] {
        &self.true_params
    }

    /// Measured output for a regressor sample.
    pub fn output(&self, omega: &[f64]) -> f64 {
        dot(omega, &self.true_params)
    }

    /// `(ω(t), g(t))`
    pub fn measure(&self, t: f64) -> Result<(Vec<f64>, f64)> {
        let w = self.regressor.eval(t)?;
        let g = self.output(&w);
        Ok((w, g))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "GE")]
    Ge,
    #[serde(rename = "MGE")]
    Mge,
    #[serde(rename = "MRE")]
    Mre,
    #[serde(rename = "MGE_MRE")]
    MgeMre,
    #[serde(rename = "DREM")]
    Drem,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Ge,
        Variant::Mge,
        Variant::Mre,
        Variant::MgeMre,
        Variant::Drem,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Ge => "GE",
            Variant::Mge => "MGE",
            Variant::Mre => "MRE",
            Variant::MgeMre => "MGE_MRE",
            Variant::Drem => "DREM",
        }
    }

    /// Variants that carry the `(Ω, 𝔾)` filter state.
    pub fn uses_filter(self) -> bool {
        matches!(self, Variant::Mre | Variant::MgeMre | Variant::Drem)
    }

    /// Variants with a virtual control on the last error equation.
    pub fn uses_manifold(self) -> bool {
        matches!(self, Variant::Mge | Variant::MgeMre)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s) || (s == "MGE+MRE" && *v == Variant::MgeMre))
            .ok_or_else(|| Error::config(format!("unknown estimator variant '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub label: String,
    pub variant: Variant,
    pub tau: f64,
    pub mu: f64,
    pub theta_hat_0: Vec<f64>,
    pub filter_init: f64,
}

impl EstimatorConfig {
    /// Zero initial estimate and filter state; the label is the variant name.
    pub fn new(variant: Variant, tau: f64, mu: f64, q: usize) -> Self {
        Self {
            label: variant.name().to_string(),
            variant,
            tau,
            mu,
            theta_hat_0: vec![0.0; q],
            filter_init: 0.0,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_initial_estimate(mut self, theta_hat_0: Vec<f64>) -> Self {
        self.theta_hat_0 = theta_hat_0;
        self
    }

    pub fn validate(&self, q: usize) -> Result<()> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::config(format!(
                "learning rate tau must be positive, got {}",
                self.tau
            )));
        }
        if self.variant.uses_manifold() && !self.mu.is_finite() {
            return Err(Error::config("manifold slope mu must be finite"));
        }
        if self.theta_hat_0.len() != q {
            return Err(Error::config(format!(
                "initial estimate has length {} but q={q}",
                self.theta_hat_0.len()
            )));
        }
        if self.theta_hat_0.iter().any(|x| !x.is_finite()) || !self.filter_init.is_finite() {
            return Err(Error::config("initial values must be finite"));
        }
        Ok(())
    }

    /// `μ` outside (0, 1) is allowed but unusual for the manifold variants.
    pub fn mu_outside_unit_interval(&self) -> bool {
        self.variant.uses_manifold() && !(self.mu > 0.0 && self.mu < 1.0)
    }

    pub fn initial_state(&self) -> EstimatorState {
        let q = self.theta_hat_0.len();
        EstimatorState {
            theta_hat: self.theta_hat_0.clone(),
            filter: self
                .variant
                .uses_filter()
                .then(|| FilterState::filled(q, self.filter_init)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    pub theta_hat: Vec<f64>,
    pub filter: Option<FilterState>,
}

impl EstimatorState {
    pub fn new(theta_hat: Vec<f64>) -> Self {
        Self {
            theta_hat,
            filter: None,
        }
    }

    pub fn with_filter(mut self, filter: FilterState) -> Self {
        self.filter = Some(filter);
        self
    }

    pub fn dim(&self) -> usize {
        self.theta_hat.len()
    }
}

/// `ϑ̃ = ϑ − ϑ̂`
pub fn error_vector(problem: &EstimationProblem, state: &EstimatorState) -> Result<Vec<f64>> {
    if state.dim() != problem.dim() {
        return Err(Error::config(format!(
            "estimate has length {} but problem has q={}",
            state.dim(),
            problem.dim()
        )));
    }
    Ok(problem
        .true_params()
        .iter()
        .zip(&state.theta_hat)
        .map(|(th, h)| th - h)
        .collect())
}

/// Recorded time series of one simulation run.
///
/// `manifold_residuals`, `storage_values` and `storage_rates` are NaN when
/// `q = 1` (no manifold). `filter_min_eigs` and `filter_asymmetry` are empty
/// for variants without filter state.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub estimates: Vec<Vec<f64>>,
    pub err_norms: Vec<f64>,
    pub manifold_residuals: Vec<f64>,
    pub storage_values: Vec<f64>,
    pub storage_rates: Vec<f64>,
    pub filter_min_eigs: Vec<f64>,
    pub filter_asymmetry: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn is_aligned(&self) -> bool {
        let n = self.times.len();
        let filter_ok = (self.filter_min_eigs.is_empty() && self.filter_asymmetry.is_empty())
            || (self.filter_min_eigs.len() == n && self.filter_asymmetry.len() == n);
        self.estimates.len() == n
            && self.err_norms.len() == n
            && self.manifold_residuals.len() == n
            && self.storage_values.len() == n
            && self.storage_rates.len() == n
            && filter_ok
    }

    pub fn final_estimate(&self) -> Option<&[f64]> {
        self.estimates.last().map(Vec::as_slice)
    }

    pub fn final_err_norm(&self) -> Option<f64> {
        self.err_norms.last().copied()
    }
}
