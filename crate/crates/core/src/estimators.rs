//! Estimator right-hand sides and manifold diagnostics.
//!
//! All update laws act on the prediction error. The gradient family uses the
//! scalar error `g − ωᵀϑ̂` scaled by a gain vector; the memory-extension family
//! uses the filtered vector error `ε = 𝔾 − Ωϑ̂`.
//!
//! The modified variants (MGE, MGE+MRE) inject a virtual control into the
//! last parameter-error equation so that the combined implicit manifold
//!
//! ```text
//! Φ(ϑ̃) = ϑ̃₂ + … + ϑ̃_q − (q−1) μ ϑ̃₁
//! ```
//!
//! is attracted (with zero attractivity rate). After substitution the first
//! `q−1` rows keep their gradient form and only the last row changes:
//!
//! ```text
//! row_q = 2τ v_q + τ (v₂ + … + v_{q−1}) − (q−1) μ τ v₁
//! ```
//!
//! where `v` is `ω` (MGE gain) or `ε` (MGE+MRE update).

use crate::error::{Error, Result};
use crate::filters::FilterState;
use crate::linalg::dot;
use crate::types::{EstimatorConfig, EstimatorState, RegressorSpec, Variant};

/// Per-coordinate multiplier of the scalar prediction error.
#[derive(Debug, Clone, PartialEq)]
pub struct GainVector(pub Vec<f64>);

impl GainVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `k · e`
    pub fn scale(&self, e: f64) -> Vec<f64> {
        self.0.iter().map(|k| k * e).collect()
    }
}

/// Applies the manifold-stabilizing row mix to `v` (see module docs).
/// For `q = 1` there is no manifold and the plain `τ v` is returned.
pub fn manifold_mix(v: &[f64], tau: f64, mu: f64) -> Vec<f64> {
    let q = v.len();
    let mut out: Vec<f64> = v.iter().map(|x| tau * x).collect();
    if q >= 2 {
        let middle: f64 = v[1..q - 1].iter().sum();
        out[q - 1] = 2.0 * tau * v[q - 1] + tau * middle - (q - 1) as f64 * mu * tau * v[0];
    }
    out
}

/// `g − ωᵀϑ̂`
pub fn prediction_error(theta_hat: &[f64], omega: &[f64], g: f64) -> f64 {
    g - dot(omega, theta_hat)
}

pub fn ge_gain(omega: &[f64], tau: f64) -> GainVector {
    GainVector(omega.iter().map(|w| tau * w).collect())
}

/// Gain of the modified gradient estimator. Falls back to the GE gain for
/// `q = 1`, where no virtual control can be defined.
pub fn mge_gain(omega: &[f64], tau: f64, mu: f64) -> Result<GainVector> {
    if omega.is_empty() {
        return Err(Error::config("regressor dimension must be at least 1"));
    }
    Ok(GainVector(manifold_mix(omega, tau, mu)))
}

/// `τ ω (g − ωᵀϑ̂)`
pub fn ge_rhs(state: &EstimatorState, omega: &[f64], g: f64, tau: f64) -> Vec<f64> {
    let e = prediction_error(&state.theta_hat, omega, g);
    ge_gain(omega, tau).scale(e)
}

pub fn mge_rhs(
    state: &EstimatorState,
    omega: &[f64],
    g: f64,
    tau: f64,
    mu: f64,
) -> Result<Vec<f64>> {
    let e = prediction_error(&state.theta_hat, omega, g);
    Ok(mge_gain(omega, tau, mu)?.scale(e))
}

fn require_filter(state: &EstimatorState) -> Result<&FilterState> {
    let f = state
        .filter
        .as_ref()
        .ok_or_else(|| Error::config("memory-extension estimator needs filter state"))?;
    if f.dim() != state.dim() {
        return Err(Error::config(format!(
            "filter state has q={} but estimate has q={}",
            f.dim(),
            state.dim()
        )));
    }
    Ok(f)
}

/// Kreisselmeier update `τ (𝔾 − Ωϑ̂)`.
pub fn mre_rhs(state: &EstimatorState, tau: f64) -> Result<Vec<f64>> {
    let f = require_filter(state)?;
    Ok(f.residual(&state.theta_hat)
        .into_iter()
        .map(|e| tau * e)
        .collect())
}

pub fn mge_mre_rhs(state: &EstimatorState, tau: f64, mu: f64) -> Result<Vec<f64>> {
    let f = require_filter(state)?;
    Ok(manifold_mix(&f.residual(&state.theta_hat), tau, mu))
}

/// Determinant mixing on the extended system: with `Δ = det Ω` and
/// `𝒴 = adj(Ω) 𝔾`, each coordinate obeys `ϑ̂̇ᵢ = τΔ(𝒴ᵢ − Δϑ̂ᵢ)`.
/// A singular `Ω` stalls the update rather than failing.
pub fn drem_rhs(state: &EstimatorState, tau: f64) -> Result<Vec<f64>> {
    let f = require_filter(state)?;
    let delta = f.omega.determinant();
    if delta == 0.0 {
        return Ok(vec![0.0; state.dim()]);
    }
    let mixed = f.omega.adjugate().mul_vec(&f.g_ext);
    Ok(mixed
        .iter()
        .zip(&state.theta_hat)
        .map(|(y, h)| tau * delta * (y - delta * h))
        .collect())
}

/// Estimate derivative for any variant.
pub fn estimator_rhs(
    config: &EstimatorConfig,
    state: &EstimatorState,
    omega: &[f64],
    g: f64,
) -> Result<Vec<f64>> {
    match config.variant {
        Variant::Ge => Ok(ge_rhs(state, omega, g, config.tau)),
        Variant::Mge => mge_rhs(state, omega, g, config.tau, config.mu),
        Variant::Mre => mre_rhs(state, config.tau),
        Variant::MgeMre => mge_mre_rhs(state, config.tau, config.mu),
        Variant::Drem => drem_rhs(state, config.tau),
    }
}

/// Parametric error dynamics of the gradient family written directly in
/// `ϑ̃`: `ϑ̃̇ = −k(ω) (ωᵀϑ̃)` with the GE or MGE gain.
pub fn gradient_error_rhs(
    variant: Variant,
    theta_err: &[f64],
    omega: &[f64],
    tau: f64,
    mu: f64,
) -> Result<Vec<f64>> {
    let gain = match variant {
        Variant::Ge => ge_gain(omega, tau),
        Variant::Mge => mge_gain(omega, tau, mu)?,
        other => {
            return Err(Error::config(format!(
                "error dynamics in ϑ̃ form are defined for GE and MGE only, not {other}"
            )))
        }
    };
    Ok(gain.scale(-dot(omega, theta_err)))
}

/// Coefficients `c` with `Φ(ϑ̃) = cᵀϑ̃`.
pub fn manifold_coefficients(q: usize, mu: f64) -> Result<Vec<f64>> {
    if q < 2 {
        return Err(Error::config("implicit manifold needs q >= 2"));
    }
    let mut c = vec![1.0; q];
    c[0] = -((q - 1) as f64) * mu;
    Ok(c)
}

/// `Φ(ϑ̃) = Σ_{i≥2} ϑ̃ᵢ − (q−1) μ ϑ̃₁`
pub fn manifold_residual(theta_err: &[f64], mu: f64) -> Result<f64> {
    let q = theta_err.len();
    if q < 2 {
        return Err(Error::config("implicit manifold needs q >= 2"));
    }
    let tail: f64 = theta_err[1..].iter().sum();
    Ok(tail - (q - 1) as f64 * mu * theta_err[0])
}

/// `𝕊 = ½ Φ²`
pub fn storage(residual: f64) -> f64 {
    0.5 * residual * residual
}

/// `𝕊̇ = Φ Φ̇` with `Φ̇ = cᵀϑ̃̇ = −cᵀϑ̂̇` (constant true parameters).
pub fn storage_rate(residual: f64, theta_hat_dot: &[f64], mu: f64) -> Result<f64> {
    let c = manifold_coefficients(theta_hat_dot.len(), mu)?;
    Ok(-residual * dot(&c, theta_hat_dot))
}

/// Exact scalar GE error `ϑ̃₀ exp(−τ ∫₀ᵗ ω² dσ)`, with the integral taken by
/// the trapezoid rule at step `dt`. Only valid for `q = 1`: for vector
/// regressors `ω ωᵀ` need not commute with itself across time.
pub fn ge_closed_form_scalar(
    regressor: &RegressorSpec,
    tau: f64,
    err0: f64,
    t: f64,
    dt: f64,
) -> Result<f64> {
    if regressor.dim() != 1 {
        return Err(Error::UnsupportedDimension {
            q: regressor.dim(),
            reason: "closed-form GE solution holds for scalar regressors only",
        });
    }
    if !(dt > 0.0) || t < 0.0 {
        return Err(Error::config("need dt > 0 and t >= 0"));
    }
    if t == 0.0 {
        return Ok(err0);
    }
    let steps = (t / dt).round().max(1.0) as usize;
    let h = t / steps as f64;
    let mut integral = 0.0;
    for k in 0..=steps {
        let w = regressor.eval(k as f64 * h)?[0];
        let weight = if k == 0 || k == steps { 0.5 } else { 1.0 };
        integral += weight * w * w;
    }
    Ok(err0 * (-tau * h * integral).exp())
}
