//! Online estimation of constant parameters `θ` in the linear regression
//! `y(t) = ω(t)ᵀ θ`.
//!
//! Five estimators share one simulation harness:
//!
//! * **GE** — the classical gradient estimator `ϑ̂̇ = τ ω (y − ωᵀϑ̂)`;
//! * **MGE** — a gradient estimator whose gain steers the error onto the
//!   hyperplane `Σ_{i≥2} ϑ̃_i = (q−1) μ ϑ̃_1`, where all coordinates then
//!   converge together;
//! * **MRE** — a gradient estimator driven by the memory-extended regression
//!   `𝔾 = Ω θ` produced by the filters `Ω̇ = −Ω + ωωᵀ`, `𝔾̇ = −𝔾 + ω y`;
//! * **MGE_MRE** — the manifold gain applied to the extended regression;
//! * **DREM** — dynamic regressor extension and mixing, as a baseline.
//!
//! Everything is integrated with fixed-step RK4 ([`sim`]). Excitation
//! diagnostics live in [`signals`], small dense linear algebra in [`linalg`].
//! The [`harness`] module runs scenarios and writes CSV and SVG output.
//!
//! With the default `parallel` feature, independent estimator runs and
//! excitation windows are spread over a rayon pool; without it the same code
//! runs sequentially with identical results.

// `!(x > 0.0)` is used on purpose throughout: unlike `x <= 0.0` it also
// rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimators;
pub mod exec;
pub mod filters;
pub mod harness;
pub mod linalg;
pub mod signals;
pub mod sim;
pub mod types;
pub mod verify;

pub use error::{Error, Result};
pub use exec::Execution;
pub use types::{
    EstimationProblem, EstimatorConfig, EstimatorState, RegressorSpec, Trajectory, Variant,
};
