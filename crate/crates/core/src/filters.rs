//! Memory regressor extension: `Ω = L(s)[ω ωᵀ]`, `𝔾 = L(s)[ω g]` with the
//! unit-pole filter `L(s) = 1/(s+1)`, realized in state space as
//! `Ω̇ = −Ω + ω ωᵀ`, `𝔾̇ = −𝔾 + ω g`.

use crate::linalg::SquareMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub omega: SquareMatrix,
    pub g_ext: Vec<f64>,
}

impl FilterState {
    pub fn zeros(q: usize) -> Self {
        Self::filled(q, 0.0)
    }

    /// Every entry of `Ω` and `𝔾` set to `value`.
    pub fn filled(q: usize, value: f64) -> Self {
        Self {
            omega: SquareMatrix::filled(q, value),
            g_ext: vec![value; q],
        }
    }

    pub fn dim(&self) -> usize {
        self.g_ext.len()
    }

    /// Number of scalars in the flattened state: `q² + q`.
    pub fn flat_len(q: usize) -> usize {
        q * q + q
    }

    /// Layout: `Ω` row-major followed by `𝔾`.
    pub fn write_flat(&self, out: &mut [f64]) {
        let q = self.dim();
        out[..q * q].copy_from_slice(self.omega.as_slice());
        out[q * q..q * q + q].copy_from_slice(&self.g_ext);
    }

    pub fn read_flat(q: usize, flat: &[f64]) -> Self {
        Self {
            omega: SquareMatrix::from_row_major(q, flat[..q * q].to_vec()),
            g_ext: flat[q * q..q * q + q].to_vec(),
        }
    }

    /// `𝔾 − Ω ϑ̂`, the extended prediction error.
    pub fn residual(&self, theta_hat: &[f64]) -> Vec<f64> {
        self.omega
            .mul_vec(theta_hat)
            .iter()
            .zip(&self.g_ext)
            .map(|(om, g)| g - om)
            .collect()
    }
}

/// Time derivative of the filter state.
pub fn filter_rhs(state: &FilterState, omega: &[f64], g: f64) -> FilterState {
    let q = state.dim();
    let mut buf = vec![0.0; FilterState::flat_len(q)];
    filter_rhs_flat(state.omega.as_slice(), &state.g_ext, omega, g, &mut buf);
    FilterState::read_flat(q, &buf)
}

/// Flat-slice form used by the integrator. `out` has length `q² + q`.
pub fn filter_rhs_flat(omega_mat: &[f64], g_ext: &[f64], omega: &[f64], g: f64, out: &mut [f64]) {
    let q = omega.len();
    for i in 0..q {
        for j in 0..q {
            out[i * q + j] = -omega_mat[i * q + j] + omega[i] * omega[j];
        }
        out[q * q + i] = -g_ext[i] + omega[i] * g;
    }
}
