//! Fixed-step RK4 integration of the joint estimator/filter state and
//! trajectory metrics.

use crate::error::{Error, Result};
use crate::estimators::{
    estimator_rhs, gradient_error_rhs, manifold_residual, storage, storage_rate,
};
use crate::filters::{filter_rhs_flat, FilterState};
use crate::linalg::norm2;
use crate::types::{
    error_vector, EstimationProblem, EstimatorConfig, EstimatorState, Trajectory, Variant,
};

/// States with a 2-norm above this are treated as diverged.
pub const DIVERGENCE_NORM: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimSettings {
    pub dt: f64,
    pub t_end: f64,
    pub record_every: usize,
}

impl SimSettings {
    pub const DEFAULT_DT: f64 = 1e-3;
    pub const DEFAULT_RECORD_EVERY: usize = 10;

    pub fn new(t_end: f64) -> Self {
        Self {
            dt: Self::DEFAULT_DT,
            t_end,
            record_every: Self::DEFAULT_RECORD_EVERY,
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_record_every(mut self, record_every: usize) -> Self {
        self.record_every = record_every;
        self
    }

    /// Number of integration steps; `t_end` must be an integer multiple of
    /// `dt` (to 1e-9 relative).
    pub fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0)
            || !(self.t_end > 0.0)
            || !self.dt.is_finite()
            || !self.t_end.is_finite()
        {
            return Err(Error::config(format!(
                "need dt > 0 and t_end > 0 (dt={}, t_end={})",
                self.dt, self.t_end
            )));
        }
        if self.dt > self.t_end {
            return Err(Error::config("dt must not exceed t_end"));
        }
        if self.record_every == 0 {
            return Err(Error::config("record_every must be at least 1"));
        }
        let n = (self.t_end / self.dt).round();
        if (n * self.dt - self.t_end).abs() > 1e-9 * self.t_end {
            return Err(Error::config(format!(
                "t_end={} is not a multiple of dt={}",
                self.t_end, self.dt
            )));
        }
        Ok(n as usize)
    }
}

/// Reusable RK4 stage buffers.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(n: usize) -> Self {
        Self {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    /// Advances `state` in place from `t` to `t + dt`.
    pub fn step<F>(&mut self, rhs: &mut F, t: f64, state: &mut [f64], dt: f64) -> Result<()>
    where
        F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    {
        if !(dt > 0.0) {
            return Err(Error::config(format!(
                "step size must be positive, got {dt}"
            )));
        }
        let half = 0.5 * dt;

        rhs(t, state, &mut self.k1)?;
        check_finite(&self.k1, t)?;
        offset(&mut self.tmp, state, half, &self.k1);
        rhs(t + half, &self.tmp, &mut self.k2)?;
        check_finite(&self.k2, t + half)?;
        offset(&mut self.tmp, state, half, &self.k2);
        rhs(t + half, &self.tmp, &mut self.k3)?;
        check_finite(&self.k3, t + half)?;
        offset(&mut self.tmp, state, dt, &self.k3);
        rhs(t + dt, &self.tmp, &mut self.k4)?;
        check_finite(&self.k4, t + dt)?;
        let stages = self.k1.iter().zip(&self.k2).zip(&self.k3).zip(&self.k4);
        for (x, (((a, b), c), d)) in state.iter_mut().zip(stages) {
            *x += dt / 6.0 * (a + 2.0 * b + 2.0 * c + d);
        }
        check_finite(state, t + dt)
    }
}

/// `out = x + h k`
fn offset(out: &mut [f64], x: &[f64], h: f64, k: &[f64]) {
    for ((o, x), k) in out.iter_mut().zip(x).zip(k) {
        *o = x + h * k;
    }
}

fn check_finite(v: &[f64], t: f64) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(component) => Err(Error::Divergence {
            t,
            component,
            context: String::new(),
        }),
        None => Ok(()),
    }
}

/// One classical RK4 step.
pub fn rk4_step<F>(mut rhs: F, t: f64, state: &[f64], dt: f64) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let mut next = state.to_vec();
    Rk4::new(state.len()).step(&mut rhs, t, &mut next, dt)?;
    Ok(next)
}

/// Joint state `[ϑ̂ | Ω (row-major) | 𝔾]`; the filter block is absent for
/// GE and MGE.
struct JointSystem<'a> {
    problem: &'a EstimationProblem,
    config: &'a EstimatorConfig,
    q: usize,
    omega: Vec<f64>,
}

impl<'a> JointSystem<'a> {
    fn new(problem: &'a EstimationProblem, config: &'a EstimatorConfig) -> Self {
        let q = problem.dim();
        Self {
            problem,
            config,
            q,
            omega: vec![0.0; q],
        }
    }

    fn state_len(&self) -> usize {
        if self.config.variant.uses_filter() {
            self.q + FilterState::flat_len(self.q)
        } else {
            self.q
        }
    }

    fn pack(&self, s: &EstimatorState) -> Vec<f64> {
        let mut x = vec![0.0; self.state_len()];
        x[..self.q].copy_from_slice(&s.theta_hat);
        if let Some(f) = &s.filter {
            f.write_flat(&mut x[self.q..]);
        }
        x
    }

    fn unpack(&self, x: &[f64]) -> EstimatorState {
        EstimatorState {
            theta_hat: x[..self.q].to_vec(),
            filter: self
                .config
                .variant
                .uses_filter()
                .then(|| FilterState::read_flat(self.q, &x[self.q..])),
        }
    }

    fn rhs(&mut self, t: f64, x: &[f64], dx: &mut [f64]) -> Result<()> {
        let q = self.q;
        self.problem.regressor().eval_into(t, &mut self.omega)?;
        let g = self.problem.output(&self.omega);
        let state = self.unpack(x);
        let d_hat = estimator_rhs(self.config, &state, &self.omega, g)?;
        dx[..q].copy_from_slice(&d_hat);
        if self.config.variant.uses_filter() {
            let (om, gext) = x[q..].split_at(q * q);
            filter_rhs_flat(om, gext, &self.omega, g, &mut dx[q..]);
        }
        Ok(())
    }
}

struct Recorder<'a> {
    problem: &'a EstimationProblem,
    mu: f64,
    traj: Trajectory,
}

impl Recorder<'_> {
    fn record(&mut self, t: f64, state: &EstimatorState, hat_dot: &[f64]) -> Result<()> {
        let err = error_vector(self.problem, state)?;
        let q = err.len();
        let (phi, s, s_dot) = if q >= 2 {
            let phi = manifold_residual(&err, self.mu)?;
            (phi, storage(phi), storage_rate(phi, hat_dot, self.mu)?)
        } else {
            (f64::NAN, f64::NAN, f64::NAN)
        };
        let tr = &mut self.traj;
        tr.times.push(t);
        tr.err_norms.push(norm2(&err));
        tr.estimates.push(state.theta_hat.clone());
        tr.manifold_residuals.push(phi);
        tr.storage_values.push(s);
        tr.storage_rates.push(s_dot);
        if let Some(f) = &state.filter {
            tr.filter_min_eigs.push(f.omega.min_symmetric_eigenvalue());
            tr.filter_asymmetry.push(f.omega.relative_asymmetry());
        }
        Ok(())
    }
}

fn diverged(x: &[f64], t: f64) -> Option<Error> {
    if norm2(x) > DIVERGENCE_NORM || x.iter().any(|v| !v.is_finite()) {
        let component = x
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        Some(Error::Divergence {
            t,
            component,
            context: String::new(),
        })
    } else {
        None
    }
}

/// Integrates one estimator against the problem from `t = 0` to `t_end`.
pub fn simulate(
    problem: &EstimationProblem,
    config: &EstimatorConfig,
    settings: &SimSettings,
) -> Result<Trajectory> {
    simulate_with_final_state(problem, config, settings).map(|(t, _)| t)
}

/// Like [`simulate`], also returning the state at `t_end`.
pub fn simulate_with_final_state(
    problem: &EstimationProblem,
    config: &EstimatorConfig,
    settings: &SimSettings,
) -> Result<(Trajectory, EstimatorState)> {
    let steps = settings.steps()?;
    config.validate(problem.dim())?;
    let mut sys = JointSystem::new(problem, config);
    let mut x = sys.pack(&config.initial_state());
    let mut stepper = Rk4::new(x.len());
    let mut dx = vec![0.0; x.len()];
    let mut rec = Recorder {
        problem,
        mu: config.mu,
        traj: Trajectory::default(),
    };
    let with_context = |e: Error| match e {
        Error::Divergence { t, component, .. } => Error::Divergence {
            t,
            component,
            context: format!(" in {} estimator '{}'", config.variant, config.label),
        },
        other => other,
    };

    for k in 0..=steps {
        let t = k as f64 * settings.dt;
        if k % settings.record_every == 0 || k == steps {
            sys.rhs(t, &x, &mut dx).map_err(with_context)?;
            rec.record(t, &sys.unpack(&x), &dx[..problem.dim()])?;
        }
        if k == steps {
            break;
        }
        stepper
            .step(
                &mut |t, x: &[f64], dx: &mut [f64]| sys.rhs(t, x, dx),
                t,
                &mut x,
                settings.dt,
            )
            .map_err(with_context)?;
        if let Some(e) = diverged(&x, t + settings.dt) {
            return Err(with_context(e));
        }
    }
    let final_state = sys.unpack(&x);
    Ok((rec.traj, final_state))
}

/// Recorded samples of the parametric error integrated directly in `ϑ̃`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ErrorTrajectory {
    pub times: Vec<f64>,
    pub errors: Vec<Vec<f64>>,
}

/// Integrates `ϑ̃̇ = −k(ω)(ωᵀϑ̃)` (GE or MGE) from `ϑ̃(0) = ϑ − ϑ̂(0)`,
/// recording on the same grid as [`simulate`].
pub fn simulate_gradient_errors(
    problem: &EstimationProblem,
    config: &EstimatorConfig,
    settings: &SimSettings,
) -> Result<ErrorTrajectory> {
    if !matches!(config.variant, Variant::Ge | Variant::Mge) {
        return Err(Error::config("error-form simulation supports GE and MGE"));
    }
    let steps = settings.steps()?;
    config.validate(problem.dim())?;
    let mut x = error_vector(problem, &EstimatorState::new(config.theta_hat_0.clone()))?;
    let mut omega = vec![0.0; problem.dim()];
    let mut rhs = |t: f64, e: &[f64], de: &mut [f64]| -> Result<()> {
        problem.regressor().eval_into(t, &mut omega)?;
        let d = gradient_error_rhs(config.variant, e, &omega, config.tau, config.mu)?;
        de.copy_from_slice(&d);
        Ok(())
    };
    let mut stepper = Rk4::new(x.len());
    let mut out = ErrorTrajectory::default();
    for k in 0..=steps {
        let t = k as f64 * settings.dt;
        if k % settings.record_every == 0 || k == steps {
            out.times.push(t);
            out.errors.push(x.clone());
        }
        if k == steps {
            break;
        }
        stepper.step(&mut rhs, t, &mut x, settings.dt)?;
        if let Some(e) = diverged(&x, t + settings.dt) {
            return Err(e);
        }
    }
    Ok(out)
}

/// Smallest recorded `t*` with `‖ϑ̃(t)‖ ≤ tol` for every recorded `t ≥ t*`.
pub fn convergence_time(traj: &Trajectory, tol: f64) -> Option<f64> {
    let last_bad = traj.err_norms.iter().rposition(|&e| !(e <= tol));
    match last_bad {
        None => traj.times.first().copied(),
        Some(i) => traj.times.get(i + 1).copied(),
    }
}
