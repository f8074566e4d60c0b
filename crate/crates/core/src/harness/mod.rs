//! Scenario runner and exporters behind the `paramest` CLI.

mod config;
mod csv;
mod plot;

pub use config::{
    builtin_scenario, builtin_scenarios, load_scenario, parse_scenario, resolve_scenario, Outputs,
    ScenarioConfig,
};
pub use csv::{export_csv, parse_csv, read_csv, write_trajectory_csv, CsvTrajectory};
pub use plot::{emit_plot, render_svg, ERR_FLOOR};

use std::f64::consts::PI;

use crate::error::Result;
use crate::exec::{self, Execution};
use crate::signals::excitation_profile;
use crate::sim::{convergence_time, simulate};
use crate::types::{EstimatorConfig, Trajectory};

/// Events with `𝕊̇` above this band count as storage-sign violations.
pub const STORAGE_RATE_BAND: f64 = 1e-10;

/// Tolerances at which convergence times are reported.
pub const CONVERGENCE_TOLERANCES: [f64; 2] = [0.1, 0.01];

#[derive(Debug, Clone)]
pub struct EstimatorResult {
    pub label: String,
    pub config: EstimatorConfig,
    pub trajectory: Trajectory,
    /// Convergence times at [`CONVERGENCE_TOLERANCES`]; `None` if not reached.
    pub convergence: [Option<f64>; 2],
    /// Recorded samples with `𝕊̇ > STORAGE_RATE_BAND` (manifold variants, q ≥ 2).
    pub storage_sign_violations: Option<usize>,
    pub mu_outside_unit_interval: bool,
}

#[derive(Debug, Clone)]
pub struct ExcitationSummary {
    pub window: f64,
    /// `(t, ρ(t, window))`
    pub profile: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub name: String,
    pub true_params: Vec<f64>,
    pub estimators: Vec<EstimatorResult>,
    pub excitation: ExcitationSummary,
}

impl ScenarioResult {
    pub fn estimator(&self, label: &str) -> Option<&EstimatorResult> {
        self.estimators.iter().find(|e| e.label == label)
    }
}

fn count_storage_violations(config: &EstimatorConfig, traj: &Trajectory) -> Option<usize> {
    (config.variant.uses_manifold() && config.theta_hat_0.len() >= 2).then(|| {
        traj.storage_rates
            .iter()
            .filter(|&&r| r > STORAGE_RATE_BAND)
            .count()
    })
}

/// Runs every estimator of the scenario with the default execution mode.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioResult> {
    run_scenario_with(config, Execution::default())
}

/// Estimators are simulated independently (in parallel when requested);
/// result blocks follow the configuration order.
pub fn run_scenario_with(config: &ScenarioConfig, execution: Execution) -> Result<ScenarioResult> {
    config.validate()?;
    let estimators = exec::map(execution, &config.estimators, |e| {
        let trajectory = simulate(&config.problem, e, &config.settings)
            .map_err(|err| err.with_label(&e.label))?;
        Ok(EstimatorResult {
            label: e.label.clone(),
            config: e.clone(),
            convergence: CONVERGENCE_TOLERANCES.map(|tol| convergence_time(&trajectory, tol)),
            storage_sign_violations: count_storage_violations(e, &trajectory),
            mu_outside_unit_interval: e.mu_outside_unit_interval(),
            trajectory,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let window = (2.0 * PI).min(config.settings.t_end);
    let starts: Vec<f64> = (0..)
        .map(|k| k as f64)
        .take_while(|t| t + window <= config.settings.t_end + 1e-9)
        .collect();
    let profile = excitation_profile(
        config.problem.regressor(),
        &starts,
        window,
        window / 500.0,
        execution,
    )?;

    Ok(ScenarioResult {
        name: config.name.clone(),
        true_params: config.problem.true_params().to_vec(),
        estimators,
        excitation: ExcitationSummary { window, profile },
    })
}

/// Runs several scenarios; ordering follows the input.
pub fn run_batch(configs: &[ScenarioConfig], execution: Execution) -> Vec<Result<ScenarioResult>> {
    exec::map(execution, configs, |c| {
        run_scenario_with(c, Execution::Sequential)
    })
}

/// Human-readable summary table.
pub fn summary(result: &ScenarioResult) -> String {
    let fmt_t = |t: Option<f64>| t.map_or_else(|| "never".to_string(), |t| format!("{t:.2}"));
    let mut out = format!("scenario {}\n", result.name);
    out.push_str("  label      final |err|   t(0.1)   t(0.01)  S-dot>0\n");
    for e in &result.estimators {
        out.push_str(&format!(
            "  {:<10} {:>11.3e} {:>8} {:>9} {:>8}{}\n",
            e.label,
            e.trajectory.final_err_norm().unwrap_or(f64::NAN),
            fmt_t(e.convergence[0]),
            fmt_t(e.convergence[1]),
            e.storage_sign_violations
                .map_or_else(|| "-".to_string(), |n| n.to_string()),
            if e.mu_outside_unit_interval {
                "  (mu outside (0,1))"
            } else {
                ""
            }
        ));
    }
    if let (Some(first), Some(last)) = (
        result.excitation.profile.first(),
        result.excitation.profile.last(),
    ) {
        out.push_str(&format!(
            "  excitation rho(t, T={:.3}): t={:.1} -> {:.3e}, t={:.1} -> {:.3e}\n",
            result.excitation.window, first.0, first.1, last.0, last.1
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Variant;

    #[test]
    fn example1_mge_converges() {
        let r = run_scenario(&builtin_scenario("example1").unwrap()).unwrap();
        assert_eq!(r.estimators.len(), 1);
        assert!(r.estimators[0].trajectory.final_err_norm().unwrap() < 0.05);
        assert!(r.estimators[0].storage_sign_violations.is_some());
    }

    #[test]
    fn example3_mge_beats_ge() {
        let r = run_scenario(&builtin_scenario("example3").unwrap()).unwrap();
        let ge = r.estimator("GE").unwrap().convergence[0].unwrap();
        let mge = r.estimator("MGE").unwrap().convergence[0].unwrap();
        assert!(mge <= ge, "MGE {mge} vs GE {ge}");
        assert!(r.estimator("GE").unwrap().storage_sign_violations.is_none());
    }

    #[test]
    fn result_order_follows_config_in_both_modes() {
        let mut cfg = builtin_scenario("example6").unwrap();
        cfg.settings = crate::sim::SimSettings::new(2.0);
        let seq = run_scenario_with(&cfg, Execution::Sequential).unwrap();
        let par = run_scenario_with(&cfg, Execution::Parallel).unwrap();
        let labels: Vec<_> = seq.estimators.iter().map(|e| e.label.as_str()).collect();
        assert_eq!(labels, ["GE", "MRE", "MGE_MRE", "DREM"]);
        for (a, b) in seq.estimators.iter().zip(&par.estimators) {
            assert_eq!(a.label, b.label);
            assert_eq!(a.trajectory, b.trajectory);
        }
    }

    #[test]
    fn errors_carry_estimator_label() {
        let mut cfg = builtin_scenario("example1").unwrap();
        cfg.estimators = vec![EstimatorConfig::new(Variant::Ge, 1e5, 0.0, 2).with_label("hot")];
        cfg.settings = crate::sim::SimSettings::new(10.0).with_dt(0.01);
        let err = run_scenario(&cfg).unwrap_err();
        assert!(err.is_divergence());
        assert!(err.to_string().contains("hot"));
    }

    #[test]
    fn flags_unusual_mu() {
        let mut cfg = builtin_scenario("example1").unwrap();
        cfg.estimators[0].mu = 1.2;
        cfg.settings = crate::sim::SimSettings::new(1.0);
        let r = run_scenario(&cfg).unwrap();
        assert!(r.estimators[0].mu_outside_unit_interval);
        assert!(summary(&r).contains("mu outside"));
    }
}
