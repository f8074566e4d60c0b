//! Self-check suite behind `paramest verify`.
//!
//! Every check is a small experiment with an independent expected value:
//! hand-expanded gain formulas, closed-form solutions, structural
//! properties of the dynamics, and the qualitative comparisons the builtin
//! scenarios are meant to reproduce. Checks are independent and run through
//! [`exec::map`].

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::estimators::{gradient_error_rhs, mge_gain, mge_mre_rhs};
use crate::exec::{self, Execution};
use crate::filters::FilterState;
use crate::harness::{
    builtin_scenario, builtin_scenarios, parse_csv, run_scenario_with, write_trajectory_csv,
};
use crate::linalg::{dot, norm2, SquareMatrix};
use crate::signals::{builtin, excitation_report};
use crate::sim::{
    convergence_time, rk4_step, simulate, simulate_gradient_errors, simulate_with_final_state,
    SimSettings,
};
use crate::types::{EstimationProblem, EstimatorConfig, EstimatorState, RegressorSpec, Variant};

/// Monotonicity slack for non-increasing error sequences.
pub const MONOTONE_SLACK: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub id: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

type CheckFn = fn() -> Result<(bool, String)>;

const CHECKS: &[(&str, &str, CheckFn)] = &[
    ("1", "modified gain formulas", gain_formulas),
    ("2", "GE error norm is non-increasing", ge_monotone),
    ("3", "scalar GE closed form", scalar_closed_form),
    ("4", "estimate and error forms agree", duality),
    ("5", "memory filter", filter_correctness),
    (
        "6",
        "example1 MGE reaches the true parameters",
        example1_mge,
    ),
    ("7", "example3 MGE no slower than GE", example3_comparison),
    (
        "8",
        "examples 4-5 MGE_MRE no slower than MRE",
        examples45_comparison,
    ),
    (
        "9",
        "example6 MGE_MRE no slower than GE, MRE, DREM",
        example6_comparison,
    ),
    ("10", "DREM coordinates are non-increasing", drem_monotone),
    ("11", "RK4 fourth order", rk4_order),
    ("12", "excitation diagnostics", excitation),
    ("13", "deterministic CSV round trip", csv_determinism),
    (
        "rest",
        "estimators rest at the true parameters",
        rest_at_truth,
    ),
    ("dt", "results are insensitive to dt", dt_robustness),
    ("energy", "GE energy rate is non-positive", ge_energy_rate),
    ("aligned", "trajectory columns are aligned", alignment),
];

/// Runs every check; the outcome order is fixed regardless of `execution`.
pub fn run_all(execution: Execution) -> Vec<CheckOutcome> {
    exec::map(execution, CHECKS, |&(id, name, f)| {
        let start = Instant::now();
        let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
        CheckOutcome {
            id,
            name,
            passed,
            detail,
            seconds: start.elapsed().as_secs_f64(),
        }
    })
}

/// Index of the first step where `xs` rises by more than `slack`.
fn first_rise(xs: impl IntoIterator<Item = f64>, slack: f64) -> Option<usize> {
    let mut prev = f64::INFINITY;
    for (k, x) in xs.into_iter().enumerate() {
        if !(x <= prev + slack) {
            return Some(k);
        }
        prev = x;
    }
    None
}

fn within_ulp(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= f64::EPSILON * a.abs().max(b.abs())
}

fn gain_formulas() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst = 0.0_f64;
    let mut failures = 0;
    for _ in 0..1000 {
        let tau = rng.gen_range(0.01..100.0);
        let mu = rng.gen_range(-2.0..2.0);
        let w: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-10.0..10.0));

        let k2 = mge_gain(&w[..2], tau, mu)?;
        let want2 = [tau * w[0], 2.0 * tau * w[1] - mu * tau * w[0]];
        let k3 = mge_gain(&w, tau, mu)?;
        let want3 = [
            tau * w[0],
            tau * w[1],
            2.0 * tau * w[2] + tau * w[1] - 2.0 * mu * tau * w[0],
        ];

        // Filter state with a known residual ε = 𝔾 − Ωϑ̂ (ϑ̂ = 0 ⇒ ε = 𝔾).
        let mut f = FilterState::zeros(3);
        f.g_ext = w.to_vec();
        let upd = mge_mre_rhs(&EstimatorState::new(vec![0.0; 3]).with_filter(f), tau, mu)?;

        let pairs = k2
            .as_slice()
            .iter()
            .zip(&want2)
            .chain(k3.as_slice().iter().zip(&want3))
            .chain(upd.iter().zip(&want3));
        for (&got, &want) in pairs {
            if !within_ulp(got, want) {
                failures += 1;
            }
            worst = worst.max((got - want).abs());
        }
    }
    Ok((
        failures == 0,
        format!("1000 samples, {failures} mismatches, max |diff| {worst:.1e}"),
    ))
}

fn random_problem(rng: &mut ChaCha8Rng) -> Result<EstimationProblem> {
    let q = rng.gen_range(1..=3);
    let components: Vec<String> = (0..q)
        .map(|_| match rng.gen_range(0..3) {
            0 => format!("{:.3}", rng.gen_range(0.2..2.0)),
            1 => format!(
                "{:.3}*sin({:.3}*t) + {:.3}*cos({:.3}*t)",
                rng.gen_range(-2.0..2.0),
                rng.gen_range(0.1..3.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(0.1..3.0)
            ),
            _ => format!(
                "{:.3}*exp({:.3}*t) + sin({:.3}*t)",
                rng.gen_range(0.5..2.0),
                -rng.gen_range(0.05..1.0),
                rng.gen_range(0.1..3.0)
            ),
        })
        .collect();
    let theta = (0..q).map(|_| rng.gen_range(-3.0..3.0)).collect();
    EstimationProblem::new(RegressorSpec::parse(&components)?, theta)
}

fn ge_monotone() -> Result<(bool, String)> {
    let settings = SimSettings::new(30.0).with_record_every(1);
    let mut cases: Vec<(String, EstimationProblem, f64)> = builtin_scenarios()
        .into_iter()
        .map(|s| {
            let tau = builtin(&s.name).map(|b| b.tau).unwrap_or(1.0);
            (s.name, s.problem, tau)
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for k in 0..20 {
        let tau = rng.gen_range(0.5..5.0);
        cases.push((format!("random{k}"), random_problem(&mut rng)?, tau));
    }
    let mut bad = Vec::new();
    for (name, problem, tau) in &cases {
        let cfg = EstimatorConfig::new(Variant::Ge, *tau, 0.0, problem.dim());
        let traj = simulate(problem, &cfg, &settings)?;
        if let Some(k) = first_rise(traj.err_norms.iter().copied(), MONOTONE_SLACK) {
            bad.push(format!("{name} at t={}", traj.times[k]));
        }
    }
    Ok((
        bad.is_empty(),
        format!("{} runs; violations: [{}]", cases.len(), bad.join(", ")),
    ))
}

fn scalar_closed_form() -> Result<(bool, String)> {
    let problem = EstimationProblem::new(RegressorSpec::parse(&["sin(t)"])?, vec![1.0])?;
    let steps = 6000;
    let settings = SimSettings::new(2.0 * PI).with_dt(2.0 * PI / steps as f64);
    let cfg = EstimatorConfig::new(Variant::Ge, 1.0, 0.0, 1);
    let traj = simulate(&problem, &cfg, &settings)?;
    let got = traj.final_err_norm().unwrap_or(f64::NAN);
    let want = (-PI).exp();
    let diff = (got - want).abs();
    Ok((
        diff < 1e-6,
        format!("err(2π) = {got:.9}, exp(−π) = {want:.9}, |diff| {diff:.1e}"),
    ))
}

fn duality() -> Result<(bool, String)> {
    let mut worst = 0.0_f64;
    for name in ["example1", "example2", "example3"] {
        let s = builtin_scenario(name)?;
        let b = builtin(name)?;
        for variant in [Variant::Ge, Variant::Mge] {
            let cfg = EstimatorConfig::new(variant, b.tau, b.mu, s.problem.dim());
            let est = simulate(&s.problem, &cfg, &s.settings)?;
            let err = simulate_gradient_errors(&s.problem, &cfg, &s.settings)?;
            for (hat, tilde) in est.estimates.iter().zip(&err.errors) {
                for ((h, e), th) in hat.iter().zip(tilde).zip(s.problem.true_params()) {
                    worst = worst.max((h + e - th).abs());
                }
            }
        }
    }
    Ok((worst <= 1e-9, format!("max |ϑ̂ + ϑ̃ − ϑ| = {worst:.1e}")))
}

fn filter_correctness() -> Result<(bool, String)> {
    let w = [1.5, -0.5];
    let problem = EstimationProblem::new(RegressorSpec::parse(&["1.5", "-0.5"])?, vec![1.0, 2.0])?;
    let cfg = EstimatorConfig::new(Variant::Mre, 1.0, 0.0, 2);
    let (_, state) = simulate_with_final_state(&problem, &cfg, &SimSettings::new(1.0))?;
    let omega = &state.filter.as_ref().expect("MRE carries a filter").omega;
    let scale = 1.0 - (-1.0_f64).exp();
    let mut const_err = 0.0_f64;
    for i in 0..2 {
        for j in 0..2 {
            const_err = const_err.max((omega[(i, j)] - scale * w[i] * w[j]).abs());
        }
    }

    let mut worst_asym = 0.0_f64;
    let mut worst_eig = f64::INFINITY;
    for s in builtin_scenarios() {
        let tau = builtin(&s.name)?.tau;
        let cfg = EstimatorConfig::new(Variant::Mre, tau, 0.0, s.problem.dim());
        let (traj, fin) = simulate_with_final_state(&s.problem, &cfg, &s.settings)?;
        worst_asym = traj
            .filter_asymmetry
            .iter()
            .fold(worst_asym, |m, &a| m.max(a));
        if let Some(f) = &fin.filter {
            worst_asym = worst_asym.max(abs_asymmetry(&f.omega));
        }
        worst_eig = traj
            .filter_min_eigs
            .iter()
            .fold(worst_eig, |m, &e| m.min(e));
    }
    Ok((
        const_err <= 1e-8 && worst_asym <= 1e-12 && worst_eig >= -1e-9,
        format!(
            "constant-ω |ΔΩ(1)| {const_err:.1e}, asymmetry {worst_asym:.1e}, min eig {worst_eig:.2e}"
        ),
    ))
}

fn abs_asymmetry(m: &SquareMatrix) -> f64 {
    let n = m.dim();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

fn scenario_times(name: &str) -> Result<Vec<(String, Option<f64>)>> {
    let r = run_scenario_with(&builtin_scenario(name)?, Execution::Sequential)?;
    Ok(r.estimators
        .iter()
        .map(|e| (e.label.clone(), e.convergence[0]))
        .collect())
}

/// Convergence time with "never" ordered after every finite time.
fn as_key(t: Option<f64>) -> f64 {
    t.unwrap_or(f64::INFINITY)
}

fn fmt_time(t: Option<f64>) -> String {
    t.map_or_else(|| "never".into(), |t| format!("{t:.2}"))
}

fn lookup(times: &[(String, Option<f64>)], label: &str) -> Option<f64> {
    times.iter().find(|(l, _)| l == label).and_then(|(_, t)| *t)
}

fn example1_mge() -> Result<(bool, String)> {
    let s = builtin_scenario("example1")?;
    let traj = simulate(&s.problem, &s.estimators[0], &s.settings)?;
    let err = traj.final_err_norm().unwrap_or(f64::NAN);
    let hat = traj.final_estimate().unwrap_or_default();
    let rel = hat
        .iter()
        .zip(s.problem.true_params())
        .map(|(h, t)| ((h - t) / t).abs())
        .fold(0.0_f64, f64::max);
    Ok((
        err < 0.05 && rel <= 0.02,
        format!("‖ϑ̃(30)‖ = {err:.2e}, worst relative deviation {rel:.2e}"),
    ))
}

fn example3_comparison() -> Result<(bool, String)> {
    let times = scenario_times("example3")?;
    let (ge, mge) = (lookup(&times, "GE"), lookup(&times, "MGE"));
    let ok = matches!((ge, mge), (Some(g), Some(m)) if m <= g);
    Ok((
        ok,
        format!("t(0.1): MGE {}, GE {}", fmt_time(mge), fmt_time(ge)),
    ))
}

fn examples45_comparison() -> Result<(bool, String)> {
    let mut ok = true;
    let mut detail = Vec::new();
    for name in ["example4", "example5"] {
        let times = scenario_times(name)?;
        let (mre, mix) = (lookup(&times, "MRE"), lookup(&times, "MGE_MRE"));
        ok &= mix.is_some() && as_key(mix) <= as_key(mre);
        if name == "example5" {
            ok &= as_key(mix) < 60.0;
        }
        detail.push(format!(
            "{name}: MGE_MRE {}, MRE {}",
            fmt_time(mix),
            fmt_time(mre)
        ));
    }
    Ok((ok, detail.join("; ")))
}

fn example6_comparison() -> Result<(bool, String)> {
    let times = scenario_times("example6")?;
    let mix = lookup(&times, "MGE_MRE");
    let ok = mix.is_some()
        && ["GE", "MRE", "DREM"]
            .iter()
            .all(|l| as_key(mix) <= as_key(lookup(&times, l)));
    let detail = times
        .iter()
        .map(|(l, t)| format!("{l} {}", fmt_time(*t)))
        .collect::<Vec<_>>()
        .join(", ");
    Ok((ok, format!("t(0.1): {detail}")))
}

fn drem_monotone() -> Result<(bool, String)> {
    let mut bad = Vec::new();
    for name in ["example3", "example6"] {
        let s = builtin_scenario(name)?;
        let b = builtin(name)?;
        let cfg = EstimatorConfig::new(Variant::Drem, b.tau, b.mu, s.problem.dim());
        let traj = simulate(&s.problem, &cfg, &s.settings.with_record_every(1))?;
        for (i, th) in s.problem.true_params().iter().enumerate() {
            let coord = traj.estimates.iter().map(|h| (th - h[i]).abs());
            if let Some(k) = first_rise(coord, MONOTONE_SLACK) {
                bad.push(format!(
                    "{name} coordinate {} at t={}",
                    i + 1,
                    traj.times[k]
                ));
            }
        }
    }
    Ok((bad.is_empty(), format!("violations: [{}]", bad.join(", "))))
}

fn rk4_order() -> Result<(bool, String)> {
    let global = |dt: f64| -> Result<f64> {
        let steps = (1.0 / dt).round() as usize;
        let mut x = vec![1.0];
        for k in 0..steps {
            x = rk4_step(
                |_t, x: &[f64], dx: &mut [f64]| {
                    dx[0] = -x[0];
                    Ok(())
                },
                k as f64 * dt,
                &x,
                dt,
            )?;
        }
        Ok((x[0] - (-1.0_f64).exp()).abs())
    };
    let ratio = global(0.1)? / global(0.05)?;
    Ok((
        (12.0..=20.0).contains(&ratio),
        format!("error ratio for halved dt = {ratio:.3}"),
    ))
}

fn excitation() -> Result<(bool, String)> {
    let ex1 = builtin("example1")?.problem;
    let r = excitation_report(ex1.regressor(), 0.0, 2.0 * PI, 1e-3)?;
    let want = [[2.0 * PI, 0.0], [0.0, PI]];
    let mut gram_err = 0.0_f64;
    for (i, row) in want.iter().enumerate() {
        for (j, w) in row.iter().enumerate() {
            gram_err = gram_err.max((r.gram[(i, j)] - w).abs());
        }
    }
    let ex5 = builtin("example5")?.problem;
    let rho = excitation_report(ex5.regressor(), 100.0, 10.0, 1e-3)?.min_eigenvalue;
    Ok((
        gram_err <= 1e-4 && rho < 1e-2,
        format!("example1 gram error {gram_err:.1e}; example5 ρ(100, 10) = {rho:.2e}"),
    ))
}

fn csv_determinism() -> Result<(bool, String)> {
    let s = builtin_scenario("example1")?;
    let q = s.problem.dim();
    let render = || -> Result<(Vec<u8>, crate::types::Trajectory)> {
        let traj = simulate(&s.problem, &s.estimators[0], &s.settings)?;
        let mut buf = Vec::new();
        write_trajectory_csv(&traj, q, &mut buf).expect("writing to memory");
        Ok((buf, traj))
    };
    let (a, traj) = render()?;
    let (b, _) = render()?;
    let text = String::from_utf8_lossy(&a);
    let parsed = parse_csv(&text).map_err(crate::error::Error::Config)?;
    let identical = a == b;
    let round_trip = parsed.matches(&traj);
    Ok((
        identical && round_trip,
        format!(
            "{} bytes, repeat identical: {identical}, parse-back exact: {round_trip}",
            a.len()
        ),
    ))
}

fn rest_at_truth() -> Result<(bool, String)> {
    let mut worst = 0.0_f64;
    for s in builtin_scenarios() {
        let b = builtin(&s.name)?;
        for &v in &Variant::ALL {
            let cfg = EstimatorConfig::new(v, b.tau, b.mu, s.problem.dim())
                .with_initial_estimate(s.problem.true_params().to_vec());
            let traj = simulate(&s.problem, &cfg, &SimSettings::new(10.0))?;
            worst = traj.err_norms.iter().fold(worst, |m, &e| m.max(e));
        }
    }
    Ok((
        worst <= 1e-12,
        format!("max ‖ϑ̃‖ from ϑ̂(0) = ϑ: {worst:.1e}"),
    ))
}

fn dt_robustness() -> Result<(bool, String)> {
    let mut worst = 0.0_f64;
    let mut at = String::new();
    for s in builtin_scenarios() {
        for e in &s.estimators {
            let coarse = simulate(&s.problem, e, &s.settings)?;
            let fine = simulate(&s.problem, e, &s.settings.with_dt(5e-4))?;
            let a = coarse.final_estimate().unwrap_or_default();
            let b = fine.final_estimate().unwrap_or_default();
            let d = norm2(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>());
            if d > worst {
                worst = d;
                at = format!("{} {}", s.name, e.label);
            }
        }
    }
    Ok((
        worst < 1e-4,
        format!("max final difference {worst:.1e} ({at})"),
    ))
}

fn ge_energy_rate() -> Result<(bool, String)> {
    let mut worst = f64::NEG_INFINITY;
    let mut identity = 0.0_f64;
    for s in builtin_scenarios() {
        let tau = builtin(&s.name)?.tau;
        let cfg = EstimatorConfig::new(Variant::Ge, tau, 0.0, s.problem.dim());
        let errs = simulate_gradient_errors(&s.problem, &cfg, &s.settings)?;
        for (t, e) in errs.times.iter().zip(&errs.errors) {
            let w = s.problem.regressor().eval(*t)?;
            let de = gradient_error_rhs(Variant::Ge, e, &w, tau, 0.0)?;
            let rate = dot(e, &de);
            let want = -tau * dot(&w, e).powi(2);
            worst = worst.max(rate);
            identity = identity.max((rate - want).abs() / want.abs().max(1.0));
        }
    }
    Ok((
        worst <= 0.0 && identity <= 1e-12,
        format!("max d/dt ½‖ϑ̃‖² = {worst:.1e}, deviation from −τ(ωᵀϑ̃)² {identity:.1e}"),
    ))
}

fn alignment() -> Result<(bool, String)> {
    let mut all = true;
    let mut rows = 0;
    for s in builtin_scenarios() {
        let short = SimSettings::new(5.0);
        for &v in &Variant::ALL {
            let b = builtin(&s.name)?;
            let cfg = EstimatorConfig::new(v, b.tau, b.mu, s.problem.dim());
            let traj = simulate(&s.problem, &cfg, &short)?;
            all &= traj.is_aligned()
                && traj.times.windows(2).all(|w| w[1] > w[0])
                && convergence_time(&traj, f64::INFINITY) == Some(0.0);
            rows += traj.len();
        }
    }
    Ok((all, format!("{rows} rows checked")))
}
