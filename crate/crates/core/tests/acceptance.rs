//! Acceptance gate. Each test prints one `PASS`/`FAIL` line with the measured
//! quantity and the tolerance it is held to, then asserts.
//!
//! Expected values come from outside the library: hand-expanded formulas,
//! closed-form integrals, and a small reference integrator written directly
//! from the update laws below (no library code on that path).

// Matrix oracles read best with explicit indices.
#![allow(
    clippy::needless_range_loop,
    clippy::type_complexity,
    clippy::neg_cmp_op_on_partial_ord
)]

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use paramest::estimators::{mge_gain, mge_mre_rhs};
use paramest::filters::FilterState;
use paramest::harness::{builtin_scenario, builtin_scenarios, read_csv, run_scenario};
use paramest::signals::{builtin, excitation_report};
use paramest::sim::{
    rk4_step, simulate, simulate_gradient_errors, simulate_with_final_state, SimSettings,
};
use paramest::{EstimationProblem, EstimatorConfig, EstimatorState, RegressorSpec, Variant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Writes straight to the process stdout so the line shows up even when the
/// test harness captures `println!`.
fn report(criterion: &str, passed: bool, detail: &str) {
    let line = format!(
        "{} {criterion}: {detail}\n",
        if passed { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
}

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

// ---------------------------------------------------------------------------
// Reference integrator
// ---------------------------------------------------------------------------

fn decaying_sinusoid(t: f64) -> f64 {
    (t.sin() + t.cos()) / (1.0 + t).sqrt() - t.sin() / (2.0 * (1.0 + t).powf(1.5))
}

/// Regressor and true parameters of each catalog scenario, written out by hand.
fn reference_problem(name: &str) -> (fn(f64) -> Vec<f64>, Vec<f64>) {
    match name {
        "example1" => (|t| vec![1.0, t.sin()], vec![-2.0, 2.0]),
        "example2" | "example4" => (|t| vec![1.0, decaying_sinusoid(t)], vec![-2.0, 2.0]),
        "example3" => (
            |t| vec![t.sin(), t.cos(), (2.0 * t).sin()],
            vec![1.0, 2.0, 3.0],
        ),
        "example5" => (|t| vec![1.0, (-0.25 * t).exp()], vec![-2.0, 2.0]),
        "example6" => (
            |t| vec![1.0, t.cos(), decaying_sinusoid(t)],
            vec![1.0, 2.0, 3.0],
        ),
        _ => unreachable!(),
    }
}

fn det_adj(m: &[Vec<f64>]) -> (f64, Vec<Vec<f64>>) {
    match m.len() {
        1 => (m[0][0], vec![vec![1.0]]),
        2 => (
            m[0][0] * m[1][1] - m[0][1] * m[1][0],
            vec![vec![m[1][1], -m[0][1]], vec![-m[1][0], m[0][0]]],
        ),
        3 => {
            let c = |r0: usize, r1: usize, c0: usize, c1: usize| {
                m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]
            };
            let adj = vec![
                vec![c(1, 2, 1, 2), -c(0, 2, 1, 2), c(0, 1, 1, 2)],
                vec![-c(1, 2, 0, 2), c(0, 2, 0, 2), -c(0, 1, 0, 2)],
                vec![c(1, 2, 0, 1), -c(0, 2, 0, 1), c(0, 1, 0, 1)],
            ];
            let det = m[0][0] * adj[0][0] + m[0][1] * adj[1][0] + m[0][2] * adj[2][0];
            (det, adj)
        }
        _ => unreachable!(),
    }
}

/// Row mix of the modified laws: gradient rows except the last, which is
/// `τ(2v_q + v_2 + … + v_{q−1} − (q−1)μ v_1)`.
fn mix(v: &[f64], tau: f64, mu: f64) -> Vec<f64> {
    let q = v.len();
    let mut out: Vec<f64> = v.iter().map(|x| tau * x).collect();
    if q > 1 {
        let middle: f64 = v[1..q - 1].iter().sum();
        out[q - 1] = tau * (2.0 * v[q - 1] + middle - (q as f64 - 1.0) * mu * v[0]);
    }
    out
}

/// Integrates `[ϑ̂ | Ω | 𝔾]` with classical RK4 from ϑ̂(0) = 0, Ω(0) = 0,
/// 𝔾(0) = 0 and returns `(t, ‖ϑ − ϑ̂‖)` every `every` steps.
fn reference_run(
    name: &str,
    variant: &str,
    tau: f64,
    mu: f64,
    dt: f64,
    t_end: f64,
    every: usize,
) -> Vec<(f64, f64)> {
    let (w, theta) = reference_problem(name);
    let q = theta.len();
    let rhs = |t: f64, x: &[f64]| -> Vec<f64> {
        let om = w(t);
        let y: f64 = om.iter().zip(&theta).map(|(a, b)| a * b).sum();
        let hat = &x[..q];
        let big: Vec<Vec<f64>> = (0..q)
            .map(|i| x[q + i * q..q + (i + 1) * q].to_vec())
            .collect();
        let gext = &x[q + q * q..];
        let e = y - om.iter().zip(hat).map(|(a, b)| a * b).sum::<f64>();
        let eps: Vec<f64> = (0..q)
            .map(|i| gext[i] - (0..q).map(|j| big[i][j] * hat[j]).sum::<f64>())
            .collect();
        let d_hat: Vec<f64> = match variant {
            "GE" => om.iter().map(|o| tau * o * e).collect(),
            "MGE" => mix(&om, tau, mu).iter().map(|k| k * e).collect(),
            "MRE" => eps.iter().map(|x| tau * x).collect(),
            "MGE_MRE" => mix(&eps, tau, mu),
            "DREM" => {
                let (det, adj) = det_adj(&big);
                (0..q)
                    .map(|i| {
                        let yi: f64 = (0..q).map(|j| adj[i][j] * gext[j]).sum();
                        tau * det * (yi - det * hat[i])
                    })
                    .collect()
            }
            _ => unreachable!(),
        };
        let mut dx = d_hat;
        for i in 0..q {
            for j in 0..q {
                dx.push(-big[i][j] + om[i] * om[j]);
            }
        }
        for i in 0..q {
            dx.push(-gext[i] + om[i] * y);
        }
        dx
    };
    let err = |x: &[f64]| {
        x[..q]
            .iter()
            .zip(&theta)
            .map(|(h, t)| (t - h).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let steps = (t_end / dt).round() as usize;
    let mut x = vec![0.0; q + q * q + q];
    let mut out = vec![(0.0, err(&x))];
    for k in 0..steps {
        let t = k as f64 * dt;
        let k1 = rhs(t, &x);
        let at = |k: &[f64], s: f64| x.iter().zip(k).map(|(a, b)| a + s * b).collect::<Vec<_>>();
        let k2 = rhs(t + dt / 2.0, &at(&k1, dt / 2.0));
        let k3 = rhs(t + dt / 2.0, &at(&k2, dt / 2.0));
        let k4 = rhs(t + dt, &at(&k3, dt));
        for i in 0..x.len() {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if (k + 1) % every == 0 || k + 1 == steps {
            out.push(((k + 1) as f64 * dt, err(&x)));
        }
    }
    out
}

/// Earliest sample after which the error never again exceeds `tol`.
fn reference_convergence(samples: &[(f64, f64)], tol: f64) -> Option<f64> {
    match samples.iter().rposition(|s| s.1 > tol) {
        None => samples.first().map(|s| s.0),
        Some(i) => samples.get(i + 1).map(|s| s.0),
    }
}

/// Reference and library convergence times for every estimator of a
/// catalog scenario, in configuration order.
fn compare_scenario(name: &str) -> Vec<(String, Option<f64>, Option<f64>)> {
    let cfg = builtin_scenario(name).unwrap();
    let result = run_scenario(&cfg).unwrap();
    cfg.estimators
        .iter()
        .zip(&result.estimators)
        .map(|(e, r)| {
            let reference = reference_run(
                name,
                e.variant.name(),
                e.tau,
                e.mu,
                cfg.settings.dt,
                cfg.settings.t_end,
                cfg.settings.record_every,
            );
            (
                e.label.clone(),
                reference_convergence(&reference, 0.1),
                r.convergence[0],
            )
        })
        .collect()
}

fn key(t: Option<f64>) -> f64 {
    t.unwrap_or(f64::INFINITY)
}

fn show(t: Option<f64>) -> String {
    t.map_or_else(|| "never".into(), |t| format!("{t:.2}"))
}

/// Library and reference agree to within one recording interval (or both
/// never converge).
fn agree(lib: Option<f64>, reference: Option<f64>) -> bool {
    match (lib, reference) {
        (None, None) => true,
        (Some(a), Some(b)) => (a - b).abs() <= 0.01 + 1e-9,
        _ => false,
    }
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

#[test]
fn gain_formula_fidelity() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let ulp = |a: f64, b: f64| a == b || (a - b).abs() <= f64::EPSILON * a.abs().max(b.abs());
    let mut mismatches = 0;
    for _ in 0..1000 {
        let tau: f64 = rng.gen_range(1e-3..1e3);
        let mu: f64 = rng.gen_range(-1.5..1.5);
        let (w1, w2, w3): (f64, f64, f64) = (
            rng.gen_range(-5.0..5.0),
            rng.gen_range(-5.0..5.0),
            rng.gen_range(-5.0..5.0),
        );
        let k2 = mge_gain(&[w1, w2], tau, mu).unwrap();
        let k3 = mge_gain(&[w1, w2, w3], tau, mu).unwrap();
        let expect2 = [tau * w1, 2.0 * tau * w2 - mu * tau * w1];
        let expect3 = [
            tau * w1,
            tau * w2,
            2.0 * tau * w3 + tau * w2 - 2.0 * mu * tau * w1,
        ];

        // ε = 𝔾 − Ωϑ̂ with Ω = I, ϑ̂ = (1, 1, 1) and 𝔾 = ε + 1.
        let eps = [
            rng.gen_range(-5.0..5.0),
            rng.gen_range(-5.0..5.0),
            rng.gen_range(-5.0..5.0),
        ];
        let mut f = FilterState::zeros(3);
        for i in 0..3 {
            f.omega[(i, i)] = 1.0;
            f.g_ext[i] = eps[i] + 1.0;
        }
        let upd = mge_mre_rhs(&EstimatorState::new(vec![1.0; 3]).with_filter(f), tau, mu).unwrap();
        let e: Vec<f64> = (0..3).map(|i| (eps[i] + 1.0) - 1.0).collect();
        let expect_mix = 2.0 * tau * e[2] + tau * e[1] - 2.0 * mu * tau * e[0];

        mismatches +=
            k2.0.iter()
                .zip(&expect2)
                .filter(|(a, b)| !ulp(**a, **b))
                .count();
        mismatches +=
            k3.0.iter()
                .zip(&expect3)
                .filter(|(a, b)| !ulp(**a, **b))
                .count();
        mismatches += usize::from(!ulp(upd[2], expect_mix));
    }
    let secs = start.elapsed().as_secs_f64();
    let passed = mismatches == 0 && secs < 1.0;
    report(
        "gain formula fidelity",
        passed,
        &format!("{mismatches} mismatches beyond 1 ulp in 1000 draws; {secs:.3}s (limit 1s)"),
    );
    assert!(passed);
}

fn random_regressor(rng: &mut ChaCha8Rng) -> (Vec<String>, Vec<f64>) {
    let q = rng.gen_range(1..=3);
    let comps = (0..q)
        .map(|i| {
            let a: f64 = rng.gen_range(0.2..2.0);
            let f: f64 = rng.gen_range(0.2..3.0);
            let d: f64 = rng.gen_range(0.0..0.5);
            match i % 3 {
                0 => format!("{a}*cos({f}*t)"),
                1 => format!("{a}*sin({f}*t) + {d}"),
                _ => format!("{a}*exp(-{d}*t)"),
            }
        })
        .collect();
    let theta = (0..q).map(|_| rng.gen_range(-4.0..4.0)).collect();
    (comps, theta)
}

#[test]
fn ge_error_norm_monotone() {
    let start = Instant::now();
    let settings = SimSettings::new(30.0).with_record_every(1);
    let mut problems: Vec<(String, EstimationProblem, f64)> = builtin_scenarios()
        .into_iter()
        .map(|s| {
            let tau = builtin(&s.name).unwrap().tau;
            (s.name, s.problem, tau)
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for k in 0..20 {
        let (comps, theta) = random_regressor(&mut rng);
        let tau = rng.gen_range(0.5..4.0);
        let p = EstimationProblem::new(RegressorSpec::parse(&comps).unwrap(), theta).unwrap();
        problems.push((format!("random{k}"), p, tau));
    }
    let mut violations = Vec::new();
    for (name, p, tau) in &problems {
        let cfg = EstimatorConfig::new(Variant::Ge, *tau, 0.0, p.dim());
        let traj = simulate(p, &cfg, &settings).unwrap();
        if let Some(k) = first_rise(traj.err_norms.iter().copied(), 1e-8) {
            violations.push(format!("{name}@{}", traj.times[k]));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let passed = violations.is_empty() && secs < 30.0;
    report(
        "GE monotonicity",
        passed,
        &format!(
            "{} runs, rises above 1e-8 slack: {violations:?}; {secs:.2}s (limit 30s)",
            problems.len()
        ),
    );
    assert!(passed);
}

#[test]
fn scalar_closed_form() {
    let p = EstimationProblem::new(RegressorSpec::parse(&["sin(t)"]).unwrap(), vec![1.0]).unwrap();
    let cfg = EstimatorConfig::new(Variant::Ge, 1.0, 0.0, 1);
    let settings = SimSettings::new(2.0 * PI).with_dt(2.0 * PI / 6283.0);
    let got = simulate(&p, &cfg, &settings)
        .unwrap()
        .final_err_norm()
        .unwrap();
    // ∫₀^{2π} sin² = π
    let oracle = (-PI).exp();
    let diff = (got - oracle).abs();
    let passed = diff < 1e-6 && (oracle - 0.043214).abs() < 1e-6;
    report(
        "scalar closed form",
        passed,
        &format!("ϑ̃(2π) = {got:.10}, exp(−π) = {oracle:.10}, |diff| = {diff:.2e} (tol 1e-6)"),
    );
    assert!(passed);
}

#[test]
fn estimate_error_duality() {
    let mut worst = 0.0_f64;
    for name in ["example1", "example2", "example3"] {
        let cfg = builtin_scenario(name).unwrap();
        let mge = cfg
            .estimators
            .iter()
            .find(|e| e.variant == Variant::Mge)
            .unwrap();
        let est = simulate(&cfg.problem, mge, &cfg.settings).unwrap();
        let err = simulate_gradient_errors(&cfg.problem, mge, &cfg.settings).unwrap();
        assert_eq!(est.times, err.times);
        for (h, e) in est.estimates.iter().zip(&err.errors) {
            for i in 0..h.len() {
                worst = worst.max((h[i] + e[i] - cfg.problem.true_params()[i]).abs());
            }
        }
    }
    let passed = worst <= 1e-9;
    report(
        "estimate/error duality",
        passed,
        &format!("max |ϑ̂ + ϑ̃ − ϑ| over examples 1-3 = {worst:.2e} (tol 1e-9)"),
    );
    assert!(passed);
}

#[test]
fn filter_correctness() {
    let w = [2.0, -1.0, 0.5];
    let p = EstimationProblem::new(
        RegressorSpec::parse(&["2", "-1", "0.5"]).unwrap(),
        vec![1.0, 1.0, 1.0],
    )
    .unwrap();
    let cfg = EstimatorConfig::new(Variant::Mre, 1.0, 0.0, 3);
    let (_, fin) = simulate_with_final_state(&p, &cfg, &SimSettings::new(1.0)).unwrap();
    let om = &fin.filter.unwrap().omega;
    let c = 1.0 - (-1.0_f64).exp();
    let mut closed = 0.0_f64;
    for i in 0..3 {
        for j in 0..3 {
            closed = closed.max((om[(i, j)] - c * w[i] * w[j]).abs());
        }
    }

    let mut asym = 0.0_f64;
    let mut min_eig = f64::INFINITY;
    for s in builtin_scenarios() {
        let tau = builtin(&s.name).unwrap().tau;
        let cfg = EstimatorConfig::new(Variant::MgeMre, tau, 0.5, s.problem.dim());
        let (traj, fin) = simulate_with_final_state(&s.problem, &cfg, &s.settings).unwrap();
        asym = traj.filter_asymmetry.iter().fold(asym, |m, &a| m.max(a));
        min_eig = traj.filter_min_eigs.iter().fold(min_eig, |m, &e| m.min(e));
        let om = fin.filter.unwrap().omega;
        for i in 0..om.dim() {
            for j in 0..om.dim() {
                asym = asym.max((om[(i, j)] - om[(j, i)]).abs());
            }
        }
    }
    let passed = closed <= 1e-8 && asym <= 1e-12 && min_eig >= -1e-9;
    report(
        "filter correctness",
        passed,
        &format!(
            "constant-ω error {closed:.2e} (tol 1e-8); asymmetry {asym:.2e} (tol 1e-12); \
             min eigenvalue {min_eig:.2e} (≥ −1e-9)"
        ),
    );
    assert!(passed);
}

#[test]
fn example1_reproduction() {
    let start = Instant::now();
    let cfg = builtin_scenario("example1").unwrap();
    let e = &cfg.estimators[0];
    assert_eq!((e.variant, e.tau, e.mu), (Variant::Mge, 1.0, 0.95));
    assert_eq!(cfg.settings.t_end, 30.0);
    let traj = simulate(&cfg.problem, e, &cfg.settings).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let err = traj.final_err_norm().unwrap();
    let hat = traj.final_estimate().unwrap();
    let within = (hat[0] + 2.0).abs() <= 0.04 && (hat[1] - 2.0).abs() <= 0.04;

    // Reference integration at a ten times finer step.
    let fine = reference_run("example1", "MGE", 1.0, 0.95, 1e-4, 30.0, 100);
    let fine_err = fine.last().unwrap().1;
    let passed = err < 0.05 && within && fine_err < 0.05 && secs < 5.0;
    report(
        "example1 reproduction",
        passed,
        &format!(
            "‖ϑ̃(30)‖ = {err:.2e} (< 0.05), ϑ̂(30) = ({:.5}, {:.5}) within 2%: {within}; \
             reference dt=1e-4 gives {fine_err:.2e}; {secs:.2}s (limit 5s)",
            hat[0], hat[1]
        ),
    );
    assert!(passed);
}

#[test]
fn example3_reproduction() {
    let rows = compare_scenario("example3");
    let get = |l: &str| rows.iter().find(|r| r.0 == l).unwrap();
    let (ge, mge) = (get("GE"), get("MGE"));
    let consistent = rows.iter().all(|r| agree(r.2, r.1));
    let passed = consistent && matches!((mge.2, ge.2), (Some(m), Some(g)) if m <= g && g <= 50.0);
    report(
        "example3 reproduction",
        passed,
        &format!(
            "t(0.1): MGE {} vs GE {} (reference {} / {})",
            show(mge.2),
            show(ge.2),
            show(mge.1),
            show(ge.1)
        ),
    );
    assert!(passed);
}

#[test]
fn examples4_5_reproduction() {
    let mut passed = true;
    let mut parts = Vec::new();
    for name in ["example4", "example5"] {
        let rows = compare_scenario(name);
        let get = |l: &str| rows.iter().find(|r| r.0 == l).unwrap();
        let (mre, mix) = (get("MRE"), get("MGE_MRE"));
        passed &= rows.iter().all(|r| agree(r.2, r.1));
        // A run that never reaches the tolerance counts as infinitely slow.
        passed &= mix.2.is_some() && key(mix.2) <= key(mre.2);
        if name == "example5" {
            passed &= key(mix.2) < 60.0;
        }
        parts.push(format!(
            "{name}: MGE_MRE {} vs MRE {} (reference {} / {})",
            show(mix.2),
            show(mre.2),
            show(mix.1),
            show(mre.1)
        ));
    }
    report(
        "examples 4-5 reproduction",
        passed,
        &format!("t(0.1): {}; example5 bound 60s", parts.join("; ")),
    );
    assert!(passed);
}

#[test]
fn example6_reproduction() {
    let rows = compare_scenario("example6");
    let mix = rows.iter().find(|r| r.0 == "MGE_MRE").unwrap().2;
    let passed = rows.iter().all(|r| agree(r.2, r.1))
        && mix.is_some()
        && rows.iter().all(|r| key(mix) <= key(r.2));
    let table = rows
        .iter()
        .map(|r| format!("{} {} (ref {})", r.0, show(r.2), show(r.1)))
        .collect::<Vec<_>>()
        .join(", ");
    report("example6 reproduction", passed, &format!("t(0.1): {table}"));
    assert!(passed);
}

#[test]
fn drem_coordinate_monotonicity() {
    let mut violations = Vec::new();
    for name in ["example3", "example6"] {
        let cfg = builtin_scenario(name).unwrap();
        let b = builtin(name).unwrap();
        let drem = EstimatorConfig::new(Variant::Drem, b.tau, b.mu, cfg.problem.dim());
        let traj = simulate(&cfg.problem, &drem, &cfg.settings.with_record_every(1)).unwrap();
        for (i, th) in cfg.problem.true_params().iter().enumerate() {
            if let Some(k) = first_rise(traj.estimates.iter().map(|h| (th - h[i]).abs()), 1e-8) {
                violations.push(format!("{name}[{}]@{}", i + 1, traj.times[k]));
            }
        }
    }
    let passed = violations.is_empty();
    report(
        "DREM per-coordinate monotonicity",
        passed,
        &format!("rises above 1e-8 slack: {violations:?}"),
    );
    assert!(passed);
}

#[test]
fn rk4_order() {
    let run = |dt: f64| {
        let n = (1.0 / dt).round() as usize;
        let mut x = vec![1.0];
        for k in 0..n {
            x = rk4_step(
                |_, x: &[f64], dx: &mut [f64]| {
                    dx[0] = -x[0];
                    Ok(())
                },
                k as f64 * dt,
                &x,
                dt,
            )
            .unwrap();
        }
        (x[0] - (-1.0_f64).exp()).abs()
    };
    let ratio = run(0.05) / run(0.025);
    let passed = (12.0..=20.0).contains(&ratio);
    report(
        "RK4 order",
        passed,
        &format!("error ratio on halving dt = {ratio:.3} (within [12, 20])"),
    );
    assert!(passed);
}

#[test]
fn excitation_diagnostics() {
    let ex1 = builtin("example1").unwrap().problem;
    let r = excitation_report(ex1.regressor(), 0.0, 2.0 * PI, 1e-3).unwrap();
    // ∫1 = 2π, ∫sin = 0, ∫sin² = π over one period
    let oracle = [[2.0 * PI, 0.0], [0.0, PI]];
    let mut gram_err = 0.0_f64;
    for i in 0..2 {
        for j in 0..2 {
            gram_err = gram_err.max((r.gram[(i, j)] - oracle[i][j]).abs());
        }
    }
    let ex5 = builtin("example5").unwrap().problem;
    let rho = excitation_report(ex5.regressor(), 100.0, 10.0, 1e-3)
        .unwrap()
        .min_eigenvalue;
    // ρ ≤ ∫_{100}^{110} e^{−σ/2} dσ, the energy of the decaying component
    let bound = 2.0 * ((-50.0_f64).exp() - (-55.0_f64).exp());
    let passed = gram_err <= 1e-4 && rho < 1e-2 && rho <= bound * (1.0 + 1e-6) + 1e-15;
    report(
        "excitation diagnostics",
        passed,
        &format!(
            "example1 gram error {gram_err:.2e} (tol 1e-4); example5 ρ(100, 10) = {rho:.2e} (< 1e-2)"
        ),
    );
    assert!(passed);
}

fn parse_rows(path: &Path) -> (String, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse::<f64>().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn determinism_and_round_trip() {
    let bin = env!("CARGO_BIN_EXE_paramest");
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let status = Command::new(bin)
            .args(["run", "--scenario", "example3", "--t-end", "10", "--out"])
            .arg(d.path())
            .output()
            .unwrap();
        assert!(status.status.success(), "{status:?}");
    }
    let mut identical = true;
    for label in ["GE", "MGE"] {
        let file = format!("example3_{label}.csv");
        identical &= std::fs::read(dirs[0].path().join(&file)).unwrap()
            == std::fs::read(dirs[1].path().join(&file)).unwrap();
    }

    // The file must reproduce the in-memory run bit for bit.
    let mut cfg = builtin_scenario("example3").unwrap();
    cfg.settings.t_end = 10.0;
    let mge = cfg.estimators.iter().find(|e| e.label == "MGE").unwrap();
    let traj = simulate(&cfg.problem, mge, &cfg.settings).unwrap();
    let path = dirs[0].path().join("example3_MGE.csv");
    let (header, rows) = parse_rows(&path);
    let bits = |x: f64| x.to_bits();
    let exact = header
        == "t,theta_hat_1,theta_hat_2,theta_hat_3,err_norm,manifold_residual,storage"
        && rows.len() == traj.len()
        && rows.iter().enumerate().all(|(k, r)| {
            let mut expect = vec![traj.times[k]];
            expect.extend(&traj.estimates[k]);
            expect.extend([
                traj.err_norms[k],
                traj.manifold_residuals[k],
                traj.storage_values[k],
            ]);
            r.iter()
                .map(|&x| bits(x))
                .eq(expect.iter().map(|&x| bits(x)))
        })
        && read_csv(&path).unwrap().matches(&traj);
    let passed = identical && exact;
    report(
        "determinism and round trip",
        passed,
        &format!(
            "two CLI runs byte-identical: {identical}; parse-back equals in-memory ({} rows): {exact}",
            rows.len()
        ),
    );
    assert!(passed);
}
