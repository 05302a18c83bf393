//! One PASS/FAIL line per acceptance criterion; exits nonzero if any fails.

mod common;

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use common::LqReference;
use spde_smp::adjoint::{solve_adjoint_regression, weighted_norm_report, DeterministicSource, RegressionSpec};
use spde_smp::catalog::{lq_oracle, ProblemSpec};
use spde_smp::config::ExperimentConfig;
use spde_smp::control::{check_maximum_principle, optimize_control, simulate_paths, DescentOptions};
use spde_smp::cost::{ControlPenalty, CostSpec, Density, Measure};
use spde_smp::forward::ForwardModel;
use spde_smp::nonlinearity::{DriftKind, NemytskiiDrift};
use spde_smp::noise::*;
use spde_smp::runner::{adjoint_check_report, run, Command};
use spde_smp::spectral::{regularity_threshold, DomainKind, SpectralDomain};
use spde_smp::stats::MeanAccumulator;
use spde_smp::time::TimeGrid;
use spde_smp::variation::{cost_expansion_check, spike_order_study, SpikeTemplate};

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn spectral_exactness() -> Outcome {
    let d = SpectralDomain::hypercube(2, 6).unwrap();
    let modes = d.modes();
    let n = 64;
    let h = PI / n as f64;
    let mut gram = 0.0f64;
    for (a, ma) in modes.iter().enumerate() {
        for (b, mb) in modes.iter().enumerate() {
            let mut g = 0.0;
            for i in 1..n {
                for j in 1..n {
                    let p = [i as f64 * h, j as f64 * h];
                    g += ma.eigenfunction(&p) * mb.eigenfunction(&p);
                }
            }
            gram = gram.max((g * h * h - if a == b { 1.0 } else { 0.0 }).abs());
        }
    }
    let squares = modes.iter().all(|m| m.eigenvalue == m.index.iter().map(|k| (k * k) as f64).sum::<f64>());
    let c: Vec<f64> = (0..d.n_modes()).map(|k| (1.0 + k as f64).recip()).collect();
    let mut semigroup = 0.0f64;
    for (t, s) in [(0.01, 0.02), (0.1, 0.3), (0.5, 0.7)] {
        let two = d.semigroup_apply(t, &d.semigroup_apply(s, &c).unwrap()).unwrap();
        let one = d.semigroup_apply(t + s, &c).unwrap();
        for (a, b) in two.iter().zip(&one) {
            semigroup = semigroup.max((a - b).abs() / b.abs().max(f64::MIN_POSITIVE));
        }
    }
    ensure(
        gram < 1e-8 && semigroup < 1e-13 && squares,
        format!("Gram error {gram:.2e} (< 1e-8), semigroup rel. error {semigroup:.2e} (< 1e-13), μ = |k|²: {squares}"),
    )
}

fn regularity_thresholds() -> Outcome {
    let cube = regularity_threshold(2, DomainKind::Hypercube, 0.1).unwrap();
    let ball = regularity_threshold(2, DomainKind::Ball, 0.1).unwrap();
    let mut disagreements = 0;
    let mut cells = 0;
    for dim in 1..=3 {
        for kind in [DomainKind::Hypercube, DomainKind::Ball] {
            let d = SpectralDomain::new(dim, kind, 2).unwrap();
            for alpha in [0.05, 0.1, 0.2, 0.3, 0.45] {
                let g_min = regularity_threshold(dim, kind, alpha).unwrap();
                for gamma in [0.0, 0.25, 0.5, 0.75, 1.0] {
                    let noise = NoiseModel::new(&d, gamma, alpha, 0).unwrap();
                    cells += 1;
                    if series_condition_v(&d, &noise).unwrap().converges != (gamma > g_min) {
                        disagreements += 1;
                    }
                }
            }
        }
    }
    ensure(
        cube == 0.1 && ball == 0.35 && disagreements == 0 && cells == 150,
        format!("γ_min cube {cube}, ball {ball}; {disagreements}/{cells} verdicts disagree"),
    )
}

fn noise_law() -> Outcome {
    let d = SpectralDomain::hypercube(1, 6).unwrap();
    let noise = NoiseModel::new(&d, 0.5, 0.1, 3).unwrap();
    let t = 0.5;
    let finals: Vec<Vec<f64>> = (0..10_000).map(|p| sample_convolution(&d, &noise, 8, t, p).unwrap().at(8).to_vec()).collect();
    let mut worst = 0.0f64;
    for (k, mu) in d.eigenvalues().enumerate() {
        let sq: Vec<f64> = finals.iter().map(|x| x[k] * x[k]).collect();
        let acc = MeanAccumulator::from_slice(&sq);
        let b = mu.powf(-0.5);
        worst = worst.max(((acc.mean() - common::ou_variance(mu, b, t)) / acc.stderr()).abs());
    }

    let one = SpectralDomain::hypercube(1, 1).unwrap();
    let alpha = 0.1;
    let white = NoiseModel::new(&one, 0.0, alpha, 7).unwrap();
    let fine = TimeGrid::new(400, 1.0).unwrap();
    let rms = |n: usize| {
        let paths = 60;
        let acc: f64 = (0..paths)
            .map(|p| {
                let inc = NoiseIncrements::sample(&one, 7, fine, p).coarsen(&one, 400 / n).unwrap();
                let direct = convolution_from_increments(&one, &white, &inc);
                let y = sample_factorization_integrand(&one, &white, &inc, alpha).unwrap();
                let rec = factorization_reconstruct(&one, &y, alpha).unwrap();
                direct.coeffs.iter().zip(&rec.coeffs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max).powi(2)
            })
            .sum();
        (acc / paths as f64).sqrt()
    };
    let rate = (rms(100) / rms(200)).log2();
    let floor = alpha.min(1.0 - alpha);
    ensure(
        worst < 4.0 && rate >= floor,
        format!("worst OU variance z = {worst:.2} (< 4); factorization rate {rate:.3} (≥ {floor})"),
    )
}

fn spike_orders() -> Outcome {
    let p = ProblemSpec::catalog("cubic-1d").unwrap().build(7).unwrap();
    let zero = p.constant_control(0.0).unwrap();
    let eps: Vec<f64> = (3..=6).map(|k| 0.5f64.powi(k)).collect();
    let r = spike_order_study(&p.model, &zero, &p.x0, &SpikeTemplate { t0: None, w: 1.0 }, &eps, 200).unwrap();
    let xi = r.slope("xi").ok_or("no ξ slope")?;
    let eta = r.slope("eta").ok_or("no η slope")?;
    ensure(
        (1.8..=2.2).contains(&xi) && eta >= xi + 0.5,
        format!("ξ slope {xi:.3} ∈ [1.8, 2.2]; η slope {eta:.3} ≥ ξ + 0.5"),
    )
}

fn cost_expansion() -> Outcome {
    let p = ProblemSpec::catalog("lq-1d").unwrap().build(7).unwrap();
    let zero = p.constant_control(0.0).unwrap();
    let eps: Vec<f64> = (3..=6).map(|k| 0.5f64.powi(k)).collect();
    let r = cost_expansion_check(&p, &zero, &SpikeTemplate { t0: None, w: 1.0 }, &eps, 200).unwrap();
    let slope = r.slope.ok_or("no residual slope")?.slope;
    ensure((1.7..=2.3).contains(&slope), format!("residual slope {slope:.3} ∈ [1.7, 2.3]"))
}

fn duality() -> Outcome {
    let at = |paths: usize, steps: usize| {
        let mut spec = ProblemSpec::catalog("lq-1d").unwrap();
        spec.n_steps = steps;
        let p = spec.build(5).unwrap();
        let zero = p.constant_control(0.0).unwrap();
        let (r, _) = adjoint_check_report(&p, &zero, &spec.regression, paths, 1.5, 1e-12).unwrap();
        (r.duality_gamma.residual, r.duality_eta.residual)
    };
    let (g1, e1) = at(2000, 128);
    let (g2, e2) = at(4000, 256);
    ensure(
        g1 < 0.05 && e1 < 0.1 && g2 < g1 && e2 < e1,
        format!("γ-side {g1:.2e} → {g2:.2e} (< 5%), η-side {e1:.2e} → {e2:.2e} (< 10%), both decreasing"),
    )
}

fn adjoint_oracle() -> Outcome {
    let spec = ProblemSpec::catalog("lq-1d").unwrap();
    let p = spec.build(7).unwrap();
    let u = p.constant_control(0.5).unwrap();
    let trajs = simulate_paths(&p, &u, 1000).unwrap();
    let sol = solve_adjoint_regression(&p.model, &p, &trajs, &u, &spec.regression).unwrap();
    let reference = LqReference::interval(16, 1.0, 1.0, 0.5, &[1.5], 1.0, 128);
    let (a, c) = reference.adjoint_coefficients(u.values());
    let (mut err, mut norm) = (0.0, 0.0);
    for (traj, pair) in trajs.iter().zip(&sol.pairs) {
        for node in 0..=128 {
            for k in 0..16 {
                let exact = a[node * 16 + k] * traj.at(node)[k] + c[node * 16 + k];
                err += (pair.p_at(node)[k] - exact).powi(2);
                norm += exact * exact;
            }
        }
    }
    let rel = (err / norm).sqrt();

    let flat = ForwardModel::new(
        p.model.domain.clone(),
        NemytskiiDrift::new(DriftKind::Linear { rate: 0.0, gain: 1.0 }, 1.0),
        p.model.noise.clone(),
        p.model.grid,
    )
    .unwrap();
    let zero = p.constant_control(0.0).unwrap();
    let trajs = flat.simulate_ensemble(&zero, &p.x0, 200).unwrap();
    let g: Vec<f64> = (0..16).map(|k| 1.0 / (1.0 + k as f64)).collect();
    let z: Vec<f64> = (0..16).map(|k| (k as f64).cos()).collect();
    let source = DeterministicSource { running: Some(g.clone()), terminal: Some(z.clone()) };
    let det = solve_adjoint_regression(&flat, &source, &trajs, &zero, &spec.regression).unwrap();
    let grid = flat.grid;
    let mut det_err = 0.0f64;
    for node in 0..=grid.n_steps {
        let tau = grid.horizon - grid.time(node);
        for (k, mu) in flat.domain.eigenvalues().enumerate() {
            let exact = z[k] * (-mu * tau).exp() + g[k] * (1.0 - (-mu * tau).exp()) / mu;
            det_err = det_err.max((det.pairs[0].p_at(node)[k] - exact).abs());
        }
    }
    ensure(
        rel < 0.05 && det_err < 1e-6,
        format!("relative L² error of p {rel:.3} (< 5%); deterministic closed-form error {det_err:.2e} (< 1e-6)"),
    )
}

fn maximum_principle() -> Outcome {
    let spec = ProblemSpec::catalog("lq-1d").unwrap();
    let p = spec.build(7).unwrap();
    let oracle = lq_oracle(&p).unwrap();
    let trajs = simulate_paths(&p, &oracle.control, 2000).unwrap();
    let adj = solve_adjoint_regression(&p.model, &p, &trajs, &oracle.control, &spec.regression).unwrap();
    let lq = check_maximum_principle(&p, &oracle.control, &trajs, &adj, &p.control_space.samples(), 1e-3).unwrap();

    let spec = ProblemSpec::catalog("cubic-1d").unwrap();
    let p = spec.build(7).unwrap();
    let opts = DescentOptions { iterations: 50, n_paths: 200, regression: spec.regression.clone(), ..DescentOptions::default() };
    let result = optimize_control(&p, &p.constant_control(0.0).unwrap(), &opts).unwrap();
    let trajs = simulate_paths(&p, &result.control, 1000).unwrap();
    let adj = solve_adjoint_regression(&p.model, &p, &trajs, &result.control, &spec.regression).unwrap();
    let cubic = check_maximum_principle(&p, &result.control, &trajs, &adj, &p.control_space.samples(), 1e-2).unwrap();
    ensure(
        lq.min_gap >= -1e-3 && lq.v_samples.len() == 21 && cubic.fraction_violating <= 0.01,
        format!(
            "LQ oracle min gap {:.2e} (≥ −1e-3 over 21 v); cubic after {} iterations: {:.2}% of (t, v) below −1e-2 (≤ 1%)",
            lq.min_gap,
            result.trace.len() - 1,
            100.0 * cubic.fraction_violating
        ),
    )
}

fn weighted_norms() -> Outcome {
    let at = |modes: usize| {
        let mut spec = ProblemSpec::catalog("cubic-1d").unwrap();
        spec.domain.modes_per_axis = modes;
        spec.n_steps = 4096;
        spec.cost = CostSpec {
            measure: Measure::Dirac { points: vec![vec![1.0]], weights: vec![1.0] },
            running: Density::Zero,
            control_penalty: ControlPenalty::Quadratic { weight: 1.0 },
            terminal: Density::Linear { weight: 1.0 },
        };
        spec.regression = RegressionSpec { basis_modes: 0, ..RegressionSpec::default() };
        let p = spec.build(3).unwrap();
        let zero = p.constant_control(0.0).unwrap();
        let trajs = simulate_paths(&p, &zero, 32).unwrap();
        let sol = solve_adjoint_regression(&p.model, &p, &trajs, &zero, &spec.regression).unwrap();
        weighted_norm_report(p.domain(), &sol.pairs, 1.5).unwrap()
    };
    let (a, b) = (at(32), at(64));
    let change = (b.p_weighted_mean - a.p_weighted_mean).abs() / a.p_weighted_mean;
    let growth = b.p_final_step / a.p_final_step;
    ensure(
        change < 0.2 && growth > 1.1,
        format!(
            "weighted ∫|p|²(T−t)^λ {:.4} → {:.4} ({:.1}% < 20%); |p(T−Δt)|² {:.2} → {:.2} (×{growth:.2})",
            a.p_weighted_mean,
            b.p_weighted_mean,
            100.0 * change,
            a.p_final_step,
            b.p_final_step
        ),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let text = r#"{"problem": "lq-1d", "seed": 17, "paths": 300}"#;
    let config = ExperimentConfig::from_json(text).map_err(|e| e.to_string())?;
    let once = |name: &str| {
        let out = dir.path().join(name);
        let outcome = run(Command::Selftest, &config, text.as_bytes(), &out).map_err(|e| e.to_string())?;
        let bytes = std::fs::read(&outcome.manifest_path).map_err(|e| e.to_string())?;
        Ok::<_, String>((bytes, outcome.manifest.passed))
    };
    let (a, pa) = once("first")?;
    let (b, _) = once("second")?;
    ensure(a == b && pa == Some(true), format!("manifests identical: {}, selftest passed: {pa:?}", a == b))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("spectral exactness", spectral_exactness),
        ("regularity thresholds", regularity_thresholds),
        ("noise law and factorization", noise_law),
        ("spike variation orders", spike_orders),
        ("cost expansion", cost_expansion),
        ("duality identity", duality),
        ("adjoint oracle", adjoint_oracle),
        ("maximum principle", maximum_principle),
        ("weighted norm finiteness", weighted_norms),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS ({name}) {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL ({name}) {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
