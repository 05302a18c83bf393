mod common;

use spde_smp::catalog::ProblemSpec;
use spde_smp::control::ControlProblem;
use spde_smp::cost::{ControlPenalty, CostSpec, Density, Measure};
use spde_smp::forward::{ControlProcess, FieldForcing, NoiseForcing};
use spde_smp::nonlinearity::DriftKind;
use spde_smp::variation::*;
use spde_smp::Error;

fn problem(drift: DriftKind, running: Density, steps: usize) -> ControlProblem {
    let mut spec = ProblemSpec::catalog("lq-1d").unwrap();
    spec.drift = drift;
    spec.n_steps = steps;
    spec.domain.modes_per_axis = 8;
    spec.cost = CostSpec {
        measure: Measure::Lebesgue,
        running,
        control_penalty: ControlPenalty::Quadratic { weight: 1.0 },
        terminal: Density::Zero,
    };
    spec.build(3).unwrap()
}

const FORCING: DriftKind = DriftKind::Linear { rate: 0.0, gain: 1.0 };
const QUAD: Density = Density::Quadratic { weight: 1.0, target: 0.0 };

/// `Y_k(t) = c_k (w − u) ∫_{E ∩ [0,t]} e^{−μ_k(t−s)} ds` for `f = u`.
fn spike_response(k: usize, mu: f64, points: usize, dw: f64, t0: f64, eps: f64, t: f64) -> f64 {
    let c = common::discrete_unit_coeff(k + 1, points);
    let end = (t0 + eps).min(t);
    if t <= t0 {
        return 0.0;
    }
    c * dw * ((-mu * (t - end)).exp() - (-mu * (t - t0)).exp()) / mu
}

#[test]
fn spike_perturb_replaces_exactly_the_window() {
    let p = problem(FORCING, QUAD, 16);
    let grid = p.grid();
    let u = p.constant_control(0.25).unwrap();
    let s = SpikeConfig { t0: 0.25, epsilon: 0.125, w: -1.0 };
    let v = spike_perturb(&u, &s, &grid).unwrap();
    for (n, (a, b)) in v.values().iter().zip(u.values()).enumerate() {
        assert_eq!(*a, if (4..6).contains(&n) { -1.0 } else { *b });
    }
    let bad = [
        SpikeConfig { t0: 0.26, ..s },
        SpikeConfig { epsilon: 0.1, ..s },
        SpikeConfig { t0: 0.0, ..s },
        SpikeConfig { t0: 0.875, ..s },
        SpikeConfig { epsilon: 0.0, ..s },
    ];
    for b in bad {
        assert!(matches!(spike_perturb(&u, &b, &grid), Err(Error::Grid(_))), "{b:?}");
    }
    assert!(spike_perturb(&u, &SpikeConfig { w: 3.0, ..s }, &grid).is_err());
}

#[test]
fn first_variation_matches_closed_form_for_control_forcing() {
    let p = problem(FORCING, QUAD, 32);
    let grid = p.grid();
    let u = p.constant_control(0.0).unwrap();
    let base = p.model.simulate_state(&u, &p.x0, 0).unwrap();
    let s = SpikeConfig { t0: 0.25, epsilon: 0.125, w: 0.5 };
    let y = first_variation(&p.model, &base, &u, &s).unwrap();
    for n in [0, 8, 10, 12, 32] {
        for (k, mu) in p.domain().eigenvalues().enumerate() {
            let expected = spike_response(k, mu, 8, 0.5, 0.25, 0.125, grid.time(n));
            assert!((y.at(n)[k] - expected).abs() < 1e-14, "n={n} k={k}");
        }
    }
}

#[test]
fn first_variation_vanishes_without_a_change() {
    let p = problem(DriftKind::Bistable, QUAD, 32);
    let u = p.constant_control(0.3).unwrap();
    let base = p.model.simulate_state(&u, &p.x0, 1).unwrap();
    let y = first_variation(&p.model, &base, &u, &SpikeConfig { t0: 0.5, epsilon: 0.125, w: 0.3 }).unwrap();
    assert!(y.coeffs.iter().all(|&v| v == 0.0));
}

#[test]
fn first_variation_scales_and_superposes_for_linear_drift() {
    let p = problem(DriftKind::Linear { rate: 1.0, gain: 1.0 }, QUAD, 32);
    let grid = p.grid();
    let u = p.constant_control(0.0).unwrap();
    let base = p.model.simulate_state(&u, &p.x0, 2).unwrap();
    let a = SpikeConfig { t0: 0.25, epsilon: 0.125, w: 0.4 };
    let b = SpikeConfig { t0: 0.625, epsilon: 0.0625, w: -0.3 };
    let ya = first_variation(&p.model, &base, &u, &a).unwrap();
    let yb = first_variation(&p.model, &base, &u, &b).unwrap();
    let y2 = first_variation(&p.model, &base, &u, &SpikeConfig { w: 0.8, ..a }).unwrap();
    let both = spike_perturb(&spike_perturb(&u, &a, &grid).unwrap(), &b, &grid).unwrap();
    let yab = p
        .model
        .simulate_auxiliary(&base, &u, None, FieldForcing::DriftMismatch(&both), NoiseForcing::Zero)
        .unwrap()
        .y;
    for i in 0..ya.coeffs.len() {
        assert!((2.0 * ya.coeffs[i] - y2.coeffs[i]).abs() < 1e-14);
        assert!((ya.coeffs[i] + yb.coeffs[i] - yab.coeffs[i]).abs() < 1e-14);
    }
    // For affine dynamics the variation is exact: X^ε − X = Y^ε.
    let pert = p.model.simulate_state(&spike_perturb(&u, &a, &grid).unwrap(), &p.x0, 2).unwrap();
    for i in 0..ya.coeffs.len() {
        assert!((pert.coeffs[i] - base.coeffs[i] - ya.coeffs[i]).abs() < 1e-12);
    }
}

#[test]
fn perturbation_is_invisible_before_the_spike() {
    let p = problem(DriftKind::Bistable, QUAD, 64);
    let grid = p.grid();
    let u = p.constant_control(0.0).unwrap();
    let s = SpikeConfig { t0: 0.5, epsilon: 0.0625, w: 1.0 };
    let base = p.model.simulate_state(&u, &p.x0, 4).unwrap();
    let pert = p.model.simulate_state(&spike_perturb(&u, &s, &grid).unwrap(), &p.x0, 4).unwrap();
    let y = first_variation(&p.model, &base, &u, &s).unwrap();
    for n in 0..=32 {
        assert_eq!(pert.at(n), base.at(n));
        assert!(y.at(n).iter().all(|&v| v == 0.0));
    }
    assert!(pert.at(33) != base.at(33));
}

#[test]
fn study_without_a_change_reports_zeros() {
    let p = problem(DriftKind::Bistable, QUAD, 32);
    let u = p.constant_control(0.5).unwrap();
    let t = SpikeTemplate { t0: None, w: 0.5 };
    let r = spike_order_study(&p.model, &u, &p.x0, &t, &[0.25, 0.125, 0.0625], 4).unwrap();
    assert_eq!(r.rows.len(), 9);
    assert!(r.rows.iter().all(|row| row.estimate == 0.0));
    assert!(spike_order_study(&p.model, &u, &p.x0, &t, &[0.25, 0.125], 4).is_err());
}

#[test]
fn spike_orders_for_control_forcing_are_exact() {
    // f = u: ξ = Y is deterministic with sup ∝ ε, so both slopes are 2 and η = 0.
    let p = problem(FORCING, QUAD, 256);
    let u = p.constant_control(0.0).unwrap();
    let t = SpikeTemplate { t0: None, w: 1.0 };
    let eps: Vec<f64> = (4..=7).map(|k| 0.5f64.powi(k)).collect();
    let r = spike_order_study(&p.model, &u, &p.x0, &t, &eps, 4).unwrap();
    let xi = r.slope("xi").unwrap();
    let y = r.slope("y").unwrap();
    assert!((xi - y).abs() < 1e-9);
    assert!((1.8..2.2).contains(&xi), "slope {xi}");
    assert!(r.rows.iter().filter(|row| row.quantity == "eta").all(|row| row.estimate < 1e-24));
}

#[test]
fn cost_expansion_without_a_change_is_exact() {
    let p = problem(DriftKind::Bistable, QUAD, 32);
    let u = p.constant_control(0.2).unwrap();
    let r = cost_expansion_check(&p, &u, &SpikeTemplate { t0: None, w: 0.2 }, &[0.25, 0.125, 0.0625], 4).unwrap();
    assert!(r.rows.iter().all(|row| row.delta_j == 0.0 && row.residual == 0.0));
}

#[test]
fn state_independent_cost_expands_exactly() {
    let p = problem(DriftKind::Bistable, Density::Zero, 32);
    let u = p.constant_control(0.0).unwrap();
    let r = cost_expansion_check(&p, &u, &SpikeTemplate { t0: None, w: 1.0 }, &[0.25, 0.125, 0.0625], 8).unwrap();
    for row in &r.rows {
        // κ(1) − κ(0) = ½ over a window of length ε.
        assert!((row.delta_j - 0.5 * row.epsilon).abs() < 1e-14);
        assert!(row.residual < 1e-14);
    }
}

#[test]
fn quadratic_remainder_matches_the_variation_energy() {
    // For f = u and l = ½|x|², J(u^ε) − J(u) − first order = ½∫|Y^ε|² (trapezoid).
    let p = problem(FORCING, QUAD, 64);
    let grid = p.grid();
    let u = p.constant_control(0.0).unwrap();
    let eps = [0.125, 0.0625, 0.03125];
    let r = cost_expansion_check(&p, &u, &SpikeTemplate { t0: None, w: 1.0 }, &eps, 4).unwrap();
    for (row, &e) in r.rows.iter().zip(&eps) {
        let energy: f64 = (0..=grid.n_steps)
            .map(|n| {
                let y2: f64 = p
                    .domain()
                    .eigenvalues()
                    .enumerate()
                    .map(|(k, mu)| spike_response(k, mu, 8, 1.0, 0.5, e, grid.time(n)).powi(2))
                    .sum();
                grid.trapezoid_weight(n) * 0.5 * y2
            })
            .sum();
        assert!((row.residual - energy).abs() < 1e-12 * (1.0 + energy), "ε={e}: {} vs {energy}", row.residual);
    }
    let slope = r.slope.unwrap().slope;
    assert!((1.7..2.3).contains(&slope), "slope {slope}");
}

#[test]
fn spike_template_defaults_to_the_midpoint() {
    let p = problem(FORCING, QUAD, 16);
    let s = SpikeTemplate { t0: None, w: 1.0 }.at(&p.grid(), 0.125);
    assert_eq!((s.t0, s.epsilon, s.w), (0.5, 0.125, 1.0));
    assert_eq!(s.cells(&p.grid()).unwrap(), 8..10);
    let _ = ControlProcess::constant(p.control_space.clone(), 16, 0.0).unwrap();
}
