use proptest::prelude::*;
use spde_smp::nonlinearity::{ControlSpace, DriftKind, NemytskiiDrift};

fn drifts() -> impl Strategy<Value = NemytskiiDrift> {
    prop_oneof![
        (0.0f64..2.0, -2.0f64..2.0).prop_map(|(a, b)| NemytskiiDrift::new(DriftKind::Cubic { a, b }, 1.0)),
        (-1.0f64..3.0, -2.0f64..2.0).prop_map(|(rate, gain)| NemytskiiDrift::new(DriftKind::Linear { rate, gain }, 1.0)),
        Just(NemytskiiDrift::new(DriftKind::Bistable, 1.0)),
    ]
}

#[test]
fn bistable_is_the_unit_cubic() {
    let a = NemytskiiDrift::new(DriftKind::Bistable, 1.0);
    let b = NemytskiiDrift::new(DriftKind::Cubic { a: 1.0, b: 1.0 }, 1.0);
    for s in [-2.0, -0.3, 0.0, 1.7] {
        assert_eq!(a.value(s, 0.4), b.value(s, 0.4));
        assert_eq!(a.value(s, 0.4), s - s * s * s + 0.4);
    }
    assert_eq!(a.dissipativity_bound, 1.0);
}

#[test]
fn catalog_drifts_pass_their_own_invariant_check() {
    let controls = ControlSpace::default().samples();
    for kind in [DriftKind::Bistable, DriftKind::Cubic { a: 0.5, b: 2.0 }, DriftKind::Linear { rate: 1.0, gain: 1.0 }] {
        NemytskiiDrift::new(kind, 1.0).check_invariants(&controls).unwrap();
    }
}

#[test]
fn jacobian_is_pointwise_derivative_times_direction() {
    let f = NemytskiiDrift::new(DriftKind::Bistable, 1.0);
    let state = [0.0, 1.0, -2.0];
    let dir = [1.0, 2.0, 0.5];
    let mut out = [0.0; 3];
    f.apply_drift_jacobian(&state, 0.0, &dir, &mut out).unwrap();
    assert_eq!(out, [1.0, -4.0, -5.5]);
    assert!(f.apply_drift(&[f64::NAN], 0.0, &mut [0.0]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn growth_bound_holds(f in drifts(), s in -20.0f64..20.0, u in -1.0f64..1.0) {
        prop_assert!(f.value(s, u).abs() + f.derivative(s, u).abs() <= f.growth_envelope(s) * (1.0 + 1e-12));
    }

    #[test]
    fn derivative_matches_central_difference(f in drifts(), s in -5.0f64..5.0, u in -1.0f64..1.0) {
        let h = 1e-5;
        let fd = (f.value(s + h, u) - f.value(s - h, u)) / (2.0 * h);
        prop_assert!((fd - f.derivative(s, u)).abs() < 1e-6 * (1.0 + f.derivative(s, u).abs()));
        let fu = (f.value(s, u + h) - f.value(s, u - h)) / (2.0 * h);
        prop_assert!((fu - f.control_derivative(s, u)).abs() < 1e-8);
    }

    #[test]
    fn one_sided_dissipativity(f in drifts(), s in -10.0f64..10.0, t in -10.0f64..10.0, u in -1.0f64..1.0) {
        // (f(s) − f(t))(s − t) ≤ β (s − t)².
        let lhs = (f.value(s, u) - f.value(t, u)) * (s - t);
        prop_assert!(lhs <= f.dissipativity_bound * (s - t).powi(2) + 1e-9 * (1.0 + lhs.abs()));
    }

    #[test]
    fn resolvent_solves_and_is_lipschitz(f in drifts(), s in -5.0f64..5.0, t in -5.0f64..5.0, u in -1.0f64..1.0, a in 0.01f64..0.3) {
        let js = f.yosida_resolvent(a, s, u).unwrap();
        let jt = f.yosida_resolvent(a, t, u).unwrap();
        prop_assert!((js - a * f.value(js, u) - s).abs() < 1e-9 * (1.0 + s.abs()));
        // Lipschitz constant 1/(1 − αβ) (non-expansive when β ≤ 0).
        let lip = 1.0 / (1.0 - a * f.dissipativity_bound.max(0.0));
        prop_assert!((js - jt).abs() <= lip * (s - t).abs() + 1e-9);
    }

    #[test]
    fn yosida_drift_approaches_drift(s in -2.0f64..2.0, u in -1.0f64..1.0) {
        let f = NemytskiiDrift::new(DriftKind::Bistable, 1.0);
        let errs: Vec<f64> = [1e-1, 1e-2, 1e-3]
            .iter()
            .map(|&a| (f.yosida_drift(a, s, u).unwrap() - f.value(s, u)).abs())
            .collect();
        prop_assert!(errs[2] <= errs[1] + 1e-12 && errs[1] <= errs[0] + 1e-12);
        prop_assert!(errs[2] < 1e-1);
    }

    #[test]
    fn projection_lands_in_the_set(u in -5.0f64..5.0) {
        let interval = ControlSpace::Interval { lo: -1.0, hi: 0.5, samples: 7 };
        prop_assert!(interval.contains(interval.project(u)));
        let set = ControlSpace::FiniteSet { elements: vec![-1.0, 0.0, 2.0] };
        let p = set.project(u);
        prop_assert!(set.contains(p));
        prop_assert!([-1.0, 0.0, 2.0].iter().all(|e| (u - p).abs() <= (u - e).abs() + 1e-15));
    }
}
