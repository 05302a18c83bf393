//! Pointwise (Nemytskii) reaction terms, admissible control sets, and the
//! Yosida regularisation of a dissipative drift.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftKind {
    /// `f = −σ³ + aσ + bu`.
    Cubic {
        #[serde(default = "one")]
        a: f64,
        #[serde(default = "one")]
        b: f64,
    },
    /// `f = −rate·σ + gain·u`.
    Linear {
        #[serde(default = "one")]
        rate: f64,
        #[serde(default = "one")]
        gain: f64,
    },
    /// `f = σ − σ³ + u`.
    Bistable,
}

impl DriftKind {
    fn canonical(self) -> Self {
        match self {
            DriftKind::Bistable => DriftKind::Cubic { a: 1.0, b: 1.0 },
            other => other,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NemytskiiDrift {
    kind: DriftKind,
    pub growth_degree: u32,
    pub growth_const: f64,
    pub dissipativity_bound: f64,
    pub quasi_dissipativity_shift: f64,
}

impl NemytskiiDrift {
    /// `control_bound` is `sup_{u∈U} |u|`; it enters the growth constant.
    pub fn new(kind: DriftKind, control_bound: f64) -> Self {
        let (growth_degree, growth_const, beta) = match kind.canonical() {
            // |f|+|f'| ≤ |σ|³ + |a|(1+|σ|³) + |b|U + 3(1+|σ|³) + |a|.
            DriftKind::Cubic { a, b } => (3, 4.0 + 2.0 * a.abs() + b.abs() * control_bound, a),
            DriftKind::Linear { rate, gain } => {
                (1, 2.0 * rate.abs() + gain.abs() * control_bound, -rate)
            }
            DriftKind::Bistable => unreachable!(),
        };
        Self {
            kind,
            growth_degree,
            growth_const,
            dissipativity_bound: beta,
            quasi_dissipativity_shift: beta.max(0.0) + 1.0,
        }
    }

    pub fn kind(&self) -> DriftKind {
        self.kind
    }

    #[inline]
    pub fn value(&self, s: f64, u: f64) -> f64 {
        match self.kind.canonical() {
            DriftKind::Cubic { a, b } => -s * s * s + a * s + b * u,
            DriftKind::Linear { rate, gain } => -rate * s + gain * u,
            DriftKind::Bistable => unreachable!(),
        }
    }

    #[inline]
    pub fn derivative(&self, s: f64, _u: f64) -> f64 {
        match self.kind.canonical() {
            DriftKind::Cubic { a, .. } => -3.0 * s * s + a,
            DriftKind::Linear { rate, .. } => -rate,
            DriftKind::Bistable => unreachable!(),
        }
    }

    #[inline]
    pub fn control_derivative(&self, _s: f64, _u: f64) -> f64 {
        match self.kind.canonical() {
            DriftKind::Cubic { b, .. } => b,
            DriftKind::Linear { gain, .. } => gain,
            DriftKind::Bistable => unreachable!(),
        }
    }

    /// The map is affine in `σ` (so its Jacobian is state-independent).
    pub fn is_linear(&self) -> bool {
        matches!(self.kind.canonical(), DriftKind::Linear { .. })
    }

    pub fn growth_envelope(&self, s: f64) -> f64 {
        self.growth_const * (1.0 + s.abs().powi(self.growth_degree as i32))
    }

    pub fn apply_drift(&self, state: &[f64], u: f64, out: &mut [f64]) -> Result<()> {
        for (j, (o, &s)) in out.iter_mut().zip(state).enumerate() {
            if !s.is_finite() {
                return Err(non_finite(j, s));
            }
            *o = self.value(s, u);
        }
        Ok(())
    }

    pub fn apply_drift_jacobian(
        &self,
        state: &[f64],
        u: f64,
        direction: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        for (j, ((o, &s), &h)) in out.iter_mut().zip(state).zip(direction).enumerate() {
            if !s.is_finite() || !h.is_finite() {
                return Err(non_finite(j, if s.is_finite() { h } else { s }));
            }
            *o = self.derivative(s, u) * h;
        }
        Ok(())
    }

    /// Root of `r − α f(r, u) = σ`.
    pub fn yosida_resolvent(&self, alpha: f64, s: f64, u: f64) -> Result<f64> {
        if !(alpha > 0.0) {
            return Err(Error::Config(format!("Yosida parameter must be positive, got {alpha}")));
        }
        if alpha * self.dissipativity_bound >= 1.0 {
            return Err(Error::Config(format!(
                "Yosida parameter {alpha} too large: α·β = {} must stay below 1",
                alpha * self.dissipativity_bound
            )));
        }
        let g = |r: f64| r - alpha * self.value(r, u) - s;
        let width = alpha * self.growth_envelope(s) + 1.0;
        let (mut lo, mut hi) = (s - width, s + width);
        let mut expansions = 0;
        while g(lo) > 0.0 || g(hi) < 0.0 {
            expansions += 1;
            if expansions > 200 || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::Numeric {
                    index: 0,
                    message: format!("resolvent root for σ = {s} could not be bracketed"),
                });
            }
            let w = hi - lo;
            lo -= w;
            hi += w;
        }
        // The bracket is centred on σ, which is the root wherever f vanishes.
        let mut r = s;
        for _ in 0..200 {
            let v = g(r);
            if v.abs() <= 1e-14 * (1.0 + s.abs()) || hi - lo < 1e-12 {
                break;
            }
            if v < 0.0 {
                lo = r;
            } else {
                hi = r;
            }
            // Newton step, falling back to bisection when it leaves the bracket.
            let slope = 1.0 - alpha * self.derivative(r, u);
            let newton = r - v / slope;
            r = if newton >= lo && newton <= hi { newton } else { 0.5 * (lo + hi) };
        }
        Ok(r)
    }

    /// `f_α = f ∘ J_α`.
    pub fn yosida_drift(&self, alpha: f64, s: f64, u: f64) -> Result<f64> {
        Ok(self.value(self.yosida_resolvent(alpha, s, u)?, u))
    }

    /// Spot-check growth, dissipativity and the derivative on a grid.
    pub fn check_invariants(&self, controls: &[f64]) -> Result<()> {
        let h = 1e-4;
        for i in 0..=80 {
            let s = -4.0 + 0.1 * i as f64;
            for &u in controls {
                let (f, df) = (self.value(s, u), self.derivative(s, u));
                if f.abs() + df.abs() > self.growth_envelope(s) * (1.0 + 1e-12) {
                    return Err(Error::Config(format!("drift violates its growth bound at σ = {s}, u = {u}")));
                }
                if df > self.dissipativity_bound + 1e-12 {
                    return Err(Error::Config(format!("drift derivative exceeds β at σ = {s}")));
                }
                let fd = (self.value(s + h, u) - self.value(s - h, u)) / (2.0 * h);
                if (fd - df).abs() > 1e-6 * (1.0 + df.abs()) {
                    return Err(Error::Config(format!("drift derivative inconsistent at σ = {s}")));
                }
            }
        }
        Ok(())
    }
}

fn non_finite(index: usize, value: f64) -> Error {
    Error::Numeric { index, message: format!("non-finite field value {value}") }
}

fn default_samples() -> usize {
    21
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControlSpace {
    Interval {
        lo: f64,
        hi: f64,
        #[serde(default = "default_samples")]
        samples: usize,
    },
    FiniteSet { elements: Vec<f64> },
}

impl Default for ControlSpace {
    fn default() -> Self {
        ControlSpace::Interval { lo: -1.0, hi: 1.0, samples: 21 }
    }
}

impl ControlSpace {
    pub fn validate(&self) -> Result<()> {
        match self {
            ControlSpace::Interval { lo, hi, samples } => {
                if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                    return Err(Error::Config(format!("control interval [{lo}, {hi}] is empty or unbounded")));
                }
                if *samples == 0 {
                    return Err(Error::Config("control interval needs at least one sample".into()));
                }
            }
            ControlSpace::FiniteSet { elements } => {
                if elements.is_empty() || elements.iter().any(|e| !e.is_finite()) {
                    return Err(Error::Config("finite control set must hold finite values".into()));
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, u: f64) -> bool {
        match self {
            ControlSpace::Interval { lo, hi, .. } => u >= *lo && u <= *hi,
            ControlSpace::FiniteSet { elements } => elements.contains(&u),
        }
    }

    /// Deterministic enumeration used by minimisation sweeps.
    pub fn samples(&self) -> Vec<f64> {
        match self {
            ControlSpace::Interval { lo, hi, samples } => {
                if *samples == 1 || lo == hi {
                    return vec![*lo];
                }
                let n = *samples - 1;
                (0..=n).map(|i| if i == n { *hi } else { lo + (hi - lo) * i as f64 / n as f64 }).collect()
            }
            ControlSpace::FiniteSet { elements } => elements.clone(),
        }
    }

    /// Nearest admissible value.
    pub fn project(&self, u: f64) -> f64 {
        match self {
            ControlSpace::Interval { lo, hi, .. } => u.clamp(*lo, *hi),
            ControlSpace::FiniteSet { elements } => elements
                .iter()
                .copied()
                .min_by(|a, b| (a - u).abs().total_cmp(&(b - u).abs()))
                .expect("validated non-empty"),
        }
    }

    pub fn bound(&self) -> f64 {
        match self {
            ControlSpace::Interval { lo, hi, .. } => lo.abs().max(hi.abs()),
            ControlSpace::FiniteSet { elements } => elements.iter().fold(0.0, |m, e| m.max(e.abs())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cubic() -> NemytskiiDrift {
        NemytskiiDrift::new(DriftKind::Cubic { a: 1.0, b: 1.0 }, 1.0)
    }

    #[test]
    fn drift_examples() {
        let f = cubic();
        let mut out = [9.0; 3];
        f.apply_drift(&[0.0; 3], 0.0, &mut out).unwrap();
        assert_eq!(out, [0.0; 3]);
        f.apply_drift(&[1.0; 3], 0.0, &mut out).unwrap();
        assert_eq!(out, [0.0; 3]);
        f.apply_drift(&[2.0; 3], 1.0, &mut out).unwrap();
        assert_eq!(out, [-5.0; 3]);
        let err = f.apply_drift(&[0.0, f64::NAN, 0.0], 0.0, &mut out).unwrap_err();
        assert!(matches!(err, Error::Numeric { index: 1, .. }));
    }

    #[test]
    fn jacobian_examples() {
        let f = cubic();
        let dir = [0.5, -2.0, 3.0];
        let mut out = [0.0; 3];
        f.apply_drift_jacobian(&[0.0; 3], 0.0, &dir, &mut out).unwrap();
        assert_eq!(out, dir);
        f.apply_drift_jacobian(&[1.0; 3], 0.0, &[1.0; 3], &mut out).unwrap();
        assert_eq!(out, [-2.0; 3]);
        f.apply_drift_jacobian(&[1.3; 3], 0.0, &[0.0; 3], &mut out).unwrap();
        assert_eq!(out, [0.0; 3]);
    }

    #[test]
    fn resolvent_examples() {
        let f = NemytskiiDrift::new(DriftKind::Cubic { a: 1.0, b: 0.0 }, 1.0);
        // Independent bisection on 0.1 r³ + 0.9 r − 1 = 0 over [0, 2].
        let (mut lo, mut hi) = (0.0f64, 2.0f64);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if 0.1 * mid.powi(3) + 0.9 * mid - 1.0 > 0.0 { hi = mid } else { lo = mid }
        }
        let r = f.yosida_resolvent(0.1, 1.0, 0.0).unwrap();
        assert!((r - lo).abs() < 1e-12 && (r - 1.0).abs() < 1e-12);
        assert!(f.yosida_drift(0.1, 1.0, 0.0).unwrap().abs() < 1e-11);

        let zero = NemytskiiDrift::new(DriftKind::Linear { rate: 0.0, gain: 0.0 }, 1.0);
        assert_eq!(zero.yosida_resolvent(0.3, -1.7, 0.4).unwrap(), -1.7);
        assert_eq!(zero.yosida_drift(0.3, -1.7, 0.4).unwrap(), 0.0);

        let lin = NemytskiiDrift::new(DriftKind::Linear { rate: 1.0, gain: 0.0 }, 1.0);
        assert_relative_eq!(lin.yosida_resolvent(0.5, 3.0, 0.0).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn resolvent_rejects_large_parameter() {
        let f = cubic();
        assert!(matches!(f.yosida_resolvent(1.0, 0.3, 0.0), Err(Error::Config(_))));
        assert!(matches!(f.yosida_resolvent(0.0, 0.3, 0.0), Err(Error::Config(_))));
    }

    #[test]
    fn yosida_converges_monotonically() {
        let f = cubic();
        let errors: Vec<f64> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&a| {
                (0..=400)
                    .map(|i| -2.0 + 0.01 * i as f64)
                    .map(|s| (f.yosida_drift(a, s, 0.0).unwrap() - f.value(s, 0.0)).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
    }

    #[test]
    fn catalog_constants() {
        for kind in [DriftKind::Cubic { a: 1.0, b: 1.0 }, DriftKind::Linear { rate: 1.0, gain: 1.0 }, DriftKind::Bistable] {
            let f = NemytskiiDrift::new(kind, 1.0);
            f.check_invariants(&[-1.0, 0.0, 1.0]).unwrap();
            assert!(f.quasi_dissipativity_shift >= f.dissipativity_bound.max(0.0));
        }
        assert_eq!(NemytskiiDrift::new(DriftKind::Bistable, 1.0).dissipativity_bound, 1.0);
    }

    #[test]
    fn control_space_sampling() {
        let u = ControlSpace::default();
        let s = u.samples();
        assert_eq!(s.len(), 21);
        assert_eq!((s[0], s[10], s[20]), (-1.0, 0.0, 1.0));
        assert!(s.iter().all(|v| u.contains(*v)));
        assert_eq!(u.project(3.0), 1.0);
        let fin = ControlSpace::FiniteSet { elements: vec![-0.5, 2.0] };
        assert_eq!(fin.project(1.0), 2.0);
        assert!(!fin.contains(0.0));
    }

    #[test]
    fn config_parsing() {
        let k: DriftKind = serde_json::from_str(r#"{"kind":"cubic","a":1.0,"b":1.0}"#).unwrap();
        assert_eq!(k, DriftKind::Cubic { a: 1.0, b: 1.0 });
        let l: DriftKind = serde_json::from_str(r#"{"kind":"linear"}"#).unwrap();
        assert_eq!(l, DriftKind::Linear { rate: 1.0, gain: 1.0 });
        assert!(serde_json::from_str::<DriftKind>(r#"{"kind":"cubic","c":1.0}"#).is_err());
    }
}
