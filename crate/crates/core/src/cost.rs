//! Nemytskii-type running and terminal costs against Lebesgue measure or a
//! finite combination of point masses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{SpectralDomain, Workspace};

fn one() -> f64 {
    1.0
}

/// Scalar density `l(σ)` integrated against the cost measure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Density {
    #[default]
    Zero,
    /// `½ w (σ − target)²`.
    Quadratic {
        #[serde(default = "one")]
        weight: f64,
        #[serde(default)]
        target: f64,
    },
    /// `w σ`.
    Linear { weight: f64 },
    /// `w σ⁴ / 4`.
    Quartic { weight: f64 },
}

impl Density {
    #[inline]
    pub fn value(&self, s: f64) -> f64 {
        match *self {
            Density::Zero => 0.0,
            Density::Quadratic { weight, target } => 0.5 * weight * (s - target).powi(2),
            Density::Linear { weight } => weight * s,
            Density::Quartic { weight } => 0.25 * weight * s.powi(4),
        }
    }

    #[inline]
    pub fn derivative(&self, s: f64) -> f64 {
        match *self {
            Density::Zero => 0.0,
            Density::Quadratic { weight, target } => weight * (s - target),
            Density::Linear { weight } => weight,
            Density::Quartic { weight } => weight * s.powi(3),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Density::Zero)
    }

    /// `(k, K)` with `|l′(σ)| ≤ K(1 + |σ|^k)`.
    pub fn growth(&self) -> (u32, f64) {
        match *self {
            Density::Zero => (0, 0.0),
            Density::Quadratic { weight, target } => (1, weight.abs() * (1.0 + target.abs())),
            Density::Linear { weight } => (0, weight.abs()),
            Density::Quartic { weight } => (3, weight.abs()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControlPenalty {
    #[default]
    Zero,
    /// `½ w u²`.
    Quadratic {
        #[serde(default = "one")]
        weight: f64,
    },
}

impl ControlPenalty {
    #[inline]
    pub fn value(&self, u: f64) -> f64 {
        match *self {
            ControlPenalty::Zero => 0.0,
            ControlPenalty::Quadratic { weight } => 0.5 * weight * u * u,
        }
    }

    #[inline]
    pub fn derivative(&self, u: f64) -> f64 {
        match *self {
            ControlPenalty::Zero => 0.0,
            ControlPenalty::Quadratic { weight } => weight * u,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Measure {
    #[default]
    Lebesgue,
    /// `Σ a_i δ_{ξ_i}`.
    Dirac { points: Vec<Vec<f64>>, weights: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CostSpec {
    #[serde(default)]
    pub measure: Measure,
    #[serde(default)]
    pub running: Density,
    #[serde(default)]
    pub control_penalty: ControlPenalty,
    #[serde(default)]
    pub terminal: Density,
}

impl CostSpec {
    pub fn is_zero(&self) -> bool {
        self.running.is_zero()
            && self.terminal.is_zero()
            && matches!(self.control_penalty, ControlPenalty::Zero)
    }
}

/// A cost specification bound to a domain, ready for repeated evaluation.
#[derive(Clone, Debug)]
pub struct CompiledCost {
    pub spec: CostSpec,
    pairing: Pairing,
}

#[derive(Clone, Debug)]
enum Pairing {
    Lebesgue { weight: f64 },
    /// Row-major `points × modes` eigenfunction values and point weights.
    Points { eval: Vec<f64>, weights: Vec<f64> },
}

impl CompiledCost {
    pub fn new(spec: CostSpec, domain: &SpectralDomain) -> Result<Self> {
        let pairing = match &spec.measure {
            Measure::Lebesgue => Pairing::Lebesgue { weight: domain.quadrature_weight() },
            Measure::Dirac { points, weights } => {
                if points.len() != weights.len() || points.is_empty() {
                    return Err(Error::Config(format!(
                        "dirac measure needs matching non-empty points and weights ({} vs {})",
                        points.len(),
                        weights.len()
                    )));
                }
                let mut eval = Vec::with_capacity(points.len() * domain.n_modes());
                for p in points {
                    if p.len() != domain.dimension()
                        || p.iter().any(|x| !(*x > 0.0 && *x < std::f64::consts::PI))
                    {
                        return Err(Error::Config(format!(
                            "dirac point {p:?} must lie strictly inside (0, π)^{}",
                            domain.dimension()
                        )));
                    }
                    eval.extend(domain.modes().iter().map(|m| m.eigenfunction(p)));
                }
                Pairing::Points { eval, weights: weights.clone() }
            }
        };
        for (name, d) in [("running", spec.running), ("terminal", spec.terminal)] {
            let (k, big_k) = d.growth();
            for i in 0..=40 {
                let s = -4.0 + 0.2 * i as f64;
                if d.derivative(s).abs() > big_k * (1.0 + s.abs().powi(k as i32)) * (1.0 + 1e-12) {
                    return Err(Error::Config(format!("{name} density violates its growth bound")));
                }
            }
        }
        Ok(Self { spec, pairing })
    }

    pub fn uses_field(&self) -> bool {
        matches!(self.pairing, Pairing::Lebesgue { .. })
    }

    /// `∫ l(x(ξ)) μ(dξ)`; `field` is only read for Lebesgue measure.
    pub fn integrate(&self, density: &Density, coeffs: &[f64], field: &[f64]) -> f64 {
        if density.is_zero() {
            return 0.0;
        }
        match &self.pairing {
            Pairing::Lebesgue { weight } => weight * field.iter().map(|&s| density.value(s)).sum::<f64>(),
            Pairing::Points { eval, weights } => {
                let n = coeffs.len();
                weights
                    .iter()
                    .enumerate()
                    .map(|(i, a)| {
                        let x: f64 = eval[i * n..(i + 1) * n].iter().zip(coeffs).map(|(e, c)| e * c).sum();
                        a * density.value(x)
                    })
                    .sum()
            }
        }
    }

    /// Mode coefficients of the derivative functional `h ↦ ∫ l′(x) h dμ`.
    pub fn gradient(
        &self,
        domain: &SpectralDomain,
        density: &Density,
        coeffs: &[f64],
        field: &[f64],
        scratch: &mut [f64],
        out: &mut [f64],
        ws: &mut Workspace,
    ) {
        if density.is_zero() {
            out.iter_mut().for_each(|v| *v = 0.0);
            return;
        }
        match &self.pairing {
            Pairing::Lebesgue { .. } => {
                for (s, &x) in scratch.iter_mut().zip(field) {
                    *s = density.derivative(x);
                }
                domain.from_grid_into(scratch, out, ws);
            }
            Pairing::Points { eval, weights } => {
                let n = coeffs.len();
                out.iter_mut().for_each(|v| *v = 0.0);
                for (i, a) in weights.iter().enumerate() {
                    let row = &eval[i * n..(i + 1) * n];
                    let x: f64 = row.iter().zip(coeffs).map(|(e, c)| e * c).sum();
                    let w = a * density.derivative(x);
                    out.iter_mut().zip(row).for_each(|(o, e)| *o += w * e);
                }
            }
        }
    }
}
