//! Named problem instances and the closed-form linear–quadratic oracle.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::adjoint::RegressionSpec;
use crate::control::ControlProblem;
use crate::cost::{ControlPenalty, CostSpec, Density, Measure};
use crate::error::{Error, Result};
use crate::forward::{ControlProcess, ForwardModel};
use crate::noise::NoiseModel;
use crate::nonlinearity::{ControlSpace, DriftKind, NemytskiiDrift};
use crate::spectral::{DomainKind, SpectralDomain};
use crate::time::TimeGrid;

pub const CATALOG: [&str; 3] = ["lq-1d", "cubic-1d", "dirac-2d"];

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub dimension: usize,
    #[serde(default = "default_kind")]
    pub kind: DomainKind,
    pub modes_per_axis: usize,
    #[serde(default)]
    pub padded: bool,
    #[serde(default)]
    pub sobolev_index: Option<f64>,
}

fn default_kind() -> DomainKind {
    DomainKind::Hypercube
}

impl DomainSpec {
    pub fn build(&self) -> Result<SpectralDomain> {
        let d = SpectralDomain::new(self.dimension, self.kind, self.modes_per_axis)?.with_padding(self.padded)?;
        match self.sobolev_index {
            Some(s) => d.with_sobolev_index(s),
            None => Ok(d),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub gamma: f64,
    pub alpha: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
}

/// Everything needed to assemble a [`ControlProblem`] except the seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub domain: DomainSpec,
    pub drift: DriftKind,
    pub noise: NoiseSpec,
    #[serde(default)]
    pub cost: CostSpec,
    #[serde(default = "one")]
    pub horizon: f64,
    pub n_steps: usize,
    /// Leading mode coefficients of `x0`; the rest are zero.
    #[serde(default)]
    pub initial: Vec<f64>,
    #[serde(default)]
    pub control_space: ControlSpace,
    #[serde(default)]
    pub regression: RegressionSpec,
}

impl ProblemSpec {
    pub fn catalog(name: &str) -> Result<Self> {
        let quadratic_cost = |measure| CostSpec {
            measure,
            running: Density::Quadratic { weight: 1.0, target: 0.0 },
            control_penalty: ControlPenalty::Quadratic { weight: 1.0 },
            terminal: Density::Zero,
        };
        let noise = NoiseSpec { gamma: 0.5, alpha: 0.1, amplitude: 1.0 };
        let spec = match name {
            "lq-1d" => Self {
                domain: DomainSpec { dimension: 1, kind: DomainKind::Hypercube, modes_per_axis: 16, padded: false, sobolev_index: None },
                drift: DriftKind::Linear { rate: 1.0, gain: 1.0 },
                noise,
                cost: quadratic_cost(Measure::Lebesgue),
                horizon: 1.0,
                n_steps: 128,
                initial: vec![1.5],
                control_space: ControlSpace::default(),
                regression: RegressionSpec { basis_modes: 16, ..RegressionSpec::default() },
            },
            "cubic-1d" => Self {
                domain: DomainSpec { dimension: 1, kind: DomainKind::Hypercube, modes_per_axis: 64, padded: false, sobolev_index: None },
                drift: DriftKind::Cubic { a: 1.0, b: 1.0 },
                noise,
                cost: quadratic_cost(Measure::Lebesgue),
                horizon: 1.0,
                n_steps: 256,
                initial: vec![1.5],
                control_space: ControlSpace::default(),
                regression: RegressionSpec { basis_modes: 8, ..RegressionSpec::default() },
            },
            "dirac-2d" => Self {
                domain: DomainSpec { dimension: 2, kind: DomainKind::Hypercube, modes_per_axis: 12, padded: false, sobolev_index: None },
                drift: DriftKind::Cubic { a: 1.0, b: 1.0 },
                noise,
                cost: quadratic_cost(Measure::Dirac {
                    points: vec![vec![1.0, 1.0], vec![1.6, 2.0], vec![2.4, 1.2]],
                    weights: vec![1.0, 0.5, 0.5],
                }),
                horizon: 1.0,
                n_steps: 128,
                initial: vec![1.0],
                control_space: ControlSpace::default(),
                regression: RegressionSpec { basis_modes: 6, ..RegressionSpec::default() },
            },
            other => {
                return Err(Error::Config(format!(
                    "unknown catalog problem `{other}`; available: {}",
                    CATALOG.join(", ")
                )))
            }
        };
        Ok(spec)
    }

    pub fn build(&self, seed: u64) -> Result<ControlProblem> {
        let domain = self.domain.build()?;
        if self.initial.len() > domain.n_modes() {
            return Err(Error::Config(format!(
                "initial condition lists {} coefficients but the domain has {} modes",
                self.initial.len(),
                domain.n_modes()
            )));
        }
        let mut x0 = self.initial.clone();
        x0.resize(domain.n_modes(), 0.0);
        let noise = NoiseModel::new(&domain, self.noise.gamma, self.noise.alpha, seed)?.with_amplitude(self.noise.amplitude)?;
        let drift = NemytskiiDrift::new(self.drift, self.control_space.bound());
        let grid = TimeGrid::new(self.n_steps, self.horizon)?;
        let model = ForwardModel::new(domain, drift, noise, grid)?;
        ControlProblem::new(model, self.cost.clone(), x0, self.control_space.clone())
    }
}

/// Closed-form data of a linear drift with quadratic Lebesgue cost.
struct LqData {
    nu: Vec<f64>,
    forcing: Vec<f64>,
    b_sq: Vec<f64>,
    x0: Vec<f64>,
    running: f64,
    terminal: f64,
    penalty: f64,
    dt: f64,
    n_steps: usize,
    horizon: f64,
}

impl LqData {
    fn new(problem: &ControlProblem) -> Result<Self> {
        let model = &problem.model;
        let DriftKind::Linear { rate, gain } = model.drift.kind() else {
            return Err(Error::Config("the LQ oracle needs a linear drift".into()));
        };
        let spec = &problem.cost.spec;
        let quad = |d: Density, what: &str| match d {
            Density::Zero => Ok(0.0),
            Density::Quadratic { weight, target } if target == 0.0 => Ok(weight),
            _ => Err(Error::Config(format!("the LQ oracle needs a centred quadratic {what} density"))),
        };
        if !matches!(spec.measure, Measure::Lebesgue) {
            return Err(Error::Config("the LQ oracle needs Lebesgue cost measure".into()));
        }
        let penalty = match spec.control_penalty {
            ControlPenalty::Quadratic { weight } if weight > 0.0 => weight,
            _ => return Err(Error::Config("the LQ oracle needs a positive quadratic control penalty".into())),
        };
        let grid = model.grid;
        Ok(Self {
            nu: model.domain.eigenvalues().map(|mu| mu + rate).collect(),
            forcing: model.unit_coeffs().iter().map(|c| gain * c).collect(),
            b_sq: model.noise.b_coeffs().iter().map(|b| b * b).collect(),
            x0: problem.x0.clone(),
            running: quad(spec.running, "running")?,
            terminal: quad(spec.terminal, "terminal")?,
            penalty,
            dt: grid.dt(),
            n_steps: grid.n_steps,
            horizon: grid.horizon,
        })
    }

    /// Cost of the mean trajectory plus control penalty, integrated exactly
    /// over each cell where the mean relaxes towards `forcing·u/ν`.
    fn mean_cost(&self, u: &[f64]) -> f64 {
        let dt = self.dt;
        let mut j = 0.5 * self.penalty * dt * u.iter().map(|v| v * v).sum::<f64>();
        for k in 0..self.nu.len() {
            let nu = self.nu[k];
            let e1 = (-nu * dt).exp();
            let i1 = -(-nu * dt).exp_m1() / nu;
            let i2 = -(-2.0 * nu * dt).exp_m1() / (2.0 * nu);
            let mut m = self.x0[k];
            let mut run = 0.0;
            for &un in u {
                let eq = self.forcing[k] * un / nu;
                let dev = m - eq;
                run += eq * eq * dt + 2.0 * eq * dev * i1 + dev * dev * i2;
                m = eq + dev * e1;
            }
            j += 0.5 * self.running * run + 0.5 * self.terminal * m * m;
        }
        j
    }

    /// Control-independent contribution of the OU variance.
    fn variance_cost(&self) -> f64 {
        let t = self.horizon;
        self.nu
            .iter()
            .zip(&self.b_sq)
            .map(|(&nu, &b2)| {
                let a = b2 / (2.0 * nu);
                let tail = -(-2.0 * nu * t).exp_m1() / (2.0 * nu);
                0.5 * self.running * a * (t - tail) + 0.5 * self.terminal * a * (-(-2.0 * nu * t).exp_m1())
            })
            .sum()
    }
}

/// Exact `J(u)` for a piecewise-constant control on an LQ problem.
pub fn lq_cost(problem: &ControlProblem, control: &ControlProcess) -> Result<f64> {
    let data = LqData::new(problem)?;
    if control.len() != data.n_steps {
        return Err(Error::Shape(format!("control has {} values for {} steps", control.len(), data.n_steps)));
    }
    Ok(data.mean_cost(control.values()) + data.variance_cost())
}

#[derive(Clone, Debug)]
pub struct LqOracle {
    pub control: ControlProcess,
    pub cost: f64,
}

/// Optimal piecewise-constant control of an LQ problem. The noise is additive,
/// so only the mean trajectory depends on `u`; the resulting quadratic
/// programme is assembled exactly and minimised over the control box.
pub fn lq_oracle(problem: &ControlProblem) -> Result<LqOracle> {
    let data = LqData::new(problem)?;
    let (lo, hi) = match problem.control_space {
        ControlSpace::Interval { lo, hi, .. } => (lo, hi),
        ControlSpace::FiniteSet { .. } => {
            return Err(Error::Config("the LQ oracle needs an interval control space".into()))
        }
    };
    let n = data.n_steps;
    let zero = vec![0.0; n];
    let at = |idx: &[usize]| {
        let mut u = zero.clone();
        idx.iter().for_each(|&i| u[i] += 1.0);
        data.mean_cost(&u)
    };
    // Polarisation of the exact quadratic J(u) = ½uᵀHu + gᵀu + c.
    let c = at(&[]);
    let single: Vec<f64> = (0..n).map(|i| at(&[i])).collect();
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = at(&[i, j]) - single[i] - single[j] + c;
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    let g = DVector::from_iterator(n, (0..n).map(|i| single[i] - c - 0.5 * h[(i, i)]));
    let chol = h.clone().cholesky().ok_or_else(|| Error::Numeric { index: 0, message: "LQ Hessian is not positive definite".into() })?;
    let mut u = chol.solve(&(-&g));
    if u.iter().any(|&v| v < lo || v > hi) {
        // Projected gradient with step 1/λ_max until the iterate settles.
        let lmax = h.symmetric_eigenvalues().max();
        for _ in 0..100_000 {
            let next = (&u - (&h * &u + &g) / lmax).map(|v| v.clamp(lo, hi));
            let change = (&next - &u).amax();
            u = next;
            if change < 1e-14 {
                break;
            }
        }
    }
    let values: Vec<f64> = u.iter().copied().collect();
    let cost = data.mean_cost(&values) + data.variance_cost();
    Ok(LqOracle { control: ControlProcess::from_values(problem.control_space.clone(), values)?, cost })
}
