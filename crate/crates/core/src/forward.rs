//! Exponential-Euler solver for the controlled state equation and for the
//! linear auxiliary equation driven by `(γ, η)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::noise::{ou_cross_cov, NoiseIncrements, NoiseModel, OuTransition};
use crate::nonlinearity::{ControlSpace, NemytskiiDrift};
use crate::spectral::{SpectralDomain, Workspace};
use crate::time::TimeGrid;

/// Piecewise-constant control: `values[n]` acts on `[t_n, t_{n+1})`.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlProcess {
    values: Vec<f64>,
    space: ControlSpace,
}

impl ControlProcess {
    pub fn constant(space: ControlSpace, n_steps: usize, u: f64) -> Result<Self> {
        Self::from_values(space, vec![u; n_steps])
    }

    pub fn from_values(space: ControlSpace, values: Vec<f64>) -> Result<Self> {
        space.validate()?;
        if let Some((n, u)) = values.iter().enumerate().find(|(_, u)| !space.contains(**u)) {
            return Err(Error::Domain(format!("control value {u} at step {n} lies outside U")));
        }
        Ok(Self { values, space })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn space(&self) -> &ControlSpace {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Mode coefficients of one sample path; row `n` is time `t_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateTrajectory {
    pub grid: TimeGrid,
    pub n_modes: usize,
    pub coeffs: Vec<f64>,
    pub seed: u64,
    pub path: u64,
}

impl StateTrajectory {
    pub fn at(&self, n: usize) -> &[f64] {
        &self.coeffs[n * self.n_modes..(n + 1) * self.n_modes]
    }

    pub fn terminal(&self) -> &[f64] {
        self.at(self.grid.n_steps)
    }

    pub fn field(&self, domain: &SpectralDomain, n: usize) -> Vec<f64> {
        domain.to_grid(self.at(n))
    }

    pub fn sup_norm(&self, domain: &SpectralDomain, n: usize) -> f64 {
        self.field(domain, n).iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Right-hand side `γ` of the auxiliary equation, in mode coefficients.
#[derive(Clone, Copy, Debug)]
pub enum FieldForcing<'a> {
    Zero,
    Constant(&'a [f64]),
    /// Row `n` acts on `[t_n, t_{n+1})`.
    Steps(&'a [f64]),
    /// `Π[F(X, w) − F(X, u)]` for the perturbed control `w`.
    DriftMismatch(&'a ControlProcess),
}

/// Noise coefficient `η`: diagonal multipliers or a row-major `N × N` matrix.
#[derive(Clone, Copy, Debug)]
pub enum NoiseForcing<'a> {
    Zero,
    Diagonal(&'a [f64]),
    Full(&'a [f64]),
}

impl NoiseForcing<'_> {
    /// `‖η‖²_{L₂(K,V)} = Σ_{k,j} (1+μ_k)^s η_kj²`.
    pub fn norm_sq_v(&self, domain: &SpectralDomain) -> f64 {
        let s = domain.sobolev_index();
        let n = domain.n_modes();
        let w: Vec<f64> = domain.eigenvalues().map(|mu| (1.0 + mu).powf(s)).collect();
        match self {
            NoiseForcing::Zero => 0.0,
            NoiseForcing::Diagonal(e) => e.iter().zip(&w).map(|(v, w)| w * v * v).sum(),
            NoiseForcing::Full(m) => (0..n)
                .map(|k| w[k] * m[k * n..(k + 1) * n].iter().map(|v| v * v).sum::<f64>())
                .sum(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct AuxiliarySolution {
    pub y: StateTrajectory,
    /// `|γ_n|²_H` per step.
    pub gamma_norm_sq: Vec<f64>,
    pub eta_norm_sq: f64,
}

/// The state equation on a fixed grid, with per-mode exponential factors.
#[derive(Clone, Debug)]
pub struct ForwardModel {
    pub domain: SpectralDomain,
    pub drift: NemytskiiDrift,
    pub noise: NoiseModel,
    pub grid: TimeGrid,
    pub blowup_bound: f64,
    decay: Vec<f64>,
    /// `Δt·φ₁(−μΔt) = (1 − e^{−μΔt})/μ`.
    phi_dt: Vec<f64>,
    /// Discrete projection of the constant field 1.
    unit_coeffs: Vec<f64>,
}

impl ForwardModel {
    pub fn new(
        domain: SpectralDomain,
        drift: NemytskiiDrift,
        noise: NoiseModel,
        grid: TimeGrid,
    ) -> Result<Self> {
        domain.require_simulable()?;
        domain.check_len("noise covariance", noise.b_coeffs().len())?;
        let dt = grid.dt();
        if dt * drift.dissipativity_bound >= 1.0 {
            return Err(Error::Config(format!(
                "time step {dt} too large for the drift: Δt·β = {} must stay below 1",
                dt * drift.dissipativity_bound
            )));
        }
        let decay = domain.eigenvalues().map(|mu| (-mu * dt).exp()).collect();
        let phi_dt = domain.eigenvalues().map(|mu| -(-mu * dt).exp_m1() / mu).collect();
        let unit_coeffs = domain.from_grid(&vec![1.0; domain.n_grid()]);
        Ok(Self { domain, drift, noise, grid, blowup_bound: 1e6, decay, phi_dt, unit_coeffs })
    }

    pub fn with_blowup_bound(mut self, bound: f64) -> Self {
        self.blowup_bound = bound;
        self
    }

    pub fn n_modes(&self) -> usize {
        self.domain.n_modes()
    }

    pub fn decay(&self) -> &[f64] {
        &self.decay
    }

    pub fn phi_dt(&self) -> &[f64] {
        &self.phi_dt
    }

    pub fn unit_coeffs(&self) -> &[f64] {
        &self.unit_coeffs
    }

    pub fn increments(&self, path: u64) -> NoiseIncrements {
        NoiseIncrements::sample(&self.domain, self.noise.seed(), self.grid, path)
    }

    fn check_control(&self, control: &ControlProcess) -> Result<()> {
        if control.len() != self.grid.n_steps {
            return Err(Error::Shape(format!(
                "control has {} values for {} time steps",
                control.len(),
                self.grid.n_steps
            )));
        }
        Ok(())
    }

    /// `Π F(x, u)` written into `out`; `field` must hold the grid values of `x`.
    pub fn project_drift(
        &self,
        coeffs: &[f64],
        field: &[f64],
        u: f64,
        scratch: &mut [f64],
        out: &mut [f64],
        ws: &mut Workspace,
    ) -> Result<()> {
        if self.drift.is_linear() {
            // F(x,u) = −r x + g u: projection is exact without collocation.
            let (slope, g) = (self.drift.derivative(0.0, u), self.drift.value(0.0, u));
            for ((o, c), one) in out.iter_mut().zip(coeffs).zip(&self.unit_coeffs) {
                *o = slope * c + g * one;
            }
            return Ok(());
        }
        self.drift.apply_drift(field, u, scratch)?;
        self.domain.from_grid_into(scratch, out, ws);
        Ok(())
    }

    pub fn simulate_state(&self, control: &ControlProcess, x0: &[f64], path: u64) -> Result<StateTrajectory> {
        self.simulate_with(control, x0, &self.increments(path), path)
    }

    pub fn simulate_with(
        &self,
        control: &ControlProcess,
        x0: &[f64],
        increments: &NoiseIncrements,
        path: u64,
    ) -> Result<StateTrajectory> {
        self.check_control(control)?;
        self.domain.check_len("initial condition", x0.len())?;
        if !increments.grid().same_as(&self.grid) || increments.n_modes() != self.n_modes() {
            return Err(Error::Shape("noise increments do not match the model grid".into()));
        }
        let n = self.n_modes();
        let steps = self.grid.n_steps;
        let b = self.noise.b_coeffs();
        let mut coeffs = vec![0.0; (steps + 1) * n];
        coeffs[..n].copy_from_slice(x0);
        let mut ws = Workspace::new(&self.domain);
        let mut field = vec![0.0; self.domain.n_grid()];
        let mut scratch = vec![0.0; self.domain.n_grid()];
        let mut drift = vec![0.0; n];
        let coarse = (2.0 / std::f64::consts::PI).powf(self.domain.dimension() as f64 / 2.0);
        for step in 0..steps {
            let (prev, next) = coeffs.split_at_mut((step + 1) * n);
            let x = &prev[step * n..];
            let next = &mut next[..n];
            if !self.drift.is_linear() {
                self.domain.to_grid_into(x, &mut field, &mut ws);
            }
            let u = control.values[step];
            self.project_drift(x, &field, u, &mut scratch, &mut drift, &mut ws)
                .map_err(|e| instability_from(e, step))?;
            let inc = increments.ou(step);
            for k in 0..n {
                next[k] = self.decay[k] * x[k] + self.phi_dt[k] * drift[k] + b[k] * inc[k];
            }
            // Cheap coefficient bound first; the grid sup only when it trips.
            let bound = coarse * next.iter().map(|c| c.abs()).sum::<f64>();
            if !(bound <= self.blowup_bound) {
                self.domain.to_grid_into(next, &mut field, &mut ws);
                let sup = field.iter().fold(0.0f64, |m, v| if v.is_nan() { f64::INFINITY } else { m.max(v.abs()) });
                if !(sup <= self.blowup_bound) {
                    return Err(Error::Instability { step: step + 1, value: sup, bound: self.blowup_bound });
                }
            }
        }
        Ok(StateTrajectory { grid: self.grid, n_modes: n, coeffs, seed: self.noise.seed(), path })
    }

    pub fn simulate_ensemble(
        &self,
        control: &ControlProcess,
        x0: &[f64],
        n_paths: usize,
    ) -> Result<Vec<StateTrajectory>> {
        (0..n_paths as u64)
            .into_par_iter()
            .map(|p| self.simulate_state(control, x0, p))
            .collect()
    }

    /// `y_{n+1} = S y_n + Δtφ(Π[f′(X_n,u_n) y_n] + γ_n) + η-noise`, `y_0 = 0`,
    /// driven by the base path's own increments.
    pub fn simulate_auxiliary(
        &self,
        base: &StateTrajectory,
        control: &ControlProcess,
        increments: Option<&NoiseIncrements>,
        gamma: FieldForcing<'_>,
        eta: NoiseForcing<'_>,
    ) -> Result<AuxiliarySolution> {
        let n = self.n_modes();
        let steps = self.grid.n_steps;
        if !base.grid.same_as(&self.grid) || base.n_modes != n {
            return Err(Error::Shape("base trajectory does not match the model grid".into()));
        }
        self.check_control(control)?;
        match gamma {
            FieldForcing::Constant(g) => self.domain.check_len("forcing γ", g.len())?,
            FieldForcing::Steps(g) if g.len() != steps * n => {
                return Err(Error::Shape(format!("forcing γ has {} entries, expected {}", g.len(), steps * n)))
            }
            FieldForcing::DriftMismatch(w) => self.check_control(w)?,
            _ => {}
        }
        match eta {
            NoiseForcing::Diagonal(e) => self.domain.check_len("forcing η", e.len())?,
            NoiseForcing::Full(e) if e.len() != n * n => {
                return Err(Error::Shape(format!("forcing η has {} entries, expected {}", e.len(), n * n)))
            }
            _ => {}
        }
        let increments = match (eta, increments) {
            (NoiseForcing::Zero, _) => None,
            (_, Some(inc)) if inc.grid().same_as(&self.grid) && inc.n_modes() == n => Some(inc),
            (_, Some(_)) => return Err(Error::Shape("noise increments do not match the model grid".into())),
            (_, None) => return Err(Error::Shape("η-forcing needs the base path's noise increments".into())),
        };
        // Coupling of η_kj dW_j into mode k through the exact OU factors.
        let cross: Option<Vec<f64>> = match eta {
            NoiseForcing::Full(_) => {
                let mu: Vec<f64> = self.domain.eigenvalues().collect();
                let dt = self.grid.dt();
                let var: Vec<f64> = mu.iter().map(|&m| OuTransition::new(m, dt).var_ou).collect();
                Some((0..n * n).map(|i| ou_cross_cov(mu[i / n], mu[i % n], dt) / var[i % n]).collect())
            }
            _ => None,
        };

        let mut coeffs = vec![0.0; (steps + 1) * n];
        let mut gamma_norm_sq = vec![0.0; steps];
        let mut ws = Workspace::new(&self.domain);
        let mut xf = vec![0.0; self.domain.n_grid()];
        let mut yf = vec![0.0; self.domain.n_grid()];
        let mut scratch = vec![0.0; self.domain.n_grid()];
        let mut lin = vec![0.0; n];
        let mut g = vec![0.0; n];
        let mut g2 = vec![0.0; n];
        for step in 0..steps {
            let (prev, next) = coeffs.split_at_mut((step + 1) * n);
            let y = &prev[step * n..];
            let next = &mut next[..n];
            let u = control.values[step];
            let x = base.at(step);
            let need_field = !self.drift.is_linear() || matches!(gamma, FieldForcing::DriftMismatch(_));
            if need_field {
                self.domain.to_grid_into(x, &mut xf, &mut ws);
            }
            if self.drift.is_linear() {
                let slope = self.drift.derivative(0.0, u);
                lin.iter_mut().zip(y).for_each(|(l, v)| *l = slope * v);
            } else {
                self.domain.to_grid_into(y, &mut yf, &mut ws);
                self.drift.apply_drift_jacobian(&xf, u, &yf, &mut scratch)?;
                self.domain.from_grid_into(&scratch, &mut lin, &mut ws);
            }
            let forcing: &[f64] = match gamma {
                FieldForcing::Zero => {
                    g.iter_mut().for_each(|v| *v = 0.0);
                    &g
                }
                FieldForcing::Constant(c) => c,
                FieldForcing::Steps(s) => &s[step * n..(step + 1) * n],
                FieldForcing::DriftMismatch(w) => {
                    let wv = w.values[step];
                    if wv == u {
                        g.iter_mut().for_each(|v| *v = 0.0);
                    } else {
                        self.project_drift(x, &xf, wv, &mut scratch, &mut g, &mut ws)?;
                        self.project_drift(x, &xf, u, &mut scratch, &mut g2, &mut ws)?;
                        g.iter_mut().zip(&g2).for_each(|(a, b)| *a -= b);
                    }
                    &g
                }
            };
            gamma_norm_sq[step] = forcing.iter().map(|v| v * v).sum();
            for k in 0..n {
                next[k] = self.decay[k] * y[k] + self.phi_dt[k] * (lin[k] + forcing[k]);
            }
            if let Some(inc) = increments {
                let i = inc.ou(step);
                match eta {
                    NoiseForcing::Diagonal(e) => {
                        for k in 0..n {
                            next[k] += e[k] * i[k];
                        }
                    }
                    NoiseForcing::Full(e) => {
                        let cross = cross.as_ref().expect("built for full η");
                        for k in 0..n {
                            let row = k * n..(k + 1) * n;
                            next[k] += e[row.clone()]
                                .iter()
                                .zip(&cross[row])
                                .zip(i)
                                .map(|((e, c), i)| e * c * i)
                                .sum::<f64>();
                        }
                    }
                    NoiseForcing::Zero => {}
                }
            }
        }
        Ok(AuxiliarySolution {
            y: StateTrajectory { grid: self.grid, n_modes: n, coeffs, seed: base.seed, path: base.path },
            gamma_norm_sq,
            eta_norm_sq: eta.norm_sq_v(&self.domain),
        })
    }
}

fn instability_from(err: Error, step: usize) -> Error {
    match err {
        Error::Numeric { .. } => Error::Instability { step, value: f64::NAN, bound: f64::NAN },
        other => other,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ForwardBound {
    /// `E ∫ |y|²_sup dt`.
    pub lhs: f64,
    /// `E (∫ |γ|²_H (T−s)^{−λ} ds)^{r/2}`.
    pub gamma_term: f64,
    /// `E (∫ ‖η‖²_{L₂(K,V)} ds)^{r/2}`.
    pub eta_term: f64,
    /// `[gamma_term + eta_term]^{2/r}`.
    pub rhs: f64,
}

/// `∫_{t_n}^{t_{n+1}} (T−s)^{−λ} ds` in closed form.
pub fn singular_weight(grid: &TimeGrid, n: usize, lambda: f64) -> f64 {
    let t = grid.horizon;
    let (a, b) = (t - grid.time(n), t - grid.time(n + 1));
    (a.powf(1.0 - lambda) - b.max(0.0).powf(1.0 - lambda)) / (1.0 - lambda)
}

pub fn estimate_forward_bound(
    domain: &SpectralDomain,
    solutions: &[AuxiliarySolution],
    r: f64,
) -> Result<ForwardBound> {
    if !(r > 2.0) {
        return Err(Error::Config(format!("integrability exponent r must exceed 2, got {r}")));
    }
    if solutions.is_empty() {
        return Err(Error::Config("forward bound needs at least one auxiliary solution".into()));
    }
    let lambda = domain.lambda_exponent();
    let count = solutions.len() as f64;
    let (mut lhs, mut gt, mut et) = (0.0, 0.0, 0.0);
    for sol in solutions {
        let grid = sol.y.grid;
        let mut sup_int = 0.0;
        for n in 0..=grid.n_steps {
            sup_int += grid.trapezoid_weight(n) * sol.y.sup_norm(domain, n).powi(2);
        }
        let gamma_int: f64 = sol
            .gamma_norm_sq
            .iter()
            .enumerate()
            .map(|(n, g)| g * singular_weight(&grid, n, lambda))
            .sum();
        lhs += sup_int;
        gt += gamma_int.powf(r / 2.0);
        et += (sol.eta_norm_sq * grid.horizon).powf(r / 2.0);
    }
    let (lhs, gamma_term, eta_term) = (lhs / count, gt / count, et / count);
    Ok(ForwardBound { lhs, gamma_term, eta_term, rhs: (gamma_term + eta_term).powf(2.0 / r) })
}
