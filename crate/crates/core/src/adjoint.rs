//! Backward regression scheme for the adjoint pair `(p, q)`, the duality
//! pairing with the auxiliary equation, and the weighted adjoint norms.
//!
//! One backward step on the grid reads
//!
//! ```text
//! P̂_n = E[p_{n+1} | X_n]                      (least squares on X_n features)
//! p_n = e^{−μΔt} P̂_n + Δtφ(−μΔt) (Π[f′(X_n,u_n) P̂_n] + f_n)
//! q_n = E[p_{n+1} I_n^T | X_n] / Var(I_n)      (I_n: the exact OU increment)
//! ```
//!
//! so that `q_kj` is the sensitivity of `p_k` to the unit Wiener coordinate `j`.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{FieldForcing, ForwardModel, NoiseForcing, StateTrajectory, ControlProcess};
use crate::noise::{NoiseIncrements, OuTransition};
use crate::rng::{stream, StreamTag};
use crate::spectral::{SpectralDomain, Workspace};
use crate::time::TimeGrid;

/// Data `(f, ζ)` of the backward equation, evaluated along a forward path.
pub trait AdjointSource: Sync {
    #[allow(clippy::too_many_arguments)]
    fn running(&self, step: usize, coeffs: &[f64], field: &[f64], u: f64, scratch: &mut [f64], out: &mut [f64], ws: &mut Workspace);
    fn terminal(&self, coeffs: &[f64], field: &[f64], scratch: &mut [f64], out: &mut [f64], ws: &mut Workspace);
}

/// State-independent data given directly in mode coefficients.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DeterministicSource {
    pub running: Option<Vec<f64>>,
    pub terminal: Option<Vec<f64>>,
}

impl AdjointSource for DeterministicSource {
    fn running(&self, _: usize, _: &[f64], _: &[f64], _: f64, _: &mut [f64], out: &mut [f64], _: &mut Workspace) {
        match &self.running {
            Some(g) => out.copy_from_slice(g),
            None => out.iter_mut().for_each(|v| *v = 0.0),
        }
    }

    fn terminal(&self, _: &[f64], _: &[f64], _: &mut [f64], out: &mut [f64], _: &mut Workspace) {
        match &self.terminal {
            Some(z) => out.copy_from_slice(z),
            None => out.iter_mut().for_each(|v| *v = 0.0),
        }
    }
}

/// Superposition of two data sets.
pub struct SumSource<'a>(pub &'a dyn AdjointSource, pub &'a dyn AdjointSource);

impl AdjointSource for SumSource<'_> {
    fn running(&self, step: usize, coeffs: &[f64], field: &[f64], u: f64, scratch: &mut [f64], out: &mut [f64], ws: &mut Workspace) {
        let mut tmp = vec![0.0; out.len()];
        self.0.running(step, coeffs, field, u, scratch, out, ws);
        self.1.running(step, coeffs, field, u, scratch, &mut tmp, ws);
        out.iter_mut().zip(&tmp).for_each(|(a, b)| *a += b);
    }

    fn terminal(&self, coeffs: &[f64], field: &[f64], scratch: &mut [f64], out: &mut [f64], ws: &mut Workspace) {
        let mut tmp = vec![0.0; out.len()];
        self.0.terminal(coeffs, field, scratch, out, ws);
        self.1.terminal(coeffs, field, scratch, &mut tmp, ws);
        out.iter_mut().zip(&tmp).for_each(|(a, b)| *a += b);
    }
}

fn default_basis() -> usize {
    8
}
fn default_clip() -> f64 {
    1e3
}
fn default_condition() -> f64 {
    1e10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressionSpec {
    /// Leading state modes used as regressors (after the constant).
    #[serde(default = "default_basis")]
    pub basis_modes: usize,
    /// Add all degree-two monomials of the regressor modes.
    #[serde(default)]
    pub quadratic: bool,
    /// Clip level for `|f′|` in the backward drift.
    #[serde(default = "default_clip")]
    pub clip: f64,
    /// Keep the full `N × N` matrix `q` instead of its diagonal.
    #[serde(default)]
    pub full_q: bool,
    #[serde(default = "default_condition")]
    pub max_condition: f64,
    /// Mix the regressors by a random invertible matrix (same span).
    #[serde(default)]
    pub rotation_seed: Option<u64>,
}

impl Default for RegressionSpec {
    fn default() -> Self {
        Self {
            basis_modes: default_basis(),
            quadratic: false,
            clip: default_clip(),
            full_q: false,
            max_condition: default_condition(),
            rotation_seed: None,
        }
    }
}

impl RegressionSpec {
    pub fn basis_size(&self, n_modes: usize) -> usize {
        let k = self.basis_modes.min(n_modes);
        1 + k + if self.quadratic { k * (k + 1) / 2 } else { 0 }
    }
}

/// `p` on every grid node and `q` on every cell of one path.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjointPair {
    pub grid: TimeGrid,
    pub n_modes: usize,
    pub p: Vec<f64>,
    /// Per step: `N` diagonal entries, or a row-major `N × N` block.
    pub q: Vec<f64>,
    pub full_q: bool,
}

impl AdjointPair {
    pub fn p_at(&self, n: usize) -> &[f64] {
        &self.p[n * self.n_modes..(n + 1) * self.n_modes]
    }

    pub fn q_block(&self) -> usize {
        if self.full_q {
            self.n_modes * self.n_modes
        } else {
            self.n_modes
        }
    }

    pub fn q_at(&self, n: usize) -> &[f64] {
        let b = self.q_block();
        &self.q[n * b..(n + 1) * b]
    }

    /// `q_kj` at step `n` (zero off the diagonal in diagonal storage).
    pub fn q_entry(&self, n: usize, k: usize, j: usize) -> f64 {
        if self.full_q {
            self.q_at(n)[k * self.n_modes + j]
        } else if k == j {
            self.q_at(n)[k]
        } else {
            0.0
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RegressionDiagnostics {
    pub basis_size: Vec<usize>,
    pub condition: Vec<f64>,
    pub clip_rate: Vec<f64>,
    pub residual_rms: Vec<f64>,
    /// Largest `|mean residual| / stderr` over modes: a tower-property check.
    pub residual_max_z: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct AdjointSolution {
    pub pairs: Vec<AdjointPair>,
    pub diagnostics: RegressionDiagnostics,
}

/// Standardised regressors for one time step; columns with no spread across
/// paths are already represented by the constant and are dropped.
fn design_matrix(trajs: &[StateTrajectory], n: usize, spec: &RegressionSpec, n_modes: usize) -> DMatrix<f64> {
    let paths = trajs.len();
    let k = spec.basis_modes.min(n_modes);
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let standardise = |mut c: Vec<f64>| -> Option<Vec<f64>> {
        let mean = c.iter().sum::<f64>() / paths as f64;
        let sd = (c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / paths as f64).sqrt();
        if !(sd > 1e-10 * mean.abs().max(1.0)) {
            return None;
        }
        c.iter_mut().for_each(|v| *v = (*v - mean) / sd);
        Some(c)
    };
    let linear: Vec<Vec<f64>> = (0..k)
        .filter_map(|m| standardise(trajs.iter().map(|t| t.at(n)[m]).collect()))
        .collect();
    if spec.quadratic {
        for i in 0..linear.len() {
            for j in i..linear.len() {
                if let Some(c) = standardise(linear[i].iter().zip(&linear[j]).map(|(a, b)| a * b).collect()) {
                    cols.push(c);
                }
            }
        }
    }
    let mut features: Vec<Vec<f64>> = linear.into_iter().chain(cols).collect();
    if let Some(seed) = spec.rotation_seed {
        let f = features.len();
        let mut rng = stream(seed, StreamTag::Regression, n as u64, 0);
        let mix: Vec<f64> = (0..f * f)
            .map(|i| if i / f == i % f { 1.0 } else { 0.0 } + 0.3 * rng.random_range(-1.0..1.0))
            .collect();
        features = (0..f)
            .map(|c| (0..paths).map(|p| (0..f).map(|r| features[r][p] * mix[r * f + c]).sum()).collect())
            .collect();
    }
    let b = 1 + features.len();
    DMatrix::from_fn(paths, b, |p, c| if c == 0 { 1.0 } else { features[c - 1][p] })
}

pub fn solve_adjoint_regression(
    model: &ForwardModel,
    source: &dyn AdjointSource,
    trajectories: &[StateTrajectory],
    control: &ControlProcess,
    spec: &RegressionSpec,
) -> Result<AdjointSolution> {
    let domain = &model.domain;
    let grid = model.grid;
    let (n, steps, paths) = (domain.n_modes(), grid.n_steps, trajectories.len());
    let basis = spec.basis_size(n);
    if paths < 10 * basis {
        return Err(Error::Config(format!(
            "regression with {basis} basis functions needs at least {} paths, got {paths}",
            10 * basis
        )));
    }
    if control.len() != steps {
        return Err(Error::Shape(format!("control has {} values for {steps} steps", control.len())));
    }
    if let Some(t) = trajectories.iter().find(|t| !t.grid.same_as(&grid) || t.n_modes != n) {
        return Err(Error::Shape(format!("trajectory for path {} does not match the model grid", t.path)));
    }
    let increments: Vec<NoiseIncrements> = trajectories.par_iter().map(|t| model.increments(t.path)).collect();
    let var: Vec<f64> = domain.eigenvalues().map(|mu| OuTransition::new(mu, grid.dt()).var_ou).collect();
    let q_block = if spec.full_q { n * n } else { n };

    let mut pairs: Vec<AdjointPair> = trajectories
        .par_iter()
        .map(|traj| {
            let mut p = vec![0.0; (steps + 1) * n];
            let mut ws = Workspace::new(domain);
            let field = domain.to_grid(traj.terminal());
            let mut scratch = vec![0.0; domain.n_grid()];
            source.terminal(traj.terminal(), &field, &mut scratch, &mut p[steps * n..], &mut ws);
            AdjointPair { grid, n_modes: n, p, q: vec![0.0; steps * q_block], full_q: spec.full_q }
        })
        .collect();

    let mut diagnostics = RegressionDiagnostics::default();
    let drift = model.drift;
    let clip = spec.clip;
    for step in (0..steps).rev() {
        let phi = design_matrix(trajectories, step, spec, n);
        let svd = phi.clone().svd(true, true);
        let (smax, smin) = svd
            .singular_values
            .iter()
            .fold((0.0f64, f64::INFINITY), |(a, b), &s| (a.max(s), b.min(s)));
        let condition = smax / smin;
        if !(condition <= spec.max_condition) {
            return Err(Error::Regression { step, condition });
        }
        let cols = n + q_block;
        let targets = DMatrix::from_fn(paths, cols, |r, c| {
            let next = pairs[r].p_at(step + 1);
            if c < n {
                next[c]
            } else if spec.full_q {
                let (k, j) = ((c - n) / n, (c - n) % n);
                next[k] * increments[r].ou(step)[j]
            } else {
                next[c - n] * increments[r].ou(step)[c - n]
            }
        });
        let u_mat = svd.u.as_ref().expect("requested U");
        let fitted = u_mat * (u_mat.transpose() * &targets);

        let mut rms = 0.0;
        let mut max_z = 0.0f64;
        for c in 0..n {
            let res: Vec<f64> = (0..paths).map(|r| targets[(r, c)] - fitted[(r, c)]).collect();
            let acc = crate::stats::MeanAccumulator::from_slice(&res);
            rms += res.iter().map(|v| v * v).sum::<f64>();
            if acc.stderr() > 0.0 {
                max_z = max_z.max(acc.mean().abs() / acc.stderr());
            }
        }
        diagnostics.residual_rms.push((rms / (paths * n) as f64).sqrt());
        diagnostics.residual_max_z.push(max_z);
        diagnostics.condition.push(condition);
        diagnostics.basis_size.push(phi.ncols());

        let u = control.values()[step];
        let clipped: usize = pairs
            .par_iter_mut()
            .zip(trajectories.par_iter())
            .enumerate()
            .map(|(r, (pair, traj))| {
                let mut ws = Workspace::new(domain);
                let mut xf = vec![0.0; domain.n_grid()];
                let mut pf = vec![0.0; domain.n_grid()];
                let mut scratch = vec![0.0; domain.n_grid()];
                let mut lin = vec![0.0; n];
                let mut f = vec![0.0; n];
                let hat: Vec<f64> = (0..n).map(|c| fitted[(r, c)]).collect();
                let x = traj.at(step);
                domain.to_grid_into(x, &mut xf, &mut ws);
                let mut clipped = 0;
                if drift.is_linear() {
                    let slope = drift.derivative(0.0, u).clamp(-clip, clip);
                    lin.iter_mut().zip(&hat).for_each(|(l, h)| *l = slope * h);
                } else {
                    domain.to_grid_into(&hat, &mut pf, &mut ws);
                    for (s, (&xv, &pv)) in scratch.iter_mut().zip(xf.iter().zip(&pf)) {
                        let d = drift.derivative(xv, u);
                        if d.abs() > clip {
                            clipped += 1;
                        }
                        *s = d.clamp(-clip, clip) * pv;
                    }
                    domain.from_grid_into(&scratch, &mut lin, &mut ws);
                }
                source.running(step, x, &xf, u, &mut scratch, &mut f, &mut ws);
                let (decay, phi_dt) = (model.decay(), model.phi_dt());
                let dst = &mut pair.p[step * n..(step + 1) * n];
                for k in 0..n {
                    dst[k] = decay[k] * hat[k] + phi_dt[k] * (lin[k] + f[k]);
                }
                let q = &mut pair.q[step * q_block..(step + 1) * q_block];
                for (c, slot) in q.iter_mut().enumerate() {
                    let j = if spec.full_q { c % n } else { c };
                    *slot = fitted[(r, n + c)] / var[j];
                }
                clipped
            })
            .sum();
        diagnostics.clip_rate.push(if drift.is_linear() {
            if drift.derivative(0.0, u).abs() > clip { 1.0 } else { 0.0 }
        } else {
            clipped as f64 / (paths * domain.n_grid()) as f64
        });
    }
    for v in [
        &mut diagnostics.condition,
        &mut diagnostics.clip_rate,
        &mut diagnostics.residual_rms,
        &mut diagnostics.residual_max_z,
    ] {
        v.reverse();
    }
    diagnostics.basis_size.reverse();
    Ok(AdjointSolution { pairs, diagnostics })
}

/// The two sides of `E∫⟨p,γ⟩ + E∫⟨q,η⟩ = E∫⟨f,y⟩ + E⟨ζ,y(T)⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DualityReport {
    pub lhs_gamma: f64,
    pub lhs_eta: f64,
    pub rhs_running: f64,
    pub rhs_terminal: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// Time quadrature: trapezoid on the nodes for `⟨p,γ⟩` (γ constant per cell)
/// and `⟨f,y⟩`; `⟨q,η⟩` is constant on each cell.
#[allow(clippy::too_many_arguments)]
pub fn duality_residual(
    model: &ForwardModel,
    source: &dyn AdjointSource,
    trajectories: &[StateTrajectory],
    control: &ControlProcess,
    solution: &AdjointSolution,
    gamma: FieldForcing<'_>,
    eta: NoiseForcing<'_>,
    floor: f64,
) -> Result<DualityReport> {
    if let FieldForcing::DriftMismatch(_) = gamma {
        return Err(Error::Config("duality check expects an explicit γ forcing".into()));
    }
    let domain = &model.domain;
    let grid = model.grid;
    let (n, steps, dt) = (domain.n_modes(), grid.n_steps, grid.dt());
    if solution.pairs.len() != trajectories.len() {
        return Err(Error::Shape("adjoint ensemble does not match the trajectories".into()));
    }
    let gamma_at = |step: usize| -> Option<&[f64]> {
        match gamma {
            FieldForcing::Zero | FieldForcing::DriftMismatch(_) => None,
            FieldForcing::Constant(g) => Some(g),
            FieldForcing::Steps(g) => Some(&g[step * n..(step + 1) * n]),
        }
    };
    let per_path: Vec<[f64; 4]> = trajectories
        .par_iter()
        .zip(solution.pairs.par_iter())
        .map(|(traj, pair)| {
            let inc = model.increments(traj.path);
            let aux = model.simulate_auxiliary(traj, control, Some(&inc), gamma, eta)?;
            let mut ws = Workspace::new(domain);
            let mut xf = vec![0.0; domain.n_grid()];
            let mut scratch = vec![0.0; domain.n_grid()];
            let mut f = vec![0.0; n];
            let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
            let mut out = [0.0; 4];
            for step in 0..steps {
                if let Some(g) = gamma_at(step) {
                    out[0] += 0.5 * dt * (dot(pair.p_at(step), g) + dot(pair.p_at(step + 1), g));
                }
                out[1] += dt * match eta {
                    NoiseForcing::Zero => 0.0,
                    NoiseForcing::Diagonal(e) => (0..n).map(|k| pair.q_entry(step, k, k) * e[k]).sum(),
                    NoiseForcing::Full(e) => (0..n * n).map(|i| pair.q_entry(step, i / n, i % n) * e[i]).sum(),
                };
            }
            for node in 0..=steps {
                let x = traj.at(node);
                domain.to_grid_into(x, &mut xf, &mut ws);
                // The terminal node reuses the last cell's control value.
                let cell = node.min(steps - 1);
                source.running(cell, x, &xf, control.values()[cell], &mut scratch, &mut f, &mut ws);
                out[2] += grid.trapezoid_weight(node) * dot(&f, aux.y.at(node));
            }
            domain.to_grid_into(traj.terminal(), &mut xf, &mut ws);
            source.terminal(traj.terminal(), &xf, &mut scratch, &mut f, &mut ws);
            out[3] = dot(&f, aux.y.terminal());
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let count = per_path.len().max(1) as f64;
    let mut sums = [0.0; 4];
    for row in &per_path {
        for (s, v) in sums.iter_mut().zip(row) {
            *s += v;
        }
    }
    let [lhs_gamma, lhs_eta, rhs_running, rhs_terminal] = sums.map(|s| s / count);
    let (lhs, rhs) = (lhs_gamma + lhs_eta, rhs_running + rhs_terminal);
    let denom = lhs.abs() + rhs.abs() + floor;
    let residual = if denom > 0.0 { (lhs - rhs).abs() / denom } else { 0.0 };
    Ok(DualityReport { lhs_gamma, lhs_eta, rhs_running, rhs_terminal, lhs, rhs, residual })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WeightedNormReport {
    /// `E(∫|p|²(T−t)^λ dt)^{r′}`.
    pub p_weighted: f64,
    /// `E ∫|p|²(T−t)^λ dt`.
    pub p_weighted_mean: f64,
    /// `E(∫|q|²_{V′} dt)^{r′}`.
    pub q_norm: f64,
    pub q_norm_mean: f64,
    /// `E ∫|p|² dt` without weight.
    pub p_unweighted: f64,
    /// `E |p(T − Δt)|²`.
    pub p_final_step: f64,
    pub r_prime: f64,
}

pub fn weighted_norm_report(domain: &SpectralDomain, pairs: &[AdjointPair], r_prime: f64) -> Result<WeightedNormReport> {
    if !(r_prime > 1.0 && r_prime < 2.0) {
        return Err(Error::Config(format!("r′ must lie in (1, 2), got {r_prime}")));
    }
    let lambda = domain.lambda_exponent();
    let s = domain.sobolev_index();
    let dual: Vec<f64> = domain.eigenvalues().map(|mu| (1.0 + mu).powf(-s)).collect();
    let count = pairs.len().max(1) as f64;
    let mut r = WeightedNormReport {
        p_weighted: 0.0,
        p_weighted_mean: 0.0,
        q_norm: 0.0,
        q_norm_mean: 0.0,
        p_unweighted: 0.0,
        p_final_step: 0.0,
        r_prime,
    };
    for pair in pairs {
        let grid = pair.grid;
        let (steps, n, dt) = (grid.n_steps, pair.n_modes, grid.dt());
        let (mut w, mut plain, mut q) = (0.0, 0.0, 0.0);
        for node in 0..=steps {
            let sq: f64 = pair.p_at(node).iter().map(|v| v * v).sum();
            let tau = grid.horizon - grid.time(node);
            w += grid.trapezoid_weight(node) * sq * tau.powf(lambda);
            if node < steps {
                plain += dt * sq;
            }
        }
        for step in 0..steps {
            q += dt * (0..n)
                .map(|k| dual[k] * (0..n).map(|j| pair.q_entry(step, k, j).powi(2)).sum::<f64>())
                .sum::<f64>();
        }
        r.p_weighted += w.powf(r_prime);
        r.p_weighted_mean += w;
        r.q_norm += q.powf(r_prime);
        r.q_norm_mean += q;
        r.p_unweighted += plain;
        r.p_final_step += pair.p_at(steps - 1).iter().map(|v| v * v).sum::<f64>();
    }
    for v in [&mut r.p_weighted, &mut r.p_weighted_mean, &mut r.q_norm, &mut r.q_norm_mean, &mut r.p_unweighted, &mut r.p_final_step] {
        *v /= count;
    }
    Ok(r)
}
