//! Control problems: cost evaluation, the Hamiltonian, the maximum-principle
//! gap check and a projected-gradient optimiser built on the adjoint.

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::adjoint::{solve_adjoint_regression, AdjointSolution, AdjointSource, RegressionSpec};
use crate::cost::{CompiledCost, CostSpec};
use crate::error::{Error, Result};
use crate::forward::{ControlProcess, ForwardModel, StateTrajectory};
use crate::nonlinearity::ControlSpace;
use crate::spectral::{SpectralDomain, Workspace};
use crate::stats::MeanAccumulator;
use crate::time::TimeGrid;

#[derive(Clone, Debug)]
pub struct ControlProblem {
    pub model: ForwardModel,
    pub cost: CompiledCost,
    pub x0: Vec<f64>,
    pub control_space: ControlSpace,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CostEstimate {
    pub j: f64,
    pub stderr: f64,
    #[serde(skip)]
    pub per_path: Vec<f64>,
}

impl ControlProblem {
    pub fn new(model: ForwardModel, cost: CostSpec, x0: Vec<f64>, control_space: ControlSpace) -> Result<Self> {
        control_space.validate()?;
        model.domain.check_len("initial condition", x0.len())?;
        model.drift.check_invariants(&control_space.samples())?;
        let cost = CompiledCost::new(cost, &model.domain)?;
        Ok(Self { model, cost, x0, control_space })
    }

    pub fn domain(&self) -> &SpectralDomain {
        &self.model.domain
    }

    pub fn grid(&self) -> TimeGrid {
        self.model.grid
    }

    pub fn constant_control(&self, u: f64) -> Result<ControlProcess> {
        ControlProcess::constant(self.control_space.clone(), self.grid().n_steps, u)
    }

    /// `L(x, u) = ∫ l(x) dμ + κ(u)`.
    pub fn running_cost(&self, coeffs: &[f64], field: &[f64], u: f64) -> f64 {
        self.cost.integrate(&self.cost.spec.running, coeffs, field) + self.cost.spec.control_penalty.value(u)
    }

    pub fn terminal_cost(&self, coeffs: &[f64], field: &[f64]) -> f64 {
        self.cost.integrate(&self.cost.spec.terminal, coeffs, field)
    }

    /// Trapezoid in time, each cell paired with its own control value.
    pub fn path_cost(&self, traj: &StateTrajectory, control: &ControlProcess) -> f64 {
        let grid = traj.grid;
        let dt = grid.dt();
        let domain = self.domain();
        let mut ws = Workspace::new(domain);
        let mut field = vec![0.0; domain.n_grid()];
        let need_field = self.cost.uses_field();
        let spec = &self.cost.spec;
        let mut state = Vec::with_capacity(grid.n_steps + 1);
        for n in 0..=grid.n_steps {
            if need_field {
                domain.to_grid_into(traj.at(n), &mut field, &mut ws);
            }
            state.push(self.cost.integrate(&spec.running, traj.at(n), &field));
            if n == grid.n_steps {
                return (0..grid.n_steps)
                    .map(|i| dt * (0.5 * (state[i] + state[i + 1]) + spec.control_penalty.value(control.values()[i])))
                    .sum::<f64>()
                    + self.terminal_cost(traj.at(n), &field);
            }
        }
        unreachable!()
    }

    pub fn evaluate_cost(&self, control: &ControlProcess, n_paths: usize) -> Result<CostEstimate> {
        if n_paths < 2 {
            return Err(Error::Config(format!("cost evaluation needs at least 2 paths, got {n_paths}")));
        }
        let per_path: Vec<f64> = (0..n_paths as u64)
            .into_par_iter()
            .map(|p| {
                let traj = self.model.simulate_state(control, &self.x0, p)?;
                Ok(self.path_cost(&traj, control))
            })
            .collect::<Result<_>>()?;
        Ok(estimate(per_path))
    }

    /// `H(t, u, x, p) = L(x, u) + ⟨p, Π F(x, u)⟩`.
    pub fn hamiltonian(&self, u: f64, coeffs: &[f64], p: &[f64]) -> Result<f64> {
        let domain = self.domain();
        domain.check_len("state", coeffs.len())?;
        domain.check_len("adjoint", p.len())?;
        let field = domain.to_grid(coeffs);
        let mut ws = Workspace::new(domain);
        let mut scratch = vec![0.0; domain.n_grid()];
        let mut drift = vec![0.0; domain.n_modes()];
        self.model.project_drift(coeffs, &field, u, &mut scratch, &mut drift, &mut ws)?;
        Ok(self.running_cost(coeffs, &field, u) + p.iter().zip(&drift).map(|(a, b)| a * b).sum::<f64>())
    }
}

/// Path-ordered summation, so results do not depend on thread scheduling.
fn sum_in_order(rows: &[Vec<f64>], len: usize) -> Vec<f64> {
    rows.iter().fold(vec![0.0; len], |mut acc, row| {
        acc.iter_mut().zip(row).for_each(|(a, r)| *a += r);
        acc
    })
}

pub(crate) fn estimate(per_path: Vec<f64>) -> CostEstimate {
    let acc = MeanAccumulator::from_slice(&per_path);
    CostEstimate { j: acc.mean(), stderr: acc.stderr(), per_path }
}

impl AdjointSource for ControlProblem {
    fn running(&self, _step: usize, coeffs: &[f64], field: &[f64], _u: f64, scratch: &mut [f64], out: &mut [f64], ws: &mut Workspace) {
        self.cost.gradient(self.domain(), &self.cost.spec.running, coeffs, field, scratch, out, ws);
    }

    fn terminal(&self, coeffs: &[f64], field: &[f64], scratch: &mut [f64], out: &mut [f64], ws: &mut Workspace) {
        self.cost.gradient(self.domain(), &self.cost.spec.terminal, coeffs, field, scratch, out, ws);
    }
}

/// Ensemble-averaged Hamiltonian gaps `E[H(v) − H(u_n)]` on the time grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MaximumPrincipleReport {
    pub min_gap: f64,
    pub argmin_t: f64,
    pub argmin_v: f64,
    pub fraction_violating: f64,
    pub tolerance: f64,
    pub v_samples: Vec<f64>,
    /// Row-major `steps × v_samples`.
    #[serde(skip)]
    pub gaps: Vec<f64>,
}

impl MaximumPrincipleReport {
    pub fn passes(&self) -> bool {
        self.min_gap >= -self.tolerance
    }
}

/// Per-path, per-step grid reconstruction of `p` with the Lebesgue pairing
/// weight, shared by the gap sweep and the control gradient.
fn adjoint_pairing_field(
    problem: &ControlProblem,
    traj: &StateTrajectory,
    p: &[f64],
    n: usize,
    ws: &mut Workspace,
    xf: &mut [f64],
    pf: &mut [f64],
) {
    let domain = problem.domain();
    domain.to_grid_into(traj.at(n), xf, ws);
    domain.to_grid_into(p, pf, ws);
}

pub fn check_maximum_principle(
    problem: &ControlProblem,
    control: &ControlProcess,
    trajectories: &[StateTrajectory],
    adjoint: &AdjointSolution,
    v_samples: &[f64],
    tol: f64,
) -> Result<MaximumPrincipleReport> {
    let grid = problem.grid();
    let steps = grid.n_steps;
    if trajectories.len() != adjoint.pairs.len() {
        return Err(Error::Shape("adjoint ensemble does not match the trajectories".into()));
    }
    if let Some(v) = v_samples.iter().find(|v| !problem.control_space.contains(**v)) {
        return Err(Error::Domain(format!("sampled control {v} lies outside U")));
    }
    let domain = problem.domain();
    let w = domain.quadrature_weight();
    let drift = problem.model.drift;
    let penalty = problem.cost.spec.control_penalty;
    let nv = v_samples.len();
    // ⟨p, Π[F(x,v) − F(x,u)]⟩ = w Σ_j p(ξ_j)(f(x_j,v) − f(x_j,u)) exactly.
    let sums: Vec<Vec<f64>> = trajectories
        .par_iter()
        .zip(adjoint.pairs.par_iter())
        .map(|(traj, pair)| {
            let mut ws = Workspace::new(domain);
            let mut xf = vec![0.0; domain.n_grid()];
            let mut pf = vec![0.0; domain.n_grid()];
            let mut out = vec![0.0; steps * nv];
            for n in 0..steps {
                adjoint_pairing_field(problem, traj, pair.p_at(n), n, &mut ws, &mut xf, &mut pf);
                let u = control.values()[n];
                for (iv, &v) in v_samples.iter().enumerate() {
                    let pair_term: f64 = xf
                        .iter()
                        .zip(&pf)
                        .map(|(&x, &p)| p * (drift.value(x, v) - drift.value(x, u)))
                        .sum();
                    out[n * nv + iv] = penalty.value(v) - penalty.value(u) + w * pair_term;
                }
            }
            out
        })
        .collect::<Vec<_>>();
    let sums = sum_in_order(&sums, steps * nv);
    let scale = 1.0 / trajectories.len().max(1) as f64;
    let gaps: Vec<f64> = sums.iter().map(|s| s * scale).collect();
    let (mut min_gap, mut argmin) = (f64::INFINITY, 0);
    for (i, &g) in gaps.iter().enumerate() {
        if g < min_gap {
            min_gap = g;
            argmin = i;
        }
    }
    let violating = gaps.iter().filter(|g| **g < -tol).count();
    Ok(MaximumPrincipleReport {
        min_gap,
        argmin_t: grid.time(argmin / nv.max(1)),
        argmin_v: v_samples.get(argmin % nv.max(1)).copied().unwrap_or(f64::NAN),
        fraction_violating: violating as f64 / gaps.len().max(1) as f64,
        tolerance: tol,
        v_samples: v_samples.to_vec(),
        gaps,
    })
}

/// `E[∂_u H]` per cell, with `p` averaged over the cell's endpoints.
pub fn control_gradient(
    problem: &ControlProblem,
    control: &ControlProcess,
    trajectories: &[StateTrajectory],
    adjoint: &AdjointSolution,
) -> Vec<f64> {
    let steps = problem.grid().n_steps;
    let domain = problem.domain();
    let w = domain.quadrature_weight();
    let drift = problem.model.drift;
    let penalty = problem.cost.spec.control_penalty;
    let sums = trajectories
        .par_iter()
        .zip(adjoint.pairs.par_iter())
        .map(|(traj, pair)| {
            let mut ws = Workspace::new(domain);
            let mut xf = vec![0.0; domain.n_grid()];
            let mut pf = vec![0.0; domain.n_grid()];
            let mut avg = vec![0.0; domain.n_modes()];
            (0..steps)
                .map(|n| {
                    let u = control.values()[n];
                    avg.iter_mut()
                        .zip(pair.p_at(n).iter().zip(pair.p_at(n + 1)))
                        .for_each(|(a, (x, y))| *a = 0.5 * (x + y));
                    adjoint_pairing_field(problem, traj, &avg, n, &mut ws, &mut xf, &mut pf);
                    let pair_term: f64 =
                        xf.iter().zip(&pf).map(|(&x, &p)| p * drift.control_derivative(x, u)).sum();
                    penalty.derivative(u) + w * pair_term
                })
                .collect::<Vec<f64>>()
        })
        .collect::<Vec<_>>();
    let sums = sum_in_order(&sums, steps);
    let scale = 1.0 / trajectories.len().max(1) as f64;
    sums.into_iter().map(|s| s * scale).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct DescentOptions {
    pub iterations: usize,
    pub step: f64,
    pub n_paths: usize,
    pub regression: RegressionSpec,
    pub max_halvings: usize,
    pub stagnation_window: usize,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self {
            iterations: 50,
            step: 0.5,
            n_paths: 200,
            regression: RegressionSpec::default(),
            max_halvings: 5,
            stagnation_window: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DescentRecord {
    pub iteration: usize,
    pub j: f64,
    pub stderr: f64,
    pub step: f64,
    /// Gradient at this iterate; NaN if the budget ran out before it was taken.
    pub gradient_norm: f64,
}

#[derive(Clone, Debug)]
pub struct DescentResult {
    pub control: ControlProcess,
    pub trace: Vec<DescentRecord>,
    pub stagnation_warning: bool,
}

/// Ensemble simulation under common random numbers (paths `0..n`).
pub fn simulate_paths(problem: &ControlProblem, control: &ControlProcess, n_paths: usize) -> Result<Vec<StateTrajectory>> {
    problem.model.simulate_ensemble(control, &problem.x0, n_paths)
}

/// Projected gradient descent `u ← Π_U(u − s E[∂_u H])` with step halving
/// whenever the common-random-number cost fails to decrease.
pub fn optimize_control(problem: &ControlProblem, initial: &ControlProcess, opts: &DescentOptions) -> Result<DescentResult> {
    let mut control = initial.clone();
    let mut trajectories = simulate_paths(problem, &control, opts.n_paths)?;
    let mut current = estimate(trajectories.iter().map(|t| problem.path_cost(t, &control)).collect());
    let mut trace = vec![DescentRecord { iteration: 0, j: current.j, stderr: current.stderr, step: 0.0, gradient_norm: f64::NAN }];
    let mut stagnant = 0;
    let mut stagnation_warning = false;
    let dt = problem.grid().dt();
    for iteration in 1..=opts.iterations {
        let adjoint = solve_adjoint_regression(&problem.model, problem, &trajectories, &control, &opts.regression)?;
        let grad = control_gradient(problem, &control, &trajectories, &adjoint);
        let gradient_norm = (grad.iter().map(|g| g * g).sum::<f64>() * dt).sqrt();
        trace.last_mut().expect("seeded").gradient_norm = gradient_norm;
        if gradient_norm < 1e-12 {
            info!("descent converged at iteration {iteration}: vanishing gradient");
            break;
        }
        let mut step = opts.step;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let values: Vec<f64> =
                control.values().iter().zip(&grad).map(|(u, g)| problem.control_space.project(u - step * g)).collect();
            let candidate = ControlProcess::from_values(problem.control_space.clone(), values)?;
            let trajs = simulate_paths(problem, &candidate, opts.n_paths)?;
            let est = estimate(trajs.iter().map(|t| problem.path_cost(t, &candidate)).collect());
            if est.j <= current.j {
                accepted = Some((candidate, trajs, est));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((c, t, e)) => {
                stagnant = if e.j < current.j { 0 } else { stagnant + 1 };
                control = c;
                trajectories = t;
                current = e;
            }
            None => {
                // Common random numbers make every later iteration identical.
                warn!("descent stalled at iteration {iteration}: no step decreased the cost");
                stagnation_warning = true;
                break;
            }
        }
        if stagnant >= opts.stagnation_window && !stagnation_warning {
            warn!("descent stagnated: cost did not decrease for {stagnant} consecutive iterations");
            stagnation_warning = true;
        }
        trace.push(DescentRecord { iteration, j: current.j, stderr: current.stderr, step, gradient_norm: f64::NAN });
    }
    Ok(DescentResult { control, trace, stagnation_warning })
}
