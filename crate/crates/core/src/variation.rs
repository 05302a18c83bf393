//! Spike variations of a control, the first variation equation, and the
//! empirical order and cost-expansion studies built on them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::ops::Range;

use crate::adjoint::AdjointSource;
use crate::control::ControlProblem;
use crate::error::{Error, Result};
use crate::forward::{ControlProcess, FieldForcing, ForwardModel, NoiseForcing, StateTrajectory};
use crate::spectral::{SpectralDomain, Workspace};
use crate::stats::{loglog_slope, MeanAccumulator, SlopeFit};
use crate::time::TimeGrid;

/// Replace the control by `w` on `E_ε = [t0, t0 + ε)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpikeConfig {
    pub t0: f64,
    pub epsilon: f64,
    pub w: f64,
}

impl SpikeConfig {
    /// Cells covered by the spike; fails unless `E_ε ⊂ (0, T)` is grid-aligned
    /// and spans at least one step.
    pub fn cells(&self, grid: &TimeGrid) -> Result<Range<usize>> {
        let start = grid
            .index_of(self.t0)
            .ok_or_else(|| Error::Grid(format!("spike start {} is not a grid time", self.t0)))?;
        let width = self.epsilon / grid.dt();
        let m = width.round();
        if (width - m).abs() > 1e-9 || m < 1.0 {
            return Err(Error::Grid(format!(
                "spike width {} must be a positive multiple of Δt = {}",
                self.epsilon,
                grid.dt()
            )));
        }
        let end = start + m as usize;
        if start == 0 || end >= grid.n_steps {
            return Err(Error::Grid(format!(
                "spike [{}, {}] must lie strictly inside (0, {})",
                self.t0,
                self.t0 + self.epsilon,
                grid.horizon
            )));
        }
        Ok(start..end)
    }
}

pub fn spike_perturb(control: &ControlProcess, spike: &SpikeConfig, grid: &TimeGrid) -> Result<ControlProcess> {
    let cells = spike.cells(grid)?;
    if control.len() != grid.n_steps {
        return Err(Error::Shape(format!("control has {} values for {} steps", control.len(), grid.n_steps)));
    }
    let mut values = control.values().to_vec();
    values[cells].iter_mut().for_each(|v| *v = spike.w);
    ControlProcess::from_values(control.space().clone(), values)
}

/// `Y^ε`: the auxiliary equation forced by `δ^εF = F(X, u^ε) − F(X, u)`.
pub fn first_variation(
    model: &ForwardModel,
    base: &StateTrajectory,
    control: &ControlProcess,
    spike: &SpikeConfig,
) -> Result<StateTrajectory> {
    let perturbed = spike_perturb(control, spike, &model.grid)?;
    Ok(model
        .simulate_auxiliary(base, control, None, FieldForcing::DriftMismatch(&perturbed), NoiseForcing::Zero)?
        .y)
}

/// Where to put the spike and what to replace the control with; the start
/// defaults to the middle of the horizon.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpikeTemplate {
    #[serde(default)]
    pub t0: Option<f64>,
    pub w: f64,
}

impl SpikeTemplate {
    pub fn at(&self, grid: &TimeGrid, epsilon: f64) -> SpikeConfig {
        SpikeConfig { t0: self.t0.unwrap_or(0.5 * grid.horizon), epsilon, w: self.w }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StudyRow {
    pub epsilon: f64,
    pub quantity: String,
    pub estimate: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuantitySlope {
    pub quantity: String,
    pub fit: Option<SlopeFit>,
    /// Smallest ε dropped for excessive Monte Carlo noise.
    pub dropped_smallest: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpikeOrderReport {
    pub rows: Vec<StudyRow>,
    pub slopes: Vec<QuantitySlope>,
}

impl SpikeOrderReport {
    pub fn slope(&self, quantity: &str) -> Option<f64> {
        self.slopes.iter().find(|s| s.quantity == quantity)?.fit.map(|f| f.slope)
    }
}

fn check_epsilons(epsilons: &[f64]) -> Result<Vec<f64>> {
    if epsilons.len() < 3 {
        return Err(Error::Config(format!("order studies need at least 3 spike widths, got {}", epsilons.len())));
    }
    let mut eps = epsilons.to_vec();
    eps.sort_by(|a, b| b.total_cmp(a));
    Ok(eps)
}

/// Fit over decreasing ε, dropping the smallest if its relative stderr > 25%.
fn fit_quantity(rows: &[StudyRow], quantity: &str) -> QuantitySlope {
    let mut pts: Vec<&StudyRow> = rows.iter().filter(|r| r.quantity == quantity).collect();
    pts.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon));
    let mut dropped_smallest = false;
    if let Some(last) = pts.last() {
        if pts.len() > 2 && last.estimate > 0.0 && last.stderr / last.estimate > 0.25 {
            pts.pop();
            dropped_smallest = true;
        }
    }
    let x: Vec<f64> = pts.iter().map(|r| r.epsilon).collect();
    let y: Vec<f64> = pts.iter().map(|r| r.estimate).collect();
    QuantitySlope { quantity: quantity.to_string(), fit: loglog_slope(&x, &y), dropped_smallest }
}

fn sup_sq(domain: &SpectralDomain, coeffs: &[f64], field: &mut [f64], ws: &mut Workspace) -> f64 {
    domain.to_grid_into(coeffs, field, ws);
    field.iter().fold(0.0f64, |m, v| m.max(v * v))
}

/// `E sup_t |·|²_sup` for `ξ^ε = X^ε − X`, `Y^ε` and `η^ε = ξ^ε − Y^ε`.
pub fn spike_order_study(
    model: &ForwardModel,
    control: &ControlProcess,
    x0: &[f64],
    template: &SpikeTemplate,
    epsilons: &[f64],
    n_paths: usize,
) -> Result<SpikeOrderReport> {
    let eps = check_epsilons(epsilons)?;
    let grid = model.grid;
    let spikes: Vec<SpikeConfig> = eps.iter().map(|&e| template.at(&grid, e)).collect();
    let perturbed: Vec<ControlProcess> =
        spikes.iter().map(|s| spike_perturb(control, s, &grid)).collect::<Result<_>>()?;
    let domain = &model.domain;
    let n = domain.n_modes();
    // Per path: [ξ, Y, η] sups for every ε, computed against one noise stream.
    let per_path: Vec<Vec<[f64; 3]>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|path| {
            let inc = model.increments(path);
            let base = model.simulate_with(control, x0, &inc, path)?;
            let mut ws = Workspace::new(domain);
            let mut field = vec![0.0; domain.n_grid()];
            let mut diff = vec![0.0; n];
            perturbed
                .iter()
                .map(|pc| {
                    let pert = model.simulate_with(pc, x0, &inc, path)?;
                    let y = model
                        .simulate_auxiliary(&base, control, None, FieldForcing::DriftMismatch(pc), NoiseForcing::Zero)?
                        .y;
                    let mut sups = [0.0f64; 3];
                    for node in 0..=grid.n_steps {
                        let (xe, x, yv) = (pert.at(node), base.at(node), y.at(node));
                        diff.iter_mut().enumerate().for_each(|(k, d)| *d = xe[k] - x[k]);
                        sups[0] = sups[0].max(sup_sq(domain, &diff, &mut field, &mut ws));
                        sups[1] = sups[1].max(sup_sq(domain, yv, &mut field, &mut ws));
                        diff.iter_mut().zip(yv).for_each(|(d, v)| *d -= v);
                        sups[2] = sups[2].max(sup_sq(domain, &diff, &mut field, &mut ws));
                    }
                    Ok(sups)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let names = ["xi", "y", "eta"];
    let mut rows = Vec::new();
    for (ie, &e) in eps.iter().enumerate() {
        for (iq, name) in names.iter().enumerate() {
            let acc = MeanAccumulator::from_slice(&per_path.iter().map(|p| p[ie][iq]).collect::<Vec<_>>());
            rows.push(StudyRow { epsilon: e, quantity: name.to_string(), estimate: acc.mean(), stderr: acc.stderr() });
        }
    }
    let slopes = names.iter().map(|q| fit_quantity(&rows, q)).collect();
    Ok(SpikeOrderReport { rows, slopes })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpansionRow {
    pub epsilon: f64,
    pub delta_j: f64,
    pub first_order: f64,
    pub residual: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CostExpansionReport {
    pub rows: Vec<ExpansionRow>,
    pub slope: Option<SlopeFit>,
}

/// First-order term `E∫[δ^εL + D_xL·Y^ε]dt + E[D_xG·Y^ε_T]` against the exact
/// common-random-number difference `J(u^ε) − J(u)`.
pub fn cost_expansion_check(
    problem: &ControlProblem,
    control: &ControlProcess,
    template: &SpikeTemplate,
    epsilons: &[f64],
    n_paths: usize,
) -> Result<CostExpansionReport> {
    let eps = check_epsilons(epsilons)?;
    let model = &problem.model;
    let grid = model.grid;
    let domain = &model.domain;
    let n = domain.n_modes();
    let penalty = problem.cost.spec.control_penalty;
    let perturbed: Vec<ControlProcess> = eps
        .iter()
        .map(|&e| spike_perturb(control, &template.at(&grid, e), &grid))
        .collect::<Result<_>>()?;
    let per_path: Vec<Vec<(f64, f64)>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|path| {
            let inc = model.increments(path);
            let base = model.simulate_with(control, &problem.x0, &inc, path)?;
            let j0 = problem.path_cost(&base, control);
            let mut ws = Workspace::new(domain);
            let mut field = vec![0.0; domain.n_grid()];
            let mut scratch = vec![0.0; domain.n_grid()];
            // D_xL along the base path at every node, and D_xG at T.
            let mut grads = vec![0.0; (grid.n_steps + 1) * n];
            for node in 0..=grid.n_steps {
                domain.to_grid_into(base.at(node), &mut field, &mut ws);
                let cell = node.min(grid.n_steps - 1);
                problem.running(cell, base.at(node), &field, control.values()[cell], &mut scratch, &mut grads[node * n..(node + 1) * n], &mut ws);
            }
            let mut terminal = vec![0.0; n];
            domain.to_grid_into(base.terminal(), &mut field, &mut ws);
            problem.terminal(base.terminal(), &field, &mut scratch, &mut terminal, &mut ws);
            perturbed
                .iter()
                .map(|pc| {
                    let pert = model.simulate_with(pc, &problem.x0, &inc, path)?;
                    let dj = problem.path_cost(&pert, pc) - j0;
                    let y = model
                        .simulate_auxiliary(&base, control, None, FieldForcing::DriftMismatch(pc), NoiseForcing::Zero)?
                        .y;
                    let mut first: f64 = pc
                        .values()
                        .iter()
                        .zip(control.values())
                        .map(|(w, u)| grid.dt() * (penalty.value(*w) - penalty.value(*u)))
                        .sum();
                    for node in 0..=grid.n_steps {
                        let g = &grads[node * n..(node + 1) * n];
                        first += grid.trapezoid_weight(node) * g.iter().zip(y.at(node)).map(|(a, b)| a * b).sum::<f64>();
                    }
                    first += terminal.iter().zip(y.terminal()).map(|(a, b)| a * b).sum::<f64>();
                    Ok((dj, first))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let rows: Vec<ExpansionRow> = eps
        .iter()
        .enumerate()
        .map(|(ie, &e)| {
            let dj = MeanAccumulator::from_slice(&per_path.iter().map(|p| p[ie].0).collect::<Vec<_>>());
            let fo = MeanAccumulator::from_slice(&per_path.iter().map(|p| p[ie].1).collect::<Vec<_>>());
            let diff = MeanAccumulator::from_slice(&per_path.iter().map(|p| p[ie].0 - p[ie].1).collect::<Vec<_>>());
            ExpansionRow { epsilon: e, delta_j: dj.mean(), first_order: fo.mean(), residual: diff.mean().abs(), stderr: diff.stderr() }
        })
        .collect();
    let x: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.residual).collect();
    Ok(CostExpansionReport { slope: loglog_slope(&x, &y), rows })
}
