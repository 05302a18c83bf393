//! Dirichlet Laplacian on `[0, π]^d`: sorted eigenbasis, heat semigroup,
//! fractional powers, and a collocation grid on which the sine transform is
//! exactly invertible.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_2_PI, PI};

use crate::error::{Error, Result};

/// Tie tolerance for threshold comparisons; shared by every regularity verdict.
pub const THRESHOLD_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    #[default]
    #[serde(alias = "interval", alias = "interval_or_hypercube")]
    Hypercube,
    /// Enters only through its threshold formula and eigenfunction growth rate.
    #[serde(alias = "ball_formula_only")]
    Ball,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mode {
    pub index: Vec<usize>,
    pub eigenvalue: f64,
    /// Position of the mode in the row-major `M^d` tensor of multi-indices.
    pub(crate) tensor: usize,
}

impl Mode {
    pub fn eigenfunction(&self, xi: &[f64]) -> f64 {
        debug_assert_eq!(xi.len(), self.index.len());
        let norm = FRAC_2_PI.powf(self.index.len() as f64 / 2.0);
        self.index
            .iter()
            .zip(xi)
            .fold(norm, |acc, (&k, &x)| acc * (k as f64 * x).sin())
    }
}

#[derive(Clone, Debug)]
pub struct SpectralDomain {
    dimension: usize,
    kind: DomainKind,
    modes_per_axis: usize,
    grid_per_axis: usize,
    modes: Vec<Mode>,
    sobolev_index: f64,
    /// `grid × modes` synthesis matrix for one axis, normalisation included.
    synth: Vec<f64>,
    /// `modes × grid` analysis matrix for one axis (quadrature weight included).
    analysis: Vec<f64>,
}

impl SpectralDomain {
    pub fn hypercube(dimension: usize, modes_per_axis: usize) -> Result<Self> {
        Self::build(dimension, DomainKind::Hypercube, modes_per_axis, modes_per_axis)
    }

    /// Hypercube eigenvalues standing in for the ball: only the eigenfunction
    /// growth rate differs. Such a domain can be queried but not simulated.
    pub fn ball_surrogate(dimension: usize, modes_per_axis: usize) -> Result<Self> {
        Self::build(dimension, DomainKind::Ball, modes_per_axis, modes_per_axis)
    }

    pub fn new(dimension: usize, kind: DomainKind, modes_per_axis: usize) -> Result<Self> {
        Self::build(dimension, kind, modes_per_axis, modes_per_axis)
    }

    /// Collocate the nonlinearity on `ceil(3M/2)` points per axis; projection
    /// stays exact because the sine system is orthogonal on any finer grid.
    pub fn with_padding(self, padded: bool) -> Result<Self> {
        let grid = if padded {
            (3 * self.modes_per_axis).div_ceil(2)
        } else {
            self.modes_per_axis
        };
        let mut out = Self::build(self.dimension, self.kind, self.modes_per_axis, grid)?;
        out.sobolev_index = self.sobolev_index;
        Ok(out)
    }

    pub fn with_sobolev_index(mut self, s: f64) -> Result<Self> {
        if !(s > self.dimension as f64 / 2.0) {
            return Err(Error::Config(format!(
                "sobolev_index {s} must exceed d/2 = {}",
                self.dimension as f64 / 2.0
            )));
        }
        self.sobolev_index = s;
        Ok(self)
    }

    fn build(dimension: usize, kind: DomainKind, m: usize, grid: usize) -> Result<Self> {
        if dimension == 0 || dimension > 3 {
            return Err(Error::Domain(format!(
                "dimension {dimension} unsupported: ultracontractivity exponent d/4 must stay \
                 below 1, so d must be 1, 2 or 3"
            )));
        }
        if m == 0 {
            return Err(Error::Domain("modes_per_axis must be at least 1".into()));
        }
        if grid < m {
            return Err(Error::Grid(format!("{grid} collocation points cannot resolve {m} modes")));
        }
        let total = m.pow(dimension as u32);
        let mut modes: Vec<Mode> = (0..total)
            .map(|tensor| {
                let mut rest = tensor;
                let mut index = vec![0; dimension];
                for slot in index.iter_mut().rev() {
                    *slot = rest % m + 1;
                    rest /= m;
                }
                let eigenvalue = index.iter().map(|&k| (k * k) as f64).sum();
                Mode { index, eigenvalue, tensor }
            })
            .collect();
        // Stable sort keeps lexicographic order (the tensor order) among ties.
        modes.sort_by(|a, b| a.eigenvalue.total_cmp(&b.eigenvalue));

        let h = PI / (grid + 1) as f64;
        let norm = FRAC_2_PI.sqrt();
        let mut synth = vec![0.0; grid * m];
        let mut analysis = vec![0.0; m * grid];
        for j in 0..grid {
            let x = (j + 1) as f64 * h;
            for k in 0..m {
                let v = norm * ((k + 1) as f64 * x).sin();
                synth[j * m + k] = v;
                analysis[k * grid + j] = h * v;
            }
        }
        Ok(Self {
            dimension,
            kind,
            modes_per_axis: m,
            grid_per_axis: grid,
            modes,
            sobolev_index: dimension as f64 / 2.0 + 0.5,
            synth,
            analysis,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn modes_per_axis(&self) -> usize {
        self.modes_per_axis
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn eigenvalues(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        self.modes.iter().map(|m| m.eigenvalue)
    }

    pub fn lambda_exponent(&self) -> f64 {
        self.dimension as f64 / 4.0
    }

    pub fn sobolev_index(&self) -> f64 {
        self.sobolev_index
    }

    pub fn grid_per_axis(&self) -> usize {
        self.grid_per_axis
    }

    pub fn n_grid(&self) -> usize {
        self.grid_per_axis.pow(self.dimension as u32)
    }

    /// Weight of each collocation point in discrete integrals over the domain.
    pub fn quadrature_weight(&self) -> f64 {
        (PI / (self.grid_per_axis + 1) as f64).powi(self.dimension as i32)
    }

    /// Collocation points in row-major order (last axis fastest).
    pub fn collocation_points(&self) -> Vec<Vec<f64>> {
        let p = self.grid_per_axis;
        let h = PI / (p + 1) as f64;
        (0..self.n_grid())
            .map(|flat| {
                let mut rest = flat;
                let mut xi = vec![0.0; self.dimension];
                for slot in xi.iter_mut().rev() {
                    *slot = (rest % p + 1) as f64 * h;
                    rest /= p;
                }
                xi
            })
            .collect()
    }

    pub fn require_simulable(&self) -> Result<()> {
        match self.kind {
            DomainKind::Hypercube => Ok(()),
            DomainKind::Ball => Err(Error::Domain(
                "the ball enters only through threshold formulas and cannot be simulated".into(),
            )),
        }
    }

    pub fn eigenpairs(&self, count: usize) -> Result<&[Mode]> {
        if count > self.modes.len() {
            return Err(Error::Capacity { requested: count, available: self.modes.len() });
        }
        Ok(&self.modes[..count])
    }

    /// Bound `c_k` on `sup|e_k|` (up to a constant): flat on the hypercube,
    /// `μ^{(d-1)/4}` on the ball.
    pub fn eigenfunction_growth(&self, eigenvalue: f64) -> f64 {
        match self.kind {
            DomainKind::Hypercube => 1.0,
            DomainKind::Ball => eigenvalue.powf((self.dimension as f64 - 1.0) / 4.0),
        }
    }

    pub fn check_len(&self, what: &str, len: usize) -> Result<()> {
        if len != self.modes.len() {
            return Err(Error::Shape(format!(
                "{what} has length {len}, domain has {} modes",
                self.modes.len()
            )));
        }
        Ok(())
    }

    pub fn semigroup_apply(&self, t: f64, coeffs: &[f64]) -> Result<Vec<f64>> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("semigroup time must be non-negative, got {t}")));
        }
        self.check_len("coefficient vector", coeffs.len())?;
        Ok(self
            .modes
            .iter()
            .zip(coeffs)
            .map(|(m, c)| c * (-m.eigenvalue * t).exp())
            .collect())
    }

    pub fn fractional_power_diag(&self, gamma: f64) -> Result<Vec<f64>> {
        if !(gamma >= 0.0) {
            return Err(Error::Domain(format!("fractional exponent must be >= 0, got {gamma}")));
        }
        Ok(self.modes.iter().map(|m| m.eigenvalue.powf(-gamma)).collect())
    }

    pub fn weyl_count(&self, mu: f64) -> usize {
        self.modes.partition_point(|m| m.eigenvalue <= mu)
    }

    /// `|S(t)x|_sup / |x|_{L²}` with the sup taken over the collocation grid.
    pub fn ultracontractivity_witness(&self, t: f64, probe: &[f64]) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("witness time must be positive, got {t}")));
        }
        let norm = probe.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Domain("ultracontractivity probe must be nonzero".into()));
        }
        let evolved = self.semigroup_apply(t, probe)?;
        let field = self.to_grid(&evolved);
        Ok(field.iter().fold(0.0f64, |m, v| m.max(v.abs())) / norm)
    }

    /// Evaluate a coefficient vector at arbitrary points.
    pub fn evaluate(&self, coeffs: &[f64], xi: &[f64]) -> f64 {
        self.modes.iter().zip(coeffs).map(|(m, c)| c * m.eigenfunction(xi)).sum()
    }

    pub fn to_grid(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut ws = Workspace::new(self);
        let mut out = vec![0.0; self.n_grid()];
        self.to_grid_into(coeffs, &mut out, &mut ws);
        out
    }

    pub fn from_grid(&self, values: &[f64]) -> Vec<f64> {
        let mut ws = Workspace::new(self);
        let mut out = vec![0.0; self.n_modes()];
        self.from_grid_into(values, &mut out, &mut ws);
        out
    }

    /// Reconstruct `Σ_k c_k e_k` on the collocation grid.
    pub fn to_grid_into(&self, coeffs: &[f64], out: &mut [f64], ws: &mut Workspace) {
        let (m, p, d) = (self.modes_per_axis, self.grid_per_axis, self.dimension);
        ws.a.clear();
        ws.a.resize(m.pow(d as u32), 0.0);
        for (mode, &c) in self.modes.iter().zip(coeffs) {
            ws.a[mode.tensor] = c;
        }
        let mut shape = vec![m; d];
        for axis in 0..d {
            apply_axis(&ws.a, &shape, axis, &self.synth, p, &mut ws.b);
            shape[axis] = p;
            std::mem::swap(&mut ws.a, &mut ws.b);
        }
        out.copy_from_slice(&ws.a);
    }

    /// Discrete projection `c_k = w Σ_j u(ξ_j) e_k(ξ_j)`; exact inverse of
    /// [`Self::to_grid_into`] on the span of the retained modes.
    pub fn from_grid_into(&self, values: &[f64], out: &mut [f64], ws: &mut Workspace) {
        let (m, p, d) = (self.modes_per_axis, self.grid_per_axis, self.dimension);
        ws.a.clear();
        ws.a.extend_from_slice(values);
        let mut shape = vec![p; d];
        for axis in 0..d {
            apply_axis(&ws.a, &shape, axis, &self.analysis, m, &mut ws.b);
            shape[axis] = m;
            std::mem::swap(&mut ws.a, &mut ws.b);
        }
        for (mode, slot) in self.modes.iter().zip(out.iter_mut()) {
            *slot = ws.a[mode.tensor];
        }
    }
}

/// Scratch buffers for the tensor-product transforms.
#[derive(Clone, Debug, Default)]
pub struct Workspace {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl Workspace {
    pub fn new(domain: &SpectralDomain) -> Self {
        let cap = domain.n_grid().max(domain.n_modes());
        Self { a: Vec::with_capacity(cap), b: Vec::with_capacity(cap) }
    }
}

/// Contract `matrix` (`rows × shape[axis]`, row-major) against one tensor axis.
fn apply_axis(
    input: &[f64],
    shape: &[usize],
    axis: usize,
    matrix: &[f64],
    rows: usize,
    out: &mut Vec<f64>,
) {
    let n = shape[axis];
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    out.clear();
    out.resize(outer * rows * inner, 0.0);
    for o in 0..outer {
        let src = &input[o * n * inner..(o + 1) * n * inner];
        let dst = &mut out[o * rows * inner..(o + 1) * rows * inner];
        for r in 0..rows {
            let row = &matrix[r * n..(r + 1) * n];
            let target = &mut dst[r * inner..(r + 1) * inner];
            for (c, &w) in row.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let line = &src[c * inner..(c + 1) * inner];
                for (t, &s) in target.iter_mut().zip(line) {
                    *t += w * s;
                }
            }
        }
    }
}

/// Strict lower bound on the coloring exponent for a continuous stochastic
/// convolution via factorization with exponent `alpha`.
pub fn regularity_threshold(dimension: usize, kind: DomainKind, alpha: f64) -> Result<f64> {
    if !(1..=3).contains(&dimension) {
        return Err(Error::Domain(format!("dimension {dimension} unsupported (1..=3)")));
    }
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::Domain(format!("factorization exponent {alpha} must lie in (0, 1/2)")));
    }
    let d = dimension as f64;
    Ok(match kind {
        DomainKind::Hypercube => (d - 2.0) / 4.0 + alpha,
        DomainKind::Ball => (2.0 * d - 3.0) / 4.0 + alpha,
    })
}

/// Strict comparison `gamma > gamma_min` with a shared tie tolerance.
pub fn exceeds_threshold(gamma: f64, gamma_min: f64) -> bool {
    gamma - gamma_min > THRESHOLD_EPS
}
