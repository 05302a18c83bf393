//! Diagonal coloured noise in the eigenbasis: exact Ornstein–Uhlenbeck
//! increments, the stochastic convolution, its regularity diagnostics and the
//! factorization representation.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::rng::{stream, StreamTag};
use crate::spectral::{exceeds_threshold, regularity_threshold, DomainKind, Mode, SpectralDomain, Workspace};
use crate::stats::MeanAccumulator;
use crate::time::TimeGrid;

#[derive(Clone, Debug)]
pub struct NoiseModel {
    gamma: f64,
    alpha: f64,
    amplitude: f64,
    seed: u64,
    unit_b: Vec<f64>,
    b: Vec<f64>,
}

impl NoiseModel {
    pub fn new(domain: &SpectralDomain, gamma: f64, alpha: f64, seed: u64) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::Config(format!("noise gamma must be finite and >= 0, got {gamma}")));
        }
        if !(alpha > 0.0 && alpha < 0.5) {
            return Err(Error::Config(format!("noise alpha must lie in (0, 1/2), got {alpha}")));
        }
        let unit_b = domain.fractional_power_diag(gamma)?;
        Ok(Self { gamma, alpha, amplitude: 1.0, seed, b: unit_b.clone(), unit_b })
    }

    /// Overall multiplier on `B`; zero switches the noise off.
    pub fn with_amplitude(mut self, amplitude: f64) -> Result<Self> {
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            return Err(Error::Config(format!("noise amplitude must be finite and >= 0, got {amplitude}")));
        }
        self.b = self.unit_b.iter().map(|b| b * amplitude).collect();
        self.amplitude = amplitude;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn b_coeffs(&self) -> &[f64] {
        &self.b
    }

    pub fn is_regular(&self, domain: &SpectralDomain) -> Result<bool> {
        let gamma_min = regularity_threshold(domain.dimension(), domain.kind(), self.alpha)?;
        Ok(exceeds_threshold(self.gamma, gamma_min))
    }
}

/// Joint law of `I = ∫ e^{−μ(t_{n+1}−s)} dW` and `ΔW` over one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OuTransition {
    pub decay: f64,
    pub var_ou: f64,
    pub cov: f64,
    pub dt: f64,
}

impl OuTransition {
    pub fn new(mu: f64, dt: f64) -> Self {
        Self {
            decay: (-mu * dt).exp(),
            var_ou: -(-2.0 * mu * dt).exp_m1() / (2.0 * mu),
            cov: -(-mu * dt).exp_m1() / mu,
            dt,
        }
    }

    /// `(I, ΔW)` from two independent standard normals; `η1` drives `I` alone.
    #[inline]
    pub fn pair(&self, eta1: f64, eta2: f64) -> (f64, f64) {
        let s = self.var_ou.sqrt();
        let resid = (self.dt - self.cov * self.cov / self.var_ou).max(0.0).sqrt();
        (s * eta1, self.cov / s * eta1 + resid * eta2)
    }
}

/// Cross-mode factor `Cov(∫e^{−μ_k(t−s)}dW_j, I_j) = (1 − e^{−(μ_k+μ_j)Δt})/(μ_k+μ_j)`.
pub fn ou_cross_cov(mu_k: f64, mu_j: f64, dt: f64) -> f64 {
    let m = mu_k + mu_j;
    -(-m * dt).exp_m1() / m
}

fn mode_key(mode: &Mode) -> u64 {
    mode.index.iter().fold(0u64, |acc, &k| (acc << 20) | k as u64)
}

/// Unit-covariance OU increments `I_{n,k}` and Brownian increments of one path,
/// stored step-major. Each mode draws from its own stream so that low modes
/// coincide across truncation levels.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseIncrements {
    n_modes: usize,
    grid: TimeGrid,
    ou: Vec<f64>,
    dw: Vec<f64>,
}

impl NoiseIncrements {
    pub fn sample(domain: &SpectralDomain, seed: u64, grid: TimeGrid, path: u64) -> Self {
        let (n_modes, steps, dt) = (domain.n_modes(), grid.n_steps, grid.dt());
        let mut ou = vec![0.0; n_modes * steps];
        let mut dw = vec![0.0; n_modes * steps];
        for (k, mode) in domain.modes().iter().enumerate() {
            let law = OuTransition::new(mode.eigenvalue, dt);
            let mut rng = stream(seed, StreamTag::Noise, path, mode_key(mode));
            for n in 0..steps {
                let e1: f64 = StandardNormal.sample(&mut rng);
                let e2: f64 = StandardNormal.sample(&mut rng);
                let (i, w) = law.pair(e1, e2);
                ou[n * n_modes + k] = i;
                dw[n * n_modes + k] = w;
            }
        }
        Self { n_modes, grid, ou, dw }
    }

    pub fn zeros(n_modes: usize, grid: TimeGrid) -> Self {
        let len = n_modes * grid.n_steps;
        Self { n_modes, grid, ou: vec![0.0; len], dw: vec![0.0; len] }
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn ou(&self, n: usize) -> &[f64] {
        &self.ou[n * self.n_modes..(n + 1) * self.n_modes]
    }

    pub fn dw(&self, n: usize) -> &[f64] {
        &self.dw[n * self.n_modes..(n + 1) * self.n_modes]
    }

    /// Merge `factor` consecutive fine steps into one coarse step, exactly.
    pub fn coarsen(&self, domain: &SpectralDomain, factor: usize) -> Result<Self> {
        if factor == 0 || self.grid.n_steps % factor != 0 {
            return Err(Error::Grid(format!(
                "cannot coarsen {} steps by a factor of {factor}",
                self.grid.n_steps
            )));
        }
        let grid = TimeGrid::new(self.grid.n_steps / factor, self.grid.horizon)?;
        let dt_fine = self.grid.dt();
        let mut out = Self::zeros(self.n_modes, grid);
        for (k, mu) in domain.eigenvalues().enumerate() {
            let decay = (-mu * dt_fine).exp();
            for c in 0..grid.n_steps {
                let (mut i, mut w) = (0.0, 0.0);
                for f in c * factor..(c + 1) * factor {
                    i = decay * i + self.ou[f * self.n_modes + k];
                    w += self.dw[f * self.n_modes + k];
                }
                out.ou[c * self.n_modes + k] = i;
                out.dw[c * self.n_modes + k] = w;
            }
        }
        Ok(out)
    }
}

/// Mode coefficients of `W_A(t_n)` on a uniform grid; row `n` is time `t_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvolutionSample {
    pub grid: TimeGrid,
    pub n_modes: usize,
    pub coeffs: Vec<f64>,
}

impl ConvolutionSample {
    pub fn at(&self, n: usize) -> &[f64] {
        &self.coeffs[n * self.n_modes..(n + 1) * self.n_modes]
    }
}

pub fn convolution_from_increments(
    domain: &SpectralDomain,
    noise: &NoiseModel,
    increments: &NoiseIncrements,
) -> ConvolutionSample {
    let grid = increments.grid();
    let n = domain.n_modes();
    let decay: Vec<f64> = domain.eigenvalues().map(|mu| (-mu * grid.dt()).exp()).collect();
    let mut coeffs = vec![0.0; (grid.n_steps + 1) * n];
    for step in 0..grid.n_steps {
        let (prev, next) = coeffs.split_at_mut((step + 1) * n);
        let prev = &prev[step * n..];
        for k in 0..n {
            next[k] = decay[k] * prev[k] + noise.b[k] * increments.ou(step)[k];
        }
    }
    ConvolutionSample { grid, n_modes: n, coeffs }
}

pub fn sample_convolution(
    domain: &SpectralDomain,
    noise: &NoiseModel,
    n_steps: usize,
    horizon: f64,
    path: u64,
) -> Result<ConvolutionSample> {
    domain.check_len("noise covariance", noise.b.len())?;
    let grid = TimeGrid::new(n_steps, horizon)?;
    let inc = NoiseIncrements::sample(domain, noise.seed, grid, path);
    Ok(convolution_from_increments(domain, noise, &inc))
}

/// `∫_0^t Tr[S(s)BB*S(s)*] ds` over the retained modes.
pub fn trace_summand(domain: &SpectralDomain, noise: &NoiseModel, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    domain
        .eigenvalues()
        .zip(&noise.b)
        .map(|(mu, b)| b * b * OuTransition::new(mu, t).var_ou)
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeriesVerdict {
    /// Exponent `e` of `b_k² μ_k^{2α−1} c_k² = μ_k^e`.
    pub exponent: f64,
    /// Weyl weighting: the sum converges iff `e + d/2 < 0`.
    pub weyl_density: f64,
    pub threshold: f64,
    pub converges: bool,
    pub truncated_sum: f64,
}

pub fn series_condition_v(domain: &SpectralDomain, noise: &NoiseModel) -> Result<SeriesVerdict> {
    let d = domain.dimension() as f64;
    let threshold = regularity_threshold(domain.dimension(), domain.kind(), noise.alpha)?;
    let growth = match domain.kind() {
        DomainKind::Hypercube => 0.0,
        DomainKind::Ball => (d - 1.0) / 2.0,
    };
    let exponent = 2.0 * noise.alpha - 1.0 - 2.0 * noise.gamma + growth;
    let weyl_density = d / 2.0;
    // e + d/2 = −2(γ − γ_min); the tie tolerance matches the threshold check.
    let converges = -(exponent + weyl_density) > 2.0 * crate::spectral::THRESHOLD_EPS;
    let truncated_sum = domain
        .eigenvalues()
        .map(|mu| {
            let b = mu.powf(-noise.gamma);
            let c = domain.eigenfunction_growth(mu);
            b * b * mu.powf(2.0 * noise.alpha - 1.0) * c * c
        })
        .sum();
    Ok(SeriesVerdict { exponent, weyl_density, threshold, converges, truncated_sum })
}

/// Partial sums of the series in d = 1 after `counts[i]` modes; used to watch
/// divergence far beyond any simulated truncation.
pub fn series_partial_sums_1d(kind: DomainKind, alpha: f64, gamma: f64, counts: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(counts.len());
    let mut acc = 0.0;
    let mut k = 0usize;
    for &limit in counts {
        while k < limit {
            k += 1;
            let mu = (k * k) as f64;
            // In d = 1 the ball growth factor μ^{(d−1)/4} is 1 as well.
            let _ = kind;
            acc += mu.powf(2.0 * alpha - 1.0 - 2.0 * gamma);
        }
        out.push(acc);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentRow {
    pub truncation: usize,
    pub paths: usize,
    pub p: f64,
    pub estimate: f64,
    pub stderr: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct MomentStudy {
    pub dimension: usize,
    pub gamma: f64,
    pub alpha: f64,
    pub amplitude: f64,
    pub seed: u64,
    pub n_paths: usize,
    pub p: f64,
    pub grid: TimeGrid,
}

/// `E sup_{t,ξ} |W_A|^p` at each truncation (modes per axis). Paths at
/// different truncations share the noise of their common modes.
pub fn supnorm_moment_study(study: &MomentStudy, truncations: &[usize]) -> Result<Vec<MomentRow>> {
    if !(study.p >= 2.0) {
        return Err(Error::Config(format!("moment order must be >= 2, got {}", study.p)));
    }
    let mut rows = Vec::with_capacity(truncations.len());
    for &m in truncations {
        let domain = SpectralDomain::hypercube(study.dimension, m)?;
        let noise = NoiseModel::new(&domain, study.gamma, study.alpha, study.seed)?
            .with_amplitude(study.amplitude)?;
        let sups: Vec<f64> = (0..study.n_paths as u64)
            .into_par_iter()
            .map(|path| {
                let inc = NoiseIncrements::sample(&domain, noise.seed, study.grid, path);
                let w = convolution_from_increments(&domain, &noise, &inc);
                let mut ws = Workspace::new(&domain);
                let mut field = vec![0.0; domain.n_grid()];
                let mut sup = 0.0f64;
                for n in 1..=study.grid.n_steps {
                    domain.to_grid_into(w.at(n), &mut field, &mut ws);
                    sup = field.iter().fold(sup, |s, v| s.max(v.abs()));
                }
                sup.powf(study.p)
            })
            .collect();
        let acc = MeanAccumulator::from_slice(&sups);
        rows.push(MomentRow {
            truncation: domain.n_modes(),
            paths: study.n_paths,
            p: study.p,
            estimate: acc.mean(),
            stderr: acc.stderr(),
        });
    }
    Ok(rows)
}

pub fn factorization_prefactor(alpha: f64) -> f64 {
    (PI * alpha).sin() / PI
}

/// 16-point Gauss–Legendre nodes and weights on `[0, 1]`.
fn gauss_legendre_unit() -> [(f64, f64); 16] {
    const X: [f64; 8] = [
        0.0950125098376374, 0.2816035507792589, 0.4580167776572274, 0.6178762444026438,
        0.7554044083550030, 0.8656312023878318, 0.9445750230732326, 0.9894009349916499,
    ];
    const W: [f64; 8] = [
        0.1894506104550685, 0.1826034150449236, 0.1691565193950025, 0.1495959888165767,
        0.1246289712555339, 0.0951585116824928, 0.0622535239386479, 0.0271524594117541,
    ];
    let mut out = [(0.0, 0.0); 16];
    for i in 0..8 {
        out[2 * i] = (0.5 * (1.0 - X[i]), 0.5 * W[i]);
        out[2 * i + 1] = (0.5 * (1.0 + X[i]), 0.5 * W[i]);
    }
    out
}

/// `∫_a^{a+h} r^{−α} g(r) dr` with `g` smooth; the endpoint singularity at
/// `a = 0` is removed by `r = h v^{1/(1−α)}`.
fn singular_integral(a: f64, h: f64, alpha: f64, g: impl Fn(f64) -> f64) -> f64 {
    let gl = gauss_legendre_unit();
    if a == 0.0 {
        let q = 1.0 / (1.0 - alpha);
        gl.iter()
            .map(|&(v, w)| {
                let r = h * v.powf(q);
                w * g(r)
            })
            .sum::<f64>()
            * h.powf(1.0 - alpha)
            * q
    } else {
        gl.iter().map(|&(v, w)| {
            let r = a + h * v;
            w * r.powf(-alpha) * g(r)
        }).sum::<f64>() * h
    }
}

/// `Y(σ_m) = ∫_0^{σ_m} (σ_m − s)^{−α} S(σ_m − s) B dW(s)`, each cell's integral
/// replaced by its conditional expectation given that cell's `(I, ΔW)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorizationIntegrand {
    pub grid: TimeGrid,
    pub n_modes: usize,
    pub values: Vec<f64>,
}

pub fn sample_factorization_integrand(
    domain: &SpectralDomain,
    noise: &NoiseModel,
    increments: &NoiseIncrements,
    alpha: f64,
) -> Result<FactorizationIntegrand> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::Domain(format!("factorization exponent {alpha} must lie in (0, 1/2)")));
    }
    let grid = increments.grid();
    let (n, steps, dt) = (domain.n_modes(), grid.n_steps, grid.dt());
    let mut values = vec![0.0; (steps + 1) * n];
    for (k, mu) in domain.eigenvalues().enumerate() {
        let b = noise.b[k];
        if b == 0.0 {
            continue;
        }
        let law = OuTransition::new(mu, dt);
        let det = law.var_ou * dt - law.cov * law.cov;
        // Projection coefficients on (I, ΔW) for each lag between cell and target.
        let coef: Vec<(f64, f64)> = (0..steps)
            .map(|lag| {
                let a = lag as f64 * dt;
                let with_ou = singular_integral(a, dt, alpha, |r| (-mu * r).exp() * (-mu * (r - a)).exp());
                let with_dw = singular_integral(a, dt, alpha, |r| (-mu * r).exp());
                if det <= 0.0 {
                    (with_ou / law.var_ou, 0.0)
                } else {
                    (
                        (dt * with_ou - law.cov * with_dw) / det,
                        (law.var_ou * with_dw - law.cov * with_ou) / det,
                    )
                }
            })
            .collect();
        for m in 1..=steps {
            let y: f64 = (0..m)
                .map(|cell| {
                    let (c1, c2) = coef[m - 1 - cell];
                    c1 * increments.ou(cell)[k] + c2 * increments.dw(cell)[k]
                })
                .sum();
            values[m * n + k] = b * y;
        }
    }
    Ok(FactorizationIntegrand { grid, n_modes: n, values })
}

/// `W_A(t) = (sin πα / π) ∫_0^t S(t−σ)(t−σ)^{α−1} Y(σ) dσ`: the power factor is
/// integrated exactly per cell, the exponential taken at the cell midpoint.
pub fn factorization_reconstruct(
    domain: &SpectralDomain,
    y: &FactorizationIntegrand,
    alpha: f64,
) -> Result<ConvolutionSample> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::Domain(format!("factorization exponent {alpha} must lie in (0, 1/2)")));
    }
    domain.check_len("factorization integrand", y.n_modes)?;
    let (n, steps, dt) = (y.n_modes, y.grid.n_steps, y.grid.dt());
    let pref = factorization_prefactor(alpha);
    let mut coeffs = vec![0.0; (steps + 1) * n];
    for (k, mu) in domain.eigenvalues().enumerate() {
        for m in 1..=steps {
            let mut acc = 0.0;
            for cell in 0..m {
                let r_lo = (m - cell - 1) as f64 * dt;
                let r_hi = r_lo + dt;
                let w = (-mu * 0.5 * (r_lo + r_hi)).exp() * (r_hi.powf(alpha) - r_lo.powf(alpha)) / alpha;
                let mean = 0.5 * (y.values[cell * n + k] + y.values[(cell + 1) * n + k]);
                acc += w * mean;
            }
            coeffs[m * n + k] = pref * acc;
        }
    }
    Ok(ConvolutionSample { grid: y.grid, n_modes: n, coeffs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn trace_examples() {
        let d = SpectralDomain::hypercube(1, 40).unwrap();
        let noise = NoiseModel::new(&d, 5.0, 0.1, 1).unwrap();
        assert_eq!(trace_summand(&d, &noise, 0.0), 0.0);
        let full = trace_summand(&d, &noise, 1.0);
        let head = SpectralDomain::hypercube(1, 10).unwrap();
        let head_noise = NoiseModel::new(&head, 5.0, 0.1, 1).unwrap();
        assert!(full - trace_summand(&head, &head_noise, 1.0) < 1e-6);
        let one = SpectralDomain::hypercube(1, 1).unwrap();
        let n1 = NoiseModel::new(&one, 0.0, 0.1, 1).unwrap();
        assert_relative_eq!(trace_summand(&one, &n1, 60.0), 0.5);
    }

    #[test]
    fn series_examples() {
        let hyper = SpectralDomain::hypercube(2, 8).unwrap();
        let ball = SpectralDomain::ball_surrogate(2, 8).unwrap();
        let v = |d: &SpectralDomain, g, a| series_condition_v(d, &NoiseModel::new(d, g, a, 0).unwrap()).unwrap();
        assert!(v(&hyper, 0.2, 0.1).converges);
        assert!(!v(&ball, 0.2, 0.1).converges);
        let line = SpectralDomain::hypercube(1, 8).unwrap();
        let verdict = v(&line, 0.0, 0.49);
        assert!(!verdict.converges);
        assert_relative_eq!(verdict.exponent + verdict.weyl_density - 1.0, -0.52, epsilon = 1e-12);
        // Partial sums keep growing by a roughly constant factor per decade.
        let sums = series_partial_sums_1d(DomainKind::Hypercube, 0.49, 0.0, &[1_000, 10_000, 100_000]);
        assert!(sums[1] / sums[0] > 1.2 && sums[2] / sums[1] > 1.2, "{sums:?}");
    }

    #[test]
    fn zero_noise_gives_zero_sample() {
        let d = SpectralDomain::hypercube(1, 4).unwrap();
        let noise = NoiseModel::new(&d, 0.5, 0.1, 3).unwrap().with_amplitude(0.0).unwrap();
        let w = sample_convolution(&d, &noise, 10, 1.0, 0).unwrap();
        assert!(w.coeffs.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn sampling_is_deterministic() {
        let d = SpectralDomain::hypercube(1, 6).unwrap();
        let noise = NoiseModel::new(&d, 0.5, 0.1, 42).unwrap();
        let a = sample_convolution(&d, &noise, 20, 1.0, 5).unwrap();
        let b = sample_convolution(&d, &noise, 20, 1.0, 5).unwrap();
        let c = sample_convolution(&d, &noise, 20, 1.0, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.at(0).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn low_modes_shared_across_truncations() {
        let grid = TimeGrid::new(8, 1.0).unwrap();
        let small = SpectralDomain::hypercube(2, 3).unwrap();
        let big = SpectralDomain::hypercube(2, 5).unwrap();
        let a = NoiseIncrements::sample(&small, 9, grid, 2);
        let b = NoiseIncrements::sample(&big, 9, grid, 2);
        for (k, mode) in small.modes().iter().enumerate() {
            let j = big.modes().iter().position(|m| m.index == mode.index).unwrap();
            assert_eq!(a.ou(3)[k], b.ou(3)[j]);
        }
    }

    #[test]
    fn coarsening_matches_direct_recursion() {
        let d = SpectralDomain::hypercube(1, 3).unwrap();
        let noise = NoiseModel::new(&d, 0.0, 0.1, 1).unwrap();
        let fine = NoiseIncrements::sample(&d, 1, TimeGrid::new(8, 1.0).unwrap(), 0);
        let coarse = fine.coarsen(&d, 4).unwrap();
        let wf = convolution_from_increments(&d, &noise, &fine);
        let wc = convolution_from_increments(&d, &noise, &coarse);
        for k in 0..3 {
            assert_relative_eq!(wf.at(4)[k], wc.at(1)[k], epsilon = 1e-14);
            assert_relative_eq!(wf.at(8)[k], wc.at(2)[k], epsilon = 1e-14);
        }
        assert!(fine.coarsen(&d, 3).is_err());
    }

    #[test]
    fn singular_quadrature_is_accurate() {
        // ∫_0^h r^{-α} dr and ∫_h^{2h} r^{-α} dr in closed form.
        let (h, a) = (0.01, 0.3);
        assert_relative_eq!(singular_integral(0.0, h, a, |_| 1.0), h.powf(1.0 - a) / (1.0 - a), max_relative = 1e-13);
        let exact = ((2.0 * h).powf(1.0 - a) - h.powf(1.0 - a)) / (1.0 - a);
        assert_relative_eq!(singular_integral(h, h, a, |_| 1.0), exact, max_relative = 1e-12);
    }

    #[test]
    fn factorization_prefactor_at_half() {
        assert_relative_eq!(factorization_prefactor(0.5), 1.0 / PI);
        let d = SpectralDomain::hypercube(1, 1).unwrap();
        let noise = NoiseModel::new(&d, 0.0, 0.1, 1).unwrap();
        let zero = NoiseIncrements::zeros(1, TimeGrid::new(10, 1.0).unwrap());
        let y = sample_factorization_integrand(&d, &noise, &zero, 0.1).unwrap();
        let w = factorization_reconstruct(&d, &y, 0.1).unwrap();
        assert!(w.coeffs.iter().all(|v| *v == 0.0));
        assert!(factorization_reconstruct(&d, &y, 0.6).is_err());
    }
}
