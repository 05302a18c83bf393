//! Reference solutions computed without the library's own closed forms:
//! direct sums, generic RK4 integration and fixed-point sweeps.

#![allow(dead_code)]

use std::f64::consts::PI;

/// `h √(2/π) Σ_j sin(k ξ_j)` on `P` interior points: the discrete projection
/// of the constant field 1 onto the `k`-th sine mode.
pub fn discrete_unit_coeff(k: usize, points: usize) -> f64 {
    let h = PI / (points + 1) as f64;
    (1..=points).map(|j| (k as f64 * j as f64 * h).sin()).sum::<f64>() * h * (2.0 / PI).sqrt()
}

/// `⟨1, e_k⟩` on `[0, π]`.
pub fn exact_unit_coeff(k: usize) -> f64 {
    (2.0 / PI).sqrt() * (1.0 - (k as f64 * PI).cos()) / k as f64
}

pub fn ou_variance(mu: f64, b: f64, t: f64) -> f64 {
    b * b * (1.0 - (-2.0 * mu * t).exp()) / (2.0 * mu)
}

fn rk4<const N: usize>(y: &mut [f64; N], t: f64, h: f64, f: impl Fn(f64, &[f64; N]) -> [f64; N]) {
    let add = |a: &[f64; N], b: &[f64; N], s: f64| -> [f64; N] {
        let mut o = *a;
        o.iter_mut().zip(b).for_each(|(x, y)| *x += s * y);
        o
    };
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, &add(y, &k1, 0.5 * h));
    let k3 = f(t + 0.5 * h, &add(y, &k2, 0.5 * h));
    let k4 = f(t + h, &add(y, &k3, h));
    for i in 0..N {
        y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// Mode-wise data of `dX_k = (−ν_k X_k + g c_k u)dt + b_k dW_k` with cost
/// `E∫[½w|X|² + ½ρu²]dt`, `G = 0`.
#[derive(Clone, Debug)]
pub struct LqReference {
    pub nu: Vec<f64>,
    pub gc: Vec<f64>,
    pub b: Vec<f64>,
    pub x0: Vec<f64>,
    pub w: f64,
    pub rho: f64,
    pub horizon: f64,
    pub n_steps: usize,
    pub substeps: usize,
}

impl LqReference {
    /// `d = 1`, `M` modes, `f = −rate σ + gain u`, `b_k = μ_k^{−γ}`.
    pub fn interval(m: usize, rate: f64, gain: f64, gamma: f64, x0: &[f64], horizon: f64, n_steps: usize) -> Self {
        let mut x = x0.to_vec();
        x.resize(m, 0.0);
        Self {
            nu: (1..=m).map(|k| (k * k) as f64 + rate).collect(),
            gc: (1..=m).map(|k| gain * discrete_unit_coeff(k, m)).collect(),
            b: (1..=m).map(|k| ((k * k) as f64).powf(-gamma)).collect(),
            x0: x,
            w: 1.0,
            rho: 1.0,
            horizon,
            n_steps,
            substeps: 64,
        }
    }

    fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    /// Mean trajectory at the grid nodes, row-major `(n_steps + 1) × M`.
    pub fn mean(&self, u: &[f64]) -> Vec<f64> {
        let m = self.nu.len();
        let h = self.dt() / self.substeps as f64;
        let mut out = vec![0.0; (self.n_steps + 1) * m];
        for k in 0..m {
            let mut y = [self.x0[k]];
            out[k] = y[0];
            for (n, &un) in u.iter().enumerate() {
                for s in 0..self.substeps {
                    let t = n as f64 * self.dt() + s as f64 * h;
                    rk4(&mut y, t, h, |_, y| [-self.nu[k] * y[0] + self.gc[k] * un]);
                }
                out[(n + 1) * m + k] = y[0];
            }
        }
        out
    }

    /// `J(u)` with the mean, the variance and the running cost integrated
    /// together by RK4.
    pub fn cost(&self, u: &[f64]) -> f64 {
        let h = self.dt() / self.substeps as f64;
        let mut j = 0.5 * self.rho * self.dt() * u.iter().map(|v| v * v).sum::<f64>();
        for k in 0..self.nu.len() {
            let (nu, gc, b2) = (self.nu[k], self.gc[k], self.b[k] * self.b[k]);
            let mut y = [self.x0[k], 0.0, 0.0];
            for (n, &un) in u.iter().enumerate() {
                for s in 0..self.substeps {
                    let t = n as f64 * self.dt() + s as f64 * h;
                    rk4(&mut y, t, h, |_, y| {
                        [-nu * y[0] + gc * un, -2.0 * nu * y[1] + b2, 0.5 * self.w * (y[0] * y[0] + y[1])]
                    });
                }
            }
            j += y[2];
        }
        j
    }

    /// `p_k(t) = a_k(t) X_k(t) + c_k(t)` with `a' = 2νa − w`, `c' = νc − a g c_k u`,
    /// `a(T) = c(T) = 0`, integrated backwards. Returns `(a, c)` at the nodes.
    pub fn adjoint_coefficients(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let m = self.nu.len();
        let h = self.dt() / self.substeps as f64;
        let (mut a_out, mut c_out) = (vec![0.0; (self.n_steps + 1) * m], vec![0.0; (self.n_steps + 1) * m]);
        for k in 0..m {
            let (nu, gc) = (self.nu[k], self.gc[k]);
            // In reversed time τ = T − t: da/dτ = w − 2νa, dc/dτ = a g c_k u − νc.
            let mut y = [0.0, 0.0];
            for n in (0..self.n_steps).rev() {
                for s in 0..self.substeps {
                    let tau = (self.n_steps - 1 - n) as f64 * self.dt() + s as f64 * h;
                    rk4(&mut y, tau, h, |_, y| [self.w - 2.0 * nu * y[0], y[0] * gc * u[n] - nu * y[1]]);
                }
                a_out[n * m + k] = y[0];
                c_out[n * m + k] = y[1];
            }
        }
        (a_out, c_out)
    }

    /// Forward–backward sweep for the optimal piecewise-constant control:
    /// `u_n = Π_[lo,hi](−(1/ρ) avg_cell Σ_k g c_k P_k)` with `P' = νP − w m`.
    pub fn optimal_control(&self, lo: f64, hi: f64) -> Vec<f64> {
        let m = self.nu.len();
        let (steps, sub) = (self.n_steps, self.substeps);
        let h = self.dt() / sub as f64;
        let mut u = vec![0.0; steps];
        for _ in 0..500 {
            // Mean on the fine grid.
            let mut fine = vec![0.0; (steps * sub + 1) * m];
            for k in 0..m {
                let mut y = [self.x0[k]];
                fine[k] = y[0];
                for i in 0..steps * sub {
                    rk4(&mut y, i as f64 * h, h, |_, y| [-self.nu[k] * y[0] + self.gc[k] * u[i / sub]]);
                    fine[(i + 1) * m + k] = y[0];
                }
            }
            // Costate backwards; m interpolated linearly inside each substep.
            let mut gp = vec![0.0; steps * sub + 1];
            for k in 0..m {
                let mut y = [0.0];
                gp[steps * sub] += self.gc[k] * y[0];
                for i in (0..steps * sub).rev() {
                    let (m_hi, m_lo) = (fine[(i + 1) * m + k], fine[i * m + k]);
                    rk4(&mut y, 0.0, h, |s, y| {
                        let mt = m_hi + (m_lo - m_hi) * s / h;
                        [self.w * mt - self.nu[k] * y[0]]
                    });
                    gp[i] += self.gc[k] * y[0];
                }
            }
            let mut change = 0.0f64;
            for n in 0..steps {
                // Simpson average of Σ g c_k P_k over the cell.
                let seg = &gp[n * sub..=(n + 1) * sub];
                let avg = seg
                    .iter()
                    .enumerate()
                    .map(|(i, v)| v * if i == 0 || i == sub { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 })
                    .sum::<f64>()
                    / (3.0 * sub as f64);
                let target = (-avg / self.rho).clamp(lo, hi);
                change = change.max((target - u[n]).abs());
                u[n] = 0.5 * u[n] + 0.5 * target;
            }
            if change < 1e-12 {
                break;
            }
        }
        u
    }
}
