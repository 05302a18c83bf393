//! Experiment configuration: one JSON document, validated before any work.

use serde::{Deserialize, Serialize};

use crate::adjoint::RegressionSpec;
use crate::catalog::{DomainSpec, NoiseSpec, ProblemSpec};
use crate::cost::CostSpec;
use crate::error::{Error, Result};
use crate::nonlinearity::{ControlSpace, DriftKind};
use crate::variation::SpikeTemplate;

/// A catalog name or a full inline problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProblemRef {
    Named(String),
    Inline(Box<ProblemSpec>),
}

/// Control used by the checks that take one as input.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControlChoice {
    #[default]
    Zero,
    Constant { value: f64 },
    Values { values: Vec<f64> },
    /// The exact optimum of a linear–quadratic problem.
    LqOracle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Hamiltonian gaps below `−smp` count as violations.
    pub smp: f64,
    /// Largest admissible violating fraction for `smp-check` to pass.
    pub smp_fraction: f64,
    pub duality_floor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { smp: 1e-3, smp_fraction: 0.0, duality_floor: 1e-12 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseCheckKnobs {
    /// Modes per axis for the sup-norm moment study.
    pub truncations: Vec<usize>,
    pub moment: f64,
    pub n_steps: usize,
}

impl Default for NoiseCheckKnobs {
    fn default() -> Self {
        Self { truncations: vec![8, 16, 32, 64], moment: 2.0, n_steps: 64 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpikeKnobs {
    /// Spike widths as fractions of the horizon.
    pub epsilons: Vec<f64>,
    pub spike: SpikeTemplate,
}

impl Default for SpikeKnobs {
    fn default() -> Self {
        Self { epsilons: (3..=6).map(|k| 0.5f64.powi(k)).collect(), spike: SpikeTemplate { t0: None, w: 1.0 } }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DescentKnobs {
    pub iterations: usize,
    pub step: f64,
    pub max_halvings: usize,
    pub stagnation_window: usize,
}

impl Default for DescentKnobs {
    fn default() -> Self {
        Self { iterations: 50, step: 0.5, max_halvings: 5, stagnation_window: 5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateKnobs {
    /// Paths exported in full (CSV and binary).
    pub export_paths: usize,
}

impl Default for SimulateKnobs {
    fn default() -> Self {
        Self { export_paths: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub problem: Option<ProblemRef>,
    /// Overrides applied on top of the problem.
    #[serde(default)]
    pub domain: Option<DomainSpec>,
    #[serde(default)]
    pub drift: Option<DriftKind>,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
    #[serde(default)]
    pub cost: Option<CostSpec>,
    #[serde(default)]
    pub control_space: Option<ControlSpace>,
    #[serde(default)]
    pub regression: Option<RegressionSpec>,
    #[serde(default)]
    pub n_steps: Option<usize>,
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default)]
    pub threads: Option<usize>,
    /// Moment exponent of the forward a-priori bound.
    #[serde(default = "default_r")]
    pub r: f64,
    /// Outer exponent of the adjoint weighted norms, in (1, 2).
    #[serde(default = "default_r_prime")]
    pub r_prime: f64,
    /// Sobolev index `s` of `V = W^{s,2}`; defaults to `d/2 + 1/2`.
    #[serde(default)]
    pub sobolev_index: Option<f64>,
    #[serde(default)]
    pub control: ControlChoice,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub simulate: SimulateKnobs,
    #[serde(default)]
    pub noise_check: NoiseCheckKnobs,
    #[serde(default)]
    pub spike_orders: SpikeKnobs,
    #[serde(default)]
    pub descent: DescentKnobs,
}

fn default_paths() -> usize {
    200
}
fn default_r() -> f64 {
    4.0
}
fn default_r_prime() -> f64 {
    1.5
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn named(problem: &str) -> Self {
        serde_json::from_value(serde_json::json!({ "problem": problem })).expect("minimal config")
    }

    fn base(&self) -> Result<Option<ProblemSpec>> {
        match &self.problem {
            None => Ok(None),
            Some(ProblemRef::Named(name)) => ProblemSpec::catalog(name).map(Some),
            Some(ProblemRef::Inline(spec)) => Ok(Some((**spec).clone())),
        }
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec> {
        let base = self.base()?;
        let missing = |what: &str| {
            Error::Config(format!("`{what}` is required when no `problem` is given (name one of the catalog or inline it)"))
        };
        let mut spec = match base {
            Some(spec) => spec,
            None => ProblemSpec {
                domain: self.domain.clone().ok_or_else(|| missing("domain"))?,
                drift: self.drift.ok_or_else(|| missing("drift"))?,
                noise: self.noise.clone().ok_or_else(|| missing("noise"))?,
                cost: CostSpec::default(),
                horizon: 1.0,
                n_steps: self.n_steps.ok_or_else(|| missing("n_steps"))?,
                initial: Vec::new(),
                control_space: ControlSpace::default(),
                regression: RegressionSpec::default(),
            },
        };
        if let Some(d) = &self.domain {
            spec.domain = d.clone();
        }
        if let Some(d) = self.drift {
            spec.drift = d;
        }
        if let Some(n) = &self.noise {
            spec.noise = n.clone();
        }
        if let Some(c) = &self.cost {
            spec.cost = c.clone();
        }
        if let Some(c) = &self.control_space {
            spec.control_space = c.clone();
        }
        if let Some(r) = &self.regression {
            spec.regression = r.clone();
        }
        if let Some(n) = self.n_steps {
            spec.n_steps = n;
        }
        if let Some(t) = self.horizon {
            spec.horizon = t;
        }
        if spec.domain.sobolev_index.is_none() {
            spec.domain.sobolev_index = self.sobolev_index;
        }
        Ok(spec)
    }

    /// Domain and noise only, for checks that never simulate.
    pub fn noise_setting(&self) -> Result<(DomainSpec, NoiseSpec)> {
        let base = self.base()?;
        let domain = self.domain.clone().or_else(|| base.as_ref().map(|b| b.domain.clone()));
        let noise = self.noise.clone().or_else(|| base.as_ref().map(|b| b.noise.clone()));
        match (domain, noise) {
            (Some(d), Some(n)) => Ok((d, n)),
            _ => Err(Error::Config("noise-check needs `domain` and `noise` (directly or through `problem`)".into())),
        }
    }

    /// Cross-field checks with messages that say what to change.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.paths < 2 {
            return bad(format!("paths = {}: Monte Carlo estimates need at least 2 paths", self.paths));
        }
        if self.threads == Some(0) {
            return bad("threads = 0: use a positive thread count or omit the key".into());
        }
        if !(self.r_prime > 1.0 && self.r_prime < 2.0) {
            return bad(format!("r_prime = {}: must lie in the open interval (1, 2)", self.r_prime));
        }
        if !(self.r > 2.0 && self.r.is_finite()) {
            return bad(format!("r = {}: the forward moment exponent must be finite and > 2", self.r));
        }
        let (domain, noise) = match (self.problem_spec(), self.noise_setting()) {
            (Ok(spec), _) => (spec.domain, spec.noise),
            (Err(_), Ok(setting)) => setting,
            (Err(e), Err(_)) => return Err(e),
        };
        if domain.dimension == 0 || domain.dimension > 3 {
            return bad(format!(
                "domain.dimension = {}: only d = 1, 2, 3 keep the ultracontractivity exponent d/4 below 1",
                domain.dimension
            ));
        }
        if !(noise.alpha > 0.0 && noise.alpha < 0.5) {
            return bad(format!(
                "noise.alpha = {}: the factorization exponent must lie in (0, 1/2); try 0.1",
                noise.alpha
            ));
        }
        if let Some(s) = self.sobolev_index.or(domain.sobolev_index) {
            if !(s > domain.dimension as f64 / 2.0) {
                return bad(format!("sobolev_index = {s}: V = W^{{s,2}} must embed in C(D̄), so s > d/2"));
            }
        }
        if self.spike_orders.epsilons.len() < 3 {
            return bad("spike_orders.epsilons: at least 3 spike widths are needed for a slope".into());
        }
        if let Ok(spec) = self.problem_spec() {
            if spec.n_steps == 0 || !(spec.horizon > 0.0) {
                return bad(format!("n_steps = {}, horizon = {}: both must be positive", spec.n_steps, spec.horizon));
            }
            let dt = spec.horizon / spec.n_steps as f64;
            let beta = crate::nonlinearity::NemytskiiDrift::new(spec.drift, spec.control_space.bound()).dissipativity_bound;
            if dt * beta >= 1.0 {
                return bad(format!(
                    "n_steps = {}: Δt·β = {:.3} must stay below 1; use at least {} steps",
                    spec.n_steps,
                    dt * beta,
                    (spec.horizon * beta).floor() as usize + 1
                ));
            }
        }
        Ok(())
    }
}
