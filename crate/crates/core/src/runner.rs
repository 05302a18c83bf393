//! Subcommand orchestration: every run writes its artifacts and then a
//! manifest tying them to the config hash, seed and subcommand.

use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::adjoint::{duality_residual, solve_adjoint_regression, weighted_norm_report, DeterministicSource};
use crate::catalog::{lq_cost, lq_oracle, ProblemSpec};
use crate::config::{ControlChoice, ExperimentConfig};
use crate::control::{check_maximum_principle, optimize_control, simulate_paths, ControlProblem, DescentOptions};
use crate::error::{Error, Result};
use crate::forward::{ControlProcess, FieldForcing, NoiseForcing};
use crate::io;
use crate::noise::{
    series_condition_v, supnorm_moment_study, trace_summand, MomentStudy, NoiseIncrements, NoiseModel, OuTransition,
};
use crate::spectral::{exceeds_threshold, regularity_threshold, DomainKind, SpectralDomain};
use crate::stats::{MeanAccumulator, SlopeFit};
use crate::time::TimeGrid;
use crate::variation::{cost_expansion_check, spike_order_study, SpikeTemplate};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Simulate,
    NoiseCheck,
    SpikeOrders,
    CostExpansion,
    AdjointCheck,
    SmpCheck,
    Optimize,
    Selftest,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::Simulate,
        Command::NoiseCheck,
        Command::SpikeOrders,
        Command::CostExpansion,
        Command::AdjointCheck,
        Command::SmpCheck,
        Command::Optimize,
        Command::Selftest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::NoiseCheck => "noise-check",
            Command::SpikeOrders => "spike-orders",
            Command::CostExpansion => "cost-expansion",
            Command::AdjointCheck => "adjoint-check",
            Command::SmpCheck => "smp-check",
            Command::Optimize => "optimize",
            Command::Selftest => "selftest",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub paths: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ArtifactEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'static str,
    pub config_sha256: String,
    pub seed: u64,
    pub paths: usize,
    pub complete: bool,
    /// Whether the run's own check passed (`None` for pure studies).
    pub passed: Option<bool>,
    pub error: Option<String>,
    pub artifacts: Vec<ArtifactEntry>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub manifest: Manifest,
    pub manifest_path: PathBuf,
}

impl RunOutcome {
    /// 0 on success, 4 when a check ran to completion but failed.
    pub fn exit_code(&self) -> i32 {
        match self.manifest.passed {
            Some(false) => 4,
            _ => 0,
        }
    }
}

struct Artifacts {
    dir: PathBuf,
    entries: Vec<ArtifactEntry>,
}

impl Artifacts {
    fn record(&mut self, name: &str) -> Result<()> {
        let bytes = fs::read(self.dir.join(name))?;
        self.entries.push(ArtifactEntry {
            name: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        Ok(())
    }

    fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        io::write_json(&self.dir.join(name), value)?;
        self.record(name)
    }

    fn csv<T: Serialize>(&mut self, name: &str, rows: impl IntoIterator<Item = T>) -> Result<()> {
        io::write_csv(&self.dir.join(name), rows)?;
        self.record(name)
    }

    fn binary(&mut self, name: &str, write: impl FnOnce(&mut std::io::BufWriter<fs::File>) -> Result<()>) -> Result<()> {
        io::write_binary(&self.dir.join(name), write)?;
        self.record(name)
    }
}

/// Load, validate and run. A config that cannot be read or validated fails
/// before the output directory is touched.
pub fn run_from_file(command: Command, config_path: &Path, out: &Path, overrides: Overrides) -> Result<RunOutcome> {
    let bytes = fs::read(config_path)?;
    let text = std::str::from_utf8(&bytes).map_err(|e| Error::Config(format!("config is not UTF-8: {e}")))?;
    let mut config = ExperimentConfig::from_json(text)?;
    if let Some(seed) = overrides.seed {
        config.seed = seed;
    }
    if let Some(paths) = overrides.paths {
        config.paths = paths;
    }
    config.validate()?;
    run(command, &config, &bytes, out)
}

pub fn run(command: Command, config: &ExperimentConfig, config_bytes: &[u8], out: &Path) -> Result<RunOutcome> {
    fs::create_dir_all(out)?;
    let mut artifacts = Artifacts { dir: out.to_path_buf(), entries: Vec::new() };
    info!("running {} into {}", command.name(), out.display());
    let result = dispatch(command, config, &mut artifacts);
    let (passed, error) = match &result {
        Ok(passed) => (*passed, None),
        Err(e) => (None, Some(e.to_string())),
    };
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        subcommand: command.name(),
        config_sha256: hex::encode(Sha256::digest(config_bytes)),
        seed: config.seed,
        paths: config.paths,
        complete: result.is_ok(),
        passed,
        error,
        artifacts: artifacts.entries,
    };
    let manifest_path = out.join("manifest.json");
    io::write_json(&manifest_path, &manifest)?;
    result.map(|_| RunOutcome { manifest, manifest_path })
}

fn dispatch(command: Command, config: &ExperimentConfig, out: &mut Artifacts) -> Result<Option<bool>> {
    match command {
        Command::Simulate => simulate(config, out).map(|_| None),
        Command::NoiseCheck => noise_check(config, out).map(|_| None),
        Command::SpikeOrders => spike_orders(config, out).map(|_| None),
        Command::CostExpansion => cost_expansion(config, out).map(|_| None),
        Command::AdjointCheck => adjoint_check(config, out).map(|_| None),
        Command::SmpCheck => smp_check(config, out).map(Some),
        Command::Optimize => optimize(config, out).map(Some),
        Command::Selftest => selftest(config, out).map(Some),
    }
}

fn build(config: &ExperimentConfig) -> Result<(ProblemSpec, ControlProblem)> {
    let spec = config.problem_spec()?;
    let problem = spec.build(config.seed)?;
    Ok((spec, problem))
}

pub fn choose_control(problem: &ControlProblem, choice: &ControlChoice) -> Result<ControlProcess> {
    match choice {
        ControlChoice::Zero => problem.constant_control(0.0),
        ControlChoice::Constant { value } => problem.constant_control(*value),
        ControlChoice::Values { values } => ControlProcess::from_values(problem.control_space.clone(), values.clone()),
        ControlChoice::LqOracle => Ok(lq_oracle(problem)?.control),
    }
}

#[derive(Serialize)]
struct MomentSummaryRow {
    time: f64,
    mean_energy: f64,
    energy_stderr: f64,
    mean_sup: f64,
    sup_stderr: f64,
}

#[derive(Serialize)]
struct SimulateSummary {
    problem: ProblemSpec,
    paths: usize,
    cost: f64,
    cost_stderr: f64,
    terminal_energy: f64,
    max_mean_sup: f64,
}

fn simulate(config: &ExperimentConfig, out: &mut Artifacts) -> Result<()> {
    let (spec, problem) = build(config)?;
    let control = choose_control(&problem, &config.control)?;
    let trajs = simulate_paths(&problem, &control, config.paths)?;
    let domain = problem.domain();
    let grid = problem.grid();
    let costs = MeanAccumulator::from_slice(&trajs.iter().map(|t| problem.path_cost(t, &control)).collect::<Vec<_>>());
    let rows: Vec<MomentSummaryRow> = (0..=grid.n_steps)
        .map(|n| {
            let energy: Vec<f64> = trajs.iter().map(|t| t.at(n).iter().map(|c| c * c).sum()).collect();
            let sup: Vec<f64> = trajs.iter().map(|t| t.sup_norm(domain, n)).collect();
            let (e, s) = (MeanAccumulator::from_slice(&energy), MeanAccumulator::from_slice(&sup));
            MomentSummaryRow { time: grid.time(n), mean_energy: e.mean(), energy_stderr: e.stderr(), mean_sup: s.mean(), sup_stderr: s.stderr() }
        })
        .collect();
    let summary = SimulateSummary {
        problem: spec,
        paths: trajs.len(),
        cost: costs.mean(),
        cost_stderr: costs.stderr(),
        terminal_energy: rows.last().map_or(0.0, |r| r.mean_energy),
        max_mean_sup: rows.iter().fold(0.0, |m, r| m.max(r.mean_sup)),
    };
    out.csv("moments.csv", rows)?;
    for traj in trajs.iter().take(config.simulate.export_paths) {
        io::write_trajectory_csv(&out.dir.join(format!("trajectory_{}.csv", traj.path)), traj)?;
        out.record(&format!("trajectory_{}.csv", traj.path))?;
        out.binary(&format!("trajectory_{}.bin", traj.path), |w| io::write_trajectory_binary(w, traj))?;
    }
    out.json("summary.json", &summary)
}

#[derive(Serialize)]
struct TraceRow {
    time: f64,
    trace_integral: f64,
}

#[derive(Serialize)]
struct NoiseReport {
    dimension: usize,
    kind: DomainKind,
    gamma: f64,
    alpha: f64,
    threshold: f64,
    verdict: &'static str,
    series: crate::noise::SeriesVerdict,
    moment_study: Option<&'static str>,
}

fn noise_check(config: &ExperimentConfig, out: &mut Artifacts) -> Result<()> {
    let (dspec, nspec) = config.noise_setting()?;
    let domain = dspec.build()?;
    let noise = NoiseModel::new(&domain, nspec.gamma, nspec.alpha, config.seed)?.with_amplitude(nspec.amplitude)?;
    let threshold = regularity_threshold(domain.dimension(), domain.kind(), nspec.alpha)?;
    let series = series_condition_v(&domain, &noise)?;
    let regular = exceeds_threshold(nspec.gamma, threshold);
    let traces: Vec<TraceRow> =
        (0..=8).map(|i| 0.125 * i as f64).map(|t| TraceRow { time: t, trace_integral: trace_summand(&domain, &noise, t) }).collect();
    out.csv("trace.csv", traces)?;
    let moment_study = if domain.kind() == DomainKind::Hypercube {
        let study = MomentStudy {
            dimension: domain.dimension(),
            gamma: nspec.gamma,
            alpha: nspec.alpha,
            amplitude: nspec.amplitude,
            seed: config.seed,
            n_paths: config.paths,
            p: config.noise_check.moment,
            grid: TimeGrid::new(config.noise_check.n_steps, 1.0)?,
        };
        out.csv("moments.csv", supnorm_moment_study(&study, &config.noise_check.truncations)?)?;
        None
    } else {
        Some("skipped: the ball is a formula-only surrogate and cannot be simulated")
    };
    out.json(
        "noise_report.json",
        &NoiseReport {
            dimension: domain.dimension(),
            kind: domain.kind(),
            gamma: nspec.gamma,
            alpha: nspec.alpha,
            threshold,
            verdict: if regular { "regular" } else { "irregular" },
            series,
            moment_study,
        },
    )
}

#[derive(Serialize)]
struct SlopeSummary {
    quantity: String,
    slope: Option<f64>,
    stderr: Option<f64>,
    /// 95% normal-approximation interval.
    interval: Option<[f64; 2]>,
    points: usize,
    dropped_smallest: bool,
}

fn summarize(quantity: &str, fit: Option<SlopeFit>, dropped_smallest: bool) -> SlopeSummary {
    SlopeSummary {
        quantity: quantity.to_string(),
        slope: fit.map(|f| f.slope),
        stderr: fit.map(|f| f.slope_stderr),
        interval: fit.map(|f| [f.slope - 1.96 * f.slope_stderr, f.slope + 1.96 * f.slope_stderr]),
        points: fit.map_or(0, |f| f.points),
        dropped_smallest,
    }
}

fn epsilons(config: &ExperimentConfig, grid: &TimeGrid) -> Vec<f64> {
    config.spike_orders.epsilons.iter().map(|e| e * grid.horizon).collect()
}

fn spike_orders(config: &ExperimentConfig, out: &mut Artifacts) -> Result<()> {
    let (_, problem) = build(config)?;
    let control = choose_control(&problem, &config.control)?;
    let eps = epsilons(config, &problem.grid());
    let report = spike_order_study(&problem.model, &control, &problem.x0, &config.spike_orders.spike, &eps, config.paths)?;
    out.csv("spike_orders.csv", &report.rows)?;
    let slopes: Vec<SlopeSummary> =
        report.slopes.iter().map(|s| summarize(&s.quantity, s.fit, s.dropped_smallest)).collect();
    out.json("spike_orders.json", &slopes)
}

fn cost_expansion(config: &ExperimentConfig, out: &mut Artifacts) -> Result<()> {
    let (_, problem) = build(config)?;
    let control = choose_control(&problem, &config.control)?;
    let eps = epsilons(config, &problem.grid());
    let report = cost_expansion_check(&problem, &control, &config.spike_orders.spike, &eps, config.paths)?;
    out.csv("cost_expansion.csv", &report.rows)?;
    out.json("cost_expansion.json", &summarize("residual", report.slope, false))
}

#[derive(Clone, Debug, Serialize)]
pub struct AdjointCheckReport {
    pub duality_gamma: crate::adjoint::DualityReport,
    pub duality_eta: crate::adjoint::DualityReport,
    pub weighted_norms: crate::adjoint::WeightedNormReport,
}

/// Duality with `γ = e_1` held constant in time, and with `η = B`.
pub fn adjoint_check_report(
    problem: &ControlProblem,
    control: &ControlProcess,
    spec: &crate::adjoint::RegressionSpec,
    paths: usize,
    r_prime: f64,
    floor: f64,
) -> Result<(AdjointCheckReport, crate::adjoint::AdjointSolution)> {
    let model = &problem.model;
    let trajs = simulate_paths(problem, control, paths)?;
    let solution = solve_adjoint_regression(model, problem, &trajs, control, spec)?;
    let mut gamma = vec![0.0; model.n_modes()];
    gamma[0] = 1.0;
    let b = model.noise.b_coeffs().to_vec();
    let duality_gamma =
        duality_residual(model, problem, &trajs, control, &solution, FieldForcing::Constant(&gamma), NoiseForcing::Zero, floor)?;
    let duality_eta =
        duality_residual(model, problem, &trajs, control, &solution, FieldForcing::Zero, NoiseForcing::Diagonal(&b), floor)?;
    let weighted_norms = weighted_norm_report(problem.domain(), &solution.pairs, r_prime)?;
    Ok((AdjointCheckReport { duality_gamma, duality_eta, weighted_norms }, solution))
}

fn adjoint_check(config: &ExperimentConfig, out: &mut Artifacts) -> Result<()> {
    let (spec, problem) = build(config)?;
    let control = choose_control(&problem, &config.control)?;
    let (report, solution) =
        adjoint_check_report(&problem, &control, &spec.regression, config.paths, config.r_prime, config.tolerances.duality_floor)?;
    out.json("regression_diagnostics.json", &solution.diagnostics)?;
    if let Some(pair) = solution.pairs.first() {
        out.binary("adjoint_0.bin", |w| io::write_adjoint_binary(w, pair))?;
    }
    out.json("adjoint_check.json", &report)
}

fn smp_check(config: &ExperimentConfig, out: &mut Artifacts) -> Result<bool> {
    let (spec, problem) = build(config)?;
    let control = choose_control(&problem, &config.control)?;
    let trajs = simulate_paths(&problem, &control, config.paths)?;
    let adjoint = solve_adjoint_regression(&problem.model, &problem, &trajs, &control, &spec.regression)?;
    let report =
        check_maximum_principle(&problem, &control, &trajs, &adjoint, &problem.control_space.samples(), config.tolerances.smp)?;
    out.json("smp_report.json", &report)?;
    Ok(report.passes() && report.fraction_violating <= config.tolerances.smp_fraction)
}

#[derive(Serialize)]
struct ControlRow {
    time: f64,
    control: f64,
}

#[derive(Serialize)]
struct OptimizeSummary {
    final_cost: f64,
    final_stderr: f64,
    stagnation_warning: bool,
    /// Exact cost of the returned control and of the optimum, when available.
    exact_cost: Option<f64>,
    oracle_cost: Option<f64>,
    smp: crate::control::MaximumPrincipleReport,
}

fn optimize(config: &ExperimentConfig, out: &mut Artifacts) -> Result<bool> {
    let (spec, problem) = build(config)?;
    let initial = choose_control(&problem, &config.control)?;
    let knobs = &config.descent;
    let opts = DescentOptions {
        iterations: knobs.iterations,
        step: knobs.step,
        n_paths: config.paths,
        regression: spec.regression.clone(),
        max_halvings: knobs.max_halvings,
        stagnation_window: knobs.stagnation_window,
    };
    let result = optimize_control(&problem, &initial, &opts)?;
    out.csv("descent.csv", &result.trace)?;
    let grid = problem.grid();
    out.csv(
        "control.csv",
        result.control.values().iter().enumerate().map(|(n, &u)| ControlRow { time: grid.time(n), control: u }),
    )?;
    let trajs = simulate_paths(&problem, &result.control, config.paths)?;
    let adjoint = solve_adjoint_regression(&problem.model, &problem, &trajs, &result.control, &spec.regression)?;
    let smp = check_maximum_principle(
        &problem,
        &result.control,
        &trajs,
        &adjoint,
        &problem.control_space.samples(),
        config.tolerances.smp,
    )?;
    let passed = smp.passes();
    let last = result.trace.last().expect("trace starts with the initial cost");
    out.json(
        "optimize.json",
        &OptimizeSummary {
            final_cost: last.j,
            final_stderr: last.stderr,
            stagnation_warning: result.stagnation_warning,
            exact_cost: lq_cost(&problem, &result.control).ok(),
            oracle_cost: lq_oracle(&problem).ok().map(|o| o.cost),
            smp,
        },
    )?;
    Ok(passed)
}

#[derive(Clone, Debug, Serialize)]
pub struct SelftestCheck {
    pub name: &'static str,
    pub value: f64,
    pub bound: String,
    pub passed: bool,
}

fn check(name: &'static str, value: f64, bound: String, passed: bool) -> SelftestCheck {
    SelftestCheck { name, value, bound, passed }
}

/// Fast property suite on the LQ instance.
pub fn selftest_checks(config: &ExperimentConfig) -> Result<Vec<SelftestCheck>> {
    let mut checks = Vec::new();

    let domain = SpectralDomain::hypercube(2, 8)?;
    let w = domain.quadrature_weight();
    let fields: Vec<Vec<f64>> = (0..domain.n_modes())
        .map(|k| {
            let mut e = vec![0.0; domain.n_modes()];
            e[k] = 1.0;
            domain.to_grid(&e)
        })
        .collect();
    let mut gram_err = 0.0f64;
    for (i, a) in fields.iter().enumerate() {
        for (j, b) in fields.iter().enumerate() {
            let g = w * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
            gram_err = gram_err.max((g - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    checks.push(check("quadrature_gram_identity", gram_err, "< 1e-8".into(), gram_err < 1e-8));

    let t = regularity_threshold(2, DomainKind::Ball, 0.1)?;
    checks.push(check("ball_threshold_d2_alpha0.1", t, "= 0.35".into(), (t - 0.35).abs() < 1e-15));

    let (spec, problem) = build(config)?;
    let model = &problem.model;
    let grid = model.grid;
    let k = 0;
    let mu = model.domain.modes()[k].eigenvalue;
    let b = model.noise.b_coeffs()[k];
    let draws: Vec<f64> = (0..config.paths as u64)
        .map(|p| NoiseIncrements::sample(&model.domain, model.noise.seed(), grid, p).ou(0)[k] * b)
        .collect();
    let acc = MeanAccumulator::from_slice(&draws.iter().map(|x| x * x).collect::<Vec<_>>());
    let expected = b * b * OuTransition::new(mu, grid.dt()).var_ou;
    let z = (acc.mean() - expected).abs() / acc.stderr();
    checks.push(check("ou_variance_first_mode_z", z, "< 4".into(), z < 4.0));

    // Deterministic forcing with no drift feedback: p_n is a geometric sum.
    let g: Vec<f64> = (0..model.n_modes()).map(|k| 1.0 / (1.0 + k as f64)).collect();
    let flat = crate::forward::ForwardModel::new(
        model.domain.clone(),
        crate::nonlinearity::NemytskiiDrift::new(crate::nonlinearity::DriftKind::Linear { rate: 0.0, gain: 1.0 }, 1.0),
        model.noise.clone(),
        grid,
    )?;
    let zero = problem.constant_control(0.0)?;
    let few = spec.regression.basis_size(model.n_modes()) * 10;
    let trajs = flat.simulate_ensemble(&zero, &problem.x0, few)?;
    let source = DeterministicSource { running: Some(g.clone()), terminal: None };
    let sol = solve_adjoint_regression(&flat, &source, &trajs, &zero, &spec.regression)?;
    let mut det_err = 0.0f64;
    for n in 0..=grid.n_steps {
        let tau = grid.horizon - grid.time(n);
        for (k, m) in model.domain.modes().iter().enumerate() {
            let exact = g[k] * -(-m.eigenvalue * tau).exp_m1() / m.eigenvalue;
            det_err = det_err.max((sol.pairs[0].p_at(n)[k] - exact).abs());
        }
    }
    checks.push(check("deterministic_adjoint_closed_form", det_err, "< 1e-6".into(), det_err < 1e-6));

    if let Ok(oracle) = lq_oracle(&problem) {
        let trajs = simulate_paths(&problem, &oracle.control, config.paths)?;
        let adjoint = solve_adjoint_regression(model, &problem, &trajs, &oracle.control, &spec.regression)?;
        let report = check_maximum_principle(&problem, &oracle.control, &trajs, &adjoint, &problem.control_space.samples(), 1e-3)?;
        checks.push(check("smp_gap_at_lq_oracle", report.min_gap, ">= -1e-3".into(), report.passes()));
        let (adj, _) = adjoint_check_report(&problem, &oracle.control, &spec.regression, config.paths, config.r_prime, 1e-12)?;
        let r = adj.duality_gamma.residual;
        checks.push(check("duality_residual_gamma", r, "< 0.05".into(), r < 0.05));
    }

    let zero = problem.constant_control(0.0)?;
    let eps = epsilons(config, &grid);
    let expansion = cost_expansion_check(&problem, &zero, &SpikeTemplate { t0: None, w: 1.0 }, &eps, config.paths.min(50))?;
    let slope = expansion.slope.map_or(f64::NAN, |f| f.slope);
    checks.push(check("cost_expansion_slope", slope, "in [1.7, 2.3]".into(), (1.7..=2.3).contains(&slope)));
    Ok(checks)
}

fn selftest(config: &ExperimentConfig, out: &mut Artifacts) -> Result<bool> {
    let checks = selftest_checks(config)?;
    let passed = checks.iter().all(|c| c.passed);
    out.csv("selftest.csv", &checks)?;
    out.json("selftest.json", &checks)?;
    Ok(passed)
}
