//! Point-mass terminal cost: p(T) is a projected Dirac, so |p(T−Δt)|² grows
//! with the truncation while the (T−t)^λ-weighted norm settles.

use spde_smp::adjoint::{solve_adjoint_regression, weighted_norm_report, RegressionSpec};
use spde_smp::catalog::ProblemSpec;
use spde_smp::control::simulate_paths;
use spde_smp::cost::{ControlPenalty, CostSpec, Density, Measure};

fn main() {
    for modes in [8, 16, 32] {
        let mut spec = ProblemSpec::catalog("cubic-1d").unwrap();
        spec.domain.modes_per_axis = modes;
        spec.n_steps = 1024;
        spec.cost = CostSpec {
            measure: Measure::Dirac { points: vec![vec![1.0]], weights: vec![1.0] },
            running: Density::Zero,
            control_penalty: ControlPenalty::Quadratic { weight: 1.0 },
            terminal: Density::Linear { weight: 1.0 },
        };
        spec.regression = RegressionSpec { basis_modes: 0, ..RegressionSpec::default() };
        let problem = spec.build(3).unwrap();
        let u = problem.constant_control(0.0).unwrap();
        let trajs = simulate_paths(&problem, &u, 16).unwrap();
        let sol = solve_adjoint_regression(&problem.model, &problem, &trajs, &u, &spec.regression).unwrap();
        let r = weighted_norm_report(problem.domain(), &sol.pairs, 1.5).unwrap();
        println!("N = {modes:>2}: weighted {:.4}, unweighted {:.4}, |p(T−Δt)|² {:.3}", r.p_weighted_mean, r.p_unweighted, r.p_final_step);
    }
}
