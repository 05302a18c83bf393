//! Backward adjoint pair (p, q) by least-squares Monte Carlo regression, checked
//! against the duality identity with both forcings of the auxiliary equation.

use spde_smp::adjoint::solve_adjoint_regression;
use spde_smp::catalog::ProblemSpec;
use spde_smp::control::simulate_paths;
use spde_smp::runner::adjoint_check_report;

fn main() {
    let spec = ProblemSpec::catalog("lq-1d").unwrap();
    let problem = spec.build(5).unwrap();
    let u = problem.constant_control(0.5).unwrap();

    let trajs = simulate_paths(&problem, &u, 400).unwrap();
    let sol = solve_adjoint_regression(&problem.model, &problem, &trajs, &u, &spec.regression).unwrap();
    let mean_p0: f64 = sol.pairs.iter().map(|p| p.p_at(0)[0]).sum::<f64>() / sol.pairs.len() as f64;
    let worst = sol.diagnostics.condition.iter().cloned().fold(0.0, f64::max);
    println!("E p_1(0) = {mean_p0:.4}; worst regression condition number {worst:.1}");

    let (report, _) = adjoint_check_report(&problem, &u, &spec.regression, 400, 1.5, 1e-12).unwrap();
    let g = report.duality_gamma;
    let e = report.duality_eta;
    println!("duality, field forcing: {:.5} vs {:.5} (relative {:.2e})", g.lhs, g.rhs, g.residual);
    println!("duality, noise forcing: {:.5} vs {:.5} (relative {:.2e})", e.lhs, e.rhs, e.residual);
    let w = report.weighted_norms;
    println!("E ∫|p|²(T−t)^λ = {:.4}, E ∫|q|²_V' = {:.4}", w.p_weighted_mean, w.q_norm_mean);
}
