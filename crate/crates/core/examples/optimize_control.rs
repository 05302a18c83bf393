//! Projected gradient descent driven by the adjoint, on the LQ problem where
//! the optimum is known exactly.

use spde_smp::catalog::{lq_cost, lq_oracle, ProblemSpec};
use spde_smp::control::{optimize_control, DescentOptions};

fn main() {
    let spec = ProblemSpec::catalog("lq-1d").unwrap();
    let problem = spec.build(6).unwrap();
    let opts = DescentOptions { iterations: 10, n_paths: 200, regression: spec.regression.clone(), ..DescentOptions::default() };
    let result = optimize_control(&problem, &problem.constant_control(0.0).unwrap(), &opts).unwrap();
    for rec in &result.trace {
        println!("iter {:>2}: J = {:.5} ± {:.5}, step {:.3}, |∇J| = {:.4}", rec.iteration, rec.j, rec.stderr, rec.step, rec.gradient_norm);
    }
    let exact = lq_cost(&problem, &result.control).unwrap();
    let best = lq_oracle(&problem).unwrap().cost;
    println!("exact cost reached {exact:.5}, optimum {best:.5} ({:.2}% above)", 100.0 * (exact / best - 1.0));
    if result.stagnation_warning {
        println!("descent stopped early: no improving step found");
    }
}
