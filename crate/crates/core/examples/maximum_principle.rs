//! The Hamiltonian gap H(v) − H(u) along the exact LQ optimum, where it is
//! nonnegative, and along a deliberately poor control, where it is not.

use spde_smp::adjoint::solve_adjoint_regression;
use spde_smp::catalog::{lq_oracle, ProblemSpec};
use spde_smp::control::{check_maximum_principle, simulate_paths};

fn main() {
    let spec = ProblemSpec::catalog("lq-1d").unwrap();
    let problem = spec.build(3).unwrap();
    let oracle = lq_oracle(&problem).unwrap();
    println!("optimal cost {:.5}, u(0) = {:.4}", oracle.cost, oracle.control.values()[0]);

    let v = problem.control_space.samples();
    for (name, control) in [("oracle", oracle.control.clone()), ("u ≡ 1", problem.constant_control(1.0).unwrap())] {
        let trajs = simulate_paths(&problem, &control, 400).unwrap();
        let adj = solve_adjoint_regression(&problem.model, &problem, &trajs, &control, &spec.regression).unwrap();
        let r = check_maximum_principle(&problem, &control, &trajs, &adj, &v, 1e-3).unwrap();
        println!(
            "{name:>7}: min gap {:+.3e} at t = {:.3}, v = {:+.1}; {:.1}% of (t, v) violate; passes: {}",
            r.min_gap,
            r.argmin_t,
            r.argmin_v,
            100.0 * r.fraction_violating,
            r.passes()
        );
    }
}
