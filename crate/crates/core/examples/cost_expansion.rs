//! The cost under a spike perturbation, J(u^ε) − J(u), against its first-order
//! expansion; the residual shrinks like ε².

use spde_smp::catalog::ProblemSpec;
use spde_smp::variation::{cost_expansion_check, SpikeTemplate};

fn main() {
    let problem = ProblemSpec::catalog("lq-1d").unwrap().build(7).unwrap();
    let u = problem.constant_control(0.0).unwrap();
    let eps: Vec<f64> = (3..=6).map(|k| 0.5f64.powi(k)).collect();
    let report = cost_expansion_check(&problem, &u, &SpikeTemplate { t0: None, w: 1.0 }, &eps, 100).unwrap();
    println!("{:>10} {:>12} {:>12} {:>12}", "ε", "ΔJ", "first order", "residual");
    for r in &report.rows {
        println!("{:>10} {:>12.4e} {:>12.4e} {:>12.4e}", r.epsilon, r.delta_j, r.first_order, r.residual);
    }
    if let Some(fit) = report.slope {
        println!("residual slope {:.3} ± {:.3}", fit.slope, fit.slope_stderr);
    }
}
