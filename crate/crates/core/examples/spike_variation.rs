//! Spike perturbations of a control: the first variation Y^ε and the orders
//! of E sup|ξ^ε|² and E sup|η^ε|² as the spike width shrinks.

use spde_smp::catalog::ProblemSpec;
use spde_smp::variation::{first_variation, spike_order_study, SpikeConfig, SpikeTemplate};

fn main() {
    let mut spec = ProblemSpec::catalog("cubic-1d").unwrap();
    spec.domain.modes_per_axis = 16;
    spec.n_steps = 128;
    let problem = spec.build(1).unwrap();
    let u = problem.constant_control(0.0).unwrap();

    let base = problem.model.simulate_state(&u, &problem.x0, 0).unwrap();
    let spike = SpikeConfig { t0: 0.5, epsilon: 0.0625, w: 1.0 };
    let y = first_variation(&problem.model, &base, &u, &spike).unwrap();
    println!("Y at T, first three modes: {:?}", &y.terminal()[..3]);

    let eps: Vec<f64> = (3..=6).map(|k| 0.5f64.powi(k)).collect();
    let study = spike_order_study(&problem.model, &u, &problem.x0, &SpikeTemplate { t0: None, w: 1.0 }, &eps, 40).unwrap();
    for row in &study.rows {
        println!("ε = {:<8} {:<3} {:.3e} ± {:.1e}", row.epsilon, row.quantity, row.estimate, row.stderr);
    }
    for q in ["y", "xi", "eta"] {
        println!("slope of {q}: {:.2}", study.slope(q).unwrap_or(f64::NAN));
    }
}
