//! Dirichlet eigenpairs on the cube, the collocation transform, the heat
//! semigroup and the regularity thresholds for both domain shapes.

use spde_smp::spectral::{regularity_threshold, DomainKind, SpectralDomain};

fn main() {
    let d = SpectralDomain::hypercube(2, 8).unwrap();
    println!("{} modes, λ = d/4 = {}", d.n_modes(), d.lambda_exponent());
    for m in &d.modes()[..5] {
        println!("  k = {:?}  μ = {}", m.index, m.eigenvalue);
    }

    // A field and its coefficients round-trip exactly through the grid.
    let c: Vec<f64> = (0..d.n_modes()).map(|k| 1.0 / (1.0 + k as f64)).collect();
    let back = d.from_grid(&d.to_grid(&c));
    let err = c.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("transform round trip error {err:.1e}");

    let heat = d.semigroup_apply(0.1, &c).unwrap();
    println!("S(0.1) damps mode 1 by {:.4} = e^(-0.2)", heat[0] / c[0]);
    println!("value at (1, 1): {:.4}", d.evaluate(&c, &[1.0, 1.0]));

    for kind in [DomainKind::Hypercube, DomainKind::Ball] {
        let g = regularity_threshold(2, kind, 0.1).unwrap();
        println!("{kind:?}, d = 2, α = 0.1: noise needs γ > {g}");
    }
}
