//! Coloured noise: series verdicts, exact OU sampling, and the sup-norm
//! moment study that separates rough from regular noise.

use spde_smp::noise::{sample_convolution, series_condition_v, supnorm_moment_study, MomentStudy, NoiseModel};
use spde_smp::spectral::SpectralDomain;
use spde_smp::stats::MeanAccumulator;
use spde_smp::time::TimeGrid;

fn main() {
    let d = SpectralDomain::hypercube(2, 8).unwrap();
    for gamma in [0.05, 0.3] {
        let noise = NoiseModel::new(&d, gamma, 0.1, 1).unwrap();
        let v = series_condition_v(&d, &noise).unwrap();
        println!("γ = {gamma}: threshold {}, series converges: {}", v.threshold, v.converges);
    }

    // Second moment of the first OU mode against its closed form.
    let noise = NoiseModel::new(&d, 0.3, 0.1, 1).unwrap();
    let sq: Vec<f64> = (0..2000).map(|p| sample_convolution(&d, &noise, 8, 1.0, p).unwrap().at(8)[0].powi(2)).collect();
    let acc = MeanAccumulator::from_slice(&sq);
    let (mu, b) = (2.0f64, 2.0f64.powf(-0.3));
    let exact = b * b * (1.0 - (-2.0 * mu).exp()) / (2.0 * mu);
    println!("E|W_A,1(1)|² = {:.4} ± {:.4} (exact {exact:.4})", acc.mean(), acc.stderr());

    let study = MomentStudy {
        dimension: 2,
        gamma: 0.0,
        alpha: 0.1,
        amplitude: 1.0,
        seed: 2,
        n_paths: 40,
        p: 2.0,
        grid: TimeGrid::new(16, 1.0).unwrap(),
    };
    for gamma in [0.0, 1.0] {
        let rows = supnorm_moment_study(&MomentStudy { gamma, ..study }, &[4, 8, 16]).unwrap();
        let est: Vec<String> = rows.iter().map(|r| format!("{:.3}", r.estimate)).collect();
        println!("γ = {gamma}: E sup|W_A|² over N = 4, 8, 16 per axis: {}", est.join(", "));
    }
}
