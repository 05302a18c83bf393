//! Runs every example binary that `cargo test` builds alongside the tests.

use std::path::PathBuf;
use std::process::Command;

const EXAMPLES: [&str; 10] = [
    "spectral_basis",
    "noise_regularity",
    "forward_simulation",
    "spike_variation",
    "cost_expansion",
    "adjoint_regression",
    "maximum_principle",
    "optimize_control",
    "weighted_norms",
    "config_runner",
];

fn example_dir() -> PathBuf {
    // target/<profile>/deps/<this test> → target/<profile>/examples
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(|p| p.parent()).unwrap().join("examples")
}

#[test]
fn every_example_runs() {
    let dir = example_dir();
    let on_disk = std::fs::read_dir(concat!(env!("CARGO_MANIFEST_DIR"), "/examples")).unwrap().count();
    assert_eq!(on_disk, EXAMPLES.len(), "keep this list in sync with examples/");
    for name in EXAMPLES {
        let bin = dir.join(format!("{name}{}", std::env::consts::EXE_SUFFIX));
        assert!(bin.exists(), "{} missing; run `cargo test` without a target filter so examples get built", bin.display());
        let out = Command::new(&bin).output().unwrap();
        assert!(out.status.success(), "{name} failed:\n{}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stdout.is_empty(), "{name} printed nothing");
    }
}
