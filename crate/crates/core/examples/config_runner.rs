//! Driving a study from a JSON config: the same path the command-line tool
//! takes, including the manifest that pins config hash, seed and artifacts.

use spde_smp::config::ExperimentConfig;
use spde_smp::runner::{run, Command};

fn main() {
    let text = r#"{
        "problem": "lq-1d",
        "control": {"kind": "lq_oracle"},
        "paths": 300,
        "seed": 9
    }"#;
    let config = ExperimentConfig::from_json(text).unwrap();
    let out = std::env::temp_dir().join("spde-smp-config-runner");
    let outcome = run(Command::SmpCheck, &config, text.as_bytes(), &out).unwrap();
    let m = &outcome.manifest;
    println!("{} {} → passed {:?}, exit code {}", m.subcommand, m.config_sha256, m.passed, outcome.exit_code());
    for a in &m.artifacts {
        println!("  {} ({} bytes, sha256 {})", a.name, a.bytes, &a.sha256[..16]);
    }

    // Validation happens before any work, with a message that says what to fix.
    let bad = ExperimentConfig::from_json(r#"{"problem": "lq-1d", "noise": {"gamma": 0.5, "alpha": 0.7}}"#);
    println!("rejected: {}", bad.unwrap_err());
}
