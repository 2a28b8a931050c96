// Drive the experiment layer from a bundled JSON config and inspect the manifest.

use std::path::PathBuf;

use gfrf::experiment::{run_transient_experiment, ExperimentConfig, Manifest};

pub fn run_example() -> gfrf::Result<()> {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let config = ExperimentConfig::from_json(&std::fs::read_to_string(
        root.join("transient_hammerstein_zero.json"),
    )?)?;
    let out = std::env::temp_dir().join(format!("gfrf-example-{}", std::process::id()));
    let summary = run_transient_experiment(&config, &out)?;
    for c in &summary.checks {
        println!("{:<24} {:.3e} passed {}", c.name, c.value, c.passed);
    }
    let manifest = Manifest::read(&out)?;
    manifest.verify_files(&out)?;
    println!(
        "manifest lists {} files, all hashes match",
        manifest.files.len()
    );
    std::fs::remove_dir_all(&out)?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> gfrf::Result<()> {
    run_example()
}
