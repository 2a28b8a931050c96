// The seeded property suite that backs `gfrf verify`.

use gfrf::experiment::verify::run_property_suite;

pub fn run_example() -> gfrf::Result<()> {
    let seed = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0);
    let report = run_property_suite(seed)?;
    for c in &report.checks {
        println!(
            "{} {:<40} worst {:.2e} over {} cases",
            if c.passed { "ok  " } else { "FAIL" },
            c.name,
            c.worst,
            c.cases
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> gfrf::Result<()> {
    run_example()
}
