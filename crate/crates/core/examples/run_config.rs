//! Drive a full experiment through the declarative config layer, the same
//! path the `pamham` binary uses: validate, run, and read the report back.

use pamham::config::{validate_config, RunConfig};
use pamham::runner::{run_experiment, summarize_report};

const CONFIG: &str = r#"
[model]
equation = "pam"
dimension = 1
t0 = 1.0
truncation = 3

[kernel]
temporal = { kind = "exponential", rate = 1.0 }
spatial = { kind = "riesz", alpha = 0.5 }

[grid]
n_t = 4
n_x = 40

[experiment]
kind = "variance"
radii = [4.0, 8.0, 16.0, 32.0]
target_exponent = 0.75
tolerance = 0.1

[run]
seed = 11
"#;

fn main() {
    let config = RunConfig::from_toml(CONFIG).unwrap();
    let validation = validate_config(&config);
    println!("validation ok: {}", validation.ok());
    for w in &validation.warnings {
        println!("  warning: {w}");
    }

    let out = std::env::temp_dir().join("pamham-example-run");
    let outcome = run_experiment(&config, &out).unwrap();
    println!(
        "run {}; artifacts in {}",
        if outcome.pass { "passed" } else { "FAILED" },
        out.display()
    );
    print!("{}", summarize_report(&out).unwrap());
}
