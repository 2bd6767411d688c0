// A sweep described by a JSON config, run through every engine.

use commcascade::experiment::{cmd_sweep, ExperimentConfig};

const CONFIG: &str = r#"{
  "model": {
    "p1": {"poisson": 8}, "p2": {"poisson": 8}, "pm": {"poisson": 1},
    "n1": 2000, "n2": 2000,
    "threshold": {"linear": 0.25}
  },
  "engines": ["meanfield", "simulate", "ode", "contagion"],
  "sweep": [{"param": "lambda_in", "values": [4, 8]}],
  "strategies": [
    {"name": "local", "split": [1, 0], "budget": 0.05},
    {"name": "even", "split": [0.5, 0.5], "budget": 0.05}
  ],
  "replications": 2,
  "seed": 1,
  "ode": {"step": 0.01}
}"#;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("commcascade-config-run-{}", std::process::id()));
    let mut cfg = ExperimentConfig::from_json(CONFIG, "config_run")?;
    cfg.out = dir.clone();
    cfg.validate()?;
    let rows = cmd_sweep(&cfg)?;
    println!("{} rows written to {}", rows.len(), dir.join("sweep.csv").display());
    print!("{}", std::fs::read_to_string(dir.join("sweep.csv"))?);
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
