// One replication of the scaled chain with its recorded path.

use commcascade::cascade::PathRecord;
use commcascade::experiment::simulate_once;
use commcascade::{ModelSpec, SeedingRule};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let model = ModelSpec::poisson(8.0, 8.0, 1.0, 5_000, 0.25, SeedingRule::GlobalUniform(0.05))?;
    let run = simulate_once(&model, 42, 0, 0, 1_000)?;
    println!("{}", PathRecord::COLUMNS.join("\t"));
    for rec in run.path.iter().step_by(5) {
        let row: Vec<String> = rec.values().iter().map(|v| format!("{v:.3}")).collect();
        println!("{}", row.join("\t"));
    }
    println!(
        "adoption ({:.3}, {:.3}) after {} steps; {} balance checks passed",
        run.fraction[0], run.fraction[1], run.steps, run.balance_checks
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
