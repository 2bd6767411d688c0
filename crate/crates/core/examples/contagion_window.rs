// The contagion window of a symmetric model: the Perron root of the
// no-seed Jacobian as the mean degree varies, with the small-seed table at
// one point inside and one outside.

use commcascade::contagion::{is_contagious, small_seed_limit};
use commcascade::{ModelSpec, SeedingRule};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    println!("lambda_in\trho\tcontagious");
    for l in [0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0] {
        let model = ModelSpec::poisson(l, l, 0.5, 10_000, 0.25, SeedingRule::GlobalUniform(0.0))?;
        let report = is_contagious(&model)?;
        println!("{l}\t{:.4}\t{}", report.rho, report.contagious);
    }
    let alphas = [1e-2, 1e-3, 1e-4];
    for l in [2.0, 6.0] {
        let model = ModelSpec::poisson(l, l, 0.5, 10_000, 0.25, SeedingRule::GlobalUniform(0.0))?;
        let table = small_seed_limit(&model, &alphas)?;
        let excess: Vec<String> = table.rows.iter().map(|r| format!("{:.2e}", r.excess)).collect();
        println!(
            "lambda_in {l}: excess adoption {} -> contagion {:?}",
            excess.join(", "),
            table.contagion
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
