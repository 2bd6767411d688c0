// Local, global, and degree-targeted seeding with a 5% budget in two
// asymmetric regimes.

use commcascade::experiment::Strategy;
use commcascade::meanfield::{MeanField, DEFAULT_MAX_ITER, DEFAULT_TOL};
use commcascade::{ModelSpec, SeedingRule};

fn strategy(name: &str, split: Option<[f64; 2]>, targeted: bool) -> Strategy {
    Strategy {
        name: name.into(),
        seeding: None,
        split,
        budget: Some(0.05),
        targeted,
    }
}

fn report(base: &ModelSpec, s: &Strategy) -> Result<(), Box<dyn std::error::Error>> {
    let m = base.with_seeding(s.rule(base.n1(), base.n2(), None)?)?;
    let ad = MeanField::new(&m)
        .fixed_point(DEFAULT_TOL, DEFAULT_MAX_ITER)?
        .phi
        .adoption();
    println!("  {:<18} adoption ({:.3}, {:.3})", s.name, ad[0], ad[1]);
    Ok(())
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let base = ModelSpec::poisson(7.0, 12.0, 1.0, 10_000, 0.25, SeedingRule::GlobalUniform(0.0))?;
    println!("lambda_in = (7, 12), lambda_out = 1");
    report(&base, &strategy("local", Some([1.0, 0.0]), false))?;
    report(&base, &strategy("global", None, false))?;

    let base = ModelSpec::poisson(17.0, 12.0, 1.0, 10_000, 0.25, SeedingRule::GlobalUniform(0.0))?;
    println!("lambda_in = (17, 12), lambda_out = 1, degree-targeted");
    for split in [[1.0, 0.0], [0.5, 0.5], [0.25, 0.75]] {
        report(&base, &strategy(&format!("split {split:?}"), Some(split), true))?;
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
