// Two-dimensional reductions of the flow and the single-community
// equivalent of a symmetric model.

use commcascade::meanfield::{MeanField, DEFAULT_MAX_ITER, DEFAULT_TOL};
use commcascade::ode::{reduce_poisson, reduce_symmetric, single_equivalent};
use commcascade::{ModelSpec, SeedingRule};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let poisson = ModelSpec::poisson(17.0, 12.0, 1.0, 10_000, 0.25, SeedingRule::DegreeTargeted([0.025, 0.0]))?;
    let red = reduce_poisson(&poisson)?;
    let nu = red.fixed_point(DEFAULT_TOL, DEFAULT_MAX_ITER);
    let full = MeanField::new(&poisson).fixed_point(DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    println!(
        "Poisson reduction: nu* = {nu:.6?}, phi = {:.6?}; full system phi = {:.6?}",
        red.phi(&nu).0,
        full.phi.0
    );

    let sym = ModelSpec::poisson(8.0, 8.0, 1.0, 10_000, 0.25, SeedingRule::GlobalUniform(0.02))?;
    let red = reduce_symmetric(&sym)?;
    let v = red.fixed_point(DEFAULT_TOL, DEFAULT_MAX_ITER);
    println!("symmetric reduction: (s, c)* = {v:.6?}, phi = {:.6}", red.phi(&v));

    let single = single_equivalent(&sym)?;
    println!(
        "single community with lambda = {:.3}: mu* = {:.6}, rho = {:.4}",
        single.lambda,
        single.fixed_point(),
        single.rho()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
