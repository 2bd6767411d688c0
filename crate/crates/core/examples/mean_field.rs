// Fixed point of the mean-field map, its Jacobian, and the termination check.

use commcascade::meanfield::{jacobian_fd, MeanField, DEFAULT_MAX_ITER, DEFAULT_TOL};
use commcascade::{ModelSpec, SeedingRule};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    for alpha in [0.02, 0.05] {
        let model = ModelSpec::poisson(8.0, 8.0, 1.0, 10_000, 0.25, SeedingRule::GlobalUniform(alpha))?;
        let mf = MeanField::new(&model);
        let fp = mf.fixed_point(DEFAULT_TOL, DEFAULT_MAX_ITER)?;
        let (verdict, rho) = mf.termination_check(&fp.mu)?;
        let ad = fp.phi.adoption();
        println!(
            "alpha {alpha}: mu* = {:.5?} after {} iterations, adoption ({:.4}, {:.4}), {verdict:?} (rho {rho:.4})",
            fp.mu.0, fp.iterations, ad[0], ad[1]
        );
        let j = mf.jacobian(&fp.mu)?;
        let fd = jacobian_fd(&mf, &fp.mu, 1e-6)?;
        println!(
            "  analytic vs finite-difference Jacobian: max gap {:.2e}",
            j.max_abs_diff(&fd)
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
