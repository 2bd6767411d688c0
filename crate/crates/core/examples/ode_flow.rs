// The ODE in both parameterizations, and the conservation identity along
// the physical-time run.

use commcascade::ode::{OdeConfig, OdeMode, OdeSystem};
use commcascade::{ModelSpec, SeedingRule};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let model = ModelSpec::poisson(7.0, 12.0, 1.0, 10_000, 0.25, SeedingRule::PerCommunity([0.05, 0.0]))?;
    let sys = OdeSystem::new(&model);

    let traj = sys.integrate(&OdeConfig {
        step: 0.01,
        sample_every: 200,
        ..OdeConfig::default()
    })?;
    let phys = sys.integrate(&OdeConfig {
        step: 1e-3,
        mode: OdeMode::PhysicalTime,
        sample_every: 500,
        ..OdeConfig::default()
    })?;
    println!("t\tphi1\tphi2");
    for s in &phys.samples {
        println!("{:.2}\t{:.4}\t{:.4}", s.physical_t, s.obs.phi[0], s.obs.phi[1]);
    }
    let lm = model.lambda_m();
    let drift = phys
        .samples
        .iter()
        .map(|s| (lm * s.mu.mu21() * s.mu.mu12() - (lm - (s.t - s.obs.tau[0] - s.obs.tau[1]))).abs())
        .fold(0.0, f64::max);
    println!(
        "physical run: {:?} at t = {:.3}, cross-edge identity drift {drift:.1e}",
        phys.stop, phys.terminal_t
    );
    println!(
        "trajectory run: {:?} at s = {:.1}; terminal gap to physical run {:.1e}",
        traj.stop,
        traj.terminal_t,
        traj.terminal.max_abs_diff(&phys.terminal)
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
