//! Runs two ordered systems on shared randomness and audits the ordering.

use npbbm::particle::{couple_simulate, ParticleConfig};
use npbbm::RandomSource;

fn main() -> npbbm::Result<()> {
    let lower = ParticleConfig::order(&[-1.0, -0.5, 0.0, 0.2, 0.9])?;
    let upper = ParticleConfig::order(&[-0.8, -0.5, 0.3, 0.4, 1.5])?;
    let run = couple_simulate(&lower, &upper, 0.6, 5.0, &RandomSource::new(3), &[1.0, 2.5, 5.0])?;
    for (k, t) in run.lower.sample_times.iter().enumerate() {
        println!(
            "t={t:.1}  lower [{:.3}, {:.3}]  upper [{:.3}, {:.3}]",
            run.lower.leftmost[k], run.lower.rightmost[k], run.upper.leftmost[k], run.upper.rightmost[k]
        );
    }
    println!("{} checks, {} violations", run.checks, run.violations);
    Ok(())
}
