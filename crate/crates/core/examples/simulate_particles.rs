//! Simulates the particle system from a block of particles and prints the
//! leftmost and rightmost positions at a few times.

use npbbm::particle::{simulate, ParticleConfig};
use npbbm::RandomSource;

fn main() -> npbbm::Result<()> {
    let n = 200;
    let init = ParticleConfig::order(&(0..n).map(|i| -(i as f64) / n as f64).collect::<Vec<_>>())?;
    let times: Vec<f64> = (1..=10).map(|k| k as f64).collect();
    let rec = simulate(&init, 0.75, 10.0, &RandomSource::new(7), &times)?;
    println!("time      leftmost   rightmost");
    for ((t, l), r) in rec.sample_times.iter().zip(&rec.leftmost).zip(&rec.rightmost) {
        println!("{t:5.1} {l:11.4} {r:11.4}");
    }
    println!("{} branching events", rec.event_count);
    Ok(())
}
