//! Runs the discrete lower and upper bounding systems next to the particle
//! system and compares their extreme particles.

use npbbm::discrete::{run_bounds, BoundSystemParams, Side};
use npbbm::particle::{simulate, ParticleConfig};
use npbbm::RandomSource;

fn main() -> npbbm::Result<()> {
    let (n, p, delta, steps) = (500, 0.75, 0.1, 10);
    let init = ParticleConfig::constant(n, 0.0)?;
    let src = RandomSource::new(21);
    let lo = run_bounds(&init, &BoundSystemParams::new(n, p, delta, Side::Lower)?, steps, &src.derive(0))?;
    let up = run_bounds(&init, &BoundSystemParams::new(n, p, delta, Side::Upper)?, steps, &src.derive(1))?;
    let times = lo.times();
    let sys = simulate(&init, p, delta * steps as f64, &src.derive(2), &times[1..])?;
    println!("time   lower.max  system.max  upper.max  removed(lo/up)");
    #[allow(clippy::needless_range_loop)]
    for k in 1..=steps {
        println!(
            "{:4.1} {:10.4} {:11.4} {:10.4}  {}/{}",
            times[k],
            lo.configs[k].rightmost(),
            sys.rightmost[k - 1],
            up.configs[k].rightmost(),
            lo.meta[k - 1].removed,
            up.meta[k - 1].removed
        );
    }
    Ok(())
}
