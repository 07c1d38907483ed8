//! Prints the travelling-wave speed, support length and ODE residual over p.

use npbbm::wave::{ode_residual, TravellingWave};

fn main() -> npbbm::Result<()> {
    println!("   p        c          R0        residual");
    for k in 1..=9 {
        let p = k as f64 / 10.0;
        let w = TravellingWave::new(p)?;
        println!("{p:4.1} {:10.6} {:10.6} {:12.3e}", w.c, w.r0, ode_residual(&w, 1e-3)?);
    }
    let w = TravellingWave::new(0.75)?;
    println!("\nprofile at p=0.75:");
    for i in 0..=10 {
        let x = w.r0 * i as f64 / 10.0;
        println!("{x:8.4} {:10.6}", w.profile(x));
    }
    Ok(())
}
