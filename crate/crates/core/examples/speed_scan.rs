//! Estimates the front speed for growing N and compares with the wave speed.

use npbbm::particle::estimate_speed;
use npbbm::wave::wave_speed;
use npbbm::RandomSource;

fn main() -> npbbm::Result<()> {
    let p = 0.75;
    println!("wave speed {:.6}", wave_speed(p)?);
    let src = RandomSource::new(9);
    for (k, n) in [10usize, 50, 200].into_iter().enumerate() {
        let est = estimate_speed(p, n, 30.0, 5.0, 8, &src.derive(k as u64))?;
        println!("N={n:4}  v={:.4} ± {:.4}  (right {:.4} ± {:.4})", est.v_hat, est.std_error, est.v_hat_right, est.std_error_right);
    }
    Ok(())
}
