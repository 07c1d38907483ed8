//! Brownian motion killed at the moving wave barriers: exit statistics and
//! the small-time boundary flux.

use npbbm::density::GridSpec;
use npbbm::killed::{exit_statistics, extrapolate_flux, small_delta_flux, PathParams};
use npbbm::wave::{wave_barriers, wave_density, TravellingWave};
use npbbm::RandomSource;

fn main() -> npbbm::Result<()> {
    let (p, t) = (0.75, 1.0);
    let w = TravellingWave::new(p)?;
    let rho = wave_density(&w, GridSpec::for_scheme(-w.r0, 0.0, t, w.c, 1e-3)?, -w.r0)?;
    let (l, r) = wave_barriers(&w, t)?;
    let s = exit_statistics(&rho, &l, &r, &PathParams::new(t, 1e-3, 20_000)?, &RandomSource::new(5))?;
    let decay = -(-t).exp_m1();
    println!("exit left  {:.4} ± {:.4} (expected {:.4})", s.exit_left_prob, s.exit_left_se, p * decay);
    println!("exit right {:.4} ± {:.4} (expected {:.4})", s.exit_right_prob, s.exit_right_se, (1.0 - p) * decay);
    println!("survive    {:.4} ± {:.4} (expected {:.4})", s.survive_prob, s.survive_se, (-t).exp());

    let pts = small_delta_flux(&rho, &l, &r, &[0.02, 0.01], &PathParams::new(0.1, 1e-4, 20_000)?, &RandomSource::new(6))?;
    let (fl, sl, fr, sr) = extrapolate_flux(&pts)?;
    println!("flux: left {fl:.3} ± {sl:.3} (p = {p}), right {fr:.3} ± {sr:.3}");
    Ok(())
}
