//! Compares the empirical tail of the particle system with the scheme
//! sandwich at one time.

use npbbm::density::GridSpec;
use npbbm::wave::{hydrodynamic_report, wave_density, HydroParams, TravellingWave};
use npbbm::RandomSource;

fn main() -> npbbm::Result<()> {
    let (p, t) = (0.75, 1.0);
    let w = TravellingWave::new(p)?;
    let rho = wave_density(&w, GridSpec::for_scheme(-w.r0, 0.0, t, w.c, 1e-3)?, -w.r0)?;
    for n in [500, 2000] {
        let rep = hydrodynamic_report(HydroParams { p, n, t, delta: 0.05 }, &rho, &RandomSource::new(n as u64))?;
        println!(
            "N={n}: sup gap {:.4}, sandwich width {:.4}, DKW {:.4}, in band: {}",
            rep.sup_gap,
            rep.tail_width,
            rep.dkw,
            rep.within_band()
        );
    }
    Ok(())
}
