//! Iterates the deterministic lower and upper schemes from the travelling
//! wave and refines the time step to approach their common limit.

use npbbm::density::{iterate_scheme, l1_distance, refine_limit, GridSpec, SchemeParams};
use npbbm::discrete::Side;
use npbbm::wave::{wave_density, TravellingWave};

fn main() -> npbbm::Result<()> {
    let (p, t, delta) = (0.75, 1.0, 0.05);
    let w = TravellingWave::new(p)?;
    let spec = GridSpec::for_scheme(-w.r0, 0.0, t, w.c, 1e-3)?;
    let rho = wave_density(&w, spec, -w.r0)?;
    let steps = (t / delta).round() as usize;
    let lo = iterate_scheme(&rho, &SchemeParams::new(p, delta, Side::Lower)?, steps)?;
    let up = iterate_scheme(&rho, &SchemeParams::new(p, delta, Side::Upper)?, steps)?;
    println!("delta={delta}: L1 width {:.5} at t={t}", l1_distance(&lo.density, &up.density)?);
    if let (Some(a), Some(b)) = (lo.right_cuts.last(), up.right_cuts.last()) {
        println!("right cut {a:.4} (lower) {b:.4} (upper), wave front {:.4}", w.c * t);
    }
    if let (Some(a), Some(b)) = (lo.left_cuts.last(), up.left_cuts.last()) {
        println!("left cut {a:.4} (lower) {b:.4} (upper), wave back {:.4}", w.c * t - w.r0);
    }

    let rep = refine_limit(&rho, p, 0.5, 5, 0.0)?;
    for l in &rep.levels {
        println!("n={} delta={:.5} width={:.5}", l.n, l.delta, l.width);
    }
    println!("ordering holds: {}, width decreasing: {}", rep.ordering_holds, rep.width_decreasing);
    Ok(())
}
