//! Particle system against the deterministic sandwich.

use serde::{Deserialize, Serialize};

use crate::density::{iterate_scheme, scale, GridDensity, SchemeParams};
use crate::discrete::Side;
use crate::error::{ensure, Result};
use crate::particle::{simulate, ParticleConfig};
use crate::rng::RandomSource;
use crate::stats;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HydroParams {
    pub p: f64,
    pub n: usize,
    pub t: f64,
    pub delta: f64,
}

/// Result of [`hydrodynamic_report`]. Curves are evaluated at cell edges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub params: HydroParams,
    pub seed: RandomSource,
    /// `sup_x |empirical tail - (lower tail + upper tail)/2|`.
    pub sup_gap: f64,
    /// `sup_x (upper tail - lower tail)`.
    pub tail_width: f64,
    /// L1 distance between the two schemes.
    pub l1_width: f64,
    /// 99% DKW half-width for `N` samples.
    pub dkw: f64,
    pub leftmost: f64,
    pub rightmost: f64,
    /// Final left cut of the upper scheme.
    pub l_hat: f64,
    /// Final right cut of the lower scheme.
    pub r_hat: f64,
    pub left_gap: f64,
    pub right_gap: f64,
    pub x: Vec<f64>,
    pub empirical_tail: Vec<f64>,
    pub lower_tail: Vec<f64>,
    pub upper_tail: Vec<f64>,
}

impl ComparisonReport {
    /// `sup_gap <= tail_width / 2 + 3 dkw`.
    pub fn within_band(&self) -> bool {
        self.sup_gap <= 0.5 * self.tail_width + 3.0 * self.dkw
    }
}

/// Samples `N` particles from `rho`, runs the particle system to `t` and
/// both schemes with step `delta` (which must divide `t`), and compares
/// tails. `src.derive(0)` draws the initial sample and `src.derive(1)`
/// drives the particles.
pub fn hydrodynamic_report(params: HydroParams, rho: &GridDensity, src: &RandomSource) -> Result<ComparisonReport> {
    let HydroParams { p, n, t, delta } = params;
    ensure(n >= 1, || "N must be at least 1".into())?;
    ensure(t > 0.0 && delta > 0.0, || format!("need t > 0 and delta > 0, got {t}, {delta}"))?;
    let k = (t / delta).round();
    ensure(k >= 1.0 && (k * delta - t).abs() <= 1e-9 * t, || format!("delta = {delta} must divide t = {t}"))?;
    let k = k as usize;
    ensure(rho.mass() > 0.0, || "initial density has zero mass".into())?;
    let rho = scale(rho, 1.0 / rho.mass())?;

    let init = ParticleConfig::order(&rho.sample(n, &src.derive(0))?)?;
    let lo = SchemeParams::new(p, delta, Side::Lower)?;
    let up = SchemeParams::new(p, delta, Side::Upper)?;
    let (rec, (lower, upper)) = rayon::join(
        || simulate(&init, p, t, &src.derive(1), &[t]),
        || rayon::join(|| iterate_scheme(&rho, &lo, k), || iterate_scheme(&rho, &up, k)),
    );
    let (rec, lower, upper) = (rec?, lower?, upper?);

    let spec = rho.spec();
    let x: Vec<f64> = (0..=spec.count).map(|i| spec.edge(i)).collect();
    let particles = rec.final_config.positions();
    let empirical_tail = stats::empirical_tail(particles, &x);
    let lower_tail = lower.density.tail_profile();
    let upper_tail = upper.density.tail_profile();
    let mut sup_gap: f64 = 0.0;
    let mut tail_width: f64 = 0.0;
    for i in 0..x.len() {
        let mid = 0.5 * (lower_tail[i] + upper_tail[i]);
        sup_gap = sup_gap.max((empirical_tail[i] - mid).abs());
        tail_width = tail_width.max(upper_tail[i] - lower_tail[i]);
    }
    let l_hat = upper.final_boundary().unwrap_or(f64::NAN);
    let r_hat = lower.final_boundary().unwrap_or(f64::NAN);
    let (leftmost, rightmost) = (particles[0], particles[n - 1]);
    Ok(ComparisonReport {
        params,
        seed: *src,
        sup_gap,
        tail_width,
        l1_width: crate::density::l1_distance(&lower.density, &upper.density)?,
        dkw: stats::dkw_band(n, 0.01),
        leftmost,
        rightmost,
        l_hat,
        r_hat,
        left_gap: (leftmost - l_hat).abs(),
        right_gap: (rightmost - r_hat).abs(),
        x,
        empirical_tail,
        lower_tail,
        upper_tail,
    })
}
