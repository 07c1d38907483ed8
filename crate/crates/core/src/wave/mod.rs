//! The travelling wave of the free boundary problem
//! `u_t = u_xx / 2 + u` on `(L_t, R_t)` with `u = 0` and slopes `2p`,
//! `2(p - 1)` at the two boundaries.
//!
//! In the moving frame the profile solves `w''/2 + c w' + w = 0` on
//! `(0, R0)`, giving `w(x) = A e^{-cx} sin(ωx)` with `ω = sqrt(2 - c²)`,
//! `R0 = π/ω` and `A = 2p/ω`; the speed is fixed by `e^{-c R0} = (1-p)/p`.

mod report;

pub use report::{hydrodynamic_report, ComparisonReport, HydroParams};

use serde::{Deserialize, Serialize};

use crate::barrier::Barrier;
use crate::density::{GridDensity, GridSpec};
use crate::error::{ensure, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TravellingWave {
    pub p: f64,
    pub c: f64,
    pub r0: f64,
    pub amplitude: f64,
    pub omega: f64,
}

fn check_p(p: f64) -> Result<()> {
    ensure(p > 0.0 && p < 1.0, || format!("p = {p} must lie in (0, 1)"))
}

/// `(|log(p/(1-p))|, sign)`. The smaller of `p` and `1-p` goes through
/// `ln` and the larger through `ln_1p`, so neither tail loses digits.
fn abs_logit(p: f64) -> (f64, f64) {
    if p == 0.5 {
        return (0.0, 0.0);
    }
    let (m, sign) = if p < 0.5 { (p, -1.0) } else { (1.0 - p, 1.0) };
    ((-m).ln_1p() - m.ln(), sign)
}

impl TravellingWave {
    pub fn new(p: f64) -> Result<Self> {
        check_p(p)?;
        let (l, sign) = abs_logit(p);
        let h = l.hypot(std::f64::consts::PI);
        let c = sign * std::f64::consts::SQRT_2 * l / h;
        let omega = std::f64::consts::SQRT_2 * std::f64::consts::PI / h;
        Ok(TravellingWave {
            p,
            c,
            r0: h / std::f64::consts::SQRT_2,
            amplitude: 2.0 * p / omega,
            omega,
        })
    }

    /// Profile on the canonical support `(0, R0)`, zero outside.
    pub fn profile(&self, x: f64) -> f64 {
        if x <= 0.0 || x >= self.r0 {
            return 0.0;
        }
        self.analytic(x).max(0.0)
    }

    fn analytic(&self, x: f64) -> f64 {
        self.amplitude * (-self.c * x).exp() * (self.omega * x).sin()
    }

    pub fn slope(&self, x: f64) -> f64 {
        self.amplitude * (-self.c * x).exp() * (self.omega * (self.omega * x).cos() - self.c * (self.omega * x).sin())
    }

    /// `∫_0^x w` for `x` in `[0, R0]`.
    pub fn antiderivative(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, self.r0);
        let f = |y: f64| {
            -0.5 * self.amplitude * (-self.c * y).exp() * (self.c * (self.omega * y).sin() + self.omega * (self.omega * y).cos())
        };
        f(x) - f(0.0)
    }
}

pub fn wave_speed(p: f64) -> Result<f64> {
    Ok(TravellingWave::new(p)?.c)
}

pub fn wave_profile(w: &TravellingWave, x: f64) -> f64 {
    w.profile(x)
}

/// Cell averages of `x -> w(x - shift)`. With `shift = -R0` the right
/// boundary sits at the origin.
pub fn wave_density(w: &TravellingWave, spec: GridSpec, shift: f64) -> Result<GridDensity> {
    let spec = GridSpec::new(spec.x0, spec.dx, spec.count)?;
    ensure(spec.edge(1) <= shift && shift + w.r0 <= spec.edge(spec.count - 1), || {
        format!(
            "grid [{}, {}] does not cover the support [{}, {}] with empty edge cells",
            spec.x0,
            spec.x_end(),
            shift,
            shift + w.r0
        )
    })?;
    let prim: Vec<f64> = (0..=spec.count).map(|i| w.antiderivative(spec.edge(i) - shift)).collect();
    let values = prim.windows(2).map(|e| ((e[1] - e[0]) / spec.dx).max(0.0)).collect();
    GridDensity::new(spec, values)
}

/// Largest `|w''/2 + c w' + w|` over `x = dx, 2dx, ... <= R0 - dx`, with
/// centred differences of the unclipped profile.
pub fn ode_residual(w: &TravellingWave, dx: f64) -> Result<f64> {
    ensure(dx > 0.0 && dx < w.r0 / 2.0, || format!("dx = {dx} must lie in (0, R0/2)"))?;
    let mut worst: f64 = 0.0;
    let mut k = 1;
    loop {
        let x = k as f64 * dx;
        if x > w.r0 - dx {
            break;
        }
        let (a, b, m) = (w.analytic(x - dx), w.analytic(x + dx), w.analytic(x));
        let d2 = (b - 2.0 * m + a) / (dx * dx);
        let d1 = (b - a) / (2.0 * dx);
        worst = worst.max((0.5 * d2 + w.c * d1 + m).abs());
        k += 1;
    }
    Ok(worst)
}

/// `L_t = c t - R0` and `R_t = c t` on `[0, t_max]`.
pub fn wave_barriers(w: &TravellingWave, t_max: f64) -> Result<(Barrier, Barrier)> {
    ensure(t_max > 0.0 && t_max.is_finite(), || format!("t_max = {t_max} must be positive"))?;
    Ok((Barrier::linear(-w.r0, w.c, t_max)?, Barrier::linear(0.0, w.c, t_max)?))
}
