//! Piecewise-linear time-dependent barriers.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Barrier {
    knot_times: Vec<f64>,
    knot_values: Vec<f64>,
}

impl Barrier {
    /// Knot times must be finite and strictly increasing. Values may be
    /// infinite only if they are all the same infinity.
    pub fn new(knot_times: Vec<f64>, knot_values: Vec<f64>) -> Result<Self> {
        ensure(!knot_times.is_empty(), || "barrier needs at least one knot".into())?;
        ensure(knot_times.len() == knot_values.len(), || {
            format!("{} knot times but {} knot values", knot_times.len(), knot_values.len())
        })?;
        ensure(knot_times.iter().all(|t| t.is_finite()), || "knot times must be finite".into())?;
        ensure(knot_times.windows(2).all(|w| w[0] < w[1]), || "knot times must be strictly increasing".into())?;
        let infinite = knot_values.iter().filter(|v| v.is_infinite()).count();
        ensure(!knot_values.iter().any(|v| v.is_nan()), || "knot values must not be NaN".into())?;
        ensure(
            infinite == 0 || (infinite == knot_values.len() && knot_values.iter().all(|&v| v == knot_values[0])),
            || "an infinite barrier must be constant".into(),
        )?;
        Ok(Barrier { knot_times, knot_values })
    }

    /// A barrier fixed at `value` for all times (±∞ allowed).
    pub fn constant(value: f64) -> Result<Self> {
        Barrier::new(vec![0.0], vec![value])
    }

    /// `value = intercept + slope * t` on `[0, t_max]`.
    pub fn linear(intercept: f64, slope: f64, t_max: f64) -> Result<Self> {
        ensure(t_max > 0.0, || format!("t_max = {t_max} must be positive"))?;
        Barrier::new(vec![0.0, t_max], vec![intercept, intercept + slope * t_max])
    }

    pub fn knot_times(&self) -> &[f64] {
        &self.knot_times
    }

    pub fn knot_values(&self) -> &[f64] {
        &self.knot_values
    }

    /// Linear interpolation between knots; constant extrapolation outside.
    pub fn value_at(&self, t: f64) -> f64 {
        let (ts, vs) = (&self.knot_times, &self.knot_values);
        let n = ts.len();
        if n == 1 || t <= ts[0] {
            return vs[0];
        }
        if t >= ts[n - 1] {
            return vs[n - 1];
        }
        let j = ts.partition_point(|&s| s <= t) - 1;
        let w = (t - ts[j]) / (ts[j + 1] - ts[j]);
        vs[j] + w * (vs[j + 1] - vs[j])
    }

    /// Knot times strictly inside `(a, b)`.
    pub fn knots_between(&self, a: f64, b: f64) -> impl Iterator<Item = f64> + '_ {
        self.knot_times.iter().copied().filter(move |&s| s > a && s < b)
    }

    pub fn is_infinite(&self) -> bool {
        self.knot_values[0].is_infinite()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates() {
        let b = Barrier::new(vec![0.0, 1.0, 3.0], vec![0.0, 2.0, 0.0]).unwrap();
        assert_eq!(b.value_at(0.5), 1.0);
        assert_eq!(b.value_at(2.0), 1.0);
        assert_eq!(b.value_at(-1.0), 0.0);
        assert_eq!(b.value_at(5.0), 0.0);
        assert_eq!(b.value_at(1.0), 2.0);
        assert_eq!(b.knots_between(0.0, 3.0).collect::<Vec<_>>(), vec![1.0]);
    }

    #[test]
    fn constant_and_linear() {
        assert_eq!(Barrier::constant(f64::INFINITY).unwrap().value_at(7.0), f64::INFINITY);
        let l = Barrier::linear(-2.0, 0.5, 4.0).unwrap();
        assert_eq!(l.value_at(2.0), -1.0);
    }

    #[test]
    fn rejects_bad_knots() {
        assert!(Barrier::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(Barrier::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(Barrier::new(vec![], vec![]).is_err());
        assert!(Barrier::new(vec![0.0, 1.0], vec![1.0, f64::INFINITY]).is_err());
    }
}
