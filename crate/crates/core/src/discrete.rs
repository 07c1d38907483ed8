//! Time-discretised bounding systems.
//!
//! Between multiples of `delta` the particles branch freely (a binary
//! branching Brownian motion with unit rate); selection only happens at the
//! grid times. The lower system first removes `round(N p (1 - e^-delta))`
//! leftmost particles, grows for `delta`, then keeps the `N` leftmost. The
//! upper system is its mirror image.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::particle::ParticleConfig;
use crate::rng::{RandomSource, Stream};

/// A freely branching population; its size changes over time.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FreePopulation {
    positions: Vec<f64>,
}

impl FreePopulation {
    pub fn new(raw: &[f64]) -> Result<Self> {
        ensure(raw.iter().all(|x| x.is_finite()), || "positions must be finite".into())?;
        let mut positions = raw.to_vec();
        positions.sort_by(f64::total_cmp);
        Ok(FreePopulation { positions })
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

impl From<&ParticleConfig> for FreePopulation {
    fn from(c: &ParticleConfig) -> Self {
        FreePopulation {
            positions: c.positions().to_vec(),
        }
    }
}

fn grow<R: Rng>(x0: f64, t: f64, rng: &mut R, sign: f64, out: &mut Vec<f64>) {
    let mut stack = vec![(x0, t)];
    while let Some((x, rem)) = stack.pop() {
        let split: f64 = Exp1.sample(rng);
        let z: f64 = StandardNormal.sample(rng);
        if split >= rem {
            out.push(x + sign * (rem.sqrt() * z));
        } else {
            let y = x + sign * (split.sqrt() * z);
            let left = rem - split;
            stack.push((y, left));
            stack.push((y, left));
        }
    }
}

/// Runs independent unit-rate binary branching Brownian motions from every
/// particle for time `t`. Particle `j` draws from `src.derive(j)`; a
/// mirrored source reverses that assignment and negates displacements.
pub fn free_bbm(init: &FreePopulation, t: f64, src: &RandomSource) -> Result<FreePopulation> {
    ensure(t >= 0.0 && t.is_finite(), || format!("time {t} must be finite and >= 0"))?;
    Ok(FreePopulation {
        positions: grow_slice(&init.positions, t, src),
    })
}

fn grow_slice(init: &[f64], t: f64, src: &RandomSource) -> Vec<f64> {
    if t == 0.0 {
        return init.to_vec();
    }
    let m = init.len();
    let sign = if src.mirrored { -1.0 } else { 1.0 };
    let mut out = Vec::with_capacity((m as f64 * t.exp() * 1.2) as usize + 8);
    for (j, &x) in init.iter().enumerate() {
        let tag = if src.mirrored { m - 1 - j } else { j };
        let mut rng = src.derive(tag as u64).rng(Stream::Aux);
        grow(x, t, &mut rng, sign, &mut out);
    }
    out.sort_by(f64::total_cmp);
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Lower,
    Upper,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundSystemParams {
    pub n: usize,
    pub p: f64,
    pub delta: f64,
    pub side: Side,
}

impl BoundSystemParams {
    pub fn new(n: usize, p: f64, delta: f64, side: Side) -> Result<Self> {
        let params = BoundSystemParams { n, p, delta, side };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.n >= 1, || "N must be at least 1".into())?;
        ensure(self.p > 0.0 && self.p < 1.0, || format!("p = {} must lie in (0, 1)", self.p))?;
        ensure(self.delta > 0.0 && self.delta.is_finite(), || {
            format!("delta = {} must be positive", self.delta)
        })
    }

    /// Number of particles removed at the start of each step
    /// (round-half-to-even, capped at `N - 1`).
    pub fn removal_count(&self) -> usize {
        let loss = -(-self.delta).exp_m1();
        let q = match self.side {
            Side::Lower => self.p,
            Side::Upper => 1.0 - self.p,
        };
        let r = (self.n as f64 * q * loss).round_ties_even() as usize;
        r.min(self.n - 1)
    }
}

/// What happened during one bounding step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepMeta {
    pub removed: usize,
    /// Population size after free growth, before truncation back to `N`.
    pub pre_truncation: usize,
    /// Set when growth left fewer than `N` particles and the extreme
    /// particle was duplicated to restore the size.
    pub fallback: bool,
}

fn bound_step_impl(config: &ParticleConfig, params: &BoundSystemParams, src: &RandomSource) -> Result<(ParticleConfig, StepMeta)> {
    params.validate()?;
    let n = params.n;
    ensure(config.len() == n, || format!("configuration has {} particles, expected {n}", config.len()))?;
    let r = params.removal_count();
    let x = config.positions();
    let survivors = match params.side {
        Side::Lower => &x[r..],
        Side::Upper => &x[..n - r],
    };
    let mut pop = grow_slice(survivors, params.delta, src);
    let pre = pop.len();
    let fallback = pre < n;
    let out = match params.side {
        Side::Lower => {
            if fallback {
                let mut padded = vec![pop[0]; n - pre];
                padded.extend_from_slice(&pop);
                padded
            } else {
                pop.truncate(n);
                pop
            }
        }
        Side::Upper => {
            if fallback {
                let last = pop[pre - 1];
                pop.resize(n, last);
                pop
            } else {
                pop.split_off(pre - n)
            }
        }
    };
    Ok((
        ParticleConfig::from_sorted(out),
        StepMeta {
            removed: r,
            pre_truncation: pre,
            fallback,
        },
    ))
}

/// One step of the lower bounding system.
pub fn lower_step(config: &ParticleConfig, params: &BoundSystemParams, src: &RandomSource) -> Result<(ParticleConfig, StepMeta)> {
    ensure(params.side == Side::Lower, || "lower_step needs side = lower".into())?;
    bound_step_impl(config, params, src)
}

/// One step of the upper bounding system.
pub fn upper_step(config: &ParticleConfig, params: &BoundSystemParams, src: &RandomSource) -> Result<(ParticleConfig, StepMeta)> {
    ensure(params.side == Side::Upper, || "upper_step needs side = upper".into())?;
    bound_step_impl(config, params, src)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsRun {
    pub params: BoundSystemParams,
    /// Configurations at times `0, delta, ..., k delta`.
    pub configs: Vec<ParticleConfig>,
    pub meta: Vec<StepMeta>,
}

impl BoundsRun {
    pub fn times(&self) -> Vec<f64> {
        (0..self.configs.len()).map(|j| j as f64 * self.params.delta).collect()
    }

    pub fn last(&self) -> &ParticleConfig {
        self.configs.last().expect("at least the initial configuration")
    }
}

/// Iterates the bounding step `k_steps` times. Step `j` uses `src.derive(j)`.
pub fn run_bounds(init: &ParticleConfig, params: &BoundSystemParams, k_steps: usize, src: &RandomSource) -> Result<BoundsRun> {
    params.validate()?;
    ensure(init.len() == params.n, || format!("initial configuration has {} particles, expected {}", init.len(), params.n))?;
    let mut configs = Vec::with_capacity(k_steps + 1);
    let mut meta = Vec::with_capacity(k_steps);
    configs.push(init.clone());
    for j in 0..k_steps {
        let (next, m) = bound_step_impl(configs.last().expect("non-empty"), params, &src.derive(j as u64))?;
        configs.push(next);
        meta.push(m);
    }
    Ok(BoundsRun {
        params: *params,
        configs,
        meta,
    })
}
