//! Exact event-driven simulation of the `(N,p)`-BBM.
//!
//! Between branching events every particle moves by an independent
//! Brownian increment. Increments are drawn only at event times and at
//! requested sample times, so there is no path discretisation error. At an
//! event a uniformly chosen particle branches and, with probability `p`,
//! the leftmost particle is removed, otherwise the rightmost one.
//!
//! Brownian increments are indexed by *rank*: after each re-sort the
//! `j`-th smallest particle receives the `j`-th Gaussian of the interval.
//! Two systems driven by the same draws therefore stay ordered, which is
//! what [`couple_simulate`] exploits.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::rng::{RandomSource, Stream};
use crate::stats;

/// Particle positions in non-decreasing order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParticleConfig {
    positions: Vec<f64>,
}

impl ParticleConfig {
    /// Sorts `raw`; equal values keep their input order.
    pub fn order(raw: &[f64]) -> Result<Self> {
        ensure(!raw.is_empty(), || "configuration must hold at least one particle".into())?;
        ensure(raw.iter().all(|x| x.is_finite()), || "particle positions must be finite".into())?;
        let mut positions = raw.to_vec();
        positions.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        Ok(ParticleConfig { positions })
    }

    /// `n` particles stacked at `x`.
    pub fn constant(n: usize, x: f64) -> Result<Self> {
        Self::order(&vec![x; n])
    }

    pub(crate) fn from_sorted(positions: Vec<f64>) -> Self {
        debug_assert!(positions.windows(2).all(|w| w[0] <= w[1]));
        ParticleConfig { positions }
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn into_positions(self) -> Vec<f64> {
        self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn leftmost(&self) -> f64 {
        self.positions[0]
    }

    pub fn rightmost(&self) -> f64 {
        self.positions[self.positions.len() - 1]
    }

    pub fn shifted(&self, s: f64) -> Self {
        ParticleConfig::from_sorted(self.positions.iter().map(|x| x + s).collect())
    }

    /// The configuration seen through `x -> -x`.
    pub fn reflected(&self) -> Self {
        ParticleConfig::from_sorted(self.positions.iter().rev().map(|x| -x).collect())
    }
}

pub fn order(raw: &[f64]) -> Result<ParticleConfig> {
    ParticleConfig::order(raw)
}

/// The branching/selection map on a sorted vector, in place.
///
/// `idx` is the 0-based rank that branches. `remove_left` deletes the
/// leftmost particle, otherwise the rightmost one. The result stays sorted.
pub(crate) fn apply_branch(v: &mut [f64], idx: usize, remove_left: bool) {
    let n = v.len();
    let x = v[idx];
    if remove_left {
        v.copy_within(1..idx + 1, 0);
    } else {
        v.copy_within(idx..n - 1, idx + 1);
    }
    v[idx] = x;
}

/// Applies one branching event. `i` is 1-based as in the usual notation;
/// `q = true` removes the leftmost particle.
pub fn branch_select_step(v: &ParticleConfig, i: usize, q: bool) -> Result<ParticleConfig> {
    let n = v.len();
    ensure((1..=n).contains(&i), || format!("branch index {i} outside 1..={n}"))?;
    let mut out = v.positions.clone();
    apply_branch(&mut out, i - 1, q);
    Ok(ParticleConfig::from_sorted(out))
}

/// `a ≼ b` for sorted slices: for every `x`, `#{a >= x} <= #{b >= x}`.
pub(crate) fn dominated_sorted(a: &[f64], b: &[f64]) -> bool {
    // only the values of `a` can be binding thresholds
    let mut jb = b.len();
    let mut ia = a.len();
    while ia > 0 {
        let x = a[ia - 1];
        while ia > 0 && a[ia - 1] >= x {
            ia -= 1;
        }
        while jb > 0 && b[jb - 1] >= x {
            jb -= 1;
        }
        if a.len() - ia > b.len() - jb {
            return false;
        }
    }
    true
}

/// Stochastic-order comparison of two configurations.
pub fn dominance_check(a: &ParticleConfig, b: &ParticleConfig) -> bool {
    dominated_sorted(&a.positions, &b.positions)
}

/// Positions relative to the leftmost particle.
pub fn viewed_from_leftmost(c: &ParticleConfig) -> ParticleConfig {
    let x1 = c.leftmost();
    ParticleConfig::from_sorted(c.positions.iter().map(|x| x - x1).collect())
}

/// Supplies the randomness of the construction. The production
/// implementation is [`StreamDriver`]; tests may substitute stubs.
pub trait Driver {
    /// Waiting time until the next branching event of a population of `n`.
    fn event_gap(&mut self, n: usize) -> f64;
    /// 0-based branching rank and whether the leftmost particle is removed.
    fn event(&mut self, n: usize, p: f64) -> (usize, bool);
    /// Rank-indexed Brownian increments over an interval of length `dt`.
    fn increments(&mut self, dt: f64, out: &mut [f64]);
}

/// Draws from the four independent streams of a [`RandomSource`].
pub struct StreamDriver {
    brownian: ChaCha8Rng,
    times: ChaCha8Rng,
    index: ChaCha8Rng,
    selection: ChaCha8Rng,
    mirrored: bool,
}

impl StreamDriver {
    pub fn new(src: &RandomSource) -> Self {
        StreamDriver {
            brownian: src.rng(Stream::Brownian),
            times: src.rng(Stream::EventTimes),
            index: src.rng(Stream::Index),
            selection: src.rng(Stream::Selection),
            mirrored: src.mirrored,
        }
    }
}

impl Driver for StreamDriver {
    fn event_gap(&mut self, n: usize) -> f64 {
        let e: f64 = Exp1.sample(&mut self.times);
        e / n as f64
    }

    fn event(&mut self, n: usize, p: f64) -> (usize, bool) {
        let u: f64 = self.index.random();
        let idx = ((u * n as f64) as usize).min(n - 1);
        let v: f64 = self.selection.random();
        if self.mirrored {
            (n - 1 - idx, v >= 1.0 - p)
        } else {
            (idx, v < p)
        }
    }

    fn increments(&mut self, dt: f64, out: &mut [f64]) {
        let s = dt.sqrt();
        let n = out.len();
        for j in 0..n {
            let z: f64 = StandardNormal.sample(&mut self.brownian);
            if self.mirrored {
                out[n - 1 - j] = -(s * z);
            } else {
                out[j] = s * z;
            }
        }
    }
}

/// Sampled output of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub sample_times: Vec<f64>,
    pub leftmost: Vec<f64>,
    pub rightmost: Vec<f64>,
    pub full_configs: Option<Vec<ParticleConfig>>,
    pub event_count: u64,
    pub final_config: ParticleConfig,
}

impl TrajectoryRecord {
    fn new(times: &[f64], keep_configs: bool, n: usize) -> Self {
        TrajectoryRecord {
            sample_times: times.to_vec(),
            leftmost: Vec::with_capacity(times.len()),
            rightmost: Vec::with_capacity(times.len()),
            full_configs: keep_configs.then(Vec::new),
            event_count: 0,
            final_config: ParticleConfig::from_sorted(vec![0.0; n]),
        }
    }

    fn push(&mut self, sorted: Vec<f64>) {
        self.leftmost.push(sorted[0]);
        self.rightmost.push(sorted[sorted.len() - 1]);
        if let Some(cfgs) = self.full_configs.as_mut() {
            cfgs.push(ParticleConfig::from_sorted(sorted));
        }
    }
}

fn check_p(p: f64) -> Result<()> {
    ensure(p > 0.0 && p < 1.0, || format!("p = {p} must lie in (0, 1)"))
}

fn resolve_sample_times(horizon: f64, sample_times: &[f64]) -> Result<Vec<f64>> {
    ensure(horizon >= 0.0 && horizon.is_finite(), || format!("horizon {horizon} must be finite and >= 0"))?;
    if sample_times.is_empty() {
        return Ok(vec![horizon]);
    }
    ensure(
        sample_times.iter().all(|&s| (0.0..=horizon).contains(&s)),
        || format!("sample times must lie in [0, {horizon}]"),
    )?;
    ensure(
        sample_times.windows(2).all(|w| w[0] < w[1]),
        || "sample times must be strictly increasing".into(),
    )?;
    Ok(sample_times.to_vec())
}

fn sorted_copy(x: &[f64]) -> Vec<f64> {
    let mut s = x.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    s
}

/// Runs one or more systems on shared randomness. Every system sees the
/// same event times, ranks, selection bits and rank-indexed increments.
fn drive<D: Driver>(
    states: &mut [Vec<f64>],
    p: f64,
    horizon: f64,
    driver: &mut D,
    samples: &[f64],
    mut on_sample: impl FnMut(usize, &[Vec<f64>]),
    mut on_event: impl FnMut(&[Vec<f64>]),
) -> u64 {
    let n = states[0].len();
    let mut inc = vec![0.0; n];
    let mut advance = |states: &mut [Vec<f64>], dt: f64, driver: &mut D| {
        if dt > 0.0 {
            driver.increments(dt, &mut inc);
            for s in states.iter_mut() {
                for (x, d) in s.iter_mut().zip(&inc) {
                    *x += d;
                }
            }
        }
    };

    let mut t = 0.0;
    let mut events = 0u64;
    let mut next_event = driver.event_gap(n);
    let mut k = 0;
    loop {
        while k < samples.len() && samples[k] < next_event {
            advance(states, samples[k] - t, driver);
            t = samples[k];
            on_sample(k, states);
            k += 1;
        }
        if next_event > horizon {
            advance(states, horizon - t, driver);
            break;
        }
        advance(states, next_event - t, driver);
        t = next_event;
        let (idx, remove_left) = driver.event(n, p);
        for s in states.iter_mut() {
            s.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
            apply_branch(s, idx, remove_left);
        }
        events += 1;
        on_event(states);
        next_event = t + driver.event_gap(n);
    }
    for s in states.iter_mut() {
        s.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    }
    events
}

/// Simulates the `(N,p)`-BBM from `init` up to `horizon`, recording the
/// extremes at `sample_times` (defaults to `[horizon]` when empty).
///
/// The path is a deterministic function of `(init, p, horizon, src,
/// sample_times)`: sampling splits Brownian intervals, so different sample
/// grids give different (equally distributed) paths.
pub fn simulate(
    init: &ParticleConfig,
    p: f64,
    horizon: f64,
    src: &RandomSource,
    sample_times: &[f64],
) -> Result<TrajectoryRecord> {
    simulate_with(init, p, horizon, &mut StreamDriver::new(src), sample_times, false)
}

/// As [`simulate`] with an explicit driver and optional full snapshots.
pub fn simulate_with<D: Driver>(
    init: &ParticleConfig,
    p: f64,
    horizon: f64,
    driver: &mut D,
    sample_times: &[f64],
    keep_configs: bool,
) -> Result<TrajectoryRecord> {
    check_p(p)?;
    let samples = resolve_sample_times(horizon, sample_times)?;
    let n = init.len();
    let mut rec = TrajectoryRecord::new(&samples, keep_configs, n);
    let mut states = vec![init.positions.clone()];
    rec.event_count = drive(
        &mut states,
        p,
        horizon,
        driver,
        &samples,
        |_, s| rec.push(sorted_copy(&s[0])),
        |s| debug_assert_eq!(s[0].len(), n),
    );
    rec.final_config = ParticleConfig::from_sorted(states.pop().expect("one state"));
    Ok(rec)
}

/// Two trajectories on shared randomness with the ordering audit.
#[derive(Clone, Debug)]
pub struct CoupledRun {
    pub lower: TrajectoryRecord,
    pub upper: TrajectoryRecord,
    /// Number of ordering checks (every event and every sample).
    pub checks: u64,
    pub violations: u64,
}

/// Runs two systems from ordered initial conditions on the same streams
/// and checks `lower ≼ upper` after every event and at every sample time.
pub fn couple_simulate(
    init_lo: &ParticleConfig,
    init_hi: &ParticleConfig,
    p: f64,
    horizon: f64,
    src: &RandomSource,
    sample_times: &[f64],
) -> Result<CoupledRun> {
    couple_simulate_with(init_lo, init_hi, p, horizon, &mut StreamDriver::new(src), sample_times)
}

pub fn couple_simulate_with<D: Driver>(
    init_lo: &ParticleConfig,
    init_hi: &ParticleConfig,
    p: f64,
    horizon: f64,
    driver: &mut D,
    sample_times: &[f64],
) -> Result<CoupledRun> {
    check_p(p)?;
    ensure(init_lo.len() == init_hi.len(), || {
        format!("coupled configurations differ in size: {} vs {}", init_lo.len(), init_hi.len())
    })?;
    ensure(dominance_check(init_lo, init_hi), || "initial configurations are not ordered".into())?;
    let samples = resolve_sample_times(horizon, sample_times)?;
    let n = init_lo.len();
    let mut lower = TrajectoryRecord::new(&samples, false, n);
    let mut upper = TrajectoryRecord::new(&samples, false, n);
    let mut checks = 0u64;
    let mut violations = 0u64;
    let mut states = vec![init_lo.positions.clone(), init_hi.positions.clone()];
    let events = {
        let mut audit = |a: &[f64], b: &[f64]| {
            checks += 1;
            if !dominated_sorted(a, b) {
                violations += 1;
            }
        };
        let mut on_sample_audit = Vec::new();
        let ev = drive(
            &mut states,
            p,
            horizon,
            driver,
            &samples,
            |_, s| {
                let (a, b) = (sorted_copy(&s[0]), sorted_copy(&s[1]));
                on_sample_audit.push(dominated_sorted(&a, &b));
                lower.push(a);
                upper.push(b);
            },
            |s| audit(&s[0], &s[1]),
        );
        for ok in on_sample_audit {
            checks += 1;
            if !ok {
                violations += 1;
            }
        }
        ev
    };
    lower.event_count = events;
    upper.event_count = events;
    let hi = states.pop().expect("two states");
    let lo = states.pop().expect("two states");
    lower.final_config = ParticleConfig::from_sorted(lo);
    upper.final_config = ParticleConfig::from_sorted(hi);
    Ok(CoupledRun {
        lower,
        upper,
        checks,
        violations,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedEstimate {
    /// Mean leftmost-particle velocity over `[burn_in, horizon]`.
    pub v_hat: f64,
    pub std_error: f64,
    /// Same, from the rightmost particle.
    pub v_hat_right: f64,
    pub std_error_right: f64,
    pub n: usize,
    pub p: f64,
    pub horizon: f64,
    pub burn_in: f64,
    pub replicas: usize,
    pub per_replica_left: Vec<f64>,
    pub per_replica_right: Vec<f64>,
}

/// Burn-in used when the caller does not choose one.
pub fn default_burn_in(horizon: f64) -> f64 {
    horizon / 5.0
}

/// Velocity of the extremes, averaged over independent replicas started
/// with all particles at the origin. Replica `r` uses `src.replica(r)`.
pub fn estimate_speed(
    p: f64,
    n: usize,
    horizon: f64,
    burn_in: f64,
    replicas: usize,
    src: &RandomSource,
) -> Result<SpeedEstimate> {
    check_p(p)?;
    ensure(replicas >= 1, || "at least one replica is required".into())?;
    ensure(n >= 1, || "N must be at least 1".into())?;
    ensure(horizon > burn_in && burn_in >= 0.0, || {
        format!("need horizon > burn_in >= 0, got {horizon} and {burn_in}")
    })?;
    let init = ParticleConfig::constant(n, 0.0)?;
    let times: Vec<f64> = if burn_in > 0.0 { vec![burn_in, horizon] } else { vec![0.0, horizon] };
    let span = horizon - burn_in;
    let pairs: Vec<(f64, f64)> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let rec = simulate(&init, p, horizon, &src.replica(r), &times)?;
            Ok((
                (rec.leftmost[1] - rec.leftmost[0]) / span,
                (rec.rightmost[1] - rec.rightmost[0]) / span,
            ))
        })
        .collect::<Result<_>>()?;
    let (left, right): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let (v_hat, std_error) = stats::mean_se(&left);
    let (v_hat_right, std_error_right) = stats::mean_se(&right);
    Ok(SpeedEstimate {
        v_hat,
        std_error,
        v_hat_right,
        std_error_right,
        n,
        p,
        horizon,
        burn_in,
        replicas,
        per_replica_left: left,
        per_replica_right: right,
    })
}

/// Kolmogorov distance between the law of the spread `X_N - X_1` at `t1`
/// and at `t2`, both estimated from the same replicas started at the origin.
pub fn stationarity_diagnostic(
    p: f64,
    n: usize,
    t1: f64,
    t2: f64,
    replicas: usize,
    src: &RandomSource,
) -> Result<f64> {
    check_p(p)?;
    ensure(t1 > 0.0 && t1 <= t2, || format!("need 0 < t1 <= t2, got {t1}, {t2}"))?;
    ensure(replicas >= 1, || "at least one replica is required".into())?;
    let init = ParticleConfig::constant(n, 0.0)?;
    let times: Vec<f64> = if t1 == t2 { vec![t1] } else { vec![t1, t2] };
    let gaps: Vec<(f64, f64)> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let rec = simulate(&init, p, t2, &src.replica(r), &times)?;
            let last = times.len() - 1;
            Ok((
                rec.rightmost[0] - rec.leftmost[0],
                rec.rightmost[last] - rec.leftmost[last],
            ))
        })
        .collect::<Result<_>>()?;
    let (a, b): (Vec<f64>, Vec<f64>) = gaps.into_iter().unzip();
    Ok(stats::ks_two_sample(&a, &b))
}

impl From<ParticleConfig> for Vec<f64> {
    fn from(c: ParticleConfig) -> Self {
        c.positions
    }
}

impl TryFrom<Vec<f64>> for ParticleConfig {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        ParticleConfig::order(&v)
    }
}
