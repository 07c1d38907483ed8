//! Brownian motion killed on leaving `(L_s, R_s)` for piecewise-linear
//! barriers.
//!
//! Paths are Euler steps with exact Gaussian increments. Between grid
//! points a path may cross a barrier unseen; for a linear barrier the
//! probability of that given the endpoint distances `d0`, `d1` is
//! `exp(-2 d0 d1 / h)`, and a uniform draw per barrier decides it. Steps are
//! split at barrier knots so each barrier is linear within a step.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::barrier::Barrier;
use crate::density::{self, GridDensity};
use crate::error::{ensure, Result};
use crate::rng::{RandomSource, Stream};
use crate::stats;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathParams {
    pub horizon: f64,
    pub step: f64,
    pub n_paths: usize,
    /// Disable only to demonstrate the bias of plain endpoint monitoring.
    pub bridge_correction: bool,
}

impl PathParams {
    pub fn new(horizon: f64, step: f64, n_paths: usize) -> Result<Self> {
        let p = PathParams {
            horizon,
            step,
            n_paths,
            bridge_correction: true,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn without_correction(self) -> Self {
        PathParams {
            bridge_correction: false,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.horizon > 0.0 && self.horizon.is_finite(), || format!("horizon = {} must be positive", self.horizon))?;
        ensure(self.step > 0.0 && self.step <= self.horizon, || {
            format!("step = {} must lie in (0, horizon = {}]", self.step, self.horizon)
        })?;
        ensure(self.n_paths >= 1, || "n_paths must be at least 1".into())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ExitOutcome {
    ExitLeft(f64),
    ExitRight(f64),
    Survive(f64),
}

/// Randomness consumed by one path: a Gaussian per step and two uniforms
/// per step for the hidden-crossing tests.
pub trait PathNoise {
    fn gaussian(&mut self) -> f64;
    fn uniform(&mut self) -> f64;
}

/// Independent ChaCha streams for the Gaussians and the uniforms.
pub struct StreamNoise {
    gauss: ChaCha8Rng,
    unif: ChaCha8Rng,
}

impl StreamNoise {
    pub fn new(src: &RandomSource) -> Self {
        StreamNoise {
            gauss: src.rng(Stream::Brownian),
            unif: src.rng(Stream::Aux),
        }
    }
}

impl PathNoise for StreamNoise {
    fn gaussian(&mut self) -> f64 {
        StandardNormal.sample(&mut self.gauss)
    }

    fn uniform(&mut self) -> f64 {
        self.unif.random()
    }
}

fn check_barriers(l: &Barrier, r: &Barrier, horizon: f64) -> Result<()> {
    let mut times: Vec<f64> = vec![0.0, horizon];
    times.extend(l.knots_between(0.0, horizon));
    times.extend(r.knots_between(0.0, horizon));
    for t in times {
        let (a, b) = (l.value_at(t), r.value_at(t));
        ensure(a < b, || format!("barriers cross at time {t}: L = {a}, R = {b}"))?;
    }
    Ok(())
}

/// Time grid of spacing `h` from 0 to `horizon`, with barrier knots inserted.
fn time_grid(l: &Barrier, r: &Barrier, horizon: f64, h: f64) -> Vec<f64> {
    let steps = (horizon / h).round().max(1.0) as usize;
    let regular = (horizon / h - steps as f64).abs() <= 1e-9 * steps as f64;
    let mut grid: Vec<f64> = if regular {
        (0..=steps).map(|k| if k == steps { horizon } else { k as f64 * h }).collect()
    } else {
        let mut g: Vec<f64> = (0..).map(|k| k as f64 * h).take_while(|&s| s < horizon).collect();
        g.push(horizon);
        g
    };
    let knots: Vec<f64> = l.knots_between(0.0, horizon).chain(r.knots_between(0.0, horizon)).collect();
    if !knots.is_empty() {
        grid.extend(knots);
        grid.sort_by(f64::total_cmp);
        grid.dedup();
    }
    grid
}

fn crossing_probability(d0: f64, d1: f64, dt: f64) -> f64 {
    if d0.is_infinite() || d1.is_infinite() {
        0.0
    } else {
        (-2.0 * d0 * d1 / dt).exp()
    }
}

fn walk<N: PathNoise>(x0: f64, l: &Barrier, r: &Barrier, grid: &[f64], correction: bool, noise: &mut N) -> ExitOutcome {
    if x0 <= l.value_at(0.0) {
        return ExitOutcome::ExitLeft(0.0);
    }
    if x0 >= r.value_at(0.0) {
        return ExitOutcome::ExitRight(0.0);
    }
    let mut x = x0;
    for w in grid.windows(2) {
        let (s0, s1) = (w[0], w[1]);
        let dt = s1 - s0;
        let (l0, l1, r0, r1) = (l.value_at(s0), l.value_at(s1), r.value_at(s0), r.value_at(s1));
        let y = x + dt.sqrt() * noise.gaussian();
        let (ul, ur) = (noise.uniform(), noise.uniform());
        if y <= l1 {
            return ExitOutcome::ExitLeft(s1);
        }
        if y >= r1 {
            return ExitOutcome::ExitRight(s1);
        }
        if correction {
            let hit_l = ul < crossing_probability(x - l0, y - l1, dt);
            let hit_r = ur < crossing_probability(r0 - x, r1 - y, dt);
            let mid = 0.5 * (s0 + s1);
            match (hit_l, hit_r) {
                (true, true) if x - l0 <= r0 - x => return ExitOutcome::ExitLeft(mid),
                (true, true) => return ExitOutcome::ExitRight(mid),
                (true, false) => return ExitOutcome::ExitLeft(mid),
                (false, true) => return ExitOutcome::ExitRight(mid),
                (false, false) => {}
            }
        }
        x = y;
    }
    ExitOutcome::Survive(x)
}

/// One killed path from `x0` with the given noise.
pub fn sample_exit_with<N: PathNoise>(x0: f64, l: &Barrier, r: &Barrier, params: &PathParams, noise: &mut N) -> Result<ExitOutcome> {
    params.validate()?;
    check_barriers(l, r, params.horizon)?;
    ensure(x0 > l.value_at(0.0) && x0 < r.value_at(0.0), || {
        format!("x0 = {x0} must lie in ({}, {})", l.value_at(0.0), r.value_at(0.0))
    })?;
    let grid = time_grid(l, r, params.horizon, params.step);
    Ok(walk(x0, l, r, &grid, params.bridge_correction, noise))
}

pub fn sample_exit(x0: f64, l: &Barrier, r: &Barrier, params: &PathParams, src: &RandomSource) -> Result<ExitOutcome> {
    sample_exit_with(x0, l, r, params, &mut StreamNoise::new(src))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExitStats {
    pub n_paths: usize,
    pub exit_left_count: usize,
    pub exit_right_count: usize,
    pub survive_count: usize,
    pub exit_left_prob: f64,
    pub exit_left_se: f64,
    pub exit_right_prob: f64,
    pub exit_right_se: f64,
    pub survive_prob: f64,
    pub survive_se: f64,
    /// `B_t` of the surviving paths, in path order.
    pub survivor_positions: Vec<f64>,
}

impl ExitStats {
    fn from_outcomes(outcomes: &[ExitOutcome]) -> Self {
        let n = outcomes.len();
        let mut left = 0;
        let mut right = 0;
        let mut survivors = Vec::new();
        for o in outcomes {
            match *o {
                ExitOutcome::ExitLeft(_) => left += 1,
                ExitOutcome::ExitRight(_) => right += 1,
                ExitOutcome::Survive(x) => survivors.push(x),
            }
        }
        let (lp, lse) = stats::proportion(left, n);
        let (rp, rse) = stats::proportion(right, n);
        let (sp, sse) = stats::proportion(survivors.len(), n);
        ExitStats {
            n_paths: n,
            exit_left_count: left,
            exit_right_count: right,
            survive_count: survivors.len(),
            exit_left_prob: lp,
            exit_left_se: lse,
            exit_right_prob: rp,
            exit_right_se: rse,
            survive_prob: sp,
            survive_se: sse,
            survivor_positions: survivors,
        }
    }
}

/// Runs `n_paths` paths with starting points drawn from `rho` by inversion.
/// Path `i` uses `src.derive(i)`. A start on or beyond a barrier (possible
/// only within the cell straddling it) counts as an exit at time 0.
pub fn exit_statistics(rho: &GridDensity, l: &Barrier, r: &Barrier, params: &PathParams, src: &RandomSource) -> Result<ExitStats> {
    params.validate()?;
    check_barriers(l, r, params.horizon)?;
    ensure(rho.mass() > 0.0, || "initial density has zero mass".into())?;
    let grid = time_grid(l, r, params.horizon, params.step);
    let quantile = rho.quantile_fn();
    let outcomes: Vec<ExitOutcome> = (0..params.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let path = src.derive(i);
            let u: f64 = path.rng(Stream::Index).random();
            let x0 = quantile(u);
            walk(x0, l, r, &grid, params.bridge_correction, &mut StreamNoise::new(&path))
        })
        .collect();
    Ok(ExitStats::from_outcomes(&outcomes))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepresentationPoint {
    pub x: f64,
    /// `e^t P(survive, B_t >= x)`.
    pub mc: f64,
    /// Tail of the refined scheme limit at `x`.
    pub scheme: f64,
    pub std_error: f64,
    /// L1 width of the scheme sandwich used for `scheme`.
    pub scheme_width: f64,
}

/// Compares `e^t P(survive, B_t >= x)` for the killed motion with the tail
/// of the scheme limit started from `rho` with selection parameter `p`
/// (refined up to `n_max` halvings).
#[allow(clippy::too_many_arguments)]
pub fn representation_check(
    rho: &GridDensity,
    l: &Barrier,
    r: &Barrier,
    p: f64,
    n_max: usize,
    x_grid: &[f64],
    params: &PathParams,
    src: &RandomSource,
) -> Result<Vec<RepresentationPoint>> {
    let t = params.horizon;
    let unit = density::scale(rho, 1.0 / rho.mass())?;
    let (stats, refined) = rayon::join(
        || exit_statistics(rho, l, r, params, src),
        || density::refine_limit(&unit, p, t, n_max, 0.0),
    );
    let (stats, refined) = (stats?, refined?);
    let mut survivors = stats.survivor_positions.clone();
    survivors.sort_by(f64::total_cmp);
    let n = stats.n_paths;
    let growth = t.exp();
    Ok(x_grid
        .iter()
        .map(|&x| {
            let above = survivors.len() - survivors.partition_point(|&y| y < x);
            let (q, se) = stats::proportion(above, n);
            RepresentationPoint {
                x,
                mc: growth * q,
                scheme: density::tail_mass(&refined.psi, x),
                std_error: growth * se,
                scheme_width: refined.width,
            }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxPoint {
    pub delta: f64,
    pub flux_left: f64,
    pub se_left: f64,
    pub flux_right: f64,
    pub se_right: f64,
}

/// `P(exit on each side before delta) / delta` for each `delta`, with the
/// step capped at `delta / 100`. Each `delta` gets its own derived stream.
pub fn small_delta_flux(f: &GridDensity, l: &Barrier, r: &Barrier, deltas: &[f64], params: &PathParams, src: &RandomSource) -> Result<Vec<FluxPoint>> {
    ensure(!deltas.is_empty(), || "need at least one delta".into())?;
    ensure(deltas.windows(2).all(|w| w[1] < w[0]), || "deltas must be strictly decreasing".into())?;
    deltas
        .iter()
        .enumerate()
        .map(|(j, &delta)| {
            ensure(delta > 0.0, || format!("delta = {delta} must be positive"))?;
            let prm = PathParams {
                horizon: delta,
                step: params.step.min(delta / 100.0),
                ..*params
            };
            let s = exit_statistics(f, l, r, &prm, &src.derive(j as u64))?;
            Ok(FluxPoint {
                delta,
                flux_left: s.exit_left_prob / delta,
                se_left: s.exit_left_se / delta,
                flux_right: s.exit_right_prob / delta,
                se_right: s.exit_right_se / delta,
            })
        })
        .collect()
}

/// Linear extrapolation to `delta = 0` through the two smallest deltas
/// (`2 F(δ/2) - F(δ)` when they halve). Returns `(left, se, right, se)`.
pub fn extrapolate_flux(points: &[FluxPoint]) -> Result<(f64, f64, f64, f64)> {
    ensure(points.len() >= 2, || "extrapolation needs two deltas".into())?;
    let a = points[points.len() - 2];
    let b = points[points.len() - 1];
    let (d1, d2) = (a.delta, b.delta);
    ensure(d1 > d2, || "the last two deltas must be decreasing".into())?;
    let w = d1 - d2;
    let ext = |f1: f64, f2: f64| (d1 * f2 - d2 * f1) / w;
    let err = |s1: f64, s2: f64| ((d1 * s2).powi(2) + (d2 * s1).powi(2)).sqrt() / w;
    Ok((
        ext(a.flux_left, b.flux_left),
        err(a.se_left, b.se_left),
        ext(a.flux_right, b.flux_right),
        err(a.se_right, b.se_right),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::GridSpec;
    use crate::wave::{wave_barriers, wave_density, TravellingWave};

    fn flat(v: f64) -> Barrier {
        Barrier::constant(v).unwrap()
    }

    #[test]
    fn far_barriers_never_hit() {
        let prm = PathParams::new(1.0, 1e-2, 10_000).unwrap();
        let spec = GridSpec::covering(-0.5, 0.5, 0.0, 1e-2).unwrap();
        let rho = GridDensity::from_fn(spec, |x| if x.abs() < 0.5 { 1.0 } else { 0.0 }).unwrap();
        let s = exit_statistics(&rho, &flat(-1e6), &flat(1e6), &prm, &RandomSource::new(1)).unwrap();
        assert_eq!(s.survive_count, 10_000);
        assert_eq!(s.survivor_positions.len(), 10_000);
    }

    #[test]
    fn one_sided_reflection_principle() {
        let prm = PathParams::new(1.0, 1e-3, 20_000).unwrap();
        let (l, r) = (flat(0.0), flat(f64::INFINITY));
        let hits: Vec<bool> = (0..prm.n_paths as u64)
            .into_par_iter()
            .map(|i| matches!(sample_exit(1.0, &l, &r, &prm, &RandomSource::new(2).derive(i)).unwrap(), ExitOutcome::ExitLeft(_)))
            .collect();
        let (p, se) = stats::proportion(hits.iter().filter(|&&h| h).count(), hits.len());
        // 2 Φ(-1) = 0.31731050786291410...
        let target = 2.0 * stats::normal_cdf(-1.0);
        assert!((p - target).abs() <= 3.0 * se, "p {p} se {se}");
    }

    #[test]
    fn symmetric_strip() {
        let prm = PathParams::new(1.0, 1e-3, 20_000).unwrap();
        let spec = GridSpec::covering(-1e-3, 1e-3, 0.0, 1e-3).unwrap();
        let rho = GridDensity::from_fn(spec, |x| if x.abs() < 1e-3 { 1.0 } else { 0.0 }).unwrap();
        let s = exit_statistics(&rho, &flat(-1.0), &flat(1.0), &prm, &RandomSource::new(3)).unwrap();
        let se = (s.exit_left_se.powi(2) + s.exit_right_se.powi(2)).sqrt();
        assert!((s.exit_left_prob - s.exit_right_prob).abs() <= 3.0 * se);
        assert_eq!(s.exit_left_count + s.exit_right_count + s.survive_count, s.n_paths);
    }

    #[test]
    fn rejects_bad_inputs() {
        let prm = PathParams::new(1.0, 1e-2, 1).unwrap();
        let src = RandomSource::new(0);
        assert!(sample_exit(2.0, &flat(0.0), &flat(1.0), &prm, &src).is_err());
        assert!(sample_exit(0.5, &flat(1.0), &flat(0.0), &prm, &src).is_err());
        let crossing = Barrier::linear(0.0, 2.0, 1.0).unwrap();
        assert!(sample_exit(0.5, &crossing, &flat(1.0), &prm, &src).is_err());
        assert!(PathParams::new(1.0, 2.0, 1).is_err());
        assert!(PathParams::new(1.0, 0.1, 0).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let w = TravellingWave::new(0.75).unwrap();
        let (l, r) = wave_barriers(&w, 0.2).unwrap();
        let rho = wave_density(&w, GridSpec::covering(-w.r0, 0.0, 0.1, 1e-2).unwrap(), -w.r0).unwrap();
        let prm = PathParams::new(0.2, 1e-2, 500).unwrap();
        let a = exit_statistics(&rho, &l, &r, &prm, &RandomSource::new(4)).unwrap();
        let b = exit_statistics(&rho, &l, &r, &prm, &RandomSource::new(4)).unwrap();
        let c = exit_statistics(&rho, &l, &r, &prm, &RandomSource::new(5)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn knots_split_steps() {
        let l = Barrier::new(vec![0.0, 0.25, 1.0], vec![-1.0, -0.5, -1.0]).unwrap();
        let g = time_grid(&l, &flat(1.0), 1.0, 0.1);
        assert!(g.contains(&0.25));
        assert_eq!(*g.last().unwrap(), 1.0);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    /// Replays a fixed Gaussian sequence, optionally summing pairs so a
    /// coarse walk sees the same Brownian path as a fine one.
    struct Replay {
        z: Vec<f64>,
        pos: usize,
        pairs: bool,
        unif: ChaCha8Rng,
    }

    impl PathNoise for Replay {
        fn gaussian(&mut self) -> f64 {
            if self.pairs {
                let v = (self.z[self.pos] + self.z[self.pos + 1]) * std::f64::consts::FRAC_1_SQRT_2;
                self.pos += 2;
                v
            } else {
                self.pos += 1;
                self.z[self.pos - 1]
            }
        }

        fn uniform(&mut self) -> f64 {
            self.unif.random()
        }
    }

    #[test]
    fn halving_step_moves_estimate_less_than_one_se() {
        let n = 40_000;
        let (l, r) = (flat(0.0), flat(f64::INFINITY));
        let fine = PathParams::new(1.0, 5e-4, n).unwrap();
        let coarse = PathParams::new(1.0, 1e-3, n).unwrap();
        let hits: Vec<(bool, bool)> = (0..n as u64)
            .into_par_iter()
            .map(|i| {
                let src = RandomSource::new(6).derive(i);
                let mut g = src.rng(Stream::Brownian);
                let z: Vec<f64> = (0..2000).map(|_| StandardNormal.sample(&mut g)).collect();
                let mut a = Replay { z: z.clone(), pos: 0, pairs: false, unif: src.rng(Stream::Aux) };
                let mut b = Replay { z, pos: 0, pairs: true, unif: src.derive(1).rng(Stream::Aux) };
                let hf = matches!(sample_exit_with(1.0, &l, &r, &fine, &mut a).unwrap(), ExitOutcome::ExitLeft(_));
                let hc = matches!(sample_exit_with(1.0, &l, &r, &coarse, &mut b).unwrap(), ExitOutcome::ExitLeft(_));
                (hf, hc)
            })
            .collect();
        let pf = stats::proportion(hits.iter().filter(|h| h.0).count(), n);
        let pc = stats::proportion(hits.iter().filter(|h| h.1).count(), n);
        assert!((pf.0 - pc.0).abs() < pc.1, "fine {:?} coarse {:?}", pf, pc);
    }

    #[test]
    fn uncorrected_walk_undercounts() {
        let n = 40_000;
        let prm = PathParams::new(1.0, 1e-2, n).unwrap().without_correction();
        let (l, r) = (flat(0.0), flat(f64::INFINITY));
        let hits = (0..n as u64)
            .into_par_iter()
            .filter(|&i| matches!(sample_exit(1.0, &l, &r, &prm, &RandomSource::new(7).derive(i)).unwrap(), ExitOutcome::ExitLeft(_)))
            .count();
        let (p, se) = stats::proportion(hits, n);
        assert!(p < 2.0 * stats::normal_cdf(-1.0) - 3.0 * se, "p {p} se {se}");
    }

    #[test]
    fn extrapolation_is_richardson_for_halving() {
        let pts = [
            FluxPoint { delta: 0.02, flux_left: 0.7, se_left: 0.01, flux_right: 0.2, se_right: 0.01 },
            FluxPoint { delta: 0.01, flux_left: 0.72, se_left: 0.02, flux_right: 0.22, se_right: 0.02 },
        ];
        let (l, sl, r, _) = extrapolate_flux(&pts).unwrap();
        assert!((l - 0.74).abs() < 1e-12);
        assert!((r - 0.24).abs() < 1e-12);
        assert!((sl - (4.0 * 0.02f64.powi(2) + 0.01f64.powi(2)).sqrt()).abs() < 1e-12);
    }
}
