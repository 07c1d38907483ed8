//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any failed.

use std::time::Instant;

use npbbm::barrier::Barrier;
use npbbm::density::{self, GridDensity, GridSpec, SchemeParams};
use npbbm::discrete::{BoundSystemParams, Side};
use npbbm::killed::{self, ExitOutcome, PathParams};
use npbbm::particle::{self, ParticleConfig};
use npbbm::stats;
use npbbm::wave::{self, HydroParams, TravellingWave};
use npbbm::RandomSource;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn require(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn e<T: std::fmt::Display>(x: T) -> String {
    x.to_string()
}

/// `sqrt(2 ln²(p/(1-p)) / (ln²(p/(1-p)) + π²))` with the sign of `p - 1/2`,
/// evaluated directly.
fn closed_form_speed(p: f64) -> f64 {
    let l = (p / (1.0 - p)).ln();
    (2.0 * l * l / (l * l + std::f64::consts::PI.powi(2))).sqrt().copysign(l)
}

fn wave_fixture(p: f64, t: f64, dx: f64) -> (TravellingWave, GridDensity) {
    let w = TravellingWave::new(p).unwrap();
    let spec = GridSpec::for_scheme(-w.r0, 0.0, t, w.c, dx).unwrap();
    let rho = wave::wave_density(&w, spec, -w.r0).unwrap();
    (w, rho)
}

fn random_density(seed: u64, dx: f64) -> GridDensity {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bumps: Vec<(f64, f64, f64)> = (0..rng.random_range(1..5))
        .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(0.05..0.6), rng.random_range(0.1..1.0)))
        .collect();
    let half = rng.random_range(1.0..2.0);
    let spec = GridSpec::covering(-half, half, 6.0, dx).unwrap();
    let f = GridDensity::from_fn(spec, |x| {
        if x.abs() >= half {
            return 0.0;
        }
        let env = (1.0 - (x / half).powi(2)).powi(2);
        env * bumps.iter().map(|(m, s, a)| a * (-0.5 * ((x - m) / s).powi(2)).exp()).sum::<f64>()
    })
    .unwrap();
    let mass = rng.random_range(0.5..2.0);
    density::scale(&f, mass / f.mass()).unwrap()
}

fn c1_travelling_wave() -> Check {
    let mut worst_res: f64 = 0.0;
    for k in 1..=9 {
        let p = k as f64 / 10.0;
        let w = TravellingWave::new(p).map_err(e)?;
        let r1 = wave::ode_residual(&w, 1e-3).map_err(e)?;
        let r2 = wave::ode_residual(&w, 5e-4).map_err(e)?;
        worst_res = worst_res.max(r1);
        require(r1 <= 1e-4, format!("p={p}: residual {r1:e}"))?;
        require((3.5..=4.5).contains(&(r1 / r2)), format!("p={p}: halving ratio {}", r1 / r2))?;
        require((w.slope(0.0) - 2.0 * p).abs() <= 1e-10, format!("p={p}: left slope {}", w.slope(0.0)))?;
        require((w.slope(w.r0) - 2.0 * (p - 1.0)).abs() <= 1e-10, format!("p={p}: right slope {}", w.slope(w.r0)))?;
        let spec = GridSpec::covering(-w.r0, 0.0, 0.01, 1e-3).map_err(e)?;
        let mass = wave::wave_density(&w, spec, -w.r0).map_err(e)?.mass();
        require((mass - 1.0).abs() <= 1e-8, format!("p={p}: mass {mass}"))?;
        let id = ((-w.c * w.r0).exp() - (1.0 - p) / p).abs();
        require(id <= 1e-10, format!("p={p}: speed identity off by {id:e}"))?;
    }
    require(wave::wave_speed(0.5).map_err(e)? == 0.0, "c(0.5) != 0")?;
    let c = wave::wave_speed(0.75).map_err(e)?;
    let oracle = closed_form_speed(0.75);
    require((c - oracle).abs() <= 1e-6, format!("c(0.75) = {c}, closed form {oracle}"))?;
    Ok(format!("max residual {worst_res:.2e}, c(0.75) = {c:.9}"))
}

fn c2_operator_lemmas() -> Check {
    let eps = 1e-10;
    let failures: Vec<String> = (0..200u64)
        .into_par_iter()
        .filter_map(|seed| {
            let check = || -> Result<(), String> {
                let dx = 5e-3;
                let f = random_density(seed, dx);
                // second density on the same grid
                let g0 = random_density(seed + 10_000, dx);
                let g = GridDensity::from_fn(f.spec(), |x| {
                    let j = ((x - g0.x0()) / dx).floor();
                    if j >= 0.0 && (j as usize) < g0.len() {
                        g0.values()[j as usize]
                    } else {
                        0.0
                    }
                })
                .map_err(e)?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
                let m = f.mass();
                let a = rng.random_range(0.0..m);
                let b = rng.random_range(0.0..m);
                let t = rng.random_range(0.001..0.5);
                let dl = |h: &GridDensity, x: f64| density::cut_left_amount(h, x).map_err(e);
                let dr = |h: &GridDensity, x: f64| density::cut_right_amount(h, x).map_err(e);
                let l1 = |x: &GridDensity, y: &GridDensity| density::l1_distance(x, y).map_err(e);
                let (da, db) = (dl(&f, a)?, dl(&f, b)?);
                require(l1(&da, &db)? <= (a - b).abs() + eps, "(a) left")?;
                require(l1(&dr(&f, a)?, &dr(&f, b)?)? <= (a - b).abs() + eps, "(a) right")?;
                let fg = l1(&f, &g)?;
                if a <= g.mass() {
                    require(l1(&da, &dl(&g, a)?)? <= fg + eps, "(b) left")?;
                    require(l1(&dr(&f, a)?, &dr(&g, a)?)? <= fg + eps, "(b) right")?;
                }
                let gf = density::gaussian_propagate(&f, t).map_err(e)?;
                let gg = density::gaussian_propagate(&g, t).map_err(e)?;
                require(l1(&gf, &gg)? <= fg + eps, "(c)")?;
                let (a2, b2) = (a / 2.0, b / 2.0);
                let lr = dr(&dl(&f, a2)?, b2)?;
                let rl = dl(&dr(&f, b2)?, a2)?;
                require(l1(&lr, &rl)? <= 1e-12, "(d)")?;
                let split = dl(&dl(&f, a2)?, a - a2)?;
                require((split.mass() - da.mass()).abs() <= 1e-12 * m && l1(&split, &da)? <= eps, "(e)")?;
                let k = rng.random_range(0.5..3.0);
                let lhs = dl(&density::scale(&f, k).map_err(e)?, k * a)?;
                let rhs = density::scale(&da, k).map_err(e)?;
                require(l1(&lhs, &rhs)? <= eps, "(f)")?;
                require((da.mass() - (m - a)).abs() <= 1e-12 * m, "exact cut mass")?;
                let left = density::gaussian_propagate(&da, t).map_err(e)?;
                let right = dl(&gf, a)?;
                require(
                    density::dominates(&left, &right, density::default_tolerance(&left, &right)).map_err(e)?,
                    "order switching",
                )?;
                Ok(())
            };
            check().err().map(|m| format!("seed {seed}: {m}"))
        })
        .collect();
    require(failures.is_empty(), failures.join("; "))?;
    Ok("200 densities, properties (a)-(f) and order switching".into())
}

fn c3_sandwich_bound() -> Check {
    let dx = 1e-3;
    let mut cases = Vec::new();
    for &delta in &[0.05, 0.1] {
        for &p in &[0.25, 0.5, 0.75] {
            cases.push((delta, p));
        }
    }
    let worst: Vec<f64> = cases
        .par_iter()
        .map(|&(delta, p)| -> Result<f64, String> {
            let t = 20.0 * delta;
            let (_, rho) = wave_fixture(p, t, dx);
            let lo = SchemeParams::new(p, delta, Side::Lower).map_err(e)?;
            let up = SchemeParams::new(p, delta, Side::Upper).map_err(e)?;
            let (mut lh, mut uh) = (Vec::new(), Vec::new());
            density::iterate_scheme_each(&rho, &lo, 20, |_, g| lh.push(g.clone())).map_err(e)?;
            density::iterate_scheme_each(&rho, &up, 20, |_, g| uh.push(g.clone())).map_err(e)?;
            let mut slack: f64 = f64::INFINITY;
            for (k, (a, b)) in lh.iter().zip(&uh).enumerate() {
                let k = (k + 1) as f64;
                let width = density::l1_distance(a, b).map_err(e)?;
                let bound = 2.0 * delta.exp_m1() * (k * delta).exp() + 1e-3;
                require(width < bound, format!("delta={delta} p={p} k={k}: width {width} >= {bound}"))?;
                slack = slack.min(bound - width);
            }
            Ok(slack)
        })
        .collect::<Result<_, _>>()?;
    let slack = worst.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(format!("6 (delta, p) cases x 20 steps, smallest margin {slack:.4}"))
}

fn c4_half_time_ordering() -> Check {
    let dx = 1e-3;
    let t = 0.5;
    let p = 0.75;
    let (w, rho) = wave_fixture(p, t, dx);
    let rep = density::refine_limit(&rho, p, t, 5, 0.0).map_err(e)?;
    require(rep.levels.len() == 6, "expected levels 0..=5")?;
    require(rep.ordering_holds, "tail ordering violated")?;
    for pair in rep.levels.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let chain = [&a.lower, &b.lower, &b.upper, &a.upper];
        for c in chain.windows(2) {
            let tol = density::default_tolerance(c[0], c[1]);
            require(density::dominates(c[0], c[1], tol).map_err(e)?, format!("ordering at n={}", b.n))?;
        }
    }
    require(rep.width_decreasing, "width not strictly decreasing")?;
    let exact = wave::wave_density(&w, rho.spec(), -w.r0 + w.c * t).map_err(e)?;
    let dist = density::l1_distance(&rep.psi, &exact).map_err(e)?;
    require(dist <= rep.width + 2.0 * dx, format!("|psi - shifted wave| = {dist}, width {}", rep.width))?;

    // a non-wave start at p = 0.5
    let f = random_density(4, dx);
    let f = density::scale(&f, 1.0 / f.mass()).map_err(e)?;
    let spec = GridSpec::covering(-2.0, 2.0, 8.0 * t.sqrt() + 1.5 * t, dx).map_err(e)?;
    let f = GridDensity::from_fn(spec, |x| {
        let j = ((x - f.x0()) / dx).floor();
        if j >= 0.0 && (j as usize) < f.len() {
            f.values()[j as usize]
        } else {
            0.0
        }
    })
    .map_err(e)?;
    let rep2 = density::refine_limit(&f, 0.5, t, 5, 0.0).map_err(e)?;
    require(rep2.ordering_holds && rep2.width_decreasing, "generic start: ordering or width")?;
    let widths: Vec<String> = rep.levels.iter().map(|l| format!("{:.4}", l.width)).collect();
    Ok(format!("widths [{}], |psi - exact| = {dist:.2e}", widths.join(", ")))
}

fn one_sided(n: usize, h: f64, correction: bool, seed: u64) -> Result<(f64, f64), String> {
    let mut prm = PathParams::new(1.0, h, n).map_err(e)?;
    prm.bridge_correction = correction;
    let l = Barrier::constant(0.0).map_err(e)?;
    let r = Barrier::constant(f64::INFINITY).map_err(e)?;
    let src = RandomSource::new(seed);
    let hits = (0..n as u64)
        .into_par_iter()
        .map(|i| killed::sample_exit(1.0, &l, &r, &prm, &src.derive(i)).map(|o| matches!(o, ExitOutcome::ExitLeft(_))))
        .collect::<npbbm::Result<Vec<bool>>>()
        .map_err(e)?;
    Ok(stats::proportion(hits.iter().filter(|&&h| h).count(), n))
}

fn c5_killed_boundary() -> Check {
    let (p, t) = (0.75, 1.0);
    let (w, rho) = wave_fixture(p, t, 1e-3);
    let (l, r) = wave::wave_barriers(&w, t).map_err(e)?;
    let prm = PathParams::new(t, 1e-3, 100_000).map_err(e)?;
    let s = killed::exit_statistics(&rho, &l, &r, &prm, &RandomSource::new(500)).map_err(e)?;
    let decay = -(-t).exp_m1();
    let checks = [
        ("exit_left", s.exit_left_prob, s.exit_left_se, p * decay),
        ("exit_right", s.exit_right_prob, s.exit_right_se, (1.0 - p) * decay),
        ("survive", s.survive_prob, s.survive_se, (-t).exp()),
    ];
    for (name, est, se, target) in checks {
        require((est - target).abs() <= 3.0 * se, format!("{name} {est} vs {target} (se {se})"))?;
    }
    let target = 2.0 * stats::normal_cdf(-1.0);
    let (pc, sc) = one_sided(100_000, 1e-3, true, 501)?;
    require((pc - target).abs() <= 3.0 * sc, format!("one-sided corrected {pc} vs {target} (se {sc})"))?;
    let (pu, su) = one_sided(100_000, 1e-2, false, 502)?;
    require(pu < target - 3.0 * su, format!("uncorrected {pu} not > 3 se below {target}"))?;
    Ok(format!(
        "left {:.4} right {:.4} survive {:.4}; one-sided {pc:.4}, uncorrected {pu:.4} (target {target:.4})",
        s.exit_left_prob, s.exit_right_prob, s.survive_prob
    ))
}

fn c6_representation() -> Check {
    let (p, t) = (0.75, 0.5);
    let (w, rho) = wave_fixture(p, t, 1e-3);
    let (l, r) = wave::wave_barriers(&w, t).map_err(e)?;
    let prm = PathParams::new(t, 1e-3, 100_000).map_err(e)?;
    let lt = l.value_at(t);
    let xs: Vec<f64> = (1..=20).map(|j| lt + w.r0 * j as f64 / 21.0).collect();
    let pts = killed::representation_check(&rho, &l, &r, p, 5, &xs, &prm, &RandomSource::new(600)).map_err(e)?;
    let mut worst: f64 = 0.0;
    for q in &pts {
        let gap = (q.mc - q.scheme).abs();
        let tol = 3.0 * q.std_error + q.scheme_width;
        require(gap <= tol, format!("x={:.4}: |{} - {}| > {tol}", q.x, q.mc, q.scheme))?;
        worst = worst.max(gap / tol);
    }
    Ok(format!("20 points, worst gap/tolerance {worst:.3}, scheme width {:.4}", pts[0].scheme_width))
}

fn c7_flux_limits() -> Check {
    let deltas = [0.02, 0.01, 0.005];
    let mut summary = Vec::new();
    for (j, &p) in [0.5, 0.75].iter().enumerate() {
        let (w, rho) = wave_fixture(p, 0.1, 1e-3);
        let (l, r) = wave::wave_barriers(&w, 0.1).map_err(e)?;
        let prm = PathParams::new(0.1, 1e-4, 200_000).map_err(e)?;
        let pts = killed::small_delta_flux(&rho, &l, &r, &deltas, &prm, &RandomSource::new(700 + j as u64)).map_err(e)?;
        let (fl, sl, fr, sr) = killed::extrapolate_flux(&pts).map_err(e)?;
        require((fl - p).abs() <= 3.0 * sl, format!("p={p}: left flux {fl} vs {p} (se {sl})"))?;
        require((fr - (1.0 - p)).abs() <= 3.0 * sr, format!("p={p}: right flux {fr} vs {} (se {sr})", 1.0 - p))?;
        summary.push(format!("p={p}: left {fl:.3}±{sl:.3} right {fr:.3}±{sr:.3}"));
    }
    Ok(summary.join("; "))
}

fn c8_monotone_coupling() -> Check {
    let results: Vec<(u64, u64)> = (0..100u64)
        .into_par_iter()
        .map(|seed| -> Result<(u64, u64), String> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let lo: Vec<f64> = (0..50).map(|_| rng.random_range(-2.0..2.0)).collect();
            let hi: Vec<f64> = lo.iter().map(|x| x + rng.random_range(0.0..0.5)).collect();
            let lo = ParticleConfig::order(&lo).map_err(e)?;
            let hi = ParticleConfig::order(&hi).map_err(e)?;
            let p = rng.random_range(0.05..0.95);
            let run = particle::couple_simulate(&lo, &hi, p, 5.0, &RandomSource::new(800 + seed), &[]).map_err(e)?;
            Ok((run.checks, run.violations))
        })
        .collect::<Result<_, _>>()?;
    let checks: u64 = results.iter().map(|r| r.0).sum();
    let violations: u64 = results.iter().map(|r| r.1).sum();
    require(violations == 0, format!("{violations} violations"))?;
    Ok(format!("{checks} ordering checks, 0 violations"))
}

fn c9_hydrodynamic() -> Check {
    let (p, t, delta) = (0.75, 1.0, 0.05);
    let (_, rho) = wave_fixture(p, t, 1e-3);
    let mut lines = Vec::new();
    for (n, seed) in [(2000usize, 900u64), (8000, 901)] {
        let rep = wave::hydrodynamic_report(HydroParams { p, n, t, delta }, &rho, &RandomSource::new(seed)).map_err(e)?;
        let allowed = 0.5 * rep.tail_width + 3.0 * rep.dkw;
        require(rep.sup_gap <= allowed, format!("N={n}: gap {} > {allowed}", rep.sup_gap))?;
        lines.push((n, rep.sup_gap, rep.tail_width, rep.dkw));
    }
    require((lines[1].3 - 0.5 * lines[0].3).abs() < 1e-15, "DKW term did not halve")?;
    Ok(lines
        .iter()
        .map(|(n, g, w, d)| format!("N={n}: gap {g:.4} <= {:.4}/2 + 3*{d:.4}", w))
        .collect::<Vec<_>>()
        .join("; "))
}

fn c10_speed() -> Check {
    let c = wave::wave_speed(0.75).map_err(e)?;
    let sym = particle::estimate_speed(0.5, 50, 50.0, 10.0, 20, &RandomSource::new(1000)).map_err(e)?;
    require(sym.v_hat.abs() <= 3.0 * sym.std_error, format!("p=0.5: v {} se {}", sym.v_hat, sym.std_error))?;

    let src = RandomSource::new(1001);
    let a = particle::estimate_speed(0.75, 50, 20.0, 5.0, 8, &src).map_err(e)?;
    let b = particle::estimate_speed(0.25, 50, 20.0, 5.0, 8, &src.mirror()).map_err(e)?;
    for (x, y) in a.per_replica_left.iter().zip(&b.per_replica_right) {
        require(*x == -*y, format!("reflection: {x} vs {y}"))?;
    }

    let mut gaps = Vec::new();
    let mut last = None;
    for (k, n) in [10usize, 50, 200].into_iter().enumerate() {
        let est = particle::estimate_speed(0.75, n, 50.0, 10.0, 20, &RandomSource::new(1010 + k as u64)).map_err(e)?;
        let med = stats::median(&est.per_replica_left);
        gaps.push((n, (med - c).abs()));
        let se = (est.std_error.powi(2) + est.std_error_right.powi(2)).sqrt();
        require(
            (est.v_hat - est.v_hat_right).abs() <= 3.0 * se,
            format!("N={n}: left {} right {} (se {se})", est.v_hat, est.v_hat_right),
        )?;
        last = Some(med);
    }
    for w in gaps.windows(2) {
        require(w[1].1 <= w[0].1, format!("|v - c| grew from N={} ({}) to N={} ({})", w[0].0, w[0].1, w[1].0, w[1].1))?;
    }
    let v200 = last.unwrap_or(f64::NAN);
    require(v200 > 0.0 && v200 < 2f64.sqrt(), format!("v_200 = {v200}"))?;
    let g: Vec<String> = gaps.iter().map(|(n, g)| format!("N={n}: {g:.4}")).collect();
    Ok(format!("|median v - c|: {}", g.join(", ")))
}

fn c11_extremes() -> Check {
    let (p, t) = (0.75, 1.0);
    let (w, rho) = wave_fixture(p, t, 1e-3);
    let target = w.c * t;
    let mut medians = Vec::new();
    for (k, n) in [500usize, 1000, 2000, 4000].into_iter().enumerate() {
        let gaps: Vec<f64> = (0..20u64)
            .into_par_iter()
            .map(|s| -> Result<f64, String> {
                let src = RandomSource::new(1100 + k as u64).replica(s);
                let init = ParticleConfig::order(&rho.sample(n, &src.derive(0)).map_err(e)?).map_err(e)?;
                let rec = particle::simulate(&init, p, t, &src.derive(1), &[t]).map_err(e)?;
                Ok((rec.final_config.rightmost() - target).abs())
            })
            .collect::<Result<_, _>>()?;
        medians.push((n, stats::median(&gaps)));
    }
    for m in medians.windows(2) {
        require(m[1].1 < m[0].1, format!("median gap rose from N={} ({}) to N={} ({})", m[0].0, m[0].1, m[1].0, m[1].1))?;
    }
    let s: Vec<String> = medians.iter().map(|(n, m)| format!("N={n}: {m:.4}")).collect();
    Ok(s.join(", "))
}

fn c12_population_counts() -> Check {
    let n = 1000;
    let init = ParticleConfig::constant(n, 0.0).map_err(e)?;
    let mut out = Vec::new();
    for &delta in &[0.1f64, 0.2] {
        for side in [Side::Lower, Side::Upper] {
            let p = 0.75;
            let prm = BoundSystemParams::new(n, p, delta, side).map_err(e)?;
            let target = match side {
                Side::Lower => delta.exp() * (1.0 - p) + p,
                Side::Upper => p * delta.exp() + (1.0 - p),
            };
            let src = RandomSource::new(1200);
            let fr: Vec<f64> = (0..400u64)
                .into_par_iter()
                .map(|r| {
                    let step = match side {
                        Side::Lower => npbbm::discrete::lower_step(&init, &prm, &src.replica(r)),
                        Side::Upper => npbbm::discrete::upper_step(&init, &prm, &src.replica(r)),
                    };
                    step.map(|(_, m)| m.pre_truncation as f64 / n as f64)
                })
                .collect::<npbbm::Result<_>>()
                .map_err(e)?;
            let (m, se) = stats::mean_se(&fr);
            require((m - target).abs() <= 3.0 * se, format!("{side:?} delta={delta}: {m} vs {target} (se {se})"))?;
            out.push(format!("{side:?} {delta}: {m:.5}/{target:.5}"));
        }
    }
    Ok(out.join(", "))
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("travelling-wave closed form", c1_travelling_wave),
        ("operator lemmas", c2_operator_lemmas),
        ("sandwich bound", c3_sandwich_bound),
        ("half-time ordering and common limit", c4_half_time_ordering),
        ("killed BM boundary conditions", c5_killed_boundary),
        ("representation identity", c6_representation),
        ("small-time flux limits", c7_flux_limits),
        ("monotone coupling", c8_monotone_coupling),
        ("hydrodynamic sandwich", c9_hydrodynamic),
        ("speed convergence", c10_speed),
        ("extreme-particle convergence", c11_extremes),
        ("population-count laws", c12_population_counts),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if only.is_some_and(|k| k != i + 1) {
            continue;
        }
        let start = Instant::now();
        let result = run();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {:2} {name}: PASS ({secs:.1}s) {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:2} {name}: FAIL ({secs:.1}s) {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
