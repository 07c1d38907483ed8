use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{BoundsConfig, ExitConfig, SchemeConfig, SimulateConfig, SpeedscanConfig, WaveConfig};
use super::manifest::{self, RunManifest};
use super::CliError;
use crate::density::{self, GridDensity, GridSpec, SchemeParams};
use crate::discrete::{run_bounds, BoundSystemParams, Side};
use crate::error::{ensure, Error, Result};
use crate::export;
use crate::killed::{self, PathParams};
use crate::particle::{self, ParticleConfig};
use crate::rng::RandomSource;
use crate::stats;
use crate::wave::{self, TravellingWave};

const SIMULATE: u64 = 1;
const BOUNDS: u64 = 2;
const EXIT: u64 = 5;
const SPEEDSCAN: u64 = 6;

struct Outputs {
    dir: PathBuf,
    files: Vec<PathBuf>,
    started: f64,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            started: manifest::now(),
        })
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        self.files.push(PathBuf::from(name));
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    fn csv(&mut self, name: &str, header: &[&str], columns: &[&[f64]]) -> Result<()> {
        let mut w = self.create(name)?;
        export::write_columns(&mut w, header, columns)?;
        w.flush()?;
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    fn density(&mut self, name: &str, f: &GridDensity) -> Result<()> {
        let mut w = self.create(name)?;
        export::write_density(&mut w, f)?;
        w.flush()?;
        Ok(())
    }

    fn finish<C: Serialize>(self, command: &str, config: &C, seed: u64) -> Result<Vec<PathBuf>> {
        let files = self
            .files
            .iter()
            .map(|f| manifest::file_entry(&self.dir, f))
            .collect::<Result<Vec<_>>>()?;
        let m = RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config: serde_json::to_value(config)?,
            seed,
            started: self.started,
            finished: manifest::now(),
            files,
        };
        let mpath = m.write(&self.dir)?;
        let mut out: Vec<PathBuf> = self.files.iter().map(|f| self.dir.join(f)).collect();
        out.push(mpath);
        Ok(out)
    }
}

fn wrap<T>(r: Result<T>) -> std::result::Result<T, CliError> {
    r.map_err(CliError::from)
}

fn check_p(p: f64) -> Result<()> {
    ensure(p > 0.0 && p < 1.0, || format!("p = {p} must lie in (0, 1)"))
}

pub fn simulate(cfg: SimulateConfig, out: &Path) -> std::result::Result<Vec<PathBuf>, CliError> {
    wrap((|| {
        check_p(cfg.p)?;
        ensure(cfg.n >= 1, || "n must be at least 1".into())?;
        ensure(cfg.horizon > 0.0 && cfg.horizon.is_finite(), || format!("horizon = {} must be positive", cfg.horizon))?;
        ensure(cfg.samples >= 1, || "samples must be at least 1".into())?;
        if cfg.replicas > 0 {
            ensure(cfg.burn_in >= 0.0 && cfg.burn_in < cfg.horizon, || {
                format!("burn_in = {} must lie in [0, horizon)", cfg.burn_in)
            })?;
        }
        let src = RandomSource::new(cfg.seed).derive(SIMULATE);
        let mut files = Outputs::new(out)?;
        let times: Vec<f64> = (1..=cfg.samples)
            .map(|k| if k == cfg.samples { cfg.horizon } else { cfg.horizon * k as f64 / cfg.samples as f64 })
            .collect();
        let init = ParticleConfig::constant(cfg.n, 0.0)?;
        let rec = particle::simulate(&init, cfg.p, cfg.horizon, &src.derive(0), &times)?;
        let mut w = files.create("trajectory.csv")?;
        export::write_trajectory(&mut w, &rec)?;
        w.flush()?;
        if cfg.replicas > 0 {
            let est = particle::estimate_speed(cfg.p, cfg.n, cfg.horizon, cfg.burn_in, cfg.replicas, &src.derive(1))?;
            let idx: Vec<f64> = (0..cfg.replicas).map(|r| r as f64).collect();
            files.csv("speed.csv", &["replica", "v_left", "v_right"], &[&idx, &est.per_replica_left, &est.per_replica_right])?;
            files.json(
                "speed.json",
                &serde_json::json!({
                    "v_hat": est.v_hat,
                    "std_error": est.std_error,
                    "v_hat_right": est.v_hat_right,
                    "std_error_right": est.std_error_right,
                    "reference": wave::wave_speed(cfg.p)?,
                }),
            )?;
        }
        files.finish("simulate", &cfg, cfg.seed)
    })())
}

pub fn bounds(cfg: BoundsConfig, out: &Path) -> std::result::Result<Vec<PathBuf>, CliError> {
    wrap((|| {
        let lo = BoundSystemParams::new(cfg.n, cfg.p, cfg.delta, Side::Lower)?;
        let up = BoundSystemParams::new(cfg.n, cfg.p, cfg.delta, Side::Upper)?;
        ensure(cfg.steps >= 1, || "steps must be at least 1".into())?;
        ensure(cfg.points >= 2, || "points must be at least 2".into())?;
        let src = RandomSource::new(cfg.seed).derive(BOUNDS);
        let init = ParticleConfig::constant(cfg.n, 0.0)?;
        let lower = run_bounds(&init, &lo, cfg.steps, &src.derive(0))?;
        let upper = run_bounds(&init, &up, cfg.steps, &src.derive(1))?;
        let times = lower.times();
        let exact = particle::simulate(&init, cfg.p, times[cfg.steps], &src.derive(2), &times[1..])?;

        let mut files = Outputs::new(out)?;
        let header = ["time", "leftmost", "rightmost"];
        for (name, run) in [("bounds_lower.csv", &lower), ("bounds_upper.csv", &upper)] {
            let l: Vec<f64> = run.configs.iter().map(|c| c.leftmost()).collect();
            let r: Vec<f64> = run.configs.iter().map(|c| c.rightmost()).collect();
            files.csv(name, &header, &[&times, &l, &r])?;
        }
        let mut l = vec![0.0];
        l.extend(&exact.leftmost);
        let mut r = vec![0.0];
        r.extend(&exact.rightmost);
        files.csv("bounds_particle.csv", &header, &[&times, &l, &r])?;

        let col = |f: &dyn Fn(&crate::discrete::StepMeta) -> f64, run: &crate::discrete::BoundsRun| -> Vec<f64> {
            run.meta.iter().map(f).collect()
        };
        let step: Vec<f64> = (1..=cfg.steps).map(|k| k as f64).collect();
        files.csv(
            "bounds_meta.csv",
            &[
                "step",
                "lower_removed",
                "lower_pre_truncation",
                "lower_fallback",
                "upper_removed",
                "upper_pre_truncation",
                "upper_fallback",
            ],
            &[
                &step,
                &col(&|m| m.removed as f64, &lower),
                &col(&|m| m.pre_truncation as f64, &lower),
                &col(&|m| m.fallback as u8 as f64, &lower),
                &col(&|m| m.removed as f64, &upper),
                &col(&|m| m.pre_truncation as f64, &upper),
                &col(&|m| m.fallback as u8 as f64, &upper),
            ],
        )?;

        let finals = [lower.last(), &exact.final_config, upper.last()];
        let lo_x = finals.iter().map(|c| c.leftmost()).fold(f64::INFINITY, f64::min);
        let hi_x = finals.iter().map(|c| c.rightmost()).fold(f64::NEG_INFINITY, f64::max);
        let x: Vec<f64> = (0..cfg.points)
            .map(|k| lo_x + (hi_x - lo_x) * k as f64 / (cfg.points - 1) as f64)
            .collect();
        let tails: Vec<Vec<f64>> = finals.iter().map(|c| stats::empirical_tail(c.positions(), &x)).collect();
        files.csv(
            "bounds_tails.csv",
            &["x", "lower_tail", "particle_tail", "upper_tail"],
            &[&x, &tails[0], &tails[1], &tails[2]],
        )?;
        files.finish("bounds", &cfg, cfg.seed)
    })())
}

fn scheme_init(cfg: &SchemeConfig, t: f64) -> Result<GridDensity> {
    if !cfg.init_file.is_empty() {
        let f = export::read_density(BufReader::new(File::open(&cfg.init_file)?))?;
        ensure(f.mass() > 0.0, || "initial density has zero mass".into())?;
        return density::scale(&f, 1.0 / f.mass());
    }
    match cfg.init.as_str() {
        "wave" => {
            let w = TravellingWave::new(cfg.p)?;
            let spec = GridSpec::for_scheme(-w.r0, 0.0, t, w.c, cfg.dx)?;
            wave::wave_density(&w, spec, -w.r0)
        }
        "uniform" => {
            let spec = GridSpec::for_scheme(-0.5, 0.5, t, std::f64::consts::SQRT_2, cfg.dx)?;
            let f = GridDensity::from_fn(spec, |x| if x.abs() < 0.5 { 1.0 } else { 0.0 })?;
            density::scale(&f, 1.0 / f.mass())
        }
        other => Err(Error::invalid(format!("init = `{other}` must be `wave` or `uniform`"))),
    }
}

pub fn scheme(cfg: SchemeConfig, out: &Path) -> std::result::Result<Vec<PathBuf>, CliError> {
    wrap((|| {
        let lo = SchemeParams::new(cfg.p, cfg.delta, Side::Lower)?;
        let up = SchemeParams::new(cfg.p, cfg.delta, Side::Upper)?;
        ensure(cfg.steps >= 1, || "steps must be at least 1".into())?;
        ensure(cfg.dx > 0.0 && cfg.dx.is_finite(), || format!("dx = {} must be positive", cfg.dx))?;
        ensure(cfg.refine_levels < 16, || "refine_levels must be below 16".into())?;
        let t = cfg.steps as f64 * cfg.delta;
        let f = scheme_init(&cfg, t)?;
        let (lower, upper) = rayon::join(
            || {
                let mut hist = Vec::new();
                density::iterate_scheme_each(&f, &lo, cfg.steps, |_, g| hist.push(g.clone())).map(|r| (r, hist))
            },
            || {
                let mut hist = Vec::new();
                density::iterate_scheme_each(&f, &up, cfg.steps, |_, g| hist.push(g.clone())).map(|r| (r, hist))
            },
        );
        let ((lower, lh), (upper, uh)) = (lower?, upper?);
        let mut files = Outputs::new(out)?;
        let step: Vec<f64> = (1..=cfg.steps).map(|k| k as f64).collect();
        let time: Vec<f64> = step.iter().map(|k| k * cfg.delta).collect();
        let width = lh.iter().zip(&uh).map(|(a, b)| density::l1_distance(a, b)).collect::<Result<Vec<_>>>()?;
        let bound: Vec<f64> = step.iter().map(|k| 2.0 * cfg.delta.exp_m1() * (k * cfg.delta).exp()).collect();
        files.csv("scheme_widths.csv", &["step", "time", "width", "bound"], &[&step, &time, &width, &bound])?;
        files.csv(
            "scheme_cuts.csv",
            &["step", "time", "lower_left_cut", "lower_right_cut", "upper_left_cut", "upper_right_cut"],
            &[&step, &time, &lower.left_cuts, &lower.right_cuts, &upper.left_cuts, &upper.right_cuts],
        )?;
        files.density("scheme_lower.csv", &lower.density)?;
        files.density("scheme_upper.csv", &upper.density)?;
        if cfg.refine_levels > 0 {
            let rep = density::refine_limit(&f, cfg.p, t, cfg.refine_levels, 0.0)?;
            let n: Vec<f64> = rep.levels.iter().map(|l| l.n as f64).collect();
            let d: Vec<f64> = rep.levels.iter().map(|l| l.delta).collect();
            let w: Vec<f64> = rep.levels.iter().map(|l| l.width).collect();
            let b: Vec<f64> = d.iter().map(|d| 2.0 * d.exp_m1() * t.exp()).collect();
            files.csv("refine.csv", &["n", "delta", "width", "bound"], &[&n, &d, &w, &b])?;
            files.density("psi.csv", &rep.psi)?;
            files.json(
                "refine.json",
                &serde_json::json!({
                    "level": rep.level,
                    "width": rep.width,
                    "width_decreasing": rep.width_decreasing,
                    "ordering_holds": rep.ordering_holds,
                }),
            )?;
        }
        files.finish("scheme", &cfg, cfg.seed)
    })())
}

pub fn wave(cfg: WaveConfig, out: &Path) -> std::result::Result<Vec<PathBuf>, CliError> {
    wrap((|| {
        ensure(!cfg.p_grid.is_empty(), || "p_grid must not be empty".into())?;
        ensure(cfg.dx > 0.0, || format!("dx = {} must be positive", cfg.dx))?;
        let mut cols: [Vec<f64>; 9] = Default::default();
        for &p in &cfg.p_grid {
            let w = TravellingWave::new(p)?;
            let spec = GridSpec::covering(-w.r0, 0.0, cfg.dx, cfg.dx)?;
            let mass = wave::wave_density(&w, spec, -w.r0)?.mass();
            let r1 = wave::ode_residual(&w, cfg.dx)?;
            let r2 = wave::ode_residual(&w, cfg.dx / 2.0)?;
            let row = [
                p,
                w.c,
                w.r0,
                w.omega,
                w.amplitude,
                mass,
                r1,
                r1 / r2,
                ((-w.c * w.r0).exp() - (1.0 - p) / p).abs(),
            ];
            for (c, v) in cols.iter_mut().zip(row) {
                c.push(v);
            }
        }
        let mut files = Outputs::new(out)?;
        let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
        files.csv(
            "wave.csv",
            &["p", "c", "r0", "omega", "amplitude", "mass", "residual", "residual_ratio", "identity_error"],
            &refs,
        )?;
        files.finish("wave", &cfg, cfg.seed)
    })())
}

pub fn exit(cfg: ExitConfig, out: &Path) -> std::result::Result<Vec<PathBuf>, CliError> {
    wrap((|| {
        let w = TravellingWave::new(cfg.p)?;
        let mut prm = PathParams::new(cfg.horizon, cfg.step, cfg.n_paths)?;
        prm.bridge_correction = cfg.bridge_correction;
        let src = RandomSource::new(cfg.seed).derive(EXIT);
        let rho = wave::wave_density(&w, GridSpec::for_scheme(-w.r0, 0.0, cfg.horizon, w.c, cfg.dx)?, -w.r0)?;
        let (l, r) = wave::wave_barriers(&w, cfg.horizon)?;
        let st = killed::exit_statistics(&rho, &l, &r, &prm, &src.derive(0))?;
        let mut files = Outputs::new(out)?;
        let decay = -(-cfg.horizon).exp_m1();
        files.json(
            "exit.json",
            &serde_json::json!({
                "n_paths": st.n_paths,
                "step": cfg.step,
                "exit_left": [st.exit_left_prob, st.exit_left_se],
                "exit_right": [st.exit_right_prob, st.exit_right_se],
                "survive": [st.survive_prob, st.survive_se],
                "expected_exit_left": cfg.p * decay,
                "expected_exit_right": (1.0 - cfg.p) * decay,
                "expected_survive": (-cfg.horizon).exp(),
            }),
        )?;
        files.csv("survivors.csv", &["position"], &[&st.survivor_positions])?;
        if cfg.representation_points > 0 {
            let k = cfg.representation_points;
            let lt = l.value_at(cfg.horizon);
            let xs: Vec<f64> = (1..=k).map(|j| lt + w.r0 * j as f64 / (k + 1) as f64).collect();
            let pts = killed::representation_check(&rho, &l, &r, cfg.p, cfg.refine_levels, &xs, &prm, &src.derive(1))?;
            let get = |f: fn(&killed::RepresentationPoint) -> f64| pts.iter().map(f).collect::<Vec<f64>>();
            files.csv(
                "representation.csv",
                &["x", "mc", "scheme", "se"],
                &[&get(|p| p.x), &get(|p| p.mc), &get(|p| p.scheme), &get(|p| p.std_error)],
            )?;
        }
        if !cfg.flux_deltas.is_empty() {
            let pts = killed::small_delta_flux(&rho, &l, &r, &cfg.flux_deltas, &prm, &src.derive(2))?;
            let get = |f: fn(&killed::FluxPoint) -> f64| pts.iter().map(f).collect::<Vec<f64>>();
            files.csv(
                "flux.csv",
                &["delta", "flux_left", "se_left", "flux_right", "se_right"],
                &[&get(|p| p.delta), &get(|p| p.flux_left), &get(|p| p.se_left), &get(|p| p.flux_right), &get(|p| p.se_right)],
            )?;
            if pts.len() >= 2 {
                let (fl, sl, fr, sr) = killed::extrapolate_flux(&pts)?;
                files.json(
                    "flux_extrapolated.json",
                    &serde_json::json!({ "flux_left": [fl, sl], "flux_right": [fr, sr], "expected_left": cfg.p, "expected_right": 1.0 - cfg.p }),
                )?;
            }
        }
        files.finish("exit", &cfg, cfg.seed)
    })())
}

pub fn speedscan(cfg: SpeedscanConfig, out: &Path) -> std::result::Result<Vec<PathBuf>, CliError> {
    wrap((|| {
        check_p(cfg.p)?;
        ensure(!cfg.n_grid.is_empty(), || "n_grid must not be empty".into())?;
        let c = wave::wave_speed(cfg.p)?;
        let src = RandomSource::new(cfg.seed).derive(SPEEDSCAN);
        let mut cols: [Vec<f64>; 6] = Default::default();
        for &n in &cfg.n_grid {
            let est = particle::estimate_speed(cfg.p, n, cfg.horizon, cfg.burn_in, cfg.replicas, &src.derive(n as u64))?;
            let row = [n as f64, est.v_hat, est.std_error, est.v_hat_right, est.std_error_right, c];
            for (col, v) in cols.iter_mut().zip(row) {
                col.push(v);
            }
        }
        let mut files = Outputs::new(out)?;
        let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
        files.csv("speedscan.csv", &["n", "v_hat", "se", "v_hat_right", "se_right", "reference"], &refs)?;
        files.finish("speedscan", &cfg, cfg.seed)
    })())
}
