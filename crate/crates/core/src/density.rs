//! Densities on a uniform cell-centred grid and the diffuse-and-cut scheme.
//!
//! A [`GridDensity`] stores one value per cell; it is read as a piecewise
//! constant function, so cell `i` carries mass `values[i] * dx` spread
//! evenly over `[x0 + i dx, x0 + (i+1) dx)`. Cuts remove mass from one side
//! and split the boundary cell so that the removed mass is exact.
//!
//! The lower scheme step is `C^R_1 e^δ G_δ C^L_{1-p(1-e^-δ)}` and the upper
//! step is its mirror image `C^L_1 e^δ G_δ C^R_{1-(1-p)(1-e^-δ)}`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::discrete::Side;
use crate::error::{ensure, Error, Result};
use crate::rng::{RandomSource, Stream};
use crate::stats::{self, Neumaier};

/// Tolerated relative slack when a requested cut exceeds the mass.
const CUT_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Left edge of the first cell.
    pub x0: f64,
    pub dx: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn new(x0: f64, dx: f64, count: usize) -> Result<Self> {
        ensure(x0.is_finite(), || format!("x0 = {x0} must be finite"))?;
        ensure(dx > 0.0 && dx.is_finite(), || format!("dx = {dx} must be positive"))?;
        ensure(count >= 3, || format!("grid needs at least 3 cells, got {count}"))?;
        Ok(GridSpec { x0, dx, count })
    }

    /// Grid with spacing `dx` covering `[lo - pad, hi + pad]`, plus one empty
    /// cell on each side.
    pub fn covering(lo: f64, hi: f64, pad: f64, dx: f64) -> Result<Self> {
        ensure(lo.is_finite() && hi.is_finite() && lo <= hi, || format!("bad interval [{lo}, {hi}]"))?;
        ensure(pad >= 0.0 && pad.is_finite(), || format!("pad = {pad} must be >= 0"))?;
        ensure(dx > 0.0 && dx.is_finite(), || format!("dx = {dx} must be positive"))?;
        let inner = ((hi - lo + 2.0 * pad) / dx).ceil() as usize;
        GridSpec::new(lo - pad - dx, dx, inner.max(1) + 2)
    }

    /// Grid for running the scheme to time `t` from support `[lo, hi]` with
    /// front speed up to `c`: pads by `8 sqrt(t) + |c| t` on each side.
    pub fn for_scheme(lo: f64, hi: f64, t: f64, c: f64, dx: f64) -> Result<Self> {
        ensure(t >= 0.0, || format!("t = {t} must be >= 0"))?;
        GridSpec::covering(lo, hi, 8.0 * t.sqrt() + c.abs() * t, dx)
    }

    pub fn center(&self, i: usize) -> f64 {
        self.x0 + (i as f64 + 0.5) * self.dx
    }

    pub fn edge(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    pub fn x_end(&self) -> f64 {
        self.edge(self.count)
    }

    fn matches(&self, other: &GridSpec) -> bool {
        self.count == other.count
            && (self.dx - other.dx).abs() <= 1e-12 * self.dx
            && (self.x0 - other.x0).abs() <= 1e-9 * self.dx
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridDensity {
    x0: f64,
    dx: f64,
    values: Vec<f64>,
    mass: f64,
}

fn cell_mass(values: &[f64], dx: f64) -> f64 {
    stats::neumaier_sum(values.iter().copied()) * dx
}

impl GridDensity {
    /// Values must be finite and non-negative, with both edge cells empty.
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        let spec = GridSpec::new(spec.x0, spec.dx, spec.count)?;
        ensure(values.len() == spec.count, || {
            format!("{} values for a grid of {} cells", values.len(), spec.count)
        })?;
        ensure(values.iter().all(|v| v.is_finite() && *v >= 0.0), || {
            "density values must be finite and non-negative".into()
        })?;
        if values[0] != 0.0 || values[spec.count - 1] != 0.0 {
            return Err(Error::GridTooSmall {
                lost: (values[0] + values[spec.count - 1]) * spec.dx,
                mass: cell_mass(&values, spec.dx),
            });
        }
        Ok(Self::raw(spec.x0, spec.dx, values))
    }

    pub fn zeros(spec: GridSpec) -> Result<Self> {
        GridDensity::new(spec, vec![0.0; spec.count])
    }

    /// Samples `f` at the cell centres.
    pub fn from_fn(spec: GridSpec, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = (0..spec.count).map(|i| f(spec.center(i))).collect();
        GridDensity::new(spec, values)
    }

    fn raw(x0: f64, dx: f64, values: Vec<f64>) -> Self {
        let mass = cell_mass(&values, dx);
        GridDensity { x0, dx, values, mass }
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        Self::raw(self.x0, self.dx, values)
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            x0: self.x0,
            dx: self.dx,
            count: self.values.len(),
        }
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn center(&self, i: usize) -> f64 {
        self.spec().center(i)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Indices of the first and last non-zero cells.
    pub fn support(&self) -> Option<(usize, usize)> {
        let lo = self.values.iter().position(|&v| v > 0.0)?;
        let hi = self.values.iter().rposition(|&v| v > 0.0)?;
        Some((lo, hi))
    }

    /// The density of `-X`.
    pub fn reflected(&self) -> Self {
        let n = self.values.len();
        let mut values = self.values.clone();
        values.reverse();
        Self::raw(-(self.x0 + n as f64 * self.dx), self.dx, values)
    }

    /// `∫_x^∞ f` at every cell edge, `n + 1` entries from `x0` to the right end.
    pub fn tail_profile(&self) -> Vec<f64> {
        let n = self.values.len();
        let mut tails = vec![0.0; n + 1];
        let mut acc = Neumaier::default();
        for i in (0..n).rev() {
            acc.add(self.values[i] * self.dx);
            tails[i] = acc.value();
        }
        tails
    }

    /// Quantile function of the normalised piecewise-constant density.
    pub fn inverse_cdf(&self, u: f64) -> f64 {
        self.quantile_from(&self.cumulative(), u)
    }

    /// Tabulated quantile function, for repeated inversion.
    pub fn quantile_fn(&self) -> impl Fn(f64) -> f64 + Sync + '_ {
        let cum = self.cumulative();
        move |u| self.quantile_from(&cum, u)
    }

    /// `n` i.i.d. draws from the normalised density by inversion. A
    /// mirrored source inverts at `1 - u`, so sampling the reflected density
    /// with the mirrored source reflects the sample.
    pub fn sample(&self, n: usize, src: &RandomSource) -> Result<Vec<f64>> {
        ensure(self.mass > 0.0, || "cannot sample from a zero density".into())?;
        let mut rng = src.rng(Stream::Aux);
        let cum = self.cumulative();
        Ok((0..n)
            .map(|_| {
                let u: f64 = rng.random();
                let u = if src.mirrored { 1.0 - u } else { u };
                self.quantile_from(&cum, u)
            })
            .collect())
    }

    fn cumulative(&self) -> Vec<f64> {
        let mut cum = Vec::with_capacity(self.values.len() + 1);
        let mut acc = Neumaier::default();
        cum.push(0.0);
        for &v in &self.values {
            acc.add(v * self.dx);
            cum.push(acc.value());
        }
        cum
    }

    fn quantile_from(&self, cum: &[f64], u: f64) -> f64 {
        let target = u.clamp(0.0, 1.0) * self.mass;
        let n = self.values.len();
        let j = cum.partition_point(|&c| c <= target).clamp(1, n) - 1;
        let v = self.values[j];
        let frac = if v > 0.0 {
            ((target - cum[j]) / (v * self.dx)).clamp(0.0, 1.0)
        } else {
            0.0
        };
        self.x0 + (j as f64 + frac) * self.dx
    }
}

fn check_same_grid(f: &GridDensity, g: &GridDensity) -> Result<()> {
    if f.spec().matches(&g.spec()) {
        Ok(())
    } else {
        Err(Error::GridMismatch(format!("{:?} vs {:?}", f.spec(), g.spec())))
    }
}

fn heat_kernel(t: f64, dx: f64) -> Vec<f64> {
    let sd = t.sqrt();
    let half = (8.0 * sd / dx).ceil() as usize;
    let mut w = Vec::with_capacity(2 * half + 1);
    if t >= 4.0 * dx * dx {
        // node samples: the discrete kernel has mass and variance exact to
        // O(exp(-2 pi^2 t / dx^2)), so composition matches G_{s+t}
        let norm = dx / (2.0 * std::f64::consts::PI * t).sqrt();
        for k in 0..=2 * half {
            let y = (k as f64 - half as f64) * dx;
            w.push(norm * (-0.5 * y * y / t).exp());
        }
    } else {
        // kernel narrower than a couple of cells: exact cell integrals
        for k in 0..=2 * half {
            let y = (k as f64 - half as f64) * dx;
            let a = (y - 0.5 * dx) / sd;
            let b = (y + 0.5 * dx) / sd;
            let m = if a >= 0.0 {
                0.5 * (stats::erfc(a / std::f64::consts::SQRT_2) - stats::erfc(b / std::f64::consts::SQRT_2))
            } else {
                stats::normal_cdf(b) - stats::normal_cdf(a)
            };
            w.push(m);
        }
    }
    w
}

/// Convolution with the heat kernel of variance `t`.
///
/// Fails with [`Error::GridTooSmall`] if more than `1e-12` of the mass would
/// land on or past the edge cells.
pub fn gaussian_propagate(f: &GridDensity, t: f64) -> Result<GridDensity> {
    ensure(t >= 0.0 && t.is_finite(), || format!("t = {t} must be finite and >= 0"))?;
    if t == 0.0 {
        return Ok(f.clone());
    }
    let Some((lo, hi)) = f.support() else {
        return Ok(f.clone());
    };
    let n = f.len();
    let w = heat_kernel(t, f.dx);
    let half = w.len() / 2;
    // padded[k] holds cell k - half
    let mut padded = vec![0.0; n + 2 * half];
    for i in lo..=hi {
        let v = f.values[i];
        if v == 0.0 {
            continue;
        }
        for (o, wk) in padded[i..i + w.len()].iter_mut().zip(&w) {
            *o += v * wk;
        }
    }
    let mut lost = Neumaier::default();
    for (k, &x) in padded.iter().enumerate() {
        if k <= half || k >= half + n - 1 {
            lost.add(x);
        }
    }
    let lost = lost.value() * f.dx;
    let mut values = padded[half..half + n].to_vec();
    values[0] = 0.0;
    values[n - 1] = 0.0;
    if lost > 1e-12 * f.mass {
        return Err(Error::GridTooSmall { lost, mass: f.mass });
    }
    Ok(f.with_values(values))
}

pub fn scale(f: &GridDensity, c: f64) -> Result<GridDensity> {
    ensure(c >= 0.0 && c.is_finite(), || format!("scale factor {c} must be finite and >= 0"))?;
    Ok(f.with_values(f.values.iter().map(|v| v * c).collect()))
}

fn check_amount(f: &GridDensity, m: f64) -> Result<f64> {
    ensure(m.is_finite() && m >= 0.0, || format!("cut amount {m} must be >= 0"))?;
    ensure(m <= f.mass * (1.0 + CUT_SLACK), || format!("cut amount {m} exceeds mass {}", f.mass))?;
    Ok(m.min(f.mass))
}

fn keep_to_amount(f: &GridDensity, k: f64) -> Result<f64> {
    ensure(k.is_finite() && k >= 0.0, || format!("kept mass {k} must be >= 0"))?;
    ensure(k <= f.mass * (1.0 + CUT_SLACK), || format!("kept mass {k} exceeds mass {}", f.mass))?;
    Ok((f.mass - k).max(0.0))
}

/// Removes mass `m` from one side. Returns the new values and the cut
/// position (the left end of what remains for a left cut, the right end
/// for a right cut).
fn remove_mass(f: &GridDensity, m: f64, from_left: bool) -> (Vec<f64>, f64) {
    let n = f.len();
    let dx = f.dx;
    let mut values = f.values.clone();
    let edge = |i: usize| f.x0 + i as f64 * dx;
    let support = f.support();
    if m == 0.0 {
        let pos = match (support, from_left) {
            (Some((lo, _)), true) => edge(lo),
            (Some((_, hi)), false) => edge(hi + 1),
            (None, _) => f64::NAN,
        };
        return (values, pos);
    }
    let mut acc = Neumaier::default();
    let mut pos = f64::NAN;
    for step in 0..n {
        let j = if from_left { step } else { n - 1 - step };
        let v = values[j];
        if v == 0.0 {
            continue;
        }
        let before = acc.value();
        acc.add(v * dx);
        if acc.value() > m {
            let take = m - before;
            let frac = (take / (v * dx)).clamp(0.0, 1.0);
            values[j] = (v - take / dx).max(0.0);
            pos = if from_left {
                edge(j) + frac * dx
            } else {
                edge(j + 1) - frac * dx
            };
            return (values, pos);
        }
        values[j] = 0.0;
        pos = if from_left { edge(j + 1) } else { edge(j) };
    }
    (values, pos)
}

/// `D^L_m`: removes mass `m` from the left, with the cut position.
pub fn cut_left_amount_at(f: &GridDensity, m: f64) -> Result<(GridDensity, f64)> {
    let m = check_amount(f, m)?;
    let (values, pos) = remove_mass(f, m, true);
    Ok((f.with_values(values), pos))
}

/// `D^R_m`: removes mass `m` from the right, with the cut position.
pub fn cut_right_amount_at(f: &GridDensity, m: f64) -> Result<(GridDensity, f64)> {
    let m = check_amount(f, m)?;
    let (values, pos) = remove_mass(f, m, false);
    Ok((f.with_values(values), pos))
}

pub fn cut_left_amount(f: &GridDensity, m: f64) -> Result<GridDensity> {
    Ok(cut_left_amount_at(f, m)?.0)
}

pub fn cut_right_amount(f: &GridDensity, m: f64) -> Result<GridDensity> {
    Ok(cut_right_amount_at(f, m)?.0)
}

/// `C^L_k`: keeps mass `k` by cutting on the left.
pub fn cut_left_keep_at(f: &GridDensity, k: f64) -> Result<(GridDensity, f64)> {
    let m = keep_to_amount(f, k)?;
    let (values, pos) = remove_mass(f, m, true);
    Ok((f.with_values(values), pos))
}

/// `C^R_k`: keeps mass `k` by cutting on the right.
pub fn cut_right_keep_at(f: &GridDensity, k: f64) -> Result<(GridDensity, f64)> {
    let m = keep_to_amount(f, k)?;
    let (values, pos) = remove_mass(f, m, false);
    Ok((f.with_values(values), pos))
}

pub fn cut_left_keep(f: &GridDensity, k: f64) -> Result<GridDensity> {
    Ok(cut_left_keep_at(f, k)?.0)
}

pub fn cut_right_keep(f: &GridDensity, k: f64) -> Result<GridDensity> {
    Ok(cut_right_keep_at(f, k)?.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeParams {
    pub p: f64,
    pub delta: f64,
    pub side: Side,
}

impl SchemeParams {
    pub fn new(p: f64, delta: f64, side: Side) -> Result<Self> {
        let s = SchemeParams { p, delta, side };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.p > 0.0 && self.p < 1.0, || format!("p = {} must lie in (0, 1)", self.p))?;
        ensure(self.delta > 0.0 && self.delta.is_finite(), || format!("delta = {} must be positive", self.delta))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub density: GridDensity,
    /// Mass after the growth factor, before the final cut.
    pub scaled_mass: f64,
    pub left_cut: f64,
    pub right_cut: f64,
}

/// One scheme step, keeping the cut positions.
pub fn step_tracked(f: &GridDensity, params: &SchemeParams) -> Result<StepOutcome> {
    params.validate()?;
    ensure((f.mass - 1.0).abs() <= 1e-10, || format!("scheme step needs mass 1, got {}", f.mass))?;
    let loss = -(-params.delta).exp_m1();
    let growth = params.delta.exp();
    match params.side {
        Side::Lower => {
            let (g, left_cut) = cut_left_keep_at(f, 1.0 - params.p * loss)?;
            let s = scale(&gaussian_propagate(&g, params.delta)?, growth)?;
            let scaled_mass = s.mass;
            let (density, right_cut) = cut_right_keep_at(&s, 1.0)?;
            Ok(StepOutcome { density, scaled_mass, left_cut, right_cut })
        }
        Side::Upper => {
            let (g, right_cut) = cut_right_keep_at(f, 1.0 - (1.0 - params.p) * loss)?;
            let s = scale(&gaussian_propagate(&g, params.delta)?, growth)?;
            let scaled_mass = s.mass;
            let (density, left_cut) = cut_left_keep_at(&s, 1.0)?;
            Ok(StepOutcome { density, scaled_mass, left_cut, right_cut })
        }
    }
}

pub fn step(f: &GridDensity, params: &SchemeParams) -> Result<GridDensity> {
    Ok(step_tracked(f, params)?.density)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchemeRun {
    pub params: SchemeParams,
    pub density: GridDensity,
    pub scaled_masses: Vec<f64>,
    pub masses: Vec<f64>,
    pub left_cuts: Vec<f64>,
    pub right_cuts: Vec<f64>,
}

impl SchemeRun {
    /// Cut position of the final step on the side that is cut last: the
    /// left one for the upper scheme, the right one for the lower scheme.
    pub fn final_boundary(&self) -> Option<f64> {
        match self.params.side {
            Side::Upper => self.left_cuts.last().copied(),
            Side::Lower => self.right_cuts.last().copied(),
        }
    }
}

/// `k_steps`-fold step, calling `visit(j, density)` after each step.
pub fn iterate_scheme_each(
    f: &GridDensity,
    params: &SchemeParams,
    k_steps: usize,
    mut visit: impl FnMut(usize, &GridDensity),
) -> Result<SchemeRun> {
    params.validate()?;
    let mut run = SchemeRun {
        params: *params,
        density: f.clone(),
        scaled_masses: Vec::with_capacity(k_steps),
        masses: Vec::with_capacity(k_steps),
        left_cuts: Vec::with_capacity(k_steps),
        right_cuts: Vec::with_capacity(k_steps),
    };
    for j in 1..=k_steps {
        let out = step_tracked(&run.density, params)?;
        run.scaled_masses.push(out.scaled_mass);
        run.masses.push(out.density.mass);
        run.left_cuts.push(out.left_cut);
        run.right_cuts.push(out.right_cut);
        run.density = out.density;
        visit(j, &run.density);
    }
    Ok(run)
}

pub fn iterate_scheme(f: &GridDensity, params: &SchemeParams, k_steps: usize) -> Result<SchemeRun> {
    iterate_scheme_each(f, params, k_steps, |_, _| {})
}

pub fn l1_distance(f: &GridDensity, g: &GridDensity) -> Result<f64> {
    check_same_grid(f, g)?;
    Ok(stats::neumaier_sum(f.values.iter().zip(&g.values).map(|(a, b)| (a - b).abs())) * f.dx)
}

/// `∫_a^∞ f`.
pub fn tail_mass(f: &GridDensity, a: f64) -> f64 {
    let n = f.len();
    if a <= f.x0 {
        return f.mass;
    }
    let u = (a - f.x0) / f.dx;
    if u >= n as f64 {
        return 0.0;
    }
    let j = u.floor() as usize;
    let mut acc = Neumaier::default();
    for &v in &f.values[j + 1..] {
        acc.add(v);
    }
    acc.add(f.values[j] * (j as f64 + 1.0 - u));
    acc.value() * f.dx
}

/// `1e-9 + 2 dx max(f, g)`.
pub fn default_tolerance(f: &GridDensity, g: &GridDensity) -> f64 {
    1e-9 + 2.0 * f.dx * f.max_value().max(g.max_value())
}

/// True when `f ≼ g`: every tail of `f` is at most the tail of `g` plus `tol`.
pub fn dominates(f: &GridDensity, g: &GridDensity, tol: f64) -> Result<bool> {
    Ok(dominance_gap(f, g)? <= tol)
}

/// `max_x (∫_x^∞ f - ∫_x^∞ g)` over cell edges; `f ≼ g` iff this is `<= 0`.
pub fn dominance_gap(f: &GridDensity, g: &GridDensity) -> Result<f64> {
    check_same_grid(f, g)?;
    Ok(f.tail_profile()
        .iter()
        .zip(g.tail_profile())
        .map(|(a, b)| a - b)
        .fold(f64::NEG_INFINITY, f64::max))
}

pub fn midpoint(f: &GridDensity, g: &GridDensity) -> Result<GridDensity> {
    check_same_grid(f, g)?;
    Ok(f.with_values(f.values.iter().zip(&g.values).map(|(a, b)| 0.5 * (a + b)).collect()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RefineLevel {
    pub n: usize,
    pub delta: f64,
    pub width: f64,
    pub lower: GridDensity,
    pub upper: GridDensity,
    /// Final right cut of the lower scheme.
    pub right_boundary: f64,
    /// Final left cut of the upper scheme.
    pub left_boundary: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RefineReport {
    /// Midpoint of the lower and upper schemes at the chosen level.
    pub psi: GridDensity,
    pub width: f64,
    pub level: usize,
    /// False when `tol` was not reached by `n_max`; `psi` is then the
    /// narrowest level.
    pub converged: bool,
    pub width_decreasing: bool,
    /// `lower_{n-1} ≼ lower_n ≼ upper_n ≼ upper_{n-1}` at every level, within
    /// [`default_tolerance`].
    pub ordering_holds: bool,
    pub levels: Vec<RefineLevel>,
}

impl RefineReport {
    pub fn chosen(&self) -> &RefineLevel {
        &self.levels[self.level]
    }
}

/// Runs both schemes to time `t` with `delta = t / 2^n` for `n = 0, 1, ...`
/// until the L1 width drops to `tol` or `n = n_max`.
pub fn refine_limit(f: &GridDensity, p: f64, t: f64, n_max: usize, tol: f64) -> Result<RefineReport> {
    ensure(t > 0.0 && t.is_finite(), || format!("t = {t} must be positive"))?;
    ensure(n_max < 31, || format!("n_max = {n_max} is too large"))?;
    let mut levels: Vec<RefineLevel> = Vec::new();
    let mut ordering_holds = true;
    let mut converged = false;
    for n in 0..=n_max {
        let k = 1usize << n;
        let delta = t / k as f64;
        let lo = SchemeParams::new(p, delta, Side::Lower)?;
        let up = SchemeParams::new(p, delta, Side::Upper)?;
        let (lower, upper) = rayon::join(|| iterate_scheme(f, &lo, k), || iterate_scheme(f, &up, k));
        let (lower, upper) = (lower?, upper?);
        let width = l1_distance(&lower.density, &upper.density)?;
        let ok = |a: &GridDensity, b: &GridDensity| -> Result<bool> { dominates(a, b, default_tolerance(a, b)) };
        ordering_holds &= ok(&lower.density, &upper.density)?;
        if let Some(prev) = levels.last() {
            ordering_holds &= ok(&prev.lower, &lower.density)? && ok(&upper.density, &prev.upper)?;
        }
        levels.push(RefineLevel {
            n,
            delta,
            width,
            right_boundary: lower.final_boundary().unwrap_or(f64::NAN),
            left_boundary: upper.final_boundary().unwrap_or(f64::NAN),
            lower: lower.density,
            upper: upper.density,
        });
        if width <= tol {
            converged = true;
            break;
        }
    }
    let width_decreasing = levels.windows(2).all(|w| w[1].width < w[0].width);
    let level = if converged {
        levels.len() - 1
    } else {
        levels
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.width.total_cmp(&b.1.width))
            .map(|(i, _)| i)
            .unwrap_or(0)
    };
    let chosen = &levels[level];
    Ok(RefineReport {
        psi: midpoint(&chosen.lower, &chosen.upper)?,
        width: chosen.width,
        level,
        converged,
        width_decreasing,
        ordering_holds,
        levels,
    })
}
