//! Multistart Nelder–Mead maximization over measurement settings, and the
//! threshold/crossing finders built on it.

use std::cmp::Ordering;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bell::{Correlator, MeasurementSettings, PhaseSpaceModel, SignChoice};
use crate::error::{Error, Result};
use crate::noise::{DetectionEfficiency, NoiseModel, ThermalChannel};
use crate::states::{SParameter, StateSpec};

/// Tolerance in η used by [`threshold_efficiency`].
pub const ETA_TOLERANCE: f64 = 0.002;
/// Tolerance in ζ used by [`crossing_amplitude`].
pub const ZETA_TOLERANCE: f64 = 0.005;
/// Excess over the bound below which a value counts as no violation. Far
/// from the state every correlation tends to 1 and the parameters sit on
/// their bounds up to rounding.
pub const VIOLATION_MARGIN: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub multistart_count: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub rng_seed: u64,
    /// Standard deviation of the random initial amplitudes; `None` picks a
    /// per-state default.
    pub search_scale: Option<f64>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            multistart_count: 32,
            max_iterations: 4000,
            tolerance: 1e-10,
            rng_seed: 7,
            search_scale: None,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.multistart_count == 0 {
            return Err(Error::Domain("multistart_count must be at least 1".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Domain("max_iterations must be at least 1".into()));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::Domain(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if let Some(sc) = self.search_scale {
            if !(sc > 0.0 && sc.is_finite()) {
                return Err(Error::Domain(format!("search_scale must be positive, got {sc}")));
            }
        }
        Ok(())
    }

    /// Scale actually used for `state`: 1 for the W family, `max(1, ζ)` for
    /// the ECS, `e^r` for the squeezed state.
    pub fn scale_for(&self, state: &StateSpec) -> f64 {
        self.search_scale.unwrap_or(match *state {
            StateSpec::SinglePhotonW { .. } => 1.0,
            StateSpec::GhzEcs { zeta } => zeta.max(1.0),
            StateSpec::SqueezedVacuum3 { r } => r.exp(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Inequality {
    Mk,
    Svetlichny,
}

impl Inequality {
    /// Local (MK) or hybrid local/nonlocal (Svetlichny) bound.
    pub fn bound(self) -> f64 {
        match self {
            Inequality::Mk => 2.0,
            Inequality::Svetlichny => 4.0,
        }
    }

    pub fn from_bound(bound: f64) -> Result<Self> {
        if bound == 2.0 {
            Ok(Inequality::Mk)
        } else if bound == 4.0 {
            Ok(Inequality::Svetlichny)
        } else {
            Err(Error::Domain(format!("bound must be 2 (MK) or 4 (Svetlichny), got {bound}")))
        }
    }

    /// Objective value at `st`, with the sign that attains it.
    pub fn objective<C: Correlator + ?Sized>(self, model: &C, st: &MeasurementSettings) -> (f64, SignChoice) {
        match self {
            Inequality::Mk => (model.mk(st).abs(), SignChoice::Plus),
            Inequality::Svetlichny => {
                let r = model.evaluate(st, None);
                (r.svetlichny, r.sign)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub value: f64,
    pub settings: MeasurementSettings,
    pub sign: SignChoice,
    pub converged: bool,
}

/// Result of a local simplex search.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes `f` with the Nelder–Mead simplex method starting from `x0`
/// with initial edge length `step`.
///
/// Stops when the spread of function values over the simplex drops below
/// `tol * (|f_best| + tol)` and the simplex diameter below `sqrt(tol)`, or
/// after `max_iter` iterations.
pub fn nelder_mead(f: impl Fn(&[f64]) -> f64, x0: &[f64], step: f64, max_iter: usize, tol: f64) -> SimplexResult {
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut converged = false;
    let mut iterations = 0;
    let mut order: Vec<usize> = (0..=n).collect();
    while iterations < max_iter {
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        let best = order[0];
        let worst = order[n];
        let second = order[n - 1];
        let spread = values[worst] - values[best];
        let diameter = simplex
            .iter()
            .map(|v| v.iter().zip(&simplex[best]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread <= tol * (values[best].abs() + tol) && diameter <= tol.sqrt() {
            converged = true;
            break;
        }
        iterations += 1;
        let mut centroid = vec![0.0; n];
        for &i in &order[..n] {
            for (c, x) in centroid.iter_mut().zip(&simplex[i]) {
                *c += x / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&simplex[worst]).map(|(c, w)| c + t * (c - w)).collect()
        };
        let xr = along(alpha);
        let fr = f(&xr);
        if fr < values[best] {
            let xe = along(gamma);
            let fe = f(&xe);
            if fe < fr {
                simplex[worst] = xe;
                values[worst] = fe;
            } else {
                simplex[worst] = xr;
                values[worst] = fr;
            }
            continue;
        }
        if fr < values[second] {
            simplex[worst] = xr;
            values[worst] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[worst] {
            let xc = along(rho * alpha);
            let fc = f(&xc);
            (xc, fc)
        } else {
            let xc = along(-rho);
            let fc = f(&xc);
            (xc, fc)
        };
        if fc < values[worst].min(fr) {
            simplex[worst] = xc;
            values[worst] = fc;
            continue;
        }
        let xb = simplex[best].clone();
        for &i in &order[1..] {
            for (x, b) in simplex[i].iter_mut().zip(&xb) {
                *x = b + sigma * (*x - b);
            }
            values[i] = f(&simplex[i]);
        }
    }
    let best = (0..=n)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)))
        .expect("simplex is non-empty");
    SimplexResult {
        x: simplex[best].clone(),
        fx: values[best],
        iterations,
        converged,
    }
}

/// Initial settings for restart `index`.
///
/// Restart 0 is mode-symmetric. For the ECS, restart 1 is the symmetric
/// GHZ-type ansatz `α = β = γ = iπ/(16ζ)`, `α' = β' = γ' = -iπ/(16ζ)`, and
/// every fourth restart draws all-imaginary amplitudes on the scale
/// `min(scale, 1/(2ζ))` set by the interference fringes. Restarts
/// `≡ 2 (mod 4)` use a third of the scale; the rest draw circular complex
/// normals of standard deviation `scale`.
fn seed_settings(state: &StateSpec, scale: f64, seed: u64, index: usize) -> MeasurementSettings {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let normal = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).expect("valid sigma");
    let mut draw = |sc: f64, imaginary_only: bool| -> Complex64 {
        let re = normal.sample(&mut rng) * sc;
        let im = normal.sample(&mut rng) * sc;
        if imaginary_only {
            Complex64::new(0.0, (re * re + im * im).sqrt() * im.signum())
        } else {
            Complex64::new(re, im)
        }
    };
    let zeta = match *state {
        StateSpec::GhzEcs { zeta } => Some(zeta),
        _ => None,
    };
    let symmetric = |u: Complex64, v: Complex64| MeasurementSettings {
        alpha: u,
        alpha_p: v,
        beta: u,
        beta_p: v,
        gamma: u,
        gamma_p: v,
    };
    let mut fill = |sc: f64, imaginary_only: bool| {
        let mut x = [Complex64::new(0.0, 0.0); 6];
        for z in x.iter_mut() {
            *z = draw(sc, imaginary_only);
        }
        from_array(x)
    };
    match (index, index % 4, zeta) {
        (0, _, _) => {
            let mut x = fill(scale, zeta.is_some());
            x.beta = x.alpha;
            x.gamma = x.alpha;
            x.beta_p = x.alpha_p;
            x.gamma_p = x.alpha_p;
            x
        }
        (1, _, Some(z)) => {
            let t = std::f64::consts::PI / (16.0 * z);
            symmetric(Complex64::new(0.0, t), Complex64::new(0.0, -t))
        }
        (_, 0, Some(z)) => fill(scale.min(0.5 / z), true),
        (_, 2, _) => fill(scale / 3.0, false),
        _ => fill(scale, false),
    }
}

fn from_array(x: [Complex64; 6]) -> MeasurementSettings {
    MeasurementSettings {
        alpha: x[0],
        alpha_p: x[1],
        beta: x[2],
        beta_p: x[3],
        gamma: x[4],
        gamma_p: x[5],
    }
}

/// Larger value first; equal values ordered by lexicographic settings.
fn better(a: &Optimum, b: &Optimum) -> Ordering {
    b.value.total_cmp(&a.value).then_with(|| {
        let (x, y) = (a.settings.to_reals(), b.settings.to_reals());
        x.iter()
            .zip(&y)
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
    })
}

fn local_search<C: Correlator + ?Sized>(
    model: &C,
    inequality: Inequality,
    start: &MeasurementSettings,
    step: f64,
    cfg: &OptimizerConfig,
) -> Optimum {
    let objective = |x: &[f64]| -> f64 {
        let arr: [f64; 12] = x.try_into().expect("twelve coordinates");
        let v = inequality.objective(model, &MeasurementSettings::from_reals(&arr)).0;
        if v.is_finite() {
            -v
        } else {
            f64::INFINITY
        }
    };
    let mut x = start.to_reals().to_vec();
    let mut budget = cfg.max_iterations;
    let mut step = step;
    let mut result = nelder_mead(objective, &x, step, budget, cfg.tolerance);
    // restart from the best vertex until a restart no longer improves
    for _ in 0..3 {
        budget = budget.saturating_sub(result.iterations);
        if budget == 0 || !result.converged {
            break;
        }
        step *= 0.1;
        x = result.x.clone();
        let again = nelder_mead(objective, &x, step.max(1e-4), budget, cfg.tolerance);
        let gain = result.fx - again.fx;
        let done = gain <= cfg.tolerance.sqrt() * (result.fx.abs() + 1.0) * 1e-3;
        if again.fx <= result.fx {
            result = SimplexResult {
                iterations: again.iterations,
                ..again
            };
        }
        if done {
            break;
        }
    }
    let arr: [f64; 12] = result.x.as_slice().try_into().expect("twelve coordinates");
    let settings = MeasurementSettings::from_reals(&arr);
    let (value, sign) = inequality.objective(model, &settings);
    Optimum {
        value,
        settings,
        sign,
        converged: result.converged,
    }
}

/// Maximizes the chosen parameter of `model` from `cfg.multistart_count`
/// seeded starts plus `warm` starts. Deterministic for a fixed seed,
/// independent of thread scheduling.
pub fn maximize_model<C: Correlator + ?Sized>(
    model: &C,
    state: &StateSpec,
    inequality: Inequality,
    cfg: &OptimizerConfig,
    warm: &[MeasurementSettings],
) -> Result<Optimum> {
    cfg.validate()?;
    let scale = cfg.scale_for(state);
    let mut starts: Vec<(MeasurementSettings, f64)> = warm.iter().map(|w| (*w, 0.1 * scale)).collect();
    starts.extend((0..cfg.multistart_count).map(|i| (seed_settings(state, scale, cfg.rng_seed, i), 0.5 * scale)));
    let mut results: Vec<Optimum> = starts
        .par_iter()
        .map(|(st, step)| local_search(model, inequality, st, *step, cfg))
        .collect();
    results.sort_by(better);
    Ok(results[0])
}

fn ideal_or_noisy(state: StateSpec, s: f64, noise: NoiseModel) -> Result<PhaseSpaceModel> {
    PhaseSpaceModel::new(state, SParameter::new(s)?, noise)
}

/// Best `|𝒮|` over settings and both signs.
pub fn maximize_svetlichny(state: StateSpec, s: f64, cfg: &OptimizerConfig) -> Result<Optimum> {
    let model = ideal_or_noisy(state, s, NoiseModel::ideal())?;
    maximize_model(&model, &state, Inequality::Svetlichny, cfg, &[])
}

/// Best `|ℳ|` over settings.
pub fn maximize_mk(state: StateSpec, s: f64, cfg: &OptimizerConfig) -> Result<Optimum> {
    let model = ideal_or_noisy(state, s, NoiseModel::ideal())?;
    maximize_model(&model, &state, Inequality::Mk, cfg, &[])
}

/// Optimized `|ℳ|` and `|𝒮|` at one value of `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub s: f64,
    pub mk: Optimum,
    pub svetlichny: Optimum,
}

/// Optimizes both parameters along `s_grid` under `noise`, warm-starting
/// each point from the previous point's optima.
pub fn scan_s(state: StateSpec, s_grid: &[f64], noise: NoiseModel, cfg: &OptimizerConfig) -> Result<Vec<ScanPoint>> {
    cfg.validate()?;
    let mut out: Vec<ScanPoint> = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        let model = ideal_or_noisy(state, s, noise)?;
        let (warm_mk, warm_sv): (Vec<_>, Vec<_>) = match out.last() {
            Some(p) => (vec![p.mk.settings, p.svetlichny.settings], vec![p.svetlichny.settings, p.mk.settings]),
            None => (Vec::new(), Vec::new()),
        };
        let mk = maximize_model(&model, &state, Inequality::Mk, cfg, &warm_mk)?;
        let svetlichny = maximize_model(&model, &state, Inequality::Svetlichny, cfg, &warm_sv)?;
        out.push(ScanPoint { s, mk, svetlichny });
    }
    Ok(out)
}

/// Outcome of [`threshold_efficiency`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Threshold {
    /// Smallest violating η, within [`ETA_TOLERANCE`].
    Eta(f64),
    /// Even ideal detection does not violate the bound.
    NoViolationAtUnitEfficiency,
}

impl Threshold {
    pub fn eta(self) -> Option<f64> {
        match self {
            Threshold::Eta(e) => Some(e),
            Threshold::NoViolationAtUnitEfficiency => None,
        }
    }
}

/// Bisects over symmetric detection efficiency η for the point where the
/// optimized parameter meets `bound` (2 for MK, 4 for Svetlichny).
pub fn threshold_efficiency(state: StateSpec, s: f64, bound: f64, cfg: &OptimizerConfig) -> Result<Threshold> {
    let inequality = Inequality::from_bound(bound)?;
    let mut warm: Vec<MeasurementSettings> = Vec::new();
    let excess = |eta: f64, warm: &mut Vec<MeasurementSettings>| -> Result<f64> {
        let noise = NoiseModel::detection(DetectionEfficiency::symmetric(eta)?);
        let model = ideal_or_noisy(state, s, noise)?;
        let opt = maximize_model(&model, &state, inequality, cfg, warm)?;
        *warm = vec![opt.settings];
        Ok(opt.value - bound - VIOLATION_MARGIN)
    };
    if excess(1.0, &mut warm)? <= 0.0 {
        return Ok(Threshold::NoViolationAtUnitEfficiency);
    }
    let mut hi = 1.0;
    let hi_warm = warm.clone();
    let mut lo = 0.5;
    while excess(lo, &mut warm)? > 0.0 {
        hi = lo;
        if lo < 0.01 {
            return Ok(Threshold::Eta(lo));
        }
        lo *= 0.5;
    }
    let mut warm_hi = if hi == 1.0 { hi_warm } else { warm.clone() };
    while hi - lo > 2.0 * ETA_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        let mut w = warm_hi.clone();
        if excess(mid, &mut w)? > 0.0 {
            hi = mid;
            warm_hi = w;
        } else {
            lo = mid;
        }
    }
    Ok(Threshold::Eta(0.5 * (lo + hi)))
}

/// `𝒮(s = -1) - 𝒮(s = 0)` for the ECS with amplitude `zeta`.
pub fn husimi_minus_wigner(zeta: f64, cfg: &OptimizerConfig) -> Result<f64> {
    let state = StateSpec::GhzEcs { zeta };
    Ok(maximize_svetlichny(state, -1.0, cfg)?.value - maximize_svetlichny(state, 0.0, cfg)?.value)
}

/// Amplitude ζ at which the optimized Svetlichny parameters of the ECS at
/// `s = -1` and `s = 0` coincide, bracketed in `[lo, hi]`.
pub fn crossing_amplitude_in(lo: f64, hi: f64, cfg: &OptimizerConfig) -> Result<f64> {
    let (mut lo, mut hi) = (lo, hi);
    let mut f_lo = husimi_minus_wigner(lo, cfg)?;
    let f_hi = husimi_minus_wigner(hi, cfg)?;
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::Domain(format!(
            "no sign change of S(-1) - S(0) between zeta = {lo} and {hi}"
        )));
    }
    while hi - lo > 2.0 * ZETA_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        let f_mid = husimi_minus_wigner(mid, cfg)?;
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Crossing amplitude searched in `ζ ∈ [0.2, 1.0]`.
pub fn crossing_amplitude(cfg: &OptimizerConfig) -> Result<f64> {
    crossing_amplitude_in(0.2, 1.0, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DampingPoint {
    pub channel: ThermalChannel,
    pub svetlichny: Optimum,
}

/// Optimized Svetlichny parameter after each thermal channel, warm-started
/// along the grid.
pub fn damping_curve(
    state: StateSpec,
    s: f64,
    channels: &[ThermalChannel],
    cfg: &OptimizerConfig,
) -> Result<Vec<DampingPoint>> {
    let mut out: Vec<DampingPoint> = Vec::with_capacity(channels.len());
    for ch in channels {
        let model = ideal_or_noisy(state, s, NoiseModel::damping(*ch))?;
        let warm: Vec<_> = out.last().map(|p| p.svetlichny.settings).into_iter().collect();
        let svetlichny = maximize_model(&model, &state, Inequality::Svetlichny, cfg, &warm)?;
        out.push(DampingPoint { channel: *ch, svetlichny });
    }
    Ok(out)
}

/// Random settings for property tests and spot checks.
pub fn random_settings(rng: &mut impl Rng, scale: f64) -> MeasurementSettings {
    let normal = Normal::new(0.0, scale * std::f64::consts::FRAC_1_SQRT_2).expect("valid sigma");
    let mut x = [0.0; 12];
    for v in x.iter_mut() {
        *v = normal.sample(rng);
    }
    MeasurementSettings::from_reals(&x)
}
