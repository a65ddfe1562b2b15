//! Detection inefficiency and local thermal damping as per-mode changes of
//! the ordering parameter plus phase-space rescaling.
//!
//! A detector of efficiency `η` turns the ideal `W(δ; s)` into
//! `W(δ; s_η)/η` with `s_η = -(1 - s - η)/η`. Damping for a time `Γτ` into a
//! bath with `n̄` thermal photons maps `W(δ; s)` to `W(δ/t; s_τ)/t²` with
//! `t = e^{-Γτ/2}` and `s_τ = (s - (1 - t²)(1 + 2n̄))/t²`. Both act mode by
//! mode, so marginals transform with the same per-mode rule.
//!
//! When both are active the channel acts before the detector: the detector
//! shift is applied to the nominal `s` first and the damping shift to the
//! result.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::gauss_hermite;
use crate::states::{Marginal, Mode, PhasePoint3, SParameter, StateModel, StateSpec};

/// Upper bound on quadrature nodes accepted by [`convolution_check`].
pub const MAX_CONVOLUTION_NODES: usize = 100_000_000;

/// Per-mode detection efficiencies `η_a, η_b, η_c ∈ (0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionEfficiency {
    eta: [f64; 3],
}

impl DetectionEfficiency {
    pub fn new(eta_a: f64, eta_b: f64, eta_c: f64) -> Result<Self> {
        for eta in [eta_a, eta_b, eta_c] {
            check_eta(eta)?;
        }
        Ok(DetectionEfficiency {
            eta: [eta_a, eta_b, eta_c],
        })
    }

    pub fn symmetric(eta: f64) -> Result<Self> {
        DetectionEfficiency::new(eta, eta, eta)
    }

    pub fn eta(&self, mode: Mode) -> f64 {
        self.eta[mode.index()]
    }

    pub fn is_ideal(&self) -> bool {
        self.eta.iter().all(|&e| e == 1.0)
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if eta.is_finite() && eta > 0.0 && eta <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("detection efficiency {eta} outside (0, 1]")))
    }
}

/// Local amplitude damping into independent thermal baths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalChannel {
    gamma_tau: f64,
    nbar: f64,
}

impl ThermalChannel {
    pub fn new(gamma_tau: f64, nbar: f64) -> Result<Self> {
        if !(gamma_tau.is_finite() && gamma_tau >= 0.0) {
            return Err(Error::Domain(format!("gamma*tau = {gamma_tau} must be >= 0")));
        }
        if !(nbar.is_finite() && nbar >= 0.0) {
            return Err(Error::Domain(format!("mean thermal occupation {nbar} must be >= 0")));
        }
        Ok(ThermalChannel { gamma_tau, nbar })
    }

    pub fn gamma_tau(&self) -> f64 {
        self.gamma_tau
    }

    pub fn nbar(&self) -> f64 {
        self.nbar
    }

    /// Transmission amplitude `t = e^{-Γτ/2}`.
    pub fn transmission(&self) -> f64 {
        (-0.5 * self.gamma_tau).exp()
    }

    pub fn is_identity(&self) -> bool {
        self.gamma_tau == 0.0
    }
}

/// `s' = -(1 - s - η)/η`.
pub fn effective_s_detection(s: SParameter, eta: f64) -> Result<SParameter> {
    check_eta(eta)?;
    if eta == 1.0 {
        return Ok(s);
    }
    SParameter::new(-(1.0 - s.value() - eta) / eta)
}

/// Returns `(s'(τ), t(τ))`.
pub fn effective_s_damping(s: SParameter, ch: ThermalChannel) -> (f64, f64) {
    if ch.is_identity() {
        return (s.value(), 1.0);
    }
    let t2 = (-ch.gamma_tau).exp();
    // 1 - t² without cancellation for small Γτ
    let r2 = -(-ch.gamma_tau).exp_m1();
    ((s.value() - r2 * (1.0 + 2.0 * ch.nbar)) / t2, t2.sqrt())
}

/// Effective parameters of one measured mode: the state's quasiprobability
/// is read at `δ/scale` and ordering `s`, multiplied by `weight/scale²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeTransform {
    pub s: f64,
    pub scale: f64,
    pub weight: f64,
}

/// Detection and damping noise applied to all three measured modes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseModel {
    pub efficiency: Option<DetectionEfficiency>,
    pub damping: Option<ThermalChannel>,
}

impl NoiseModel {
    pub fn ideal() -> Self {
        NoiseModel::default()
    }

    pub fn detection(eff: DetectionEfficiency) -> Self {
        NoiseModel {
            efficiency: Some(eff),
            damping: None,
        }
    }

    pub fn damping(ch: ThermalChannel) -> Self {
        NoiseModel {
            efficiency: None,
            damping: Some(ch),
        }
    }

    pub fn is_ideal(&self) -> bool {
        self.efficiency.is_none_or(|e| e.is_ideal()) && self.damping.is_none_or(|d| d.is_identity())
    }

    pub fn mode_transform(&self, mode: Mode, s: SParameter) -> Result<ModeTransform> {
        let mut out = ModeTransform {
            s: s.value(),
            scale: 1.0,
            weight: 1.0,
        };
        if self.is_ideal() {
            return Ok(out);
        }
        let mut sv = s;
        if let Some(eff) = self.efficiency {
            let eta = eff.eta(mode);
            sv = effective_s_detection(sv, eta)?;
            out.weight = 1.0 / eta;
        }
        out.s = sv.value();
        if let Some(ch) = self.damping {
            let (s_tau, t) = effective_s_damping(sv, ch);
            out.s = s_tau;
            out.scale = t;
        }
        Ok(out)
    }

    /// Measured quasiprobability of the reduced state on `modes`.
    pub fn marginal(&self, state: &StateModel, modes: &[Mode], s: SParameter) -> Result<MeasuredMarginal> {
        let transforms = modes
            .iter()
            .map(|&m| self.mode_transform(m, s))
            .collect::<Result<Vec<_>>>()?;
        let svals: Vec<f64> = transforms.iter().map(|t| t.s).collect();
        let prefactor = transforms.iter().map(|t| t.weight / (t.scale * t.scale)).product();
        Ok(MeasuredMarginal {
            marginal: state.marginal(modes, &svals)?,
            inv_scales: transforms.iter().map(|t| 1.0 / t.scale).collect(),
            prefactor,
        })
    }
}

/// A marginal with its noise transforms folded in.
#[derive(Debug, Clone)]
pub struct MeasuredMarginal {
    marginal: Marginal,
    inv_scales: Vec<f64>,
    prefactor: f64,
}

impl MeasuredMarginal {
    pub fn modes(&self) -> &[Mode] {
        self.marginal.modes()
    }

    pub fn eval(&self, points: &[Complex64]) -> f64 {
        if self.prefactor == 1.0 && self.inv_scales.iter().all(|&x| x == 1.0) {
            return self.marginal.eval(points);
        }
        let mut scaled = [Complex64::new(0.0, 0.0); 3];
        for (j, (p, k)) in points.iter().zip(&self.inv_scales).enumerate() {
            scaled[j] = p * *k;
        }
        self.prefactor * self.marginal.eval(&scaled[..points.len()])
    }
}

fn three_mode(state: StateSpec, point: PhasePoint3, s: SParameter, noise: NoiseModel) -> Result<f64> {
    if !point.is_finite() {
        return Err(Error::Domain("non-finite phase-space point".into()));
    }
    let model = StateModel::new(state)?;
    Ok(noise.marginal(&model, &Mode::ALL, s)?.eval(&point.as_array()))
}

/// `W₃(α, β, γ; s')/(η_a η_b η_c)` with per-mode `s'`.
pub fn measured_w3_detection(
    state: StateSpec,
    point: PhasePoint3,
    s: SParameter,
    eff: DetectionEfficiency,
) -> Result<f64> {
    three_mode(state, point, s, NoiseModel::detection(eff))
}

/// `W₃(α/t, β/t, γ/t; s'(τ))/t⁶`.
pub fn damped_w3(state: StateSpec, point: PhasePoint3, s: SParameter, ch: ThermalChannel) -> Result<f64> {
    three_mode(state, point, s, NoiseModel::damping(ch))
}

/// Quasiprobability of a thermal state with mean occupation `nbar`.
pub fn thermal_w1(a: Complex64, nbar: f64, s: SParameter) -> f64 {
    let w = 2.0 * nbar + 1.0 - s.value();
    2.0 / (PI * w) * (-2.0 * a.norm_sqr() / w).exp()
}

/// Damped `W₃` computed as an explicit convolution of the ideal function
/// with three thermal kernels, using a Gauss–Hermite product rule with
/// `nodes_per_axis` nodes on each of the six real axes.
pub fn convolution_check(
    state: StateSpec,
    point: PhasePoint3,
    s: SParameter,
    ch: ThermalChannel,
    nodes_per_axis: usize,
) -> Result<f64> {
    let total = (nodes_per_axis as f64).powi(6);
    if nodes_per_axis == 0 || total > MAX_CONVOLUTION_NODES as f64 {
        return Err(Error::Resource(format!(
            "{nodes_per_axis}^6 quadrature nodes exceeds the limit of {MAX_CONVOLUTION_NODES}"
        )));
    }
    let model = StateModel::new(state)?;
    let sv = s.value();
    let marginal = model.marginal(&Mode::ALL, &[sv, sv, sv])?;
    let t = ch.transmission();
    let r = (-(-ch.gamma_tau()).exp_m1()).sqrt();
    // thermal kernel has variance (2n̄ + 1 - s)/4 per quadrature
    let spread = ((2.0 * ch.nbar() + 1.0 - sv) / 2.0).sqrt();
    let (x, w) = gauss_hermite(nodes_per_axis);
    let nodes: Vec<(f64, f64)> = x
        .iter()
        .zip(&w)
        .map(|(&xi, &wi)| (xi * spread, wi / PI.sqrt()))
        .collect();
    let centre = point.as_array();
    let mut acc = 0.0;
    let mut pts = [Complex64::new(0.0, 0.0); 3];
    for &(ar, war) in &nodes {
        for &(ai, wai) in &nodes {
            pts[0] = (centre[0] - r * Complex64::new(ar, ai)) / t;
            let wa = war * wai;
            for &(br, wbr) in &nodes {
                for &(bi, wbi) in &nodes {
                    pts[1] = (centre[1] - r * Complex64::new(br, bi)) / t;
                    let wb = wa * wbr * wbi;
                    for &(gr, wgr) in &nodes {
                        for &(gi, wgi) in &nodes {
                            pts[2] = (centre[2] - r * Complex64::new(gr, gi)) / t;
                            acc += wb * wgr * wgi * marginal.eval(&pts);
                        }
                    }
                }
            }
        }
    }
    Ok(acc / t.powi(6))
}
