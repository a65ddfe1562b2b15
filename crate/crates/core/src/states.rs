//! Closed-form s-parameterized quasiprobability functions of the three
//! analysed three-mode state families, together with their two- and
//! one-mode marginals.
//!
//! All functions use the convention
//!
//! ```text
//! W(δ; s) = 2 / (π (1 - s)) · Tr[ρ Π(δ; s)]     (per mode)
//! ```
//!
//! so that the single-mode vacuum is `2/(π(1-s)) exp(-2|δ|²/(1-s))`.
//! Every mode of a marginal may carry its own ordering parameter; this is
//! what lets the noise channels rescale `s` mode by mode.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One of the three modes (parties) A, B, C.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Mode {
    A,
    B,
    C,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::A, Mode::B, Mode::C];

    pub fn index(self) -> usize {
        match self {
            Mode::A => 0,
            Mode::B => 1,
            Mode::C => 2,
        }
    }

    pub fn from_index(i: usize) -> Result<Mode> {
        Mode::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::InvalidMode(format!("mode index {i} out of range 0..3")))
    }
}

/// Ordering parameter of the quasiprobability family, restricted to `s <= 0`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct SParameter(f64);

impl SParameter {
    pub const WIGNER: SParameter = SParameter(0.0);
    pub const HUSIMI: SParameter = SParameter(-1.0);

    pub fn new(s: f64) -> Result<Self> {
        if s.is_finite() && s <= 0.0 {
            Ok(SParameter(s))
        } else {
            Err(Error::InvalidS(s))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// The three analysed state families, each with its single real parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StateSpec {
    /// `sqrt(1-p/3)(|001>+|010>)/sqrt2 + sqrt(p/3)|100>`; a W state at `p = 1`.
    SinglePhotonW { p: f64 },
    /// Three equally squeezed vacua mixed at a tritter.
    SqueezedVacuum3 { r: f64 },
    /// `N(|ζζζ> - |-ζ-ζ-ζ>)` with real amplitude `ζ > 0`.
    GhzEcs { zeta: f64 },
}

impl StateSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            StateSpec::SinglePhotonW { p } if !(p.is_finite() && (0.0..=1.0).contains(&p)) => {
                Err(Error::InvalidState(format!("single-photon weight p = {p} outside [0, 1]")))
            }
            StateSpec::SqueezedVacuum3 { r } if !(r.is_finite() && r >= 0.0) => {
                Err(Error::InvalidState(format!("squeezing r = {r} must be >= 0")))
            }
            StateSpec::GhzEcs { zeta } if !(zeta.is_finite() && zeta > 0.0) => Err(
                Error::InvalidState(format!("coherent amplitude zeta = {zeta} must be > 0")),
            ),
            _ => Ok(()),
        }
    }

    /// Short family tag used in CLI arguments and CSV output.
    pub fn tag(&self) -> &'static str {
        match self {
            StateSpec::SinglePhotonW { .. } => "w",
            StateSpec::SqueezedVacuum3 { .. } => "sqz",
            StateSpec::GhzEcs { .. } => "ecs",
        }
    }

    pub fn parameter(&self) -> f64 {
        match *self {
            StateSpec::SinglePhotonW { p } => p,
            StateSpec::SqueezedVacuum3 { r } => r,
            StateSpec::GhzEcs { zeta } => zeta,
        }
    }
}

/// A point `(α, β, γ)` of the six-dimensional phase space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint3 {
    pub alpha: Complex64,
    pub beta: Complex64,
    pub gamma: Complex64,
}

impl PhasePoint3 {
    pub fn new(alpha: Complex64, beta: Complex64, gamma: Complex64) -> Self {
        PhasePoint3 { alpha, beta, gamma }
    }

    pub fn origin() -> Self {
        let z = Complex64::new(0.0, 0.0);
        PhasePoint3::new(z, z, z)
    }

    pub fn as_array(&self) -> [Complex64; 3] {
        [self.alpha, self.beta, self.gamma]
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Single-mode vacuum-shaped Gaussian `2/(π(1-s)) exp(-2|δ|²/(1-s))`.
pub fn vacuum_w1(delta: Complex64, s: f64) -> f64 {
    2.0 / (PI * (1.0 - s)) * (-2.0 * delta.norm_sqr() / (1.0 - s)).exp()
}

/// Normalization constant `N` of the GHZ-type entangled coherent state.
pub fn ecs_normalization(zeta: f64) -> Result<f64> {
    if !(zeta.is_finite() && zeta > 0.0) {
        return Err(Error::Domain(format!(
            "ECS normalization diverges for zeta = {zeta}; use SinglePhotonW(p=1) for the zeta -> 0 limit"
        )));
    }
    // 2 - 2 exp(-6ζ²) loses precision for tiny ζ; exp_m1 keeps it.
    Ok((1.0 / (-2.0 * (-6.0 * zeta * zeta).exp_m1())).sqrt())
}

/// Amplitudes of the single excitation on modes A, B, C.
fn single_photon_amplitudes(p: f64) -> [f64; 3] {
    let a = (p / 3.0).sqrt();
    let bc = (0.5 * (1.0 - p / 3.0)).sqrt();
    [a, bc, bc]
}

/// Precision matrix `K` of the three-mode squeezed vacuum at uniform `s`,
/// so that `W = norm · exp(-vᵀ K v / 2)` with
/// `v = (Re α, Im α, Re β, Im β, Re γ, Im γ)`.
pub fn squeezed_precision(r: f64, s: f64) -> DMatrix<f64> {
    let c = (2.0 * r).cosh();
    let sh = (2.0 * r).sinh();
    let delta = 1.0 + s * s - 2.0 * s * c;
    let pref = 2.0 / (3.0 * delta);
    let mut k = DMatrix::zeros(6, 6);
    for i in 0..3 {
        for j in 0..3 {
            let a = if i == j { 1.0 } else { -2.0 };
            let diag = if i == j { 3.0 * (s - c) } else { 0.0 };
            // exponent = pref [diag (x² + y²) - sh xᵀAx + sh yᵀAy]
            k[(2 * i, 2 * j)] = -2.0 * pref * (diag - sh * a);
            k[(2 * i + 1, 2 * j + 1)] = -2.0 * pref * (diag + sh * a);
        }
    }
    k
}

/// The three-mode squeezed vacuum quasiprobability evaluated literally from
/// its closed form at a uniform `s`.
pub fn squeezed_w3_closed_form(r: f64, point: &PhasePoint3, s: f64) -> f64 {
    let c = (2.0 * r).cosh();
    let sh = (2.0 * r).sinh();
    let delta = 1.0 + s * s - 2.0 * s * c;
    let [a, b, g] = point.as_array();
    let norms = a.norm_sqr() + b.norm_sqr() + g.norm_sqr();
    let quad = a.im * a.im + b.im * b.im + g.im * g.im
        - 4.0 * (a.im * b.im + b.im * g.im + g.im * a.im)
        - a.re * a.re
        - b.re * b.re
        - g.re * g.re
        + 4.0 * (a.re * b.re + b.re * g.re + g.re * a.re);
    let exponent = 2.0 / (3.0 * delta) * (3.0 * (s - c) * norms + quad * sh);
    8.0 / (PI.powi(3) * delta.powf(1.5)) * exponent.exp()
}

#[derive(Debug, Clone)]
enum Family {
    SinglePhoton { amps: [f64; 3] },
    /// Wigner (s = 0) covariance in the `v` ordering of [`squeezed_precision`].
    Gaussian { cov: DMatrix<f64> },
    Ecs { zeta: f64, norm2: f64 },
}

/// Validated state with its family constants precomputed.
#[derive(Debug, Clone)]
pub struct StateModel {
    spec: StateSpec,
    family: Family,
}

impl StateModel {
    pub fn new(spec: StateSpec) -> Result<Self> {
        spec.validate()?;
        let family = match spec {
            StateSpec::SinglePhotonW { p } => Family::SinglePhoton {
                amps: single_photon_amplitudes(p),
            },
            StateSpec::SqueezedVacuum3 { r } => {
                let cov = squeezed_precision(r, 0.0)
                    .try_inverse()
                    .ok_or_else(|| Error::Domain("singular squeezed precision".into()))?;
                Family::Gaussian { cov }
            }
            StateSpec::GhzEcs { zeta } => Family::Ecs {
                zeta,
                norm2: ecs_normalization(zeta)?.powi(2),
            },
        };
        Ok(StateModel { spec, family })
    }

    pub fn spec(&self) -> StateSpec {
        self.spec
    }

    /// Prepares the quasiprobability of the reduced state on `modes`, each
    /// mode evaluated at its own ordering parameter.
    pub fn marginal(&self, modes: &[Mode], s: &[f64]) -> Result<Marginal> {
        if modes.is_empty() || modes.len() > 3 || modes.len() != s.len() {
            return Err(Error::InvalidMode(format!(
                "need 1..=3 modes with one s each, got {} modes and {} s values",
                modes.len(),
                s.len()
            )));
        }
        for (i, m) in modes.iter().enumerate() {
            if modes[..i].contains(m) {
                return Err(Error::InvalidMode(format!("mode {m:?} listed twice")));
            }
        }
        for &si in s {
            SParameter::new(si)?;
        }
        let k = modes.len();
        let kind = match &self.family {
            Family::SinglePhoton { amps } => {
                let c: Vec<f64> = modes.iter().map(|m| amps[m.index()]).collect();
                let vac = 1.0 - c.iter().map(|x| x * x).sum::<f64>();
                MarginalKind::SinglePhoton { c, vacuum_weight: vac }
            }
            Family::Gaussian { cov } => {
                let mut sub = DMatrix::zeros(2 * k, 2 * k);
                for (i, mi) in modes.iter().enumerate() {
                    for (j, mj) in modes.iter().enumerate() {
                        for qi in 0..2 {
                            for qj in 0..2 {
                                sub[(2 * i + qi, 2 * j + qj)] =
                                    cov[(2 * mi.index() + qi, 2 * mj.index() + qj)];
                            }
                        }
                    }
                    // s-ordering adds isotropic noise of variance -s/4 per quadrature
                    sub[(2 * i, 2 * i)] -= s[i] / 4.0;
                    sub[(2 * i + 1, 2 * i + 1)] -= s[i] / 4.0;
                }
                let chol = sub.clone().cholesky().ok_or_else(|| {
                    Error::Domain("marginal covariance is not positive definite".into())
                })?;
                let det = chol.determinant();
                let precision = chol.inverse();
                let norm = 1.0 / ((2.0 * PI).powi(k as i32) * det.sqrt());
                MarginalKind::Gaussian {
                    precision: precision.iter().copied().collect(),
                    norm,
                }
            }
            Family::Ecs { zeta, norm2 } => MarginalKind::Ecs {
                zeta: *zeta,
                norm2: *norm2,
                // tracing out a mode multiplies the coherence by <-ζ|ζ> = exp(-2ζ²)
                traced_overlap: (-2.0 * (3 - k) as f64 * zeta * zeta).exp(),
            },
        };
        Ok(Marginal {
            modes: modes.to_vec(),
            s: s.to_vec(),
            kind,
        })
    }
}

#[derive(Debug, Clone)]
enum MarginalKind {
    SinglePhoton { c: Vec<f64>, vacuum_weight: f64 },
    Gaussian { precision: Vec<f64>, norm: f64 },
    Ecs { zeta: f64, norm2: f64, traced_overlap: f64 },
}

/// A reduced quasiprobability function with fixed modes and per-mode `s`,
/// ready for repeated evaluation.
#[derive(Debug, Clone)]
pub struct Marginal {
    modes: Vec<Mode>,
    s: Vec<f64>,
    kind: MarginalKind,
}

impl Marginal {
    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    /// Evaluates at one phase-space point per mode, in the order of `modes()`.
    pub fn eval(&self, points: &[Complex64]) -> f64 {
        debug_assert_eq!(points.len(), self.modes.len());
        let s = &self.s;
        match &self.kind {
            MarginalKind::SinglePhoton { c, vacuum_weight } => {
                let mut envelope = 1.0;
                let mut diag = *vacuum_weight;
                let mut coherent = Complex64::new(0.0, 0.0);
                for (j, &d) in points.iter().enumerate() {
                    envelope *= vacuum_w1(d, s[j]);
                    diag -= c[j] * c[j] * (1.0 + s[j]) / (1.0 - s[j]);
                    coherent += d * (2.0 * c[j] / (1.0 - s[j]));
                }
                envelope * (diag + coherent.norm_sqr())
            }
            MarginalKind::Gaussian { precision, norm } => {
                let n = 2 * points.len();
                let mut v = [0.0; 6];
                for (j, d) in points.iter().enumerate() {
                    v[2 * j] = d.re;
                    v[2 * j + 1] = d.im;
                }
                let mut q = 0.0;
                for i in 0..n {
                    let row = &precision[i * n..(i + 1) * n];
                    let mut acc = 0.0;
                    for (kk, vk) in row.iter().zip(&v[..n]) {
                        acc += kk * vk;
                    }
                    q += v[i] * acc;
                }
                norm * (-0.5 * q).exp()
            }
            MarginalKind::Ecs {
                zeta,
                norm2,
                traced_overlap,
            } => {
                let z = *zeta;
                let mut pref = *norm2;
                let (mut e_plus, mut e_minus, mut e_int, mut phase) = (0.0, 0.0, 0.0, 0.0);
                for (j, d) in points.iter().enumerate() {
                    let w = 1.0 - s[j];
                    pref *= 2.0 / (PI * w);
                    e_plus -= 2.0 * ((d.re - z).powi(2) + d.im * d.im) / w;
                    e_minus -= 2.0 * ((d.re + z).powi(2) + d.im * d.im) / w;
                    e_int += 2.0 * (s[j] * z * z - d.norm_sqr()) / w;
                    phase += 4.0 * z * d.im / w;
                }
                pref * (e_plus.exp() + e_minus.exp()
                    - 2.0 * traced_overlap * e_int.exp() * phase.cos())
            }
        }
    }
}

/// Three-mode quasiprobability `W₃(α, β, γ; s)`.
pub fn w3(state: StateSpec, point: PhasePoint3, s: SParameter) -> Result<f64> {
    if !point.is_finite() {
        return Err(Error::Domain("non-finite phase-space point".into()));
    }
    let v = s.value();
    let marginal = StateModel::new(state)?.marginal(&Mode::ALL, &[v, v, v])?;
    Ok(marginal.eval(&point.as_array()))
}

/// Two-mode marginal `W₂(a, b; s)` on the ordered mode pair.
pub fn w2_marginal(
    state: StateSpec,
    pair: (Mode, Mode),
    a: Complex64,
    b: Complex64,
    s: SParameter,
) -> Result<f64> {
    if pair.0 == pair.1 {
        return Err(Error::InvalidMode("mode pair must be distinct".into()));
    }
    let v = s.value();
    let marginal = StateModel::new(state)?.marginal(&[pair.0, pair.1], &[v, v])?;
    Ok(marginal.eval(&[a, b]))
}

/// One-mode marginal `W₁(a; s)`.
pub fn w1_marginal(state: StateSpec, mode: Mode, a: Complex64, s: SParameter) -> Result<f64> {
    let marginal = StateModel::new(state)?.marginal(&[mode], &[s.value()])?;
    Ok(marginal.eval(&[a]))
}
