//! Correlation functions, Mermin–Klyshko and Svetlichny parameters.
//!
//! Each party measures `O(δ; s) = c₁ Π(δ; s) + c₀` with
//! `(c₁, c₀) = (1 - s, s)` for `-1 < s <= 0` and `(2, -1)` for `s <= -1`.
//! Using `<Π> = π(1 - s) W / 2` the three-party correlation expands into
//! the three-, two- and one-mode quasiprobabilities:
//!
//! ```text
//! C(a,b,c) = c₀³ + c₀² c₁ κ ΣW₁ + c₀ c₁² κ² ΣW₂ + c₁³ κ³ W₃,   κ = π(1-s)/2
//! ```
//!
//! Settings index 1 is the unprimed amplitude, index 2 the primed one:
//! `M = C₁₁₂ + C₁₂₁ + C₂₁₁ - C₂₂₂`, `M'` swaps primed and unprimed, and the
//! Svetlichny parameter is `|M ± M'|`, bounded by 4 for hybrid
//! local/nonlocal models and by `4√2` in quantum mechanics.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock_oracle::{
    coherent_amplitudes, displacement_block, eigenvalue_spectrum, inner_dimension, o_coefficients, o_operator,
    FockCutoff, FockState,
};
use crate::noise::{MeasuredMarginal, NoiseModel};
use crate::states::{Mode, SParameter, StateModel, StateSpec};

/// Local displacement amplitudes `(α, α', β, β', γ, γ')`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSettings {
    pub alpha: Complex64,
    pub alpha_p: Complex64,
    pub beta: Complex64,
    pub beta_p: Complex64,
    pub gamma: Complex64,
    pub gamma_p: Complex64,
}

impl MeasurementSettings {
    pub fn zeros() -> Self {
        MeasurementSettings::from_reals(&[0.0; 12])
    }

    /// Real coordinates in CSV column order:
    /// `α.re, α.im, α'.re, α'.im, β.re, ..., γ'.im`.
    pub fn to_reals(&self) -> [f64; 12] {
        let z = [self.alpha, self.alpha_p, self.beta, self.beta_p, self.gamma, self.gamma_p];
        let mut out = [0.0; 12];
        for (i, v) in z.iter().enumerate() {
            out[2 * i] = v.re;
            out[2 * i + 1] = v.im;
        }
        out
    }

    pub fn from_reals(x: &[f64; 12]) -> Self {
        let z = |i: usize| Complex64::new(x[2 * i], x[2 * i + 1]);
        MeasurementSettings {
            alpha: z(0),
            alpha_p: z(1),
            beta: z(2),
            beta_p: z(3),
            gamma: z(4),
            gamma_p: z(5),
        }
    }

    /// Settings with primed and unprimed amplitudes exchanged on every mode.
    pub fn swapped(&self) -> Self {
        MeasurementSettings {
            alpha: self.alpha_p,
            alpha_p: self.alpha,
            beta: self.beta_p,
            beta_p: self.beta,
            gamma: self.gamma_p,
            gamma_p: self.gamma,
        }
    }

    /// Amplitude of `mode` for setting index 0 (unprimed) or 1 (primed).
    pub fn get(&self, mode: Mode, primed: usize) -> Complex64 {
        match (mode, primed) {
            (Mode::A, 0) => self.alpha,
            (Mode::A, _) => self.alpha_p,
            (Mode::B, 0) => self.beta,
            (Mode::B, _) => self.beta_p,
            (Mode::C, 0) => self.gamma,
            (Mode::C, _) => self.gamma_p,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_reals().iter().all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SignChoice {
    Plus,
    Minus,
}

impl SignChoice {
    pub const ALL: [SignChoice; 2] = [SignChoice::Plus, SignChoice::Minus];

    pub fn value(self) -> f64 {
        match self {
            SignChoice::Plus => 1.0,
            SignChoice::Minus => -1.0,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            SignChoice::Plus => "+",
            SignChoice::Minus => "-",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellResult {
    pub mk: f64,
    pub mk_prime: f64,
    pub svetlichny: f64,
    pub settings: MeasurementSettings,
    pub s: SParameter,
    pub sign: SignChoice,
}

/// Table `C[i][j][k]` of correlations for setting indices (0 = unprimed).
pub type CorrelationTable = [[[f64; 2]; 2]; 2];

fn mk_from_table(t: &CorrelationTable) -> f64 {
    t[0][0][1] + t[0][1][0] + t[1][0][0] - t[1][1][1]
}

fn mk_prime_from_table(t: &CorrelationTable) -> f64 {
    t[1][1][0] + t[1][0][1] + t[0][1][1] - t[0][0][0]
}

/// Anything that can produce three-party correlations `<O_a ⊗ O_b ⊗ O_c>`.
pub trait Correlator: Sync {
    fn s(&self) -> SParameter;

    fn correlation(&self, a: Complex64, b: Complex64, c: Complex64) -> f64;

    fn correlation_table(&self, st: &MeasurementSettings) -> CorrelationTable {
        let mut t = [[[0.0; 2]; 2]; 2];
        for (i, ti) in t.iter_mut().enumerate() {
            for (j, tij) in ti.iter_mut().enumerate() {
                for (k, v) in tij.iter_mut().enumerate() {
                    *v = self.correlation(st.get(Mode::A, i), st.get(Mode::B, j), st.get(Mode::C, k));
                }
            }
        }
        t
    }

    fn mk(&self, st: &MeasurementSettings) -> f64 {
        mk_from_table(&self.correlation_table(st))
    }

    fn mk_prime(&self, st: &MeasurementSettings) -> f64 {
        mk_prime_from_table(&self.correlation_table(st))
    }

    fn svetlichny(&self, st: &MeasurementSettings, sign: SignChoice) -> f64 {
        let t = self.correlation_table(st);
        (mk_from_table(&t) + sign.value() * mk_prime_from_table(&t)).abs()
    }

    /// Full evaluation; with `sign = None` the larger Svetlichny value is
    /// reported, ties going to `+`.
    fn evaluate(&self, st: &MeasurementSettings, sign: Option<SignChoice>) -> BellResult {
        let t = self.correlation_table(st);
        let mk = mk_from_table(&t);
        let mk_prime = mk_prime_from_table(&t);
        let plus = (mk + mk_prime).abs();
        let minus = (mk - mk_prime).abs();
        let sign = sign.unwrap_or(if minus > plus { SignChoice::Minus } else { SignChoice::Plus });
        BellResult {
            mk,
            mk_prime,
            svetlichny: (mk + sign.value() * mk_prime).abs(),
            settings: *st,
            s: self.s(),
            sign,
        }
    }
}

const PAIRS: [(Mode, Mode); 3] = [(Mode::A, Mode::B), (Mode::B, Mode::C), (Mode::A, Mode::C)];

/// Closed-form correlations of one of the analysed states, optionally seen
/// through detection and damping noise.
#[derive(Debug, Clone)]
pub struct PhaseSpaceModel {
    state: StateModel,
    s: SParameter,
    noise: NoiseModel,
    w3: MeasuredMarginal,
    w2: [MeasuredMarginal; 3],
    w1: [MeasuredMarginal; 3],
    c1: f64,
    c0: f64,
    kappa: f64,
}

impl PhaseSpaceModel {
    pub fn new(state: StateSpec, s: SParameter, noise: NoiseModel) -> Result<Self> {
        let model = StateModel::new(state)?;
        let w3 = noise.marginal(&model, &Mode::ALL, s)?;
        let w2 = [
            noise.marginal(&model, &[PAIRS[0].0, PAIRS[0].1], s)?,
            noise.marginal(&model, &[PAIRS[1].0, PAIRS[1].1], s)?,
            noise.marginal(&model, &[PAIRS[2].0, PAIRS[2].1], s)?,
        ];
        let w1 = [
            noise.marginal(&model, &[Mode::A], s)?,
            noise.marginal(&model, &[Mode::B], s)?,
            noise.marginal(&model, &[Mode::C], s)?,
        ];
        let (c1, c0) = o_coefficients(s.value());
        Ok(PhaseSpaceModel {
            state: model,
            s,
            noise,
            w3,
            w2,
            w1,
            c1,
            c0,
            kappa: PI * (1.0 - s.value()) / 2.0,
        })
    }

    pub fn ideal(state: StateSpec, s: SParameter) -> Result<Self> {
        PhaseSpaceModel::new(state, s, NoiseModel::ideal())
    }

    pub fn state(&self) -> StateSpec {
        self.state.spec()
    }

    pub fn noise(&self) -> NoiseModel {
        self.noise
    }

    /// Measured three-mode quasiprobability at the model's `s`.
    pub fn w3(&self, a: Complex64, b: Complex64, c: Complex64) -> f64 {
        self.w3.eval(&[a, b, c])
    }

    /// Measured two-mode marginal on `pair`, with `x` on `pair.0`.
    pub fn w2(&self, pair: (Mode, Mode), x: Complex64, y: Complex64) -> Result<f64> {
        for (i, p) in PAIRS.iter().enumerate() {
            if *p == pair {
                return Ok(self.w2[i].eval(&[x, y]));
            }
            if (p.1, p.0) == pair {
                return Ok(self.w2[i].eval(&[y, x]));
            }
        }
        Err(Error::InvalidMode("mode pair must be distinct".into()))
    }

    pub fn w1(&self, mode: Mode, x: Complex64) -> f64 {
        self.w1[mode.index()].eval(&[x])
    }

    fn combine(&self, w1: [f64; 3], w2: [f64; 3], w3: f64) -> f64 {
        let (c1, c0, k) = (self.c1, self.c0, self.kappa);
        c0 * c0 * c0
            + c0 * c0 * c1 * k * (w1[0] + w1[1] + w1[2])
            + c0 * c1 * c1 * k * k * (w2[0] + w2[1] + w2[2])
            + c1 * c1 * c1 * k * k * k * w3
    }
}

impl Correlator for PhaseSpaceModel {
    fn s(&self) -> SParameter {
        self.s
    }

    fn correlation(&self, a: Complex64, b: Complex64, c: Complex64) -> f64 {
        let w1 = [self.w1[0].eval(&[a]), self.w1[1].eval(&[b]), self.w1[2].eval(&[c])];
        let w2 = [self.w2[0].eval(&[a, b]), self.w2[1].eval(&[b, c]), self.w2[2].eval(&[a, c])];
        self.combine(w1, w2, self.w3.eval(&[a, b, c]))
    }

    fn correlation_table(&self, st: &MeasurementSettings) -> CorrelationTable {
        // share the marginal values between the eight correlations
        let p = |m: Mode, i: usize| st.get(m, i);
        let mut w1 = [[0.0; 2]; 3];
        for m in Mode::ALL {
            for i in 0..2 {
                w1[m.index()][i] = self.w1[m.index()].eval(&[p(m, i)]);
            }
        }
        let mut w2 = [[[0.0; 2]; 2]; 3];
        for (q, (m1, m2)) in PAIRS.iter().enumerate() {
            for i in 0..2 {
                for j in 0..2 {
                    w2[q][i][j] = self.w2[q].eval(&[p(*m1, i), p(*m2, j)]);
                }
            }
        }
        let mut t = [[[0.0; 2]; 2]; 2];
        for (i, ti) in t.iter_mut().enumerate() {
            for (j, tij) in ti.iter_mut().enumerate() {
                for (k, v) in tij.iter_mut().enumerate() {
                    let w3 = self.w3.eval(&[p(Mode::A, i), p(Mode::B, j), p(Mode::C, k)]);
                    *v = self.combine(
                        [w1[0][i], w1[1][j], w1[2][k]],
                        [w2[0][i][j], w2[1][j][k], w2[2][i][k]],
                        w3,
                    );
                }
            }
        }
        t
    }
}

/// `<O(a;s) ⊗ O(b;s) ⊗ O(c;s)>` from the closed-form quasiprobabilities.
pub fn correlation(state: StateSpec, a: Complex64, b: Complex64, c: Complex64, s: SParameter) -> Result<f64> {
    Ok(PhaseSpaceModel::ideal(state, s)?.correlation(a, b, c))
}

/// `D` combination `f(α,β,γ') + f(α,β',γ) + f(α',β,γ) - f(α',β',γ')` of a
/// three-argument function over the settings.
fn d3(st: &MeasurementSettings, f: impl Fn(Complex64, Complex64, Complex64) -> f64) -> f64 {
    f(st.alpha, st.beta, st.gamma_p) + f(st.alpha, st.beta_p, st.gamma) + f(st.alpha_p, st.beta, st.gamma)
        - f(st.alpha_p, st.beta_p, st.gamma_p)
}

/// Two-mode `D` combination `f(x,y) + f(x,y') + f(x',y) - f(x',y')`.
fn d2(x: (Complex64, Complex64), y: (Complex64, Complex64), f: impl Fn(Complex64, Complex64) -> f64) -> f64 {
    f(x.0, y.0) + f(x.0, y.1) + f(x.1, y.0) - f(x.1, y.1)
}

/// MK parameter written directly in `D`-combinations of `W₃`, `W₂`, `W₁`.
pub fn mk_expansion(model: &PhaseSpaceModel, st: &MeasurementSettings) -> f64 {
    let s = model.s.value();
    let w = 1.0 - s;
    let a = (st.alpha, st.alpha_p);
    let b = (st.beta, st.beta_p);
    let g = (st.gamma, st.gamma_p);
    let dw3 = d3(st, |x, y, z| model.w3(x, y, z));
    let dw2 = d2(a, b, |x, y| model.w2[0].eval(&[x, y]))
        + d2(b, g, |x, y| model.w2[1].eval(&[x, y]))
        + d2(g, a, |x, y| model.w2[2].eval(&[y, x]));
    let w1: f64 = model.w1(Mode::A, st.alpha) + model.w1(Mode::B, st.beta) + model.w1(Mode::C, st.gamma);
    if s > -1.0 {
        PI.powi(3) * w.powi(6) / 8.0 * dw3
            + PI * PI * w.powi(4) * s / 4.0 * dw2
            + PI * w * w * s * s * w1
            + 2.0 * s.powi(3)
    } else {
        PI.powi(3) * w.powi(3) * dw3 - PI * PI * w * w * dw2 + 2.0 * PI * w * w1 - 2.0
    }
}

/// MK parameter `M` in its explicit quasiprobability expansion.
pub fn mk_parameter(state: StateSpec, settings: &MeasurementSettings, s: SParameter) -> Result<f64> {
    check_settings(settings)?;
    Ok(mk_expansion(&PhaseSpaceModel::ideal(state, s)?, settings))
}

/// `M'`: the MK parameter with primed and unprimed settings exchanged.
pub fn mk_prime(state: StateSpec, settings: &MeasurementSettings, s: SParameter) -> Result<f64> {
    mk_parameter(state, &settings.swapped(), s)
}

/// `|M + sign M'|` assembled from the eight correlations.
pub fn svetlichny(state: StateSpec, settings: &MeasurementSettings, s: SParameter, sign: SignChoice) -> Result<f64> {
    check_settings(settings)?;
    Ok(PhaseSpaceModel::ideal(state, s)?.svetlichny(settings, sign))
}

/// Svetlichny parameter at `s = 0`, where only `W₃` contributes:
/// `π³/8 [D(W₃) ± D'(W₃)]`.
pub fn svetlichny_wigner(state: StateSpec, settings: &MeasurementSettings, sign: SignChoice) -> Result<f64> {
    check_settings(settings)?;
    let model = PhaseSpaceModel::ideal(state, SParameter::WIGNER)?;
    let w = |x, y, z| model.w3(x, y, z);
    let d = d3(settings, w);
    let dp = d3(&settings.swapped(), w);
    Ok((PI.powi(3) / 8.0 * (d + sign.value() * dp)).abs())
}

/// Svetlichny parameter at `s = -1` in terms of Husimi functions.
///
/// For `+`: `8π³[D + D'] - 8π²[Σ Q(x,y') + Q(x',y)] + 4π Σ[Q(δ) + Q(δ')] - 4`;
/// for `-`: `8π³[D - D'] - 8π²[Σ Q(x,y) - Q(x',y')] + 4π Σ[Q(δ) - Q(δ')]`.
/// Pair sums run over (α,β), (β,γ), (γ,α).
pub fn svetlichny_husimi(state: StateSpec, settings: &MeasurementSettings, sign: SignChoice) -> Result<f64> {
    check_settings(settings)?;
    let m = PhaseSpaceModel::ideal(state, SParameter::HUSIMI)?;
    let st = settings;
    let q3 = |x, y, z| m.w3(x, y, z);
    let d = d3(st, q3);
    let dp = d3(&st.swapped(), q3);
    let qab = |x, y| m.w2[0].eval(&[x, y]);
    let qbc = |x, y| m.w2[1].eval(&[x, y]);
    let qca = |x: Complex64, y: Complex64| m.w2[2].eval(&[y, x]);
    let singles = |primed: usize| -> f64 { Mode::ALL.iter().map(|&md| m.w1(md, st.get(md, primed))).sum() };
    let value = match sign {
        SignChoice::Plus => {
            let cross = qab(st.alpha, st.beta_p)
                + qbc(st.beta, st.gamma_p)
                + qca(st.gamma, st.alpha_p)
                + qab(st.alpha_p, st.beta)
                + qbc(st.beta_p, st.gamma)
                + qca(st.gamma_p, st.alpha);
            8.0 * PI.powi(3) * (d + dp) - 8.0 * PI * PI * cross + 4.0 * PI * (singles(0) + singles(1)) - 4.0
        }
        SignChoice::Minus => {
            let diag = qab(st.alpha, st.beta) + qbc(st.beta, st.gamma) + qca(st.gamma, st.alpha)
                - qab(st.alpha_p, st.beta_p)
                - qbc(st.beta_p, st.gamma_p)
                - qca(st.gamma_p, st.alpha_p);
            8.0 * PI.powi(3) * (d - dp) - 8.0 * PI * PI * diag + 4.0 * PI * (singles(0) - singles(1))
        }
    };
    Ok(value.abs())
}

fn check_settings(st: &MeasurementSettings) -> Result<()> {
    if st.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain("non-finite measurement settings".into()))
    }
}

/// Correlations computed by trace in the truncated Fock space.
#[derive(Debug, Clone)]
pub struct FockCorrelator {
    state: FockState,
    s: SParameter,
    cutoff: FockCutoff,
}

impl FockCorrelator {
    pub fn new(state: FockState, s: SParameter) -> Result<Self> {
        if state.modes() != 3 {
            return Err(Error::DimensionMismatch("need a three-mode state".into()));
        }
        let cutoff = FockCutoff::new(state.dim() - 1)?;
        Ok(FockCorrelator { state, s, cutoff })
    }
}

impl Correlator for FockCorrelator {
    fn s(&self) -> SParameter {
        self.s
    }

    fn correlation(&self, a: Complex64, b: Complex64, c: Complex64) -> f64 {
        let ops: Vec<_> = [a, b, c]
            .iter()
            .map(|&x| o_operator(x, self.s, self.cutoff).expect("validated s"))
            .collect();
        self.state
            .expectation(&[Some(&ops[0]), Some(&ops[1]), Some(&ops[2])])
            .expect("dimensions match by construction")
            .re
    }
}

/// Correlations of a product of three single-mode pure states, computed in
/// the Fock basis one mode at a time.
#[derive(Debug, Clone)]
pub struct ProductCorrelator {
    factors: [DVector<Complex64>; 3],
    s: SParameter,
    cutoff: FockCutoff,
}

impl ProductCorrelator {
    pub fn new(factors: [DVector<Complex64>; 3], s: SParameter) -> Result<Self> {
        let d = factors[0].len();
        if d < 2 || factors.iter().any(|f| f.len() != d) {
            return Err(Error::DimensionMismatch("factors differ in dimension".into()));
        }
        Ok(ProductCorrelator {
            factors,
            s,
            cutoff: FockCutoff::new(d - 1)?,
        })
    }

    /// Product of coherent states `|a>|b>|c>`.
    pub fn coherent(amps: [Complex64; 3], s: SParameter, cutoff: FockCutoff) -> Result<Self> {
        ProductCorrelator::new(amps.map(|a| coherent_amplitudes(a, cutoff)), s)
    }

    /// `<ψ|O(x; s)|ψ> = Σ_k λ_k |<k|D(-x)|ψ>|²`, with the displaced vector
    /// carried in a box large enough to hold it.
    fn local(&self, mode: usize, x: Complex64) -> f64 {
        let d = displacement_block(-x, inner_dimension(x, self.cutoff), self.cutoff.dim());
        let shifted = d * &self.factors[mode];
        shifted
            .iter()
            .enumerate()
            .map(|(k, amp)| eigenvalue_spectrum(self.s, k) * amp.norm_sqr())
            .sum()
    }
}

impl Correlator for ProductCorrelator {
    fn s(&self) -> SParameter {
        self.s
    }

    fn correlation(&self, a: Complex64, b: Complex64, c: Complex64) -> f64 {
        self.local(0, a) * self.local(1, b) * self.local(2, c)
    }

    fn correlation_table(&self, st: &MeasurementSettings) -> CorrelationTable {
        let mut loc = [[0.0; 2]; 3];
        for m in Mode::ALL {
            for i in 0..2 {
                loc[m.index()][i] = self.local(m.index(), st.get(m, i));
            }
        }
        let mut t = [[[0.0; 2]; 2]; 2];
        for (i, ti) in t.iter_mut().enumerate() {
            for (j, tij) in ti.iter_mut().enumerate() {
                for (k, v) in tij.iter_mut().enumerate() {
                    *v = loc[0][i] * loc[1][j] * loc[2][k];
                }
            }
        }
        t
    }
}
