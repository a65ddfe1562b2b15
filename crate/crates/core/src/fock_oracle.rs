//! Truncated Fock-space backend used as ground truth for the closed-form
//! phase-space expressions.
//!
//! States over up to three modes share one per-mode dimension `n_max + 1`.
//! Basis index of `|n_0 n_1 ... n_{k-1}>` is `Σ n_i d^{k-1-i}` (mode A most
//! significant). Three-mode states are kept as pure vectors; partial traces
//! produce dense density matrices.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::states::{ecs_normalization, Mode, SParameter, StateSpec};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Largest population allowed outside the truncated basis when building states.
pub const MAX_NEGLECTED_POPULATION: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FockCutoff {
    n_max: usize,
}

impl FockCutoff {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max == 0 {
            return Err(Error::Domain("Fock cutoff needs n_max >= 1".into()));
        }
        Ok(FockCutoff { n_max })
    }

    /// Default cutoff for a state family.
    pub fn for_state(spec: &StateSpec) -> Self {
        let n_max = match *spec {
            StateSpec::SinglePhotonW { .. } => 5,
            StateSpec::GhzEcs { zeta } => 20.max((zeta * zeta + 7.0 * zeta + 10.0).ceil() as usize),
            StateSpec::SqueezedVacuum3 { r } => {
                20.max((10.0 * r.sinh().powi(2) + 15.0).ceil() as usize)
            }
        };
        FockCutoff { n_max }
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        self.n_max + 1
    }
}

/// Dense single-mode operator in the truncated number basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FockOperator {
    matrix: DMatrix<Complex64>,
    hermitian: bool,
}

impl FockOperator {
    /// Wraps a square matrix; the hermitian flag is set only when
    /// `max |M - M†| < 1e-12`.
    pub fn from_matrix(matrix: DMatrix<Complex64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "operator must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let hermitian = hermiticity_residual(&matrix) < 1e-12;
        Ok(FockOperator { matrix, hermitian })
    }

    pub fn identity(dim: usize) -> Self {
        FockOperator {
            matrix: DMatrix::identity(dim, dim),
            hermitian: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    /// Spectral norm of a Hermitian operator (largest |eigenvalue|).
    pub fn hermitian_norm(&self) -> f64 {
        self.matrix
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

fn hermiticity_residual(m: &DMatrix<Complex64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Matrix of the Weyl displacement `D(a) = exp(a a† - a* a)`.
pub fn displacement_matrix(a: Complex64, cutoff: FockCutoff) -> FockOperator {
    FockOperator {
        matrix: displacement_block(a, cutoff.dim(), cutoff.dim()),
        hermitian: a.norm() == 0.0,
    }
}

/// Top-left `rows × cols` block of `D(a)` in the infinite Fock basis.
///
/// Uses `<m|D(a)|n> = sqrt(n!/m!) a^(m-n) e^(-|a|²/2) L_n^(m-n)(|a|²)` for
/// `m >= n` (and the adjoint relation otherwise), with magnitudes combined
/// in log space. Applying `a† - a*` column by column instead loses all
/// precision once `|a|` is large.
pub fn displacement_block(a: Complex64, rows: usize, cols: usize) -> DMatrix<Complex64> {
    let mut m = DMatrix::from_element(rows, cols, ZERO);
    let r = a.norm();
    if r == 0.0 {
        for i in 0..rows.min(cols) {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        return m;
    }
    let x = r * r;
    let ln_r = r.ln();
    let below = a / r;
    let above = -a.conj() / r;
    let big = rows.max(cols);
    let small = rows.min(cols);
    let mut ln_fact = vec![0.0; big + small];
    for k in 1..big + small {
        ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
    }
    // lag[j] = L_j^(k)(x) for the current k
    let mut lag = vec![0.0; small];
    for k in 0..big {
        if small > 0 {
            lag[0] = 1.0;
        }
        if small > 1 {
            lag[1] = 1.0 + k as f64 - x;
        }
        for j in 1..small.saturating_sub(1) {
            let jf = j as f64;
            lag[j + 1] = ((2.0 * jf + 1.0 + k as f64 - x) * lag[j] - (jf + k as f64) * lag[j - 1]) / (jf + 1.0);
        }
        let phase_below = below.powu(k as u32);
        let phase_above = above.powu(k as u32);
        for (j, &l) in lag.iter().enumerate() {
            if l == 0.0 {
                continue;
            }
            let mag = (0.5 * (ln_fact[j] - ln_fact[j + k]) + k as f64 * ln_r - 0.5 * x + l.abs().ln()).exp();
            let val = mag * l.signum();
            if j + k < rows && j < cols {
                m[(j + k, j)] = phase_below * val;
            }
            if k > 0 && j < rows && j + k < cols {
                m[(j, j + k)] = phase_above * val;
            }
        }
    }
    m
}

/// Ratio `(s+1)/(s-1)` weighting the displaced number states in `Π(a; s)`.
pub fn pi_ratio(s: f64) -> f64 {
    (s + 1.0) / (s - 1.0)
}

/// Measurement outcome `λ_n` of `O(a; s)` on the displaced number state `n`.
pub fn eigenvalue_spectrum(s: SParameter, n: usize) -> f64 {
    let s = s.value();
    let q = pi_ratio(s).powi(n as i32);
    if s > -1.0 {
        (1.0 - s) * q + s
    } else {
        2.0 * q - 1.0
    }
}

/// Working dimension for `D diag D†`: the sum over intermediate number
/// states must extend past the box far enough for the displaced box states
/// to have negligible population outside it.
pub fn inner_dimension(a: Complex64, cutoff: FockCutoff) -> usize {
    let reach = ((cutoff.n_max() as f64).sqrt() + a.norm() + 7.0).powi(2).ceil() as usize;
    cutoff.dim().max(reach)
}

fn displaced_diagonal(a: Complex64, diag: impl Fn(usize) -> f64, cutoff: FockCutoff) -> FockOperator {
    let inner = FockCutoff { n_max: inner_dimension(a, cutoff) - 1 };
    let dim = cutoff.dim();
    let d = displacement_block(a, dim, inner.dim());
    let mut scaled = d.clone();
    for n in 0..inner.dim() {
        let w = diag(n);
        for row in 0..dim {
            scaled[(row, n)] *= w;
        }
    }
    let mut m = &scaled * d.adjoint();
    // symmetrize away rounding so the hermitian flag holds exactly
    let mt = m.adjoint();
    m = (m + mt) * Complex64::new(0.5, 0.0);
    FockOperator {
        matrix: m,
        hermitian: true,
    }
}

/// `Π(a; s) = D(a) diag([(s+1)/(s-1)]^n) D(a)†`.
pub fn pi_operator(a: Complex64, s: SParameter, cutoff: FockCutoff) -> Result<FockOperator> {
    let ratio = pi_ratio(s.value());
    Ok(displaced_diagonal(a, |n| ratio.powi(n as i32), cutoff))
}

/// `(1-s) Π + s` on the upper branch, `2 Π - 1` for `s <= -1`.
pub fn o_from_pi(pi: &FockOperator, s: f64) -> FockOperator {
    let (c1, c0) = o_coefficients(s);
    let dim = pi.dim();
    let matrix = pi.matrix.map(|x| x * c1) + DMatrix::<Complex64>::identity(dim, dim) * Complex64::new(c0, 0.0);
    FockOperator {
        matrix,
        hermitian: pi.hermitian,
    }
}

/// Coefficients `(c1, c0)` with `O = c1 Π + c0` for the branch selected by `s`.
pub fn o_coefficients(s: f64) -> (f64, f64) {
    if s > -1.0 {
        (1.0 - s, s)
    } else {
        (2.0, -1.0)
    }
}

/// Local observable `O(a; s)` with outcomes in `[-1, 1]`.
pub fn o_operator(a: Complex64, s: SParameter, cutoff: FockCutoff) -> Result<FockOperator> {
    Ok(displaced_diagonal(a, |n| eigenvalue_spectrum(s, n), cutoff))
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    Pure(DVector<Complex64>),
    Mixed(DMatrix<Complex64>),
}

/// Quantum state over `modes` truncated modes of equal dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    dim: usize,
    modes: usize,
    repr: Repr,
}

impl FockState {
    pub fn from_pure(dim: usize, modes: usize, psi: DVector<Complex64>) -> Result<Self> {
        if psi.len() != dim.pow(modes as u32) {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} does not match {modes} modes of dimension {dim}",
                psi.len()
            )));
        }
        Ok(FockState {
            dim,
            modes,
            repr: Repr::Pure(psi),
        })
    }

    pub fn from_density(dim: usize, modes: usize, rho: DMatrix<Complex64>) -> Result<Self> {
        let n = dim.pow(modes as u32);
        if rho.nrows() != n || rho.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "density matrix {}x{} does not match {modes} modes of dimension {dim}",
                rho.nrows(),
                rho.ncols()
            )));
        }
        Ok(FockState {
            dim,
            modes,
            repr: Repr::Mixed(rho),
        })
    }

    /// Product of single-mode pure states given by their amplitudes.
    pub fn product_pure(factors: &[DVector<Complex64>]) -> Result<Self> {
        let dim = factors
            .first()
            .ok_or_else(|| Error::DimensionMismatch("no factors".into()))?
            .len();
        if factors.iter().any(|f| f.len() != dim) {
            return Err(Error::DimensionMismatch("factors differ in dimension".into()));
        }
        let mut psi = DVector::from_element(1, ONE);
        for f in factors {
            psi = psi.kronecker(f);
        }
        FockState::from_pure(dim, factors.len(), psi)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn pure_amplitudes(&self) -> Option<&DVector<Complex64>> {
        match &self.repr {
            Repr::Pure(v) => Some(v),
            Repr::Mixed(_) => None,
        }
    }

    pub fn density_matrix(&self) -> DMatrix<Complex64> {
        match &self.repr {
            Repr::Pure(v) => v * v.adjoint(),
            Repr::Mixed(m) => m.clone(),
        }
    }

    pub fn trace(&self) -> f64 {
        match &self.repr {
            Repr::Pure(v) => v.norm_squared(),
            Repr::Mixed(m) => m.trace().re,
        }
    }

    /// Smallest eigenvalue of the density operator.
    pub fn min_eigenvalue(&self) -> f64 {
        match &self.repr {
            Repr::Pure(v) if v.len() == 1 => v.norm_squared(),
            Repr::Pure(_) => 0.0,
            Repr::Mixed(m) => m
                .clone()
                .symmetric_eigenvalues()
                .iter()
                .fold(f64::INFINITY, |a, &b| a.min(b)),
        }
    }

    /// Photon-number distribution of a single-mode state.
    pub fn photon_distribution(&self) -> Result<Vec<f64>> {
        if self.modes != 1 {
            return Err(Error::DimensionMismatch("photon distribution needs one mode".into()));
        }
        Ok(match &self.repr {
            Repr::Pure(v) => v.iter().map(|a| a.norm_sqr()).collect(),
            Repr::Mixed(m) => (0..self.dim).map(|n| m[(n, n)].re).collect(),
        })
    }

    /// `Tr[ρ (op_0 ⊗ op_1 ⊗ ...)]`; `None` stands for the identity.
    pub fn expectation(&self, ops: &[Option<&FockOperator>]) -> Result<Complex64> {
        if ops.len() != self.modes {
            return Err(Error::DimensionMismatch(format!(
                "{} operators for {} modes",
                ops.len(),
                self.modes
            )));
        }
        for op in ops.iter().flatten() {
            if op.dim() != self.dim {
                return Err(Error::DimensionMismatch(format!(
                    "operator dimension {} vs mode dimension {}",
                    op.dim(),
                    self.dim
                )));
            }
        }
        Ok(match &self.repr {
            Repr::Pure(psi) => {
                let mut phi = psi.clone();
                for (m, op) in ops.iter().enumerate() {
                    if let Some(op) = op {
                        apply_on_mode(phi.as_mut_slice(), &op.matrix, m, self.modes, self.dim);
                    }
                }
                psi.dotc(&phi)
            }
            Repr::Mixed(rho) => {
                let n = rho.nrows();
                let mut acc = ZERO;
                let mut col = vec![ZERO; n];
                for j in 0..n {
                    col.copy_from_slice(rho.column(j).as_slice());
                    for (m, op) in ops.iter().enumerate() {
                        if let Some(op) = op {
                            apply_on_mode(&mut col, &op.matrix, m, self.modes, self.dim);
                        }
                    }
                    acc += col[j];
                }
                acc
            }
        })
    }

    /// Reduced state after tracing out `mode`.
    pub fn partial_trace(&self, mode: usize) -> Result<FockState> {
        if mode >= self.modes || self.modes < 2 {
            return Err(Error::InvalidMode(format!(
                "cannot trace mode {mode} of a {}-mode state",
                self.modes
            )));
        }
        let d = self.dim;
        let rest = d.pow((self.modes - 1) as u32);
        let stride = d.pow((self.modes - 1 - mode) as u32);
        let full = |x: usize, k: usize| ((x / stride) * d + k) * stride + x % stride;
        let mut out = DMatrix::from_element(rest, rest, ZERO);
        match &self.repr {
            Repr::Pure(psi) => {
                for x in 0..rest {
                    for y in x..rest {
                        let mut acc = ZERO;
                        for k in 0..d {
                            acc += psi[full(x, k)] * psi[full(y, k)].conj();
                        }
                        out[(x, y)] = acc;
                        out[(y, x)] = acc.conj();
                    }
                }
            }
            Repr::Mixed(rho) => {
                for x in 0..rest {
                    for y in 0..rest {
                        let mut acc = ZERO;
                        for k in 0..d {
                            acc += rho[(full(x, k), full(y, k))];
                        }
                        out[(x, y)] = acc;
                    }
                }
            }
        }
        FockState::from_density(d, self.modes - 1, out)
    }
}

/// Applies `m` to mode `mode` of a tensor-product vector in place.
fn apply_on_mode(v: &mut [Complex64], m: &DMatrix<Complex64>, mode: usize, modes: usize, d: usize) {
    let stride = d.pow((modes - 1 - mode) as u32);
    let outer = d.pow(mode as u32);
    let mut buf = vec![ZERO; d];
    let mut out = vec![ZERO; d];
    for o in 0..outer {
        let base = o * d * stride;
        for inner in 0..stride {
            for (i, b) in buf.iter_mut().enumerate() {
                *b = v[base + i * stride + inner];
            }
            for (row, slot) in out.iter_mut().enumerate() {
                let mut acc = ZERO;
                for (col, b) in buf.iter().enumerate() {
                    acc += m[(row, col)] * b;
                }
                *slot = acc;
            }
            for (i, x) in out.iter().enumerate() {
                v[base + i * stride + inner] = *x;
            }
        }
    }
}

/// `Tr[ρ (A ⊗ B ⊗ C)]` for a three-mode state; real for Hermitian inputs.
pub fn correlator(
    rho: &FockState,
    op_a: &FockOperator,
    op_b: &FockOperator,
    op_c: &FockOperator,
) -> Result<f64> {
    if rho.modes() != 3 {
        return Err(Error::DimensionMismatch(format!(
            "correlator needs a three-mode state, got {} modes",
            rho.modes()
        )));
    }
    Ok(rho.expectation(&[Some(op_a), Some(op_b), Some(op_c)])?.re)
}

/// Reduced state after tracing out one mode.
pub fn partial_trace(rho: &FockState, mode: Mode) -> Result<FockState> {
    rho.partial_trace(mode.index())
}

/// Coherent-state amplitudes `e^{-|a|²/2} aⁿ/√n!` in the truncated basis.
pub fn coherent_amplitudes(a: Complex64, cutoff: FockCutoff) -> DVector<Complex64> {
    let mut amp = Complex64::new((-0.5 * a.norm_sqr()).exp(), 0.0);
    DVector::from_iterator(
        cutoff.dim(),
        (0..cutoff.dim()).map(|n| {
            let out = amp;
            amp = amp * a / ((n + 1) as f64).sqrt();
            out
        }),
    )
}

/// Number state `|n>` in the truncated basis.
pub fn number_state(n: usize, cutoff: FockCutoff) -> Result<DVector<Complex64>> {
    if n > cutoff.n_max() {
        return Err(Error::Domain(format!("|{n}> lies above the cutoff")));
    }
    let mut v = DVector::from_element(cutoff.dim(), ZERO);
    v[n] = ONE;
    Ok(v)
}

/// Passive three-mode interferometer used to build the squeezed-vacuum state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tritter {
    /// Real orthogonal tritter whose first column is `(1,1,1)/√3`.
    RealOrthogonal,
    /// Discrete Fourier tritter `U_jk = exp(2πi jk/3)/√3`.
    Fourier,
}

impl Tritter {
    pub fn matrix(self) -> [[Complex64; 3]; 3] {
        match self {
            Tritter::RealOrthogonal => {
                let (a, b, c) = (1.0 / 3f64.sqrt(), 1.0 / 2f64.sqrt(), 1.0 / 6f64.sqrt());
                let rows = [[a, b, c], [a, -b, c], [a, 0.0, -2.0 * c]];
                rows.map(|r| r.map(|x| Complex64::new(x, 0.0)))
            }
            Tritter::Fourier => {
                let mut u = [[ZERO; 3]; 3];
                for (j, row) in u.iter_mut().enumerate() {
                    for (k, x) in row.iter_mut().enumerate() {
                        let phase = 2.0 * std::f64::consts::PI * (j * k) as f64 / 3.0;
                        *x = Complex64::from_polar(1.0 / 3f64.sqrt(), phase);
                    }
                }
                u
            }
        }
    }
}

/// Squeezed vacua with squeezing `r` and per-input phases `θ_k`
/// (`S(r e^{iθ})`, θ = 0 squeezes Re a), mixed at `tritter`.
///
/// Uses `U ∏ S_k |0> ∝ exp(½ a†ᵀ (U diag(z) Uᵀ) a†)|0>` with
/// `z_k = -e^{iθ_k} tanh r`; the series only raises photon numbers, so every
/// amplitude inside the truncated box is exact.
pub fn squeezed_tritter_state(
    r: f64,
    phases: [f64; 3],
    tritter: Tritter,
    cutoff: FockCutoff,
) -> Result<FockState> {
    let u = tritter.matrix();
    let z: Vec<Complex64> = phases
        .iter()
        .map(|&t| -Complex64::from_polar(r.tanh(), t))
        .collect();
    let mut zmat = [[ZERO; 3]; 3];
    for j in 0..3 {
        for l in 0..3 {
            zmat[j][l] = (0..3).map(|k| u[j][k] * z[k] * u[l][k]).sum();
        }
    }
    let d = cutoff.dim();
    let n = d * d * d;
    let mut psi = DVector::from_element(n, ZERO);
    let mut term = DVector::from_element(n, ZERO);
    term[0] = Complex64::new(1.0 / r.cosh().powf(1.5), 0.0);
    psi += &term;
    let mut k = 0usize;
    loop {
        k += 1;
        let mut next = DVector::from_element(n, ZERO);
        for idx in 0..n {
            let amp = term[idx];
            if amp == ZERO {
                continue;
            }
            let occ = [idx / (d * d), (idx / d) % d, idx % d];
            for j in 0..3 {
                for l in j..3 {
                    // ½ Σ_jl Z_jl a_j† a_l† = ½ Σ_j Z_jj a_j†² + Σ_{j<l} Z_jl a_j† a_l†
                    let coeff = if j == l { 0.5 * zmat[j][j] } else { zmat[j][l] };
                    if coeff == ZERO {
                        continue;
                    }
                    let mut o = occ;
                    let mut factor = 1.0;
                    o[j] += 1;
                    factor *= (o[j] as f64).sqrt();
                    o[l] += 1;
                    factor *= (o[l] as f64).sqrt();
                    if o.iter().any(|&x| x >= d) {
                        continue;
                    }
                    let target = (o[0] * d + o[1]) * d + o[2];
                    next[target] += amp * coeff * factor;
                }
            }
        }
        next /= Complex64::new(k as f64, 0.0);
        let norm = next.norm();
        psi += &next;
        term = next;
        if norm < 1e-17 || k > 3 * d {
            break;
        }
    }
    let neglected = 1.0 - psi.norm_squared();
    if neglected > MAX_NEGLECTED_POPULATION {
        return Err(Error::CutoffTooSmall {
            n_max: cutoff.n_max(),
            neglected,
        });
    }
    FockState::from_pure(d, 3, psi)
}

/// Builds the state of `spec` as a normalized three-mode Fock vector.
pub fn build_state(spec: &StateSpec, cutoff: FockCutoff) -> Result<FockState> {
    spec.validate()?;
    let d = cutoff.dim();
    match *spec {
        StateSpec::SinglePhotonW { p } => {
            let a = (p / 3.0).sqrt();
            let bc = (0.5 * (1.0 - p / 3.0)).sqrt();
            let mut psi = DVector::from_element(d * d * d, ZERO);
            psi[d * d] = Complex64::new(a, 0.0); // |100>
            psi[d] = Complex64::new(bc, 0.0); // |010>
            psi[1] = Complex64::new(bc, 0.0); // |001>
            FockState::from_pure(d, 3, psi)
        }
        StateSpec::GhzEcs { zeta } => {
            let n = ecs_normalization(zeta)?;
            let plus = coherent_amplitudes(Complex64::new(zeta, 0.0), cutoff);
            let minus = coherent_amplitudes(Complex64::new(-zeta, 0.0), cutoff);
            let pp = plus.kronecker(&plus).kronecker(&plus);
            let mm = minus.kronecker(&minus).kronecker(&minus);
            let psi = (pp - mm) * Complex64::new(n, 0.0);
            let neglected = 1.0 - psi.norm_squared();
            if neglected > MAX_NEGLECTED_POPULATION {
                return Err(Error::CutoffTooSmall {
                    n_max: cutoff.n_max(),
                    neglected,
                });
            }
            FockState::from_pure(d, 3, psi)
        }
        StateSpec::SqueezedVacuum3 { r } => squeezed_tritter_state(
            r,
            [std::f64::consts::PI, 0.0, 0.0],
            Tritter::RealOrthogonal,
            cutoff,
        ),
    }
}
