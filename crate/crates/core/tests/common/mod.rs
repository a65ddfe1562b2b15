#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64;
use phasebell::fock_oracle::{pi_operator, FockCutoff, FockState};
use phasebell::quadrature::gauss_hermite;
use phasebell::states::SParameter;
use rand::Rng;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn random_point(rng: &mut impl Rng, half_width: f64) -> Complex64 {
    c(rng.random_range(-half_width..half_width), rng.random_range(-half_width..half_width))
}

pub fn random_s(rng: &mut impl Rng) -> SParameter {
    SParameter::new(-2.0 * rng.random::<f64>()).unwrap()
}

/// `(2/(π(1-s)))^k Tr[ρ ⊗ Π(x_j; s)]` over the modes given as `Some`.
pub fn fock_quasiprobability(rho: &FockState, points: &[Option<Complex64>], s: SParameter) -> f64 {
    let cutoff = FockCutoff::new(rho.dim() - 1).unwrap();
    let ops: Vec<_> = points.iter().map(|p| p.map(|x| pi_operator(x, s, cutoff).unwrap())).collect();
    let refs: Vec<_> = ops.iter().map(|o| o.as_ref()).collect();
    let k = points.iter().filter(|p| p.is_some()).count() as i32;
    rho.expectation(&refs).unwrap().re * (2.0 / (PI * (1.0 - s.value()))).powi(k)
}

/// `∫ f d²z₁…d²z_k` with a Gauss–Hermite product rule of `n` nodes per real
/// axis, nodes scaled by `scale` (the integrand's Gaussian width).
pub fn gauss_hermite_integral<const K: usize>(
    f: impl Fn(&[Complex64; K]) -> f64,
    scale: f64,
    n: usize,
) -> f64 {
    let (x, w) = gauss_hermite(n);
    let nodes: Vec<(f64, f64)> = x.iter().zip(&w).map(|(&xi, &wi)| (xi * scale, wi * (xi * xi).exp() * scale)).collect();
    let axes = 2 * K;
    let mut idx = vec![0usize; axes];
    let mut total = 0.0;
    loop {
        let mut pts = [Complex64::new(0.0, 0.0); K];
        let mut weight = 1.0;
        for k in 0..K {
            let (re, wr) = nodes[idx[2 * k]];
            let (im, wi) = nodes[idx[2 * k + 1]];
            pts[k] = Complex64::new(re, im);
            weight *= wr * wi;
        }
        total += weight * f(&pts);
        let mut a = 0;
        loop {
            idx[a] += 1;
            if idx[a] < n {
                break;
            }
            idx[a] = 0;
            a += 1;
            if a == axes {
                return total;
            }
        }
    }
}

pub fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Photon-number distribution after a beam splitter of transmission `eta`.
pub fn degrade(p: &[f64], eta: f64) -> Vec<f64> {
    (0..p.len())
        .map(|m| {
            (m..p.len())
                .map(|n| p[n] * binomial(n, m) * eta.powi(m as i32) * (1.0 - eta).powi((n - m) as i32))
                .sum()
        })
        .collect()
}

/// Quasiprobability at the origin from photon statistics `p`.
pub fn origin_value(p: &[f64], s: f64) -> f64 {
    let ratio = (s + 1.0) / (s - 1.0);
    2.0 / (PI * (1.0 - s)) * p.iter().enumerate().map(|(n, q)| ratio.powi(n as i32) * q).sum::<f64>()
}
