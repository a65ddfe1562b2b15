//! Quadrature rules for normalization and marginal checks.

use num_complex::Complex64;

use crate::states::StateSpec;

/// Gauss–Hermite nodes and weights for `∫ f(x) e^{-x²} dx`.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Hermite rule needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            // orthonormal Hermite recurrence
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Uniform trapezoid rule on `[-half_width, half_width]` with `points` nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapezoidGrid {
    pub half_width: f64,
    pub points: usize,
}

impl TrapezoidGrid {
    pub fn new(half_width: f64, points: usize) -> Self {
        assert!(points >= 2);
        TrapezoidGrid { half_width, points }
    }

    /// Grid for checking marginals of `spec`: half-width
    /// `max(5, 5 + 3ζ)` or `max(5, 5 e^r)`, 61 nodes per real axis.
    pub fn for_state(spec: &StateSpec) -> Self {
        let hw = match *spec {
            StateSpec::SinglePhotonW { .. } => 5.0,
            StateSpec::GhzEcs { zeta } => 5.0 + 3.0 * zeta,
            StateSpec::SqueezedVacuum3 { r } => 5.0 * r.exp(),
        };
        TrapezoidGrid::new(hw.max(5.0), 61)
    }

    pub fn step(&self) -> f64 {
        2.0 * self.half_width / (self.points - 1) as f64
    }

    pub fn nodes(&self) -> Vec<(f64, f64)> {
        let h = self.step();
        (0..self.points)
            .map(|i| {
                let w = if i == 0 || i + 1 == self.points { 0.5 * h } else { h };
                (-self.half_width + i as f64 * h, w)
            })
            .collect()
    }

    /// Nodes and weights of the induced product rule on the complex plane.
    pub fn plane(&self) -> Vec<(Complex64, f64)> {
        let axis = self.nodes();
        let mut out = Vec::with_capacity(axis.len() * axis.len());
        for &(x, wx) in &axis {
            for &(y, wy) in &axis {
                out.push((Complex64::new(x, y), wx * wy));
            }
        }
        out
    }

    /// `∫ f(z) d²z` over the square.
    pub fn integrate_plane(&self, mut f: impl FnMut(Complex64) -> f64) -> f64 {
        self.plane().into_iter().map(|(z, w)| w * f(z)).sum()
    }
}
