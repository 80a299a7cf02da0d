//! Real spherical harmonics of degree ≤ 2 and an exact product quadrature on
//! the unit sphere.

use std::f64::consts::PI;

use crate::linalg::gauss_legendre;

/// `(ℓ, m)` pairs in storage order.
pub const MODES: [(usize, usize); 9] = [
    (0, 0),
    (1, 0),
    (1, 1),
    (1, 2),
    (2, 0),
    (2, 1),
    (2, 2),
    (2, 3),
    (2, 4),
];

/// Real harmonic `(ℓ, m)` at the unit vector `(x, y, z)`.
///
/// ℓ = 1 uses `x̂, ŷ, ẑ`; ℓ = 2 uses `√3xy, √3yz, √3xz, (√3/2)(x²−y²), (3z²−1)/2`.
pub fn harmonic(ell: usize, m: usize, p: [f64; 3]) -> f64 {
    let [x, y, z] = p;
    let s3 = 3f64.sqrt();
    match (ell, m) {
        (0, 0) => 1.0,
        (1, 0) => x,
        (1, 1) => y,
        (1, 2) => z,
        (2, 0) => s3 * x * y,
        (2, 1) => s3 * y * z,
        (2, 2) => s3 * x * z,
        (2, 3) => 0.5 * s3 * (x * x - y * y),
        (2, 4) => 0.5 * (3.0 * z * z - 1.0),
        _ => panic!("harmonic ({ell}, {m}) not available"),
    }
}

/// `∮ Y_{ℓm}² dω`.
pub fn norm_sq(ell: usize) -> f64 {
    4.0 * PI / (2 * ell + 1) as f64
}

/// Gauss–Legendre in `cos θ` times the trapezoid rule in `φ`; exact for
/// polynomials of degree ≤ 15 on the sphere.
#[derive(Clone, Debug)]
pub struct SphereQuadrature {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl SphereQuadrature {
    pub fn new(n_theta: usize, n_phi: usize) -> Self {
        let (zs, wz) = gauss_legendre(n_theta);
        let mut points = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        for (z, w) in zs.iter().zip(&wz) {
            let s = (1.0 - z * z).sqrt();
            for k in 0..n_phi {
                let phi = 2.0 * PI * k as f64 / n_phi as f64;
                points.push([s * phi.cos(), s * phi.sin(), *z]);
                weights.push(w * 2.0 * PI / n_phi as f64);
            }
        }
        Self { points, weights }
    }

    pub fn integrate(&self, f: impl Fn([f64; 3]) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(*p)).sum()
    }
}

impl Default for SphereQuadrature {
    fn default() -> Self {
        Self::new(8, 16)
    }
}

/// Precomputed harmonic values at the quadrature points for fast synthesis
/// and projection of pointwise products.
#[derive(Clone, Debug)]
pub struct ModeProjector {
    pub modes: Vec<(usize, usize)>,
    quad: SphereQuadrature,
    table: Vec<Vec<f64>>,
}

impl ModeProjector {
    pub fn new(modes: &[(usize, usize)]) -> Self {
        let quad = SphereQuadrature::default();
        let table = modes
            .iter()
            .map(|&(l, m)| quad.points.iter().map(|&p| harmonic(l, m, p)).collect())
            .collect();
        Self { modes: modes.to_vec(), quad, table }
    }

    pub fn n_points(&self) -> usize {
        self.quad.points.len()
    }

    /// Values at the quadrature points of `Σ c_k Y_k`.
    pub fn synthesize(&self, coeffs: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (c, row) in coeffs.iter().zip(&self.table) {
            if *c != 0.0 {
                for (o, y) in out.iter_mut().zip(row) {
                    *o += c * y;
                }
            }
        }
    }

    /// Coefficients of the `L²(S²)` projection onto the stored modes.
    pub fn project(&self, values: &[f64], out: &mut [f64]) {
        for (k, row) in self.table.iter().enumerate() {
            let s: f64 = values
                .iter()
                .zip(row)
                .zip(&self.quad.weights)
                .map(|((v, y), w)| v * y * w)
                .sum();
            out[k] = s / norm_sq(self.modes[k].0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthonormality() {
        let q = SphereQuadrature::default();
        for (i, &(l1, m1)) in MODES.iter().enumerate() {
            for &(l2, m2) in &MODES[i..] {
                let v = q.integrate(|p| harmonic(l1, m1, p) * harmonic(l2, m2, p));
                let exact = if (l1, m1) == (l2, m2) { norm_sq(l1) } else { 0.0 };
                assert!((v - exact).abs() < 1e-13, "({l1},{m1}) ({l2},{m2})");
            }
        }
    }

    #[test]
    fn sphere_moments() {
        let q = SphereQuadrature::default();
        assert!((q.integrate(|p| p[0] * p[0]) - 4.0 * PI / 3.0).abs() < 1e-13);
        assert!((q.integrate(|p| p[0].powi(4)) - 4.0 * PI / 5.0).abs() < 1e-13);
        assert!((q.integrate(|p| p[2].powi(14)) - 4.0 * PI / 15.0).abs() < 1e-12);
    }

    #[test]
    fn projection_of_product() {
        // x̂² lies in the span of ℓ ≤ 2, so projection reproduces it
        let proj = ModeProjector::new(&MODES);
        let mut vals = vec![0.0; proj.n_points()];
        let mut c = vec![0.0; MODES.len()];
        c[1] = 1.0;
        proj.synthesize(&c, &mut vals);
        let sq: Vec<f64> = vals.iter().map(|v| v * v).collect();
        let mut out = vec![0.0; MODES.len()];
        proj.project(&sq, &mut out);
        let mut back = vec![0.0; proj.n_points()];
        proj.synthesize(&out, &mut back);
        for (a, b) in back.iter().zip(&sq) {
            assert!((a - b).abs() < 1e-13);
        }
        assert!((out[0] - 1.0 / 3.0).abs() < 1e-14);
    }
}
