//! The flat/null hybrid foliation by level sets of `τ = t − h(r − R₂)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Polynomial with coefficients in increasing degree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Poly(Vec<f64>);

impl Poly {
    fn eval(&self, z: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * z + c)
    }

    fn deriv(&self) -> Poly {
        Poly(self.0.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect())
    }

    fn antideriv(&self) -> Poly {
        let mut v = vec![0.0];
        v.extend(self.0.iter().enumerate().map(|(k, c)| c / (k + 1) as f64));
        Poly(v)
    }
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// The `C^k` smoothstep of degree `2k + 1` on `[0, 1]`.
fn smoothstep(k: usize) -> Poly {
    let mut c = vec![0.0; 2 * k + 2];
    for n in 0..=k {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        c[k + 1 + n] = sign * binom(k + n, n) * binom(2 * k + 1, k - n);
    }
    Poly(c)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoliationParams {
    pub r1: f64,
    pub r2: f64,
    pub smoothness: usize,
    step: Poly,
    dstep: Poly,
    ddstep: Poly,
    istep: Poly,
}

pub fn build_foliation(r1: f64, r2: f64, smoothness: usize) -> Result<FoliationParams> {
    if !(r1 > 0.0 && r2 > r1 && r2.is_finite()) {
        return Err(Error::Parameter(format!("need 0 < R1 < R2, got R1 = {r1}, R2 = {r2}")));
    }
    if smoothness == 0 || smoothness > 8 {
        return Err(Error::Parameter(format!("smoothness order must be in 1..=8, got {smoothness}")));
    }
    let step = smoothstep(smoothness);
    let dstep = step.deriv();
    let ddstep = dstep.deriv();
    let istep = step.antideriv();
    Ok(FoliationParams { r1, r2, smoothness, step, dstep, ddstep, istep })
}

impl Default for FoliationParams {
    fn default() -> Self {
        build_foliation(10.0, 20.0, 2).expect("default radii are valid")
    }
}

impl FoliationParams {
    fn s(&self, z: f64) -> f64 {
        if z <= 0.0 {
            0.0
        } else if z >= 1.0 {
            1.0
        } else {
            self.step.eval(z)
        }
    }

    fn ds(&self, z: f64) -> f64 {
        if z <= 0.0 || z >= 1.0 {
            0.0
        } else {
            self.dstep.eval(z)
        }
    }

    fn dds(&self, z: f64) -> f64 {
        if z <= 0.0 || z >= 1.0 {
            0.0
        } else {
            self.ddstep.eval(z)
        }
    }

    /// The cutoff `χ̄`: one for `x ≤ 1`, zero for `x ≥ 3`.
    pub fn chi_bar(&self, x: f64) -> f64 {
        1.0 - self.s((x - 1.0) / 2.0)
    }

    pub fn dchi_bar(&self, x: f64) -> f64 {
        -0.5 * self.ds((x - 1.0) / 2.0)
    }

    pub fn ddchi_bar(&self, x: f64) -> f64 {
        -0.25 * self.dds((x - 1.0) / 2.0)
    }

    /// `χ_R(r) = χ̄(r/R)` and its first two radial derivatives.
    pub fn chi_r(&self, r: f64, radius: f64) -> (f64, f64, f64) {
        let x = r / radius;
        (self.chi_bar(x), self.dchi_bar(x) / radius, self.ddchi_bar(x) / (radius * radius))
    }

    /// `h(y) = ∫_{−∞}^y (1 − χ̄)`.
    pub fn h(&self, y: f64) -> f64 {
        let z = (y - 1.0) / 2.0;
        if z <= 0.0 {
            0.0
        } else if z >= 1.0 {
            y - 2.0
        } else {
            2.0 * self.istep.eval(z)
        }
    }

    pub fn dh(&self, y: f64) -> f64 {
        self.s((y - 1.0) / 2.0)
    }

    pub fn ddh(&self, y: f64) -> f64 {
        0.5 * self.ds((y - 1.0) / 2.0)
    }

    /// `H(r) = h(r − R₂)` with derivatives.
    pub fn big_h(&self, r: f64) -> (f64, f64, f64) {
        let y = r - self.r2;
        (self.h(y), self.dh(y), self.ddh(y))
    }

    /// First radius of the purely null region.
    pub fn null_radius(&self) -> f64 {
        self.r2 + 3.0
    }

    /// `t = τ + h(r − R₂)`.
    pub fn time(&self, tau: f64, r: f64) -> f64 {
        tau + self.h(r - self.r2)
    }

    /// Retarded time `u = (t − r)/2` on the slice `τ`, finite as `r → ∞`.
    pub fn retarded_time(&self, tau: f64, r: f64) -> f64 {
        if r.is_finite() {
            0.5 * (self.time(tau, r) - r)
        } else {
            0.5 * (tau - self.r2 - 2.0)
        }
    }

    /// Slice time at which the outgoing null cone `u` meets future null infinity.
    pub fn tau_of_retarded(&self, u: f64) -> f64 {
        2.0 * u + self.r2 + 2.0
    }
}

/// `1 − h'(r − R₂)²`.
pub fn lapse_factor(r: f64, fol: &FoliationParams) -> f64 {
    let d = fol.dh(r - fol.r2);
    1.0 - d * d
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum HypersurfaceKind {
    Sigma,
    IncomingCone,
    OutgoingCone,
    ConstantT,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hypersurface {
    pub kind: HypersurfaceKind,
    pub parameter: f64,
    pub clip: Option<(f64, f64)>,
}

impl Hypersurface {
    pub fn new(kind: HypersurfaceKind, parameter: f64, clip: Option<(f64, f64)>) -> Result<Self> {
        if !parameter.is_finite() {
            return Err(Error::Parameter("hypersurface parameter must be finite".into()));
        }
        if let Some((a, b)) = clip {
            if !(a <= b) {
                return Err(Error::Parameter(format!("clip range ({a}, {b}) is not ordered")));
            }
        }
        Ok(Self { kind, parameter, clip })
    }

    pub fn sigma(tau: f64) -> Self {
        Self { kind: HypersurfaceKind::Sigma, parameter: tau, clip: None }
    }
}
