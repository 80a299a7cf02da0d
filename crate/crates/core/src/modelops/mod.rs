//! Model problems at the faces of the compactified region: the homogeneous
//! operator `N_σ`, its hyperbolic conjugate, the front-face problem
//! `(Δ + V)u = f`, index-set bookkeeping and polyhomogeneous fitting.

pub mod ball;
pub mod front;
pub mod index;
pub mod phg;

pub use ball::{
    explicit_inverse_profile, normal_apply, normal_apply_jet, solve_ball, solve_punctured, BallGrid, BallSolution,
    HomogeneousSolution,
};
pub use front::{
    correction_coefficients, front_face_solve, kernel_profile, project_out, radial_integral, Corrections, FrontFaceProfile,
    ModeCorrection, ModeForcing,
};
pub use index::{index_order, phg_iterate, phg_iteration_step, IndexSet, PhgCase, PhgState, PhgStep};
pub use phg::{annihilate, phg_fit, FitConfig, PhgExpansion, PhgFitTerm};

use crate::error::{Error, Result};
use crate::taylor::Taylor;

/// `ρ̃ = (1 − √(1 − ρ²))/ρ`.
pub fn hyperbolic_radius<const N: usize>(rho: Taylor<N>) -> Taylor<N> {
    (1.0 - (1.0 - rho * rho).sqrt()) / rho
}

/// `h_σ = ((1 + ρ̃²)/(1 − ρ̃²))^{1+σ}`.
pub fn conjugation_weight<const N: usize>(sigma: f64, rt: Taylor<N>) -> Taylor<N> {
    ((1.0 + rt * rt) / (1.0 - rt * rt)).powf(1.0 + sigma)
}

/// Radial hyperbolic Laplacian in the ball model,
/// `((1 − ρ̃²)²/4)(∂² + (2/ρ̃)∂ − ℓ(ℓ+1)/ρ̃²) + ((1 − ρ̃²)/2)ρ̃∂`.
pub fn hyperbolic_laplacian(ell: usize, g: &Taylor<3>, rt: f64) -> f64 {
    let ll = (ell * (ell + 1)) as f64;
    let a = 1.0 - rt * rt;
    a * a / 4.0 * (g.deriv(2) + 2.0 / rt * g.deriv(1) - ll / (rt * rt) * g.value()) + a / 2.0 * rt * g.deriv(1)
}

/// Largest value over the probes `ρ̃` of
/// `|h⁻¹N_σ(h g) − ((1+ρ̃²)²/(1−ρ̃²)²)(Δ_ℍ − (σ² − 1))g|`, with exact
/// derivatives of the test profile `g(ρ̃)`.
pub fn conjugation_residual(
    sigma: f64,
    ell: usize,
    g: impl Fn(Taylor<3>) -> Taylor<3>,
    probes: &[f64],
) -> Result<f64> {
    let mut worst = 0.0f64;
    for &rt in probes {
        if !(rt > 0.0 && rt < 1.0) {
            return Err(Error::Domain(format!("probe ρ̃ = {rt} outside (0, 1)")));
        }
        let rho = 2.0 * rt / (1.0 + rt * rt);
        let lhs = normal_apply_jet(
            sigma,
            ell,
            |x| {
                let r = hyperbolic_radius(x);
                conjugation_weight(sigma, r) * g(r)
            },
            rho,
        ) / conjugation_weight(sigma, Taylor::<1>::var(rt)).value();
        let gj = g(Taylor::var(rt));
        let pref = ((1.0 + rt * rt) / (1.0 - rt * rt)).powi(2);
        let rhs = pref * (hyperbolic_laplacian(ell, &gj, rt) - (sigma * sigma - 1.0) * gj.value());
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}

/// Radial Green's function `g_σ(r) = ((1 − r²)/(2r))((1 − r)/(1 + r))^σ`.
pub fn greens_function<const N: usize>(sigma: f64, r: Taylor<N>) -> Taylor<N> {
    (1.0 - r * r) / (r * 2.0) * ((1.0 - r) / (1.0 + r)).powf(sigma)
}

/// Largest `|(Δ_ℍ − (σ² − 1))g_σ|` over the probes.
pub fn greens_residual(sigma: f64, probes: &[f64]) -> Result<f64> {
    if sigma < 0.0 {
        return Err(Error::Parameter(format!("σ must be nonnegative, got {sigma}")));
    }
    let mut worst = 0.0f64;
    for &r in probes {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::Domain(format!("probe r = {r} outside (0, 1)")));
        }
        let g = greens_function(sigma, Taylor::<3>::var(r));
        worst = worst.max((hyperbolic_laplacian(0, &g, r) - (sigma * sigma - 1.0) * g.value()).abs());
    }
    Ok(worst)
}

/// `u∂_u(r g)` at null infinity for `g = t^{−1−σ}(1 − |x|/t)^{−σ}`, evaluated
/// at retarded time `u = (t − r)/2` and radius `r`. Tends to
/// `−σ2^{−σ}u^{−σ}` as `r → ∞`.
pub fn radiative_trace(sigma: f64, u: f64, r: f64) -> f64 {
    let rg = |u: Taylor<2>| {
        let t = u * 2.0 + r;
        (t.powf(-1.0 - sigma) * (1.0 - r / t).powf(-sigma)) * r
    };
    u * rg(Taylor::var(u)).deriv(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conjugation_identity_holds() {
        let probes: Vec<f64> = (1..20).map(|i| i as f64 / 20.0).collect();
        for &s in &[0.5, 2.0, 3.5] {
            for ell in 0..3 {
                let res = conjugation_residual(s, ell, |x| (x * x * 3.0 + 1.0) * x.exp(), &probes).unwrap();
                assert!(res < 1e-8, "{s} {ell} {res}");
            }
        }
        assert_eq!(conjugation_residual(2.0, 1, |x| x * 0.0, &probes).unwrap(), 0.0);
        assert!(conjugation_residual(2.0, 0, |x| x, &[1.0]).is_err());
    }

    #[test]
    fn printed_normalization_fails() {
        // (ρ̃²+1)²/4 · ((1−ρ̃²)∂² + 2(1−ρ̃²)/ρ̃ ∂ − 4(σ²−1)) is not the conjugate
        let (s, rt) = (2.0, 0.5);
        let g = |x: Taylor<3>| x.exp();
        let rho = 2.0 * rt / (1.0 + rt * rt);
        let lhs = normal_apply_jet(s, 0, |x| conjugation_weight(s, hyperbolic_radius(x)) * g(hyperbolic_radius(x)), rho)
            / conjugation_weight(s, Taylor::<1>::var(rt)).value();
        let gj = g(Taylor::var(rt));
        let a = 1.0 - rt * rt;
        let printed = (rt * rt + 1.0).powi(2) / 4.0
            * (a * gj.deriv(2) + 2.0 * a / rt * gj.deriv(1) - 4.0 * (s * s - 1.0) * gj.value());
        assert!((lhs - printed).abs() > 1.0);
    }

    #[test]
    fn greens_function_is_annihilated() {
        let probes: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
        for &s in &[0.0, 1.0, 3.5] {
            assert!(greens_residual(s, &probes).unwrap() < 1e-8, "{s}");
        }
        assert!(greens_residual(1.0, &[0.0]).is_err());
    }

    #[test]
    fn radiative_trace_limit() {
        for &s in &[1.0, 2.0] {
            for &u in &[1.0f64, 3.0] {
                let exact = -s * 2f64.powf(-s) * u.powf(-s);
                let v = radiative_trace(s, u, 1e8);
                assert!((v - exact).abs() < 1e-6 * exact.abs(), "{s} {u} {v} {exact}");
            }
        }
    }
}
