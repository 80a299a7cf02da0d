//! The front-face problem `(Δ + V)u = f` with decay at infinity, and the
//! kernel corrections that make a forcing solvable.

use nalgebra::{DMatrix, DVector};

use super::ball::{solve_ball, solve_punctured, BallGrid};
use crate::error::{Error, Result};
use crate::linalg::{chebyshev, gauss_legendre};
use crate::soliton::{dw, lambda_w, potential};

/// Radial profile of the kernel element for the given degree: `ΛW` for
/// `ℓ = 0`, `W'` (the profile of `∂ᵢW`) for `ℓ = 1`.
pub fn kernel_profile(ell: usize) -> Result<fn(f64) -> f64> {
    match ell {
        0 => Ok(lambda_w),
        1 => Ok(dw),
        _ => Err(Error::Unsupported(format!("front-face kernel only for ℓ ≤ 1, got {ell}"))),
    }
}

fn kernel_name(ell: usize) -> &'static str {
    if ell == 0 {
        "ΛW"
    } else {
        "∂ᵢW"
    }
}

/// `∫₀^∞ g(r) r² dr` by Gauss–Legendre in `s = r/(L + r)`.
pub fn radial_integral(g: impl Fn(f64) -> f64, scale: f64) -> f64 {
    let (z, w) = gauss_legendre(400);
    z.iter()
        .zip(&w)
        .map(|(z, w)| {
            let s = 0.5 * (z + 1.0);
            let r = scale * s / (1.0 - s);
            0.5 * w * g(r) * r * r * scale / ((1.0 - s) * (1.0 - s))
        })
        .sum()
}

const PAIRING_TOL: f64 = 1e-8;

fn check_orthogonal(f: &dyn Fn(f64) -> f64, ell: usize, scale: f64) -> Result<()> {
    let k = kernel_profile(ell)?;
    let pairing = radial_integral(|r| f(r) * k(r), scale);
    let size = radial_integral(|r| (f(r) * k(r)).abs(), scale);
    if pairing.abs() > PAIRING_TOL * size.max(f64::MIN_POSITIVE) {
        return Err(Error::Orthogonality { name: kernel_name(ell).into(), value: pairing });
    }
    Ok(())
}

/// Solution of the front-face problem on Chebyshev–Lobatto nodes in
/// `s = r/(L + r)`.
#[derive(Clone, Debug)]
pub struct FrontFaceProfile {
    pub ell: usize,
    pub scale: f64,
    pub s: Vec<f64>,
    pub values: Vec<f64>,
    /// Least-squares residual of the over-determined collocation system.
    pub residual: f64,
}

impl FrontFaceProfile {
    pub fn eval(&self, r: f64) -> f64 {
        let x = r / (self.scale + r);
        let n = self.s.len() - 1;
        let mut num = 0.0;
        let mut den = 0.0;
        for (j, (&sj, &v)) in self.s.iter().zip(&self.values).enumerate() {
            let d = x - sj;
            if d == 0.0 {
                return v;
            }
            let mut w = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == n {
                w *= 0.5;
            }
            num += w / d * v;
            den += w / d;
        }
        num / den
    }

    pub fn radii(&self) -> Vec<f64> {
        self.s.iter().map(|&s| if s < 1.0 { self.scale * s / (1.0 - s) } else { f64::INFINITY }).collect()
    }
}

/// Clenshaw–Curtis weights on the nodes `cos(πj/n)` of `[−1, 1]`.
fn clenshaw_curtis(n: usize) -> Vec<f64> {
    let mut w = vec![0.0; n + 1];
    let pi = std::f64::consts::PI;
    for (j, wj) in w.iter_mut().enumerate() {
        let c = if j == 0 || j == n { 1.0 } else { 2.0 };
        let mut s = 0.0;
        for k in 0..=n / 2 {
            let b = if k == 0 || (n.is_multiple_of(2) && k == n / 2) { 1.0 } else { 2.0 };
            s += b / (1.0 - 4.0 * (k * k) as f64) * (2.0 * pi * (j * k) as f64 / n as f64).cos();
        }
        *wj = c / n as f64 * s;
    }
    w
}

/// Solves `(Δ + V)u = f` for the degree-`ℓ` profile (`ℓ ≤ 1`) with `u` regular
/// at the origin and decaying at infinity. The forcing must be orthogonal to
/// the kernel and decay faster than `r⁻³`. The kernel is fixed by removing
/// the `1/r` tail (`ℓ = 0`, the `ΛW` direction) or by `L²` orthogonality to
/// `W'` (`ℓ = 1`).
pub fn front_face_solve(f: &dyn Fn(f64) -> f64, ell: usize, n: usize, scale: f64) -> Result<FrontFaceProfile> {
    let kernel = kernel_profile(ell)?;
    if n < 8 || !(scale > 0.0) {
        return Err(Error::Parameter(format!("front-face grid needs n ≥ 8 and L > 0, got n = {n}, L = {scale}")));
    }
    check_orthogonal(f, ell, scale)?;
    let (x, dx) = chebyshev(n);
    let s: Vec<f64> = x.iter().map(|x| 0.5 * (1.0 - x)).collect();
    let m = n + 1;
    let ds = DMatrix::from_fn(m, m, |i, j| -2.0 * dx[i][j]);
    let dss = &ds * &ds;
    let ll = (ell * (ell + 1)) as f64;
    let l2 = scale * scale;
    let mut a = DMatrix::zeros(m + 1, m);
    let mut b = DVector::zeros(m + 1);
    for i in 1..n {
        let si = s[i];
        let r = scale * si / (1.0 - si);
        let q = (1.0 - si).powi(4);
        for j in 0..m {
            a[(i, j)] = dss[(i, j)] + 2.0 / si * ds[(i, j)];
        }
        a[(i, i)] += l2 * potential(r) / q - ll / (si * si * (1.0 - si) * (1.0 - si));
        b[i] = l2 * f(r) / q;
    }
    if ell == 0 {
        for j in 0..m {
            a[(0, j)] = ds[(0, j)];
            a[(m, j)] = ds[(n, j)];
        }
    } else {
        a[(0, 0)] = 1.0;
        let cc = clenshaw_curtis(n);
        for j in 1..n {
            let r = scale * s[j] / (1.0 - s[j]);
            a[(m, j)] = 0.5 * cc[j] * kernel(r) * r * r * scale / ((1.0 - s[j]) * (1.0 - s[j]));
        }
    }
    a[(n, n)] = 1.0;
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-14 * smax) {
        return Err(Error::Conditioning { what: "front-face collocation".into(), cond: smax / smin });
    }
    let u = svd.solve(&b, 1e-14 * smax).map_err(|e| Error::Solver(format!("front-face solve: {e}")))?;
    let residual = (&a * &u - &b).norm() / b.norm().max(f64::MIN_POSITIVE);
    Ok(FrontFaceProfile { ell, scale, s, values: u.iter().copied().collect(), residual })
}

/// Cutoff equal to 1 on `r ≤ R` and 0 on `r ≥ 2R`.
fn inner_cutoff(r: f64, big_r: f64) -> f64 {
    let z = (r - big_r) / big_r;
    if z <= 0.0 {
        1.0
    } else if z >= 1.0 {
        0.0
    } else {
        let p = (-1.0 / (1.0 - z)).exp();
        let q = (-1.0 / z).exp();
        p / (p + q)
    }
}

/// Coefficient solving `⟨f + a·template, kernel⟩ = 0`.
pub fn project_out(
    f: &dyn Fn(f64) -> f64,
    template: &dyn Fn(f64) -> f64,
    ell: usize,
    scale: f64,
) -> Result<(f64, f64)> {
    let k = kernel_profile(ell)?;
    let pf = radial_integral(|r| f(r) * k(r), scale);
    let pt = radial_integral(|r| template(r) * k(r), scale);
    let tn = radial_integral(|r| template(r) * template(r), scale).sqrt();
    let kn = radial_integral(|r| (k(r) * template(r)).abs(), scale);
    if !(pt.abs() > PAIRING_TOL * kn.max(tn * f64::EPSILON)) {
        return Err(Error::Conditioning {
            what: format!("correction template pairs to {pt:e} with {}", kernel_name(ell)),
            cond: kn / pt.abs(),
        });
    }
    let a = -pf / pt;
    let residual = radial_integral(|r| (f(r) + a * template(r)) * k(r), scale);
    Ok((a, residual))
}

/// Coefficient for one harmonic of the forcing.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeCorrection {
    pub ell: usize,
    pub m: usize,
    pub coefficient: f64,
    /// Pairing with the kernel after the correction.
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corrections {
    /// `g₁(0)` for `N_{p−1}g₁ = (tΛW)` at timelike infinity, `g₁|_∂B = 0`.
    pub centre_scaling: f64,
    /// `g₁;ᵢ(0)` for `N_p g₁;ᵢ = (t²∂ᵢW)` at timelike infinity.
    pub centre_translation: f64,
    pub modes: Vec<ModeCorrection>,
}

/// Far-field constants: `tΛW → c/ρ` and `t²∂ᵢW → c x̂ᵢ/ρ²` in `ρ = r/t`.
pub const SCALING_FAR_FIELD: f64 = -0.866_025_403_784_438_6;
pub const TRANSLATION_FAR_FIELD: f64 = -1.732_050_807_568_877_2;

/// Coefficients `a_Λ`, `a_i` making the front-face forcing orthogonal to
/// `{ΛW, ∂ᵢW}` with the templates `g₁(0)V` (`ℓ = 0`) and
/// `g₁;ᵢ(0)V − χ̃(r/R)∂ᵢW` (`ℓ = 1`). `p` is the decay rate at the front face.
/// A radial forcing profile for the `(ℓ, m)` component.
pub type ModeForcing<'a> = ((usize, usize), &'a dyn Fn(f64) -> f64);

pub fn correction_coefficients(
    forcing: &[ModeForcing],
    p: f64,
    big_r: f64,
    scale: f64,
) -> Result<Corrections> {
    if !(p > 1.0) {
        return Err(Error::Parameter(format!("front-face rate must exceed 1, got {p}")));
    }
    if !(big_r > 0.0) {
        return Err(Error::Parameter(format!("cutoff radius must be positive, got {big_r}")));
    }
    let grid = BallGrid::new(48)?;
    let g1 = solve_ball(p - 1.0, &grid, &|r| SCALING_FAR_FIELD / r, 0.0, 0)?.eval(0.0);
    let g1i = solve_punctured(p, &grid, &|r| TRANSLATION_FAR_FIELD / (r * r), 1)?.eval(0.0);
    let mut modes = Vec::with_capacity(forcing.len());
    for &((ell, m), f) in forcing {
        let (coefficient, residual) = match ell {
            0 => project_out(f, &|r| g1 * potential(r), 0, scale)?,
            1 => project_out(f, &|r| g1i * potential(r) - inner_cutoff(r, big_r) * dw(r), 1, scale)?,
            _ => (0.0, 0.0),
        };
        modes.push(ModeCorrection { ell, m, coefficient, residual });
    }
    Ok(Corrections { centre_scaling: g1, centre_translation: g1i, modes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::soliton::w_jet;
    use crate::taylor::Taylor;

    fn apply(ell: usize, b: impl Fn(Taylor<3>) -> Taylor<3>, r: f64) -> f64 {
        let j = b(Taylor::var(r));
        let ll = (ell * (ell + 1)) as f64;
        j.deriv(2) + 2.0 / r * j.deriv(1) - ll / (r * r) * j.value() + potential(r) * j.value()
    }

    #[test]
    fn kernel_is_annihilated_by_quadrature_forms() {
        // ⟨V, ΛW⟩ = 5(2√3/5 − √3/2) = −√3/2
        let v = radial_integral(|r| potential(r) * lambda_w(r), 3.0);
        assert!((v + 3f64.sqrt() / 2.0).abs() < 1e-10, "{v}");
        let w6 = radial_integral(|r| w_jet(Taylor::<1>::var(r)).value().powi(6), 3.0);
        let grad = radial_integral(|r| dw(r) * dw(r), 3.0);
        assert!((w6 - grad).abs() < 1e-10);
    }

    #[test]
    fn bump_recovered_radial() {
        let bump = |t: Taylor<3>| (-(t * t)).exp() * (t * t * 0.5 + 1.0);
        let f = |r: f64| if r == 0.0 { apply(0, bump, 1e-8) } else { apply(0, bump, r) };
        let sol = front_face_solve(&f, 0, 96, 3.0).unwrap();
        for &r in &[0.0, 0.5, 1.3, 4.0, 20.0] {
            let exact = bump(Taylor::<3>::var(r)).value();
            assert!((sol.eval(r) - exact).abs() < 1e-6, "{r}: {} vs {exact}", sol.eval(r));
        }
    }

    #[test]
    fn bump_recovered_dipole() {
        let base = |t: Taylor<3>, c: f64| t * (-(t * t)).exp() * (t * t * c + 1.0);
        // choose c so the bump is orthogonal to W'
        let p0 = radial_integral(|r| base(Taylor::<3>::var(r), 0.0).value() * dw(r), 3.0);
        let p1 = radial_integral(|r| base(Taylor::<3>::var(r), 1.0).value() * dw(r), 3.0);
        let c = -p0 / (p1 - p0);
        let bump = move |t: Taylor<3>| base(t, c);
        let f = move |r: f64| apply(1, bump, r.max(1e-8));
        let sol = front_face_solve(&f, 1, 96, 3.0).unwrap();
        for &r in &[0.0, 0.5, 1.3, 4.0, 20.0] {
            let exact = bump(Taylor::<3>::var(r)).value();
            assert!((sol.eval(r) - exact).abs() < 1e-6, "{r}: {} vs {exact}", sol.eval(r));
        }
    }

    #[test]
    fn non_orthogonal_forcing_rejected() {
        let f = |r: f64| (-r * r).exp();
        match front_face_solve(&f, 0, 64, 3.0) {
            Err(Error::Orthogonality { name, value }) => {
                assert_eq!(name, "ΛW");
                assert!(value.abs() > 1e-3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn solution_decays_like_inverse_square() {
        // forcing with an r⁻⁵ tail made orthogonal to ΛW by a V-multiple
        let g = |r: f64| (1.0 + r * r).powf(-2.5);
        let (a, _) = project_out(&g, &potential, 0, 3.0).unwrap();
        let f = move |r: f64| g(r) + a * potential(r);
        let sol = front_face_solve(&f, 0, 128, 3.0).unwrap();
        let radii = sol.radii();
        let outer: Vec<f64> = radii
            .iter()
            .zip(&sol.values)
            .filter(|(r, _)| r.is_finite() && **r > 1e2)
            .map(|(r, v)| r * r * v)
            .collect();
        assert!(!outer.is_empty());
        let bound = outer.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(bound < 10.0, "{bound}");
        // the residual of the solve is consistent
        assert!(sol.residual < 1e-8, "{}", sol.residual);
    }

    #[test]
    fn zero_forcing_needs_no_correction() {
        let zero = |_: f64| 0.0;
        let c = correction_coefficients(&[((0, 0), &zero), ((1, 0), &zero)], 3.0, 5.0, 3.0).unwrap();
        assert!(c.modes.iter().all(|m| m.coefficient == 0.0));
    }

    #[test]
    fn potential_forcing_corrected_exactly() {
        let c = correction_coefficients(&[((0, 0), &potential)], 3.0, 5.0, 3.0).unwrap();
        // template is g₁(0)V, so the coefficient is −1/g₁(0); g₁(0) = −c/(1+σ) with σ = p − 1
        let g1 = -SCALING_FAR_FIELD / 3.0;
        assert!((c.centre_scaling - g1).abs() < 1e-10);
        assert!((c.modes[0].coefficient + 1.0 / g1).abs() < 1e-8);
        assert!(c.modes[0].residual.abs() < 1e-10);
        // the translation template's centre value is −c/2
        assert!((c.centre_translation + TRANSLATION_FAR_FIELD / 2.0).abs() < 1e-8);
    }

    #[test]
    fn dipole_correction_orthogonalizes() {
        let f = |r: f64| r * (-r).exp();
        for &big_r in &[0.5, 5.0, 20.0] {
            let c = correction_coefficients(&[((1, 2), &f)], 2.5, big_r, 3.0).unwrap();
            assert!(c.modes[0].residual.abs() < 1e-10, "{big_r}");
        }
    }

    #[test]
    fn degenerate_template_is_a_conditioning_error() {
        let bump = |t: Taylor<3>| (-(t * t)).exp();
        let template = |r: f64| apply(0, bump, r.max(1e-8));
        let f = |r: f64| potential(r);
        assert!(matches!(project_out(&f, &template, 0, 3.0), Err(Error::Conditioning { .. })));
        assert!(correction_coefficients(&[((0, 0), &f)], 3.0, 0.0, 3.0).is_err());
    }
}
