//! The operator `N_σ` on `t^{-σ}`-homogeneous profiles over the unit ball and
//! its boundary-value problems.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::taylor::Taylor;

/// Chebyshev points of the first kind mapped to `(0, 1)`, clustered toward
/// both endpoints, with a barycentric differentiation matrix.
#[derive(Clone, Debug)]
pub struct BallGrid {
    pub rho: Vec<f64>,
    weights: Vec<f64>,
    d1: DMatrix<f64>,
    d2: DMatrix<f64>,
}

impl BallGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 4 {
            return Err(Error::Parameter(format!("ball grid needs at least 4 nodes, got {n}")));
        }
        let theta = |j: usize| std::f64::consts::PI * (2 * j + 1) as f64 / (2 * n) as f64;
        let rho: Vec<f64> = (0..n).map(|j| 0.5 * (1.0 - theta(j).cos())).collect();
        let weights: Vec<f64> = (0..n)
            .map(|j| if j % 2 == 0 { theta(j).sin() } else { -theta(j).sin() })
            .collect();
        let mut d1 = DMatrix::zeros(n, n);
        for i in 0..n {
            let mut diag = 0.0;
            for j in 0..n {
                if i != j {
                    let v = weights[j] / weights[i] / (rho[i] - rho[j]);
                    d1[(i, j)] = v;
                    diag -= v;
                }
            }
            d1[(i, i)] = diag;
        }
        let d2 = &d1 * &d1;
        Ok(Self { rho, weights, d1, d2 })
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.rho.iter().map(|&r| f(r)).collect()
    }

    /// Barycentric interpolation of nodal values, valid on `[0, 1]`.
    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for ((&r, &w), &v) in self.rho.iter().zip(&self.weights).zip(values) {
            let d = x - r;
            if d == 0.0 {
                return v;
            }
            num += w / d * v;
            den += w / d;
        }
        num / den
    }

    pub fn derivative(&self, values: &[f64]) -> Vec<f64> {
        (&self.d1 * DVector::from_column_slice(values)).iter().copied().collect()
    }
}

/// Coefficients `(c₀, c₁, c₂)` of `N_σ = −(c₀ + c₁∂ + c₂∂²)` at `ρ` for the
/// harmonic of degree `ℓ`.
fn coefficients(sigma: f64, ell: usize, rho: f64) -> (f64, f64, f64) {
    let ll = (ell * (ell + 1)) as f64;
    (
        sigma * sigma + 3.0 * sigma + 2.0 + ll / (rho * rho),
        2.0 * ((sigma + 2.0) * rho - 1.0 / rho),
        rho * rho - 1.0,
    )
}

/// `N_σ f` on grid values, with spectral derivatives.
pub fn normal_apply(sigma: f64, grid: &BallGrid, f: &[f64], ell: usize) -> Result<Vec<f64>> {
    crate::error::check_len(grid.len(), f.len())?;
    let v = DVector::from_column_slice(f);
    let d1 = &grid.d1 * &v;
    let d2 = &grid.d2 * &v;
    Ok((0..grid.len())
        .map(|i| {
            let (c0, c1, c2) = coefficients(sigma, ell, grid.rho[i]);
            -(c0 * f[i] + c1 * d1[i] + c2 * d2[i])
        })
        .collect())
}

/// `N_σ f` at a point, with exact derivatives from a closed form.
pub fn normal_apply_jet(sigma: f64, ell: usize, f: impl Fn(Taylor<3>) -> Taylor<3>, rho: f64) -> f64 {
    let j = f(Taylor::var(rho));
    let (c0, c1, c2) = coefficients(sigma, ell, rho);
    -(c0 * j.value() + c1 * j.deriv(1) + c2 * j.deriv(2))
}

/// Polynomial in `t`, `r` multiplying `(t − r)^{−σ}` or `(t + r)^{−σ}`.
type Terms = Vec<((i32, i32), f64)>;

fn push_term(terms: &mut Terms, key: (i32, i32), c: f64) {
    if let Some(t) = terms.iter_mut().find(|t| t.0 == key) {
        t.1 += c;
    } else {
        terms.push((key, c));
    }
}

/// `D = ∂_t + (t/r)∂_r` on `P·(t ∓ r)^{−σ}`, using `D(t∓r)^{−σ} = ±σ(t∓r)^{−σ}/r`.
fn boost(terms: &Terms, sigma: f64, sign: f64) -> Terms {
    let mut out = Terms::new();
    for &((a, b), c) in terms {
        if a != 0 {
            push_term(&mut out, (a - 1, b), c * a as f64);
        }
        if b != 0 {
            push_term(&mut out, (a + 1, b - 2), c * b as f64);
        }
        push_term(&mut out, (a, b - 1), sign * sigma * c);
    }
    out
}

/// Regular homogeneous solution of `N_σ h = 0` for degree `ℓ`,
/// `h = ρ^ℓ ₂F₁((σ+ℓ+1)/2, (σ+ℓ+2)/2; ℓ+3/2; ρ²)`.
///
/// The power series is used for `ρ ≤ 0.6`. Beyond that the closed form from
/// applying the boost `x_i∂_t + t∂_i` `ℓ` times to
/// `((t − r)^{−σ} − (t + r)^{−σ})/r` is used, rescaled to match.
#[derive(Clone, Debug)]
pub struct HomogeneousSolution {
    pub sigma: f64,
    pub ell: usize,
    incoming: Terms,
    outgoing: Terms,
    scale: f64,
}

const MATCH_POINT: f64 = 0.6;

impl HomogeneousSolution {
    pub fn new(sigma: f64, ell: usize) -> Result<Self> {
        let mut incoming: Terms = vec![((0, -1), 1.0)];
        let mut outgoing: Terms = vec![((0, -1), -1.0)];
        for _ in 0..ell {
            incoming = boost(&incoming, sigma, 1.0);
            outgoing = boost(&outgoing, sigma, -1.0);
        }
        let mut h = Self { sigma, ell, incoming, outgoing, scale: 1.0 };
        let x = Taylor::<1>::var(MATCH_POINT);
        let closed = h.closed(x).value();
        let series = h.series(x).value();
        if !(closed.abs() > 1e-8 * series.abs()) {
            return Err(Error::Conditioning {
                what: format!("boosted homogeneous solution degenerates at σ = {sigma}, ℓ = {ell}"),
                cond: f64::INFINITY,
            });
        }
        h.scale = series / closed;
        Ok(h)
    }

    fn series<const N: usize>(&self, rho: Taylor<N>) -> Taylor<N> {
        let (s, l) = (self.sigma, self.ell as f64);
        let z = rho * rho;
        let x = rho.value() * rho.value();
        let mut power = rho.powi(self.ell as i32);
        let mut coeff = 1.0;
        let mut sum = power;
        let mut size = x.powf(l / 2.0);
        for k in 1..10_000 {
            let j = l + 2.0 * k as f64;
            coeff *= (s + j - 1.0) * (s + j) / ((j - l) * (j + l + 1.0));
            power = power * z;
            size *= x;
            sum = sum + power * coeff;
            if coeff * size < 1e-18 * sum.value().abs() {
                break;
            }
        }
        sum
    }

    fn closed<const N: usize>(&self, rho: Taylor<N>) -> Taylor<N> {
        let poly = |terms: &Terms| {
            terms.iter().fold(Taylor::constant(0.0), |acc, &((_, b), c)| {
                acc + rho.powi(b + self.ell as i32) * c
            })
        };
        let a = (1.0 - rho).powf(-self.sigma);
        let b = (1.0 + rho).powf(-self.sigma);
        (poly(&self.incoming) * a + poly(&self.outgoing) * b) * self.scale
    }

    pub fn eval<const N: usize>(&self, rho: Taylor<N>) -> Taylor<N> {
        if rho.value() <= MATCH_POINT {
            self.series(rho)
        } else {
            self.closed(rho)
        }
    }

    /// `lim_{ρ→1} (1 − ρ)^σ h(ρ)`.
    pub fn boundary_coefficient(&self) -> f64 {
        self.scale * self.incoming.iter().map(|t| t.1).sum::<f64>()
    }
}

/// Profile returned by the ball solvers: `u = (F/c)·h + smooth part`, where
/// `h` is the regular homogeneous solution with boundary coefficient `c`.
#[derive(Clone, Debug)]
pub struct BallSolution {
    pub sigma: f64,
    pub ell: usize,
    pub grid: BallGrid,
    /// Smooth part on the grid nodes.
    pub smooth: Vec<f64>,
    /// Power of `ρ` factored out of the smooth part.
    pub factor: usize,
    boundary: Option<(f64, HomogeneousSolution)>,
    /// 2-norm condition number of the collocation matrix.
    pub condition: f64,
}

impl BallSolution {
    pub fn eval(&self, rho: f64) -> f64 {
        let smooth = rho.powi(self.factor as i32) * self.grid.interpolate(&self.smooth, rho);
        match &self.boundary {
            Some((c, h)) => smooth + c * h.eval(Taylor::<1>::var(rho)).value(),
            None => smooth,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        self.grid.rho.iter().map(|&r| self.eval(r)).collect()
    }

    /// `lim_{ρ→1} (1 − ρ)^σ u`.
    pub fn boundary_value(&self) -> f64 {
        self.boundary.as_ref().map_or(0.0, |(c, h)| c * h.boundary_coefficient())
    }
}

const MAX_CONDITION: f64 = 1e13;

fn collocate(
    sigma: f64,
    grid: &BallGrid,
    ell: usize,
    factor: usize,
    rhs: &[f64],
) -> Result<(Vec<f64>, f64)> {
    let n = grid.len();
    let p = factor as f64;
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        let r = grid.rho[i];
        let (c0, c1, c2) = coefficients(sigma, ell, r);
        // u = ρ^p w: u' = ρ^p (w' + p w/ρ), u'' = ρ^p (w'' + 2p w'/ρ + p(p−1) w/ρ²)
        let k0 = c0 + c1 * p / r + c2 * p * (p - 1.0) / (r * r);
        let k1 = c1 + 2.0 * c2 * p / r;
        for j in 0..n {
            a[(i, j)] = -(k1 * grid.d1[(i, j)] + c2 * grid.d2[(i, j)]);
        }
        a[(i, i)] -= k0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let cond = sv.max() / sv.min();
    if !cond.is_finite() || cond > MAX_CONDITION {
        return Err(Error::Conditioning { what: format!("collocation for σ = {sigma}, ℓ = {ell}"), cond });
    }
    let b = DVector::from_iterator(n, rhs.iter().enumerate().map(|(i, v)| v / grid.rho[i].powi(factor as i32)));
    let w = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Conditioning { what: "singular collocation matrix".into(), cond })?;
    Ok((w.iter().copied().collect(), cond))
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::Parameter(format!("σ must be positive, got {sigma}")));
    }
    Ok(())
}

fn boundary_part(sigma: f64, ell: usize, boundary: f64) -> Result<Option<(f64, HomogeneousSolution)>> {
    if boundary == 0.0 {
        return Ok(None);
    }
    let h = HomogeneousSolution::new(sigma, ell)?;
    let c = boundary / h.boundary_coefficient();
    Ok(Some((c, h)))
}

/// Solves `N_σ u = f` with `((1 − ρ)^σ u)|_{ρ=1} = F`, `u ~ ρ^ℓ` at the
/// origin. `ρ^{1−ℓ} f` must stay bounded at the origin.
pub fn solve_ball(
    sigma: f64,
    grid: &BallGrid,
    f: &dyn Fn(f64) -> f64,
    boundary: f64,
    ell: usize,
) -> Result<BallSolution> {
    check_sigma(sigma)?;
    let bnd = boundary_part(sigma, ell, boundary)?;
    let (smooth, condition) = collocate(sigma, grid, ell, ell, &grid.sample(f))?;
    Ok(BallSolution { sigma, ell, grid: grid.clone(), smooth, factor: ell, boundary: bnd, condition })
}

/// Solves `N_σ u = f` on the punctured ball with `F = 0`, keeping the
/// admissible root `ρ⁰` at the puncture so forcings up to `ρ^{−2}` are
/// allowed for `ℓ ≥ 1`. For `ℓ = 0` the forcing must be `O(ρ^{−1})`.
pub fn solve_punctured(sigma: f64, grid: &BallGrid, f: &dyn Fn(f64) -> f64, ell: usize) -> Result<BallSolution> {
    check_sigma(sigma)?;
    let rhs = grid.sample(f);
    let (smooth, condition) = collocate(sigma, grid, ell, 0, &rhs)?;
    Ok(BallSolution { sigma, ell, grid: grid.clone(), smooth, factor: 0, boundary: None, condition })
}

/// Closed-form solution of `N_σ u = 1/ρ` for `ℓ = 0`:
/// `u = −(1 − (1+ρ)^{−σ})/(σ(1+σ)ρ)`.
pub fn explicit_inverse_profile<const N: usize>(sigma: f64, rho: Taylor<N>) -> Taylor<N> {
    (1.0 - (1.0 + rho).powf(-sigma)) / rho * (-1.0 / (sigma * (1.0 + sigma)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::gauss_legendre;

    fn explicit(sigma: f64, r: f64) -> f64 {
        explicit_inverse_profile(sigma, Taylor::<1>::var(r)).value()
    }

    #[test]
    fn homogeneous_branches_annihilated() {
        for &s in &[0.5, 1.0, 2.5, 3.7] {
            for &r in &[0.05, 0.3, 0.7, 0.95] {
                let a = normal_apply_jet(s, 0, |x| 1.0 / (x * (1.0 + x).powf(s)), r);
                let b = normal_apply_jet(s, 0, |x| 1.0 / (x * (1.0 - x).powf(s)), r);
                assert!(a.abs() < 1e-8 && b.abs() < 1e-8 * (1.0 - r).powf(-s - 2.0), "{s} {r}: {a} {b}");
            }
        }
    }

    #[test]
    fn explicit_profile_inverts_inverse_radius() {
        for &s in &[0.5, 1.0, 2.0] {
            for &r in &[0.01, 0.4, 0.9] {
                let v = normal_apply_jet(s, 0, |x| explicit_inverse_profile(s, x), r);
                assert!((v - 1.0 / r).abs() < 1e-9 / r, "{s} {r} {v}");
            }
        }
    }

    #[test]
    fn boosted_solutions_are_homogeneous() {
        for &s in &[0.5, 1.75, 2.5] {
            for ell in 0..3 {
                let h = HomogeneousSolution::new(s, ell).unwrap();
                for &r in &[0.3, 0.6, 0.9] {
                    let scale = h.eval(Taylor::<1>::var(r)).value().abs().max(1.0);
                    let v = normal_apply_jet(s, ell, |x| h.eval(x), r);
                    assert!(v.abs() < 1e-8 * scale * (1.0 - r).powi(-2), "{s} {ell} {r} {v}");
                }
            }
        }
        // 2^{−σ}Γ(ℓ+3/2)Γ(σ)/(Γ((σ+ℓ+1)/2)Γ((σ+ℓ+2)/2)), evaluated with mpmath
        for &(s, ell, c) in &[(1.75, 1, 0.311_688_311_688_311_7), (2.5, 2, 0.190_476_190_476_190_5), (0.5, 0, 1.0)] {
            let h = HomogeneousSolution::new(s, ell).unwrap();
            assert!((h.boundary_coefficient() - c).abs() < 1e-12, "{s} {ell}");
            let near = h.eval(Taylor::<1>::var(1.0 - 1e-7)).value() * 1e-7f64.powf(s);
            assert!((near - c).abs() < 10.0 * 1e-7f64.powf(s.min(1.0)), "{s} {ell} {near}");
            let x = Taylor::<3>::var(MATCH_POINT);
            let (a, b) = (h.series(x), h.closed(x));
            assert!((a.deriv(1) - b.deriv(1)).abs() < 1e-10 * a.deriv(1).abs());
        }
        assert!(HomogeneousSolution::new(1.0, 1).is_err());
    }

    #[test]
    fn ball_solve_recovers_explicit_profile() {
        let grid = BallGrid::new(40).unwrap();
        for &s in &[0.5, 1.0, 2.0] {
            let sol = solve_ball(s, &grid, &|r| 1.0 / r, 0.0, 0).unwrap();
            for &r in &[0.0, 0.1, 0.5, 0.99] {
                let exact = if r == 0.0 { -1.0 / (1.0 + s) } else { explicit(s, r) };
                assert!((sol.eval(r) - exact).abs() < 1e-10 * exact.abs(), "{s} {r}");
            }
        }
    }

    /// Variation of parameters with the homogeneous pair regular at the
    /// origin and at the boundary.
    fn green_oracle(s: f64, f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let y1 = |r: f64| {
            let t = Taylor::<2>::var(r);
            ((1.0 - t).powf(-s) - (1.0 + t).powf(-s)) / t
        };
        let y2 = |r: f64| {
            let t = Taylor::<2>::var(r);
            1.0 / (t * (1.0 + t).powf(s))
        };
        let kernel = |r: f64, which: usize| {
            let (a, b) = (y1(r), y2(r));
            let wr = a.value() * b.deriv(1) - a.deriv(1) * b.value();
            let lead = 1.0 - r * r;
            let y = if which == 1 { a.value() } else { b.value() };
            y * f(r) / (lead * wr)
        };
        let (z, w) = gauss_legendre(120);
        let quad = |lo: f64, hi: f64, which: usize| -> f64 {
            z.iter()
                .zip(&w)
                .map(|(z, w)| {
                    let r = lo + (hi - lo) * (z + 1.0) / 2.0;
                    w * (hi - lo) / 2.0 * kernel(r, which)
                })
                .sum()
        };
        y2(x).value() * quad(0.0, x, 1) + y1(x).value() * quad(x, 1.0, 2)
    }

    #[test]
    fn ball_solve_matches_green_convolution() {
        let grid = BallGrid::new(48).unwrap();
        for &s in &[0.5, 1.0, 2.5] {
            let f = |r: f64| (1.0 + r * r).recip() + r.cos();
            let sol = solve_ball(s, &grid, &f, 0.0, 0).unwrap();
            for &x in &[0.15, 0.5, 0.85] {
                let oracle = green_oracle(s, f, x);
                assert!((sol.eval(x) - oracle).abs() < 1e-7 * oracle.abs().max(1.0), "{s} {x}: {} vs {oracle}", sol.eval(x));
            }
        }
    }

    #[test]
    fn solve_then_apply_is_identity() {
        let grid = BallGrid::new(48).unwrap();
        for &s in &[0.5, 1.0, 2.5] {
            for ell in 0..3 {
                let f = |r: f64| r.powi(ell as i32) * (1.0 + r).exp();
                let sol = solve_ball(s, &grid, &f, 0.0, ell).unwrap();
                let back = normal_apply(s, &grid, &sol.values(), ell).unwrap();
                for (i, &r) in grid.rho.iter().enumerate() {
                    assert!((back[i] - f(r)).abs() < 1e-6 * f(r).abs().max(1.0), "{s} {ell} {r}");
                }
            }
        }
    }

    #[test]
    fn boundary_data_enters_with_incoming_rate() {
        let grid = BallGrid::new(48).unwrap();
        for ell in 0..3 {
            let sol = solve_ball(2.5, &grid, &|_| 0.0, 1.5, ell).unwrap();
            assert!((sol.boundary_value() - 1.5).abs() < 1e-12);
            let r = 1.0 - 1e-6;
            assert!((sol.eval(r) * (1.0 - r).powf(2.5) - 1.5).abs() < 1e-4, "{ell}");
            // the problem has no kernel, so the answer is the scaled regular homogeneous solution
            let h = HomogeneousSolution::new(2.5, ell).unwrap();
            for &x in &[0.1, 0.35, 0.7, 0.95] {
                let exact = 1.5 / h.boundary_coefficient() * h.eval(Taylor::<1>::var(x)).value();
                assert!((sol.eval(x) - exact).abs() < 1e-8 * exact.abs().max(1.0), "{ell} {x}: {} {exact}", sol.eval(x));
            }
        }
        assert!(solve_ball(1.0, &grid, &|_| 0.0, 1.0, 1).is_err());
    }

    #[test]
    fn zero_problem_gives_zero() {
        let grid = BallGrid::new(24).unwrap();
        let sol = solve_ball(1.0, &grid, &|_| 0.0, 0.0, 0).unwrap();
        assert!(sol.values().iter().all(|v| *v == 0.0));
        let p = solve_punctured(1.0, &grid, &|_| 0.0, 1).unwrap();
        assert!(p.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn punctured_dipole_forcing_has_nonzero_centre_value() {
        // near the puncture u'' + 2u'/ρ − 2u/ρ² = ρ^{−2} forces u(0) = −1/2
        let grid = BallGrid::new(48).unwrap();
        for &s in &[0.5, 2.0, 3.0] {
            let sol = solve_punctured(s, &grid, &|r| 1.0 / (r * r), 1).unwrap();
            assert!((sol.eval(0.0) + 0.5).abs() < 1e-8, "{s} {}", sol.eval(0.0));
        }
    }

    #[test]
    fn punctured_solve_is_linear() {
        let grid = BallGrid::new(40).unwrap();
        let f1 = |r: f64| 1.0 / (r * r);
        let f2 = |r: f64| r.sin() + 2.0;
        let a = solve_punctured(1.5, &grid, &f1, 1).unwrap();
        let b = solve_punctured(1.5, &grid, &f2, 1).unwrap();
        let c = solve_punctured(1.5, &grid, &|r| f1(r) + f2(r), 1).unwrap();
        for i in 0..grid.len() {
            assert!((c.smooth[i] - a.smooth[i] - b.smooth[i]).abs() < 1e-10 * c.smooth[i].abs().max(1.0));
        }
    }

    #[test]
    fn nonpositive_sigma_rejected() {
        let grid = BallGrid::new(8).unwrap();
        assert!(solve_ball(0.0, &grid, &|_| 1.0, 0.0, 0).is_err());
        assert!(BallGrid::new(2).is_err());
    }
}
