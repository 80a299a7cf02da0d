//! The linearised operator `H = Δ + 5W⁴` per spherical-harmonic mode: the
//! unstable eigenpair `(ℷ, Y)`, kernel checks and coercivity constants.
//!
//! Discretisation: piecewise-linear finite elements for `u = rψ` with lumped
//! mass, Dirichlet conditions at `r = 0` and at the last finite node. In the
//! lumped inner product the operator is a symmetric tridiagonal matrix.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::grid::{integrate, ModeField, RadialGrid};
use crate::linalg::{dot, least_squares, tridiag_eigenvalue, tridiag_eigenvector, sturm_count};
use crate::soliton::{dw, lambda_w, potential};

/// Per-mode discrete operator.
#[derive(Clone, Debug)]
pub struct ModeOperator {
    pub ell: usize,
    /// Grid indices of the unknowns.
    pub nodes: Vec<usize>,
    pub r: Vec<f64>,
    pub mass: Vec<f64>,
    /// `∫ u_i' u_i'` and `∫ u_i' u_{i+1}'`.
    pub stiff_diag: Vec<f64>,
    pub stiff_off: Vec<f64>,
    /// `V − ℓ(ℓ+1)/r²` at the unknowns.
    pub potential: Vec<f64>,
    n_grid: usize,
}

pub fn build_mode_operator(ell: usize, grid: &RadialGrid) -> Result<ModeOperator> {
    let last = grid.last_finite();
    if last < 3 {
        return Err(Error::Parameter("grid too small for a mode operator".into()));
    }
    let nodes: Vec<usize> = (1..last).collect();
    let m = nodes.len();
    let r: Vec<f64> = nodes.iter().map(|&i| grid.r[i]).collect();
    let mut mass = vec![0.0; m];
    let mut stiff_diag = vec![0.0; m];
    let mut stiff_off = vec![0.0; m.saturating_sub(1)];
    for (k, &i) in nodes.iter().enumerate() {
        let hl = grid.r[i] - grid.r[i - 1];
        let hr = grid.r[i + 1] - grid.r[i];
        mass[k] = 0.5 * (hl + hr);
        stiff_diag[k] = 1.0 / hl + 1.0 / hr;
        if k + 1 < m {
            stiff_off[k] = -1.0 / hr;
        }
    }
    let ll = (ell * (ell + 1)) as f64;
    let potential = r.iter().map(|&r| potential(r) - ll / (r * r)).collect();
    Ok(ModeOperator { ell, nodes, r, mass, stiff_diag, stiff_off, potential, n_grid: grid.len() })
}

impl ModeOperator {
    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    /// Symmetric tridiagonal form `M^{-1/2}(−K + M·pot)M^{-1/2}`.
    pub fn symmetric(&self) -> (Vec<f64>, Vec<f64>) {
        let m = self.dim();
        let d = (0..m).map(|k| -self.stiff_diag[k] / self.mass[k] + self.potential[k]).collect();
        let e = (0..m - 1)
            .map(|k| -self.stiff_off[k] / (self.mass[k] * self.mass[k + 1]).sqrt())
            .collect();
        (d, e)
    }

    /// `Hψ` at the grid nodes (zero on the Dirichlet nodes).
    pub fn apply(&self, psi: &[f64]) -> Result<Vec<f64>> {
        crate::error::check_len(self.n_grid, psi.len())?;
        let m = self.dim();
        let u: Vec<f64> = (0..m).map(|k| self.r[k] * psi[self.nodes[k]]).collect();
        let mut out = vec![0.0; self.n_grid];
        for k in 0..m {
            let mut ku = self.stiff_diag[k] * u[k];
            if k > 0 {
                ku += self.stiff_off[k - 1] * u[k - 1];
            }
            if k + 1 < m {
                ku += self.stiff_off[k] * u[k + 1];
            }
            let hu = -ku / self.mass[k] + self.potential[k] * u[k];
            out[self.nodes[k]] = hu / self.r[k];
        }
        Ok(out)
    }

    /// Bilinear form `(Hf, g)` in the lumped `L²(r² dr)` product.
    pub fn bilinear(&self, f: &[f64], g: &[f64]) -> Result<f64> {
        let hf = self.apply(f)?;
        Ok((0..self.dim())
            .map(|k| self.mass[k] * self.r[k] * self.r[k] * hf[self.nodes[k]] * g[self.nodes[k]])
            .sum())
    }

    pub fn count_positive(&self) -> usize {
        let (d, e) = self.symmetric();
        self.dim() - sturm_count(&d, &e, 0.0)
    }

    /// The `k`-th largest eigenvalue and its eigenfunction `ψ` on the grid,
    /// normalised to `4π∫ψ² r² dr = 1` and positive near the origin.
    pub fn eigenpair_from_top(&self, k: usize) -> (f64, Vec<f64>) {
        let (d, e) = self.symmetric();
        let m = self.dim();
        let lam = tridiag_eigenvalue(&d, &e, m - 1 - k);
        let v = tridiag_eigenvector(&d, &e, lam);
        let sign = if v[0] < 0.0 { -1.0 } else { 1.0 };
        let norm = (4.0 * std::f64::consts::PI).sqrt();
        let mut psi = vec![0.0; self.n_grid];
        for j in 0..m {
            psi[self.nodes[j]] = sign * v[j] / (self.mass[j].sqrt() * self.r[j]) / norm;
        }
        if self.ell == 0 {
            let (r1, r2) = (self.r[0], self.r[1]);
            let (p1, p2) = (psi[self.nodes[0]], psi[self.nodes[1]]);
            psi[0] = (p1 * r2 * r2 - p2 * r1 * r1) / (r2 * r2 - r1 * r1);
        }
        (lam, psi)
    }

    /// Lumped `∫ f g r² dr` over the unknowns.
    pub fn pairing(&self, f: &[f64], g: &[f64]) -> f64 {
        (0..self.dim())
            .map(|k| self.mass[k] * self.r[k] * self.r[k] * f[self.nodes[k]] * g[self.nodes[k]])
            .sum()
    }
}

/// Result of the spectral analysis of the ℓ = 0 operator.
#[derive(Clone, Debug)]
pub struct SpectralData {
    pub lamed: f64,
    pub y: ModeField,
    /// Relative discrete residual `‖HY − ℷ²Y‖/‖Y‖`.
    pub residual: f64,
    /// Slope of `log|rY|` on the outer third of the grid.
    pub decay_slope: f64,
    pub kernel_lambda: Vec<f64>,
    pub kernel_l1: Vec<f64>,
    pub mu: Option<f64>,
    pub grid: RadialGrid,
}

pub fn unstable_eigenpair(grid: &RadialGrid, tol: f64) -> Result<SpectralData> {
    let op = build_mode_operator(0, grid)?;
    let npos = op.count_positive();
    if npos == 0 {
        return Err(Error::Spectral("no positive eigenvalue found; grid too coarse".into()));
    }
    if npos > 1 {
        return Err(Error::Spectral(format!("{npos} positive eigenvalues found; expected one")));
    }
    let (lam2, y) = op.eigenpair_from_top(0);
    let hy = op.apply(&y)?;
    let res: Vec<f64> = hy.iter().zip(&y).map(|(a, b)| a - lam2 * b).collect();
    let residual = (op.pairing(&res, &res) / op.pairing(&y, &y)).sqrt();
    if !(residual <= tol) {
        return Err(Error::Spectral(format!("eigen-residual {residual:e} above tolerance {tol:e}")));
    }
    let decay_slope = decay_fit(grid, &y)?;
    let kernel_lambda = grid.sample(lambda_w, 0.0);
    let kernel_l1 = grid.sample(dw, 0.0);
    Ok(SpectralData {
        lamed: lam2.sqrt(),
        y: ModeField::new(0, 0, y, vec![0.0; grid.len()], 0.0),
        residual,
        decay_slope,
        kernel_lambda,
        kernel_l1,
        mu: None,
        grid: grid.clone(),
    })
}

fn decay_fit(grid: &RadialGrid, y: &[f64]) -> Result<f64> {
    let rmax = grid.r[grid.last_finite()];
    let (a, b) = (2.0 * rmax / 3.0, rmax - 3.0);
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for (i, &r) in grid.r.iter().enumerate() {
        if r >= a && r <= b && y[i] != 0.0 {
            rows.push(vec![1.0, r]);
            rhs.push((r * y[i]).abs().ln());
        }
    }
    if rows.len() < 3 {
        return Err(Error::Spectral("too few nodes in the decay window".into()));
    }
    Ok(least_squares(&rows, &rhs)?.0[1])
}

impl SpectralData {
    /// `Y(r)` by cubic Hermite interpolation of `rY`; zero beyond the grid.
    pub fn eval_y(&self, r: f64) -> f64 {
        let g = &self.grid;
        let last = g.last_finite();
        if r <= 0.0 {
            return self.y.values[0];
        }
        if r >= g.r[last] {
            return 0.0;
        }
        let k = match g.r[..=last].binary_search_by(|x| x.partial_cmp(&r).unwrap()) {
            Ok(k) => return self.y.values[k],
            Err(k) => k - 1,
        };
        let u = |i: usize| g.r[i] * self.y.values[i];
        let slope = |i: usize| {
            if i == 0 {
                (u(1) - u(0)) / (g.r[1] - g.r[0])
            } else if i == last {
                (u(last) - u(last - 1)) / (g.r[last] - g.r[last - 1])
            } else {
                (u(i + 1) - u(i - 1)) / (g.r[i + 1] - g.r[i - 1])
            }
        };
        let h = g.r[k + 1] - g.r[k];
        let t = (r - g.r[k]) / h;
        let h00 = 2.0 * t.powi(3) - 3.0 * t * t + 1.0;
        let h10 = t.powi(3) - 2.0 * t * t + t;
        let h01 = -2.0 * t.powi(3) + 3.0 * t * t;
        let h11 = t.powi(3) - t * t;
        (h00 * u(k) + h10 * h * slope(k) + h01 * u(k + 1) + h11 * h * slope(k + 1)) / r
    }

    /// `4π ∫ Y² r² dr` with the grid quadrature.
    pub fn y_norm_sq(&self) -> Result<f64> {
        let sq: Vec<f64> = self.y.values.iter().map(|v| v * v).collect();
        integrate(&sq, &self.grid)
    }
}

/// Cosine between two profiles in the `V`-weighted product `∫ V f g r² dr`.
pub fn potential_cosine(grid: &RadialGrid, f: &[f64], g: &[f64]) -> f64 {
    let mut fg = 0.0;
    let mut ff = 0.0;
    let mut gg = 0.0;
    for i in 0..=grid.last_finite() {
        let w = grid.weights[i] * potential(grid.r[i]);
        fg += w * f[i] * g[i];
        ff += w * f[i] * f[i];
        gg += w * g[i] * g[i];
    }
    fg / (ff * gg).sqrt()
}

/// A linear functional `f ↦ ∫ f · profile r² dr` acting on one mode.
#[derive(Clone, Debug)]
pub struct Functional {
    pub name: String,
    pub ell: usize,
    pub profile: Vec<f64>,
}

impl Functional {
    pub fn new(name: &str, ell: usize, profile: Vec<f64>) -> Self {
        Self { name: name.to_string(), ell, profile }
    }
}

/// The detectors for `ΛW`, `∂_iW` and `Y` (optionally cut off at radius `cut`).
pub fn standard_functionals(
    spec: &SpectralData,
    grid: &RadialGrid,
    cut: Option<(&crate::foliation::FoliationParams, f64)>,
) -> Vec<Functional> {
    let y: Vec<f64> = grid
        .r
        .iter()
        .map(|&r| {
            let c = cut.map_or(1.0, |(f, radius)| f.chi_r(r, radius).0);
            if r.is_finite() {
                c * spec.eval_y(r)
            } else {
                0.0
            }
        })
        .collect();
    vec![
        Functional::new("LambdaW", 0, grid.sample(lambda_w, 0.0)),
        Functional::new("dW", 1, grid.sample(dw, 0.0)),
        Functional::new("Y", 0, y),
    ]
}

#[derive(Clone, Debug)]
pub struct CoercivityReport {
    pub mu: f64,
    /// `(ℓ, μ_ℓ)` for each examined mode.
    pub per_mode: Vec<(usize, f64)>,
}

impl CoercivityReport {
    pub fn ensure_positive(&self) -> Result<f64> {
        if self.mu > 0.0 {
            Ok(self.mu)
        } else {
            Err(Error::Precondition(format!(
                "quadratic form not coercive on the constrained space (mu = {:.4e})",
                self.mu
            )))
        }
    }
}

/// Smallest eigenvalue of the pencil `(Q, D)` restricted to `{x : Cx = 0}`.
pub fn constrained_min_eig(q: &DMatrix<f64>, d: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<f64> {
    let z = null_space(c)?;
    let qr = z.transpose() * q * &z;
    let dr = z.transpose() * d * &z;
    let chol = dr
        .cholesky()
        .ok_or_else(|| Error::Spectral("norm matrix not positive definite".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Spectral("singular Cholesky factor".into()))?;
    let s = &linv * qr * linv.transpose();
    let s = 0.5 * (&s + s.transpose());
    let eig = SymmetricEigen::new(s);
    Ok(eig.eigenvalues.min())
}

/// Basis of the null space of `c` (rows are constraints) by elimination with
/// complete pivoting.
fn null_space(c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (k, n) = c.shape();
    if k == 0 {
        return Ok(DMatrix::identity(n, n));
    }
    let mut a = c.clone();
    let mut pivots = Vec::with_capacity(k);
    let mut rows_used = vec![false; k];
    for _ in 0..k {
        let mut best = (0.0, 0, 0);
        for i in 0..k {
            if rows_used[i] {
                continue;
            }
            for j in 0..n {
                if !pivots.iter().any(|&(_, pj)| pj == j) && a[(i, j)].abs() > best.0 {
                    best = (a[(i, j)].abs(), i, j);
                }
            }
        }
        let (v, pi, pj) = best;
        if v == 0.0 {
            return Err(Error::Conditioning { what: "linearly dependent functionals".into(), cond: f64::INFINITY });
        }
        rows_used[pi] = true;
        let p = a[(pi, pj)];
        for i in 0..k {
            if i != pi {
                let f = a[(i, pj)] / p;
                if f != 0.0 {
                    for j in 0..n {
                        a[(i, j)] -= f * a[(pi, j)];
                    }
                }
            }
        }
        pivots.push((pi, pj));
    }
    let free: Vec<usize> = (0..n).filter(|j| !pivots.iter().any(|&(_, pj)| pj == *j)).collect();
    let mut z = DMatrix::zeros(n, free.len());
    for (col, &fj) in free.iter().enumerate() {
        z[(fj, col)] = 1.0;
        for &(pi, pj) in &pivots {
            z[(pj, col)] = -a[(pi, fj)] / a[(pi, pj)];
        }
    }
    Ok(z)
}

/// `μ = min_ℓ inf (−Hf, f)/‖∇f‖²` over fields annihilated by the functionals,
/// examined on the modes ℓ = 0, 1, 2.
pub fn coercivity_constant(functionals: &[Functional], grid: &RadialGrid) -> Result<CoercivityReport> {
    for f in functionals {
        crate::error::check_len(grid.len(), f.profile.len())?;
    }
    let mut per_mode = Vec::new();
    for ell in 0..=2 {
        let op = build_mode_operator(ell, grid)?;
        let m = op.dim();
        let ll = (ell * (ell + 1)) as f64;
        let mut q = DMatrix::zeros(m, m);
        let mut d = DMatrix::zeros(m, m);
        for k in 0..m {
            let ang = op.mass[k] * ll / (op.r[k] * op.r[k]);
            d[(k, k)] = op.stiff_diag[k] + ang;
            q[(k, k)] = op.stiff_diag[k] - op.mass[k] * op.potential[k];
            if k + 1 < m {
                d[(k, k + 1)] = op.stiff_off[k];
                d[(k + 1, k)] = op.stiff_off[k];
                q[(k, k + 1)] = op.stiff_off[k];
                q[(k + 1, k)] = op.stiff_off[k];
            }
        }
        let rows: Vec<&Functional> = functionals.iter().filter(|f| f.ell == ell).collect();
        let mut c = DMatrix::zeros(rows.len(), m);
        for (i, f) in rows.iter().enumerate() {
            for k in 0..m {
                c[(i, k)] = op.mass[k] * op.r[k] * f.profile[op.nodes[k]];
            }
        }
        per_mode.push((ell, constrained_min_eig(&q, &d, &c)?));
    }
    let mu = per_mode.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    Ok(CoercivityReport { mu, per_mode })
}

/// Best constants of the two norm equivalences for a positive semidefinite
/// form `A` with kernel `v0` and a functional `θ`:
/// `c1 = min A` on `ker θ`, `c2 = min A` on `v0^⊥`, and `c_θ = |θ(v0)|/‖θ‖`.
pub fn hilbert_constants(a: &DMatrix<f64>, v0: &[f64], theta: &[f64]) -> Result<(f64, f64, f64)> {
    let n = a.nrows();
    let id = DMatrix::identity(n, n);
    let c1 = constrained_min_eig(a, &id, &DMatrix::from_row_slice(1, n, theta))?;
    let c2 = constrained_min_eig(a, &id, &DMatrix::from_row_slice(1, n, v0))?;
    let c_theta = dot(theta, v0).abs() / dot(theta, theta).sqrt() / dot(v0, v0).sqrt();
    Ok((c1, c2, c_theta))
}
