//! Radial grids, quadrature and per-mode field storage.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum GridKind {
    /// Nodes `r_i = R (i/(n-1))^p` on `[0, R]`.
    Finite { outer: f64, grading: f64 },
    /// Nodes uniform in `s = r/(L + r)`, the last node sitting at `r = ∞`.
    Compactified { scale: f64 },
}

/// Radial nodes together with weights for `∫ f r² dr`.
///
/// Every grid is parameterised by a uniform coordinate `x_i = i/(n-1)`;
/// for compactified grids `x = s` and `r = L s/(1-s)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialGrid {
    pub kind: GridKind,
    pub r: Vec<f64>,
    pub x: Vec<f64>,
    pub dr_dx: Vec<f64>,
    pub weights: Vec<f64>,
}

impl RadialGrid {
    pub fn finite(n: usize, outer: f64, grading: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::Parameter(format!("grid needs at least 3 nodes, got {n}")));
        }
        if !(outer > 0.0 && outer.is_finite()) || !(grading >= 1.0) {
            return Err(Error::Parameter(format!(
                "outer radius {outer} and grading {grading} must satisfy R > 0, p >= 1"
            )));
        }
        let x: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let r: Vec<f64> = x.iter().map(|&x| outer * x.powf(grading)).collect();
        let dr_dx = x
            .iter()
            .map(|&x| outer * grading * x.powf(grading - 1.0))
            .collect();
        let mut weights = vec![0.0; n];
        for i in 0..n - 1 {
            let (a, b) = (r[i], r[i + 1]);
            let i0 = (b.powi(3) - a.powi(3)) / 3.0;
            let i1 = (b.powi(4) - a.powi(4)) / 4.0;
            weights[i] += (b * i0 - i1) / (b - a);
            weights[i + 1] += (i1 - a * i0) / (b - a);
        }
        Ok(Self { kind: GridKind::Finite { outer, grading }, r, x, dr_dx, weights })
    }

    pub fn compactified(n: usize, scale: f64) -> Result<Self> {
        if n < 5 {
            return Err(Error::Parameter(format!("compactified grid needs at least 5 nodes, got {n}")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Parameter(format!("compactification scale {scale} must be positive")));
        }
        let h = 1.0 / (n - 1) as f64;
        let x: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
        let r: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, &s)| if i == n - 1 { f64::INFINITY } else { scale * s / (1.0 - s) })
            .collect();
        let dr_dx: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, &s)| if i == n - 1 { f64::INFINITY } else { scale / (1.0 - s).powi(2) })
            .collect();
        let mut weights = vec![0.0; n];
        for i in 1..n - 1 {
            weights[i] = h * r[i] * r[i] * dr_dx[i];
        }
        // the end value is replaced by linear extrapolation of the integrand
        weights[n - 2] *= 2.0;
        weights[n - 3] *= 0.5;
        Ok(Self { kind: GridKind::Compactified { scale }, r, x, dr_dx, weights })
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn is_compactified(&self) -> bool {
        matches!(self.kind, GridKind::Compactified { .. })
    }

    pub fn scale(&self) -> Option<f64> {
        match self.kind {
            GridKind::Compactified { scale } => Some(scale),
            GridKind::Finite { .. } => None,
        }
    }

    pub fn spacing(&self) -> f64 {
        self.x[1] - self.x[0]
    }

    /// Index of the last node at finite radius.
    pub fn last_finite(&self) -> usize {
        if self.is_compactified() {
            self.len() - 2
        } else {
            self.len() - 1
        }
    }

    /// Trapezoid rule for `∫ g dx` in the grid parameter. On compactified
    /// grids the value at the infinite node is extrapolated linearly.
    pub fn integrate_dx(&self, g: &[f64]) -> Result<f64> {
        check_len(self.len(), g.len())?;
        let n = self.len();
        let h = self.spacing();
        let mut s = 0.0;
        for i in 1..n - 1 {
            s += g[i];
        }
        let last = if self.is_compactified() { 2.0 * g[n - 2] - g[n - 3] } else { g[n - 1] };
        Ok(h * (s + 0.5 * (g[0] + last)))
    }

    /// Derivative with respect to the grid parameter (second order).
    pub fn deriv_x(&self, f: &[f64]) -> Vec<f64> {
        let n = f.len();
        let h = self.spacing();
        let mut d = vec![0.0; n];
        d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
        for i in 1..n - 1 {
            d[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
        }
        d[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
        d
    }

    /// `∂_r f`; zero at the infinite node.
    pub fn deriv_r(&self, f: &[f64]) -> Vec<f64> {
        let mut d = self.deriv_x(f);
        for (i, di) in d.iter_mut().enumerate() {
            *di = if self.dr_dx[i].is_finite() { *di / self.dr_dx[i] } else { 0.0 };
        }
        d
    }

    /// Samples `f(r)` at all finite nodes; the infinite node gets `at_infinity`.
    pub fn sample(&self, f: impl Fn(f64) -> f64, at_infinity: f64) -> Vec<f64> {
        self.r.iter().map(|&r| if r.is_finite() { f(r) } else { at_infinity }).collect()
    }

    /// A stable fingerprint of the node positions.
    pub fn fingerprint(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.len() * 8 + 16);
        match self.kind {
            GridKind::Finite { outer, grading } => {
                out.push(0);
                out.extend(outer.to_le_bytes());
                out.extend(grading.to_le_bytes());
            }
            GridKind::Compactified { scale } => {
                out.push(1);
                out.extend(scale.to_le_bytes());
            }
        }
        for r in &self.r {
            out.extend(r.to_le_bytes());
        }
        out
    }
}

/// `4π ∫ f r² dr` on the grid.
pub fn integrate(f: &[f64], grid: &RadialGrid) -> Result<f64> {
    check_len(grid.len(), f.len())?;
    Ok(4.0 * PI * f.iter().zip(&grid.weights).map(|(a, w)| a * w).sum::<f64>())
}

/// One spherical-harmonic component of a field on a hypersurface.
///
/// `m` indexes the real basis within degree `ell` (see [`crate::angular`]).
/// On compactified grids the entry at the infinite node holds the radiation
/// limits `lim rψ` and `lim r Tψ` instead of ψ and Tψ.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeField {
    pub ell: usize,
    pub m: usize,
    pub values: Vec<f64>,
    pub tvalues: Vec<f64>,
    pub slice_time: f64,
}

impl ModeField {
    pub fn new(ell: usize, m: usize, values: Vec<f64>, tvalues: Vec<f64>, slice_time: f64) -> Self {
        Self { ell, m, values, tvalues, slice_time }
    }

    pub fn zeros(ell: usize, m: usize, n: usize, slice_time: f64) -> Self {
        Self::new(ell, m, vec![0.0; n], vec![0.0; n], slice_time)
    }

    pub fn validate(&self, grid: &RadialGrid) -> Result<()> {
        check_len(grid.len(), self.values.len())?;
        check_len(grid.len(), self.tvalues.len())?;
        if self.m > 2 * self.ell {
            return Err(Error::Parameter(format!("component {} out of range for ell = {}", self.m, self.ell)));
        }
        if self.ell >= 1 && self.values[0].abs() > 1e-12 {
            return Err(Error::Domain(format!(
                "ell = {} field must vanish at the origin, found {}",
                self.ell, self.values[0]
            )));
        }
        Ok(())
    }

    /// `rψ` at every node (the stored limit at the infinite node).
    pub fn r_times(&self, grid: &RadialGrid) -> (Vec<f64>, Vec<f64>) {
        let n = grid.len();
        let mut phi = vec![0.0; n];
        let mut pi = vec![0.0; n];
        for i in 0..n {
            if grid.r[i].is_finite() {
                phi[i] = grid.r[i] * self.values[i];
                pi[i] = grid.r[i] * self.tvalues[i];
            } else {
                phi[i] = self.values[i];
                pi[i] = self.tvalues[i];
            }
        }
        (phi, pi)
    }

    /// Inverse of [`ModeField::r_times`].
    pub fn from_r_times(
        ell: usize,
        m: usize,
        grid: &RadialGrid,
        phi: &[f64],
        pi: &[f64],
        slice_time: f64,
    ) -> Self {
        let n = grid.len();
        let mut v = vec![0.0; n];
        let mut t = vec![0.0; n];
        for i in 1..n {
            if grid.r[i].is_finite() {
                v[i] = phi[i] / grid.r[i];
                t[i] = pi[i] / grid.r[i];
            } else {
                v[i] = phi[i];
                t[i] = pi[i];
            }
        }
        if ell == 0 {
            // ψ is even in r: extrapolate in r² from the first two nodes
            let (r1, r2) = (grid.r[1], grid.r[2]);
            let d = r2 * r2 - r1 * r1;
            v[0] = (v[1] * r2 * r2 - v[2] * r1 * r1) / d;
            t[0] = (t[1] * r2 * r2 - t[2] * r1 * r1) / d;
        }
        Self::new(ell, m, v, t, slice_time)
    }
}

/// `(∫ f² d³x) / (∫ r² |∇f|² d³x)` for a single mode.
///
/// The sharp constant of this weighted inequality in three dimensions is 4/9,
/// so the ratio also respects the classical bound 4.
pub fn hardy_check(f: &ModeField, grid: &RadialGrid) -> Result<f64> {
    let (num, _, grad_r2) = hardy_parts(f, grid)?;
    Ok(num / grad_r2)
}

/// `(∫ f²/r² d³x) / (∫ |∇f|² d³x)`, the classical Hardy quotient (supremum 4).
pub fn hardy_check_classical(f: &ModeField, grid: &RadialGrid) -> Result<f64> {
    check_len(grid.len(), f.values.len())?;
    let n = grid.len();
    let fr = grid.deriv_r(&f.values);
    let ll = (f.ell * (f.ell + 1)) as f64;
    let mut num = vec![0.0; n];
    let mut den = vec![0.0; n];
    for i in 1..n {
        let r = grid.r[i];
        if !r.is_finite() {
            continue;
        }
        num[i] = f.values[i].powi(2) / (r * r);
        den[i] = fr[i].powi(2) + ll * f.values[i].powi(2) / (r * r);
    }
    let num = integrate(&num, grid)?;
    let den = integrate(&den, grid)?;
    if den <= 0.0 {
        return Err(Error::UndefinedRatio("field has vanishing gradient".into()));
    }
    Ok(num / den)
}

fn hardy_parts(f: &ModeField, grid: &RadialGrid) -> Result<(f64, f64, f64)> {
    check_len(grid.len(), f.values.len())?;
    let n = grid.len();
    let scale = f.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Err(Error::UndefinedRatio("field is identically zero".into()));
    }
    if !grid.is_compactified() && f.values[n - 1].abs() > 1e-10 * scale {
        return Err(Error::Precondition("field must vanish at the outer boundary".into()));
    }
    let fr = grid.deriv_r(&f.values);
    let ll = (f.ell * (f.ell + 1)) as f64;
    let mut sq = vec![0.0; n];
    let mut grad = vec![0.0; n];
    let mut grad_r2 = vec![0.0; n];
    for i in 0..n {
        let r = grid.r[i];
        if !r.is_finite() {
            continue;
        }
        sq[i] = f.values[i].powi(2);
        let ang = if r > 0.0 { ll * f.values[i].powi(2) / (r * r) } else { 0.0 };
        grad[i] = fr[i].powi(2) + ang;
        grad_r2[i] = r * r * grad[i];
    }
    Ok((integrate(&sq, grid)?, integrate(&grad, grid)?, integrate(&grad_r2, grid)?))
}
