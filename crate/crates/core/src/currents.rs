//! Energy fluxes, zero-mode functionals and radiation traces on the slices
//! `Σ_τ`.
//!
//! Every quantity is evaluated mode by mode in the variables `φ = rψ` and
//! `Π = rTψ`, integrating in the grid parameter so the integrands stay
//! regular up to null infinity. The orientation is fixed by
//!
//! ```text
//! Θ[Z] = ∫_{Σ_τ} T⁽¹⁾(∂_t + H'∂_r, Z) d³x
//! ```
//!
//! for a vector field `Z`, which makes `Θ^mom[t∂ᵢW] = ∫(∂ᵢW)²`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::angular::norm_sq;
use crate::error::{check_len, Error, Result};
use crate::evolution::Trajectory;
use crate::foliation::{FoliationParams, Hypersurface};
use crate::grid::{GridKind, ModeField, RadialGrid};
use crate::soliton::{ddw, dlambda_w, dw, lambda_w, potential, w, SQRT3};
use crate::spectral::SpectralData;

/// Potential appearing in the energy current.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Potential {
    /// `w = 0`.
    Free,
    /// `w = V = 5W⁴`.
    Soliton,
}

impl Potential {
    fn at(self, r: f64) -> f64 {
        match self {
            Potential::Free => 0.0,
            Potential::Soliton => potential(r),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurrentKind {
    Energy(Potential),
    TwistedEnergy,
    BilinearTLambdaW,
    ThetaMom,
    ThetaCom,
    ThetaLambda,
    AlphaPlus,
    AlphaMinus,
    Master,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxReport {
    pub surface: Hypersurface,
    pub kind: CurrentKind,
    pub value: f64,
    /// Contribution of each `(ℓ, m)` component.
    pub modes: Vec<((usize, usize), f64)>,
}

impl FluxReport {
    fn from_modes(tau: f64, kind: CurrentKind, modes: Vec<((usize, usize), f64)>) -> Self {
        let value = modes.iter().map(|(_, v)| v).sum();
        Self { surface: Hypersurface::sigma(tau), kind, value, modes }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaVector {
    pub mom: [f64; 3],
    pub com: [f64; 3],
    pub lam: f64,
    pub tau: f64,
}

/// A functional split into its null-infinity term and the interior integral.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Split<T> {
    pub total: T,
    /// `None` when the slice does not reach null infinity; `total` is then
    /// the interior value alone.
    pub boundary: Option<T>,
    pub interior: T,
}

/// Pointwise geometry of a slice at the finite nodes.
struct Slice<'g> {
    grid: &'g RadialGrid,
    h: Vec<f64>,
    hp: Vec<f64>,
}

impl<'g> Slice<'g> {
    fn new(grid: &'g RadialGrid, fol: &FoliationParams) -> Self {
        let n = grid.len();
        let mut h = vec![0.0; n];
        let mut hp = vec![0.0; n];
        for i in 0..n {
            if grid.r[i].is_finite() {
                let (a, b, _) = fol.big_h(grid.r[i]);
                h[i] = a;
                hp[i] = b;
            } else {
                hp[i] = 1.0;
                h[i] = f64::INFINITY;
            }
        }
        Self { grid, h, hp }
    }

    /// `∫ g dr` where `g` is given at the finite nodes except the origin;
    /// the entries at `r = 0` and `r = ∞` are ignored.
    fn integrate_dr(&self, g: impl Fn(usize) -> f64) -> f64 {
        let grid = self.grid;
        let n = grid.len();
        let mut v = vec![0.0; n];
        for i in 1..=grid.last_finite() {
            v[i] = g(i) * grid.dr_dx[i];
        }
        if !grid.is_compactified() {
            v[n - 1] = g(n - 1) * grid.dr_dx[n - 1];
        }
        grid.integrate_dx(&v).expect("lengths agree")
    }

    /// `∫_{r ≥ r_min} g dr`, linearly interpolating the integrand at the cut.
    fn integrate_dr_from(&self, r_min: f64, g: impl Fn(usize) -> f64) -> f64 {
        let grid = self.grid;
        let n = grid.len();
        let xc = match grid.kind {
            GridKind::Compactified { scale } => r_min / (scale + r_min),
            GridKind::Finite { outer, grading } => (r_min / outer).max(0.0).powf(1.0 / grading),
        };
        if xc <= 0.0 {
            return self.integrate_dr(g);
        }
        if xc >= 1.0 {
            return 0.0;
        }
        let mut v = vec![0.0; n];
        for i in 1..=grid.last_finite() {
            v[i] = g(i) * grid.dr_dx[i];
        }
        v[n - 1] = if grid.is_compactified() { 2.0 * v[n - 2] - v[n - 3] } else { g(n - 1) * grid.dr_dx[n - 1] };
        let h = grid.spacing();
        let k = ((xc / h).floor() as usize).min(n - 2);
        let theta = xc / h - k as f64;
        let vc = v[k] * (1.0 - theta) + v[k + 1] * theta;
        let mut s = 0.5 * (vc + v[k + 1]) * h * (1.0 - theta);
        for i in k + 1..n - 1 {
            s += 0.5 * (v[i] + v[i + 1]) * h;
        }
        s
    }
}

/// `φ`, `Π`, `Xφ` for one mode.
struct Reduced {
    phi: Vec<f64>,
    pi: Vec<f64>,
    xphi: Vec<f64>,
}

fn reduce(field: &ModeField, grid: &RadialGrid) -> Reduced {
    let (phi, pi) = field.r_times(grid);
    let mut xphi = grid.deriv_x(&phi);
    for (x, d) in xphi.iter_mut().zip(&grid.dr_dx) {
        *x = if d.is_finite() && *d > 0.0 { *x / d } else { 0.0 };
    }
    Reduced { phi, pi, xphi }
}

fn check_fields(fields: &[ModeField], grid: &RadialGrid) -> Result<f64> {
    let tau = fields.first().map_or(0.0, |f| f.slice_time);
    for f in fields {
        f.validate(grid)?;
        if f.slice_time != tau {
            return Err(Error::Parameter(format!(
                "fields live on different slices ({} and {tau})",
                f.slice_time
            )));
        }
    }
    Ok(tau)
}

/// `½∫ (1−H'²)(Tψ)² + (Xψ)² + |∇̸ψ|²/r² − wψ²` over `Σ_τ`.
pub fn energy_flux(
    fields: &[ModeField],
    wpot: Potential,
    grid: &RadialGrid,
    fol: &FoliationParams,
) -> Result<FluxReport> {
    let tau = check_fields(fields, grid)?;
    let sl = Slice::new(grid, fol);
    let modes = fields
        .iter()
        .map(|f| {
            let z = reduce(f, grid);
            let ll = (f.ell * (f.ell + 1)) as f64;
            let v = sl.integrate_dr(|i| {
                let r = grid.r[i];
                let lapse = 1.0 - sl.hp[i] * sl.hp[i];
                let d = z.xphi[i] - z.phi[i] / r;
                lapse * z.pi[i].powi(2) + d * d + (ll / (r * r) - wpot.at(r)) * z.phi[i].powi(2)
            });
            ((f.ell, f.m), 0.5 * norm_sq(f.ell) * v)
        })
        .collect();
    Ok(FluxReport::from_modes(tau, CurrentKind::Energy(wpot), modes))
}

/// Twist weight `w' = −□β/β` for `β = ⟨r⟩⁻¹`.
pub fn twist_potential(r: f64) -> f64 {
    3.0 / (1.0 + r * r).powi(2)
}

/// Flux of the twisted current with `β = ⟨r⟩⁻¹` and no potential:
/// `½∫ (1−H'²)(Tψ)² + (X̃ψ)² + |∇̸ψ|²/r² + w'ψ²` with `X̃ = X + r/⟨r⟩²`.
pub fn twisted_energy_flux(fields: &[ModeField], grid: &RadialGrid, fol: &FoliationParams) -> Result<FluxReport> {
    let tau = check_fields(fields, grid)?;
    let sl = Slice::new(grid, fol);
    let modes = fields
        .iter()
        .map(|f| {
            let z = reduce(f, grid);
            let ll = (f.ell * (f.ell + 1)) as f64;
            let v = sl.integrate_dr(|i| {
                let r = grid.r[i];
                let lapse = 1.0 - sl.hp[i] * sl.hp[i];
                let d = z.xphi[i] - z.phi[i] / r + r * z.phi[i] / (1.0 + r * r);
                lapse * z.pi[i].powi(2) + d * d + (ll / (r * r) + twist_potential(r)) * z.phi[i].powi(2)
            });
            ((f.ell, f.m), 0.5 * norm_sq(f.ell) * v)
        })
        .collect();
    Ok(FluxReport::from_modes(tau, CurrentKind::TwistedEnergy, modes))
}

/// `∫_{Σ_τ} ψ²/⟨r⟩²`.
pub fn weighted_l2(fields: &[ModeField], grid: &RadialGrid) -> Result<f64> {
    check_fields(fields, grid)?;
    let sl = Slice { grid, h: Vec::new(), hp: Vec::new() };
    Ok(fields
        .iter()
        .map(|f| {
            let (phi, _) = f.r_times(grid);
            norm_sq(f.ell) * sl.integrate_dr(|i| phi[i].powi(2) / (1.0 + grid.r[i].powi(2)))
        })
        .sum())
}

fn l1_index(f: &ModeField) -> Option<usize> {
    (f.ell == 1).then_some(f.m)
}

/// Momentum content of the `ℓ = 1` components,
/// `(4π/3)∫ (1−H'²)W' rΠ + H'W'(rXφ + φ) + H'W⁵ rφ dr`.
pub fn theta_mom(fields: &[ModeField], grid: &RadialGrid, fol: &FoliationParams) -> Result<[f64; 3]> {
    check_fields(fields, grid)?;
    let sl = Slice::new(grid, fol);
    let mut out = [0.0; 3];
    for f in fields {
        let Some(m) = l1_index(f) else { continue };
        let z = reduce(f, grid);
        out[m] += norm_sq(1)
            * sl.integrate_dr(|i| {
                let r = grid.r[i];
                let hp = sl.hp[i];
                let wp = dw(r);
                (1.0 - hp * hp) * wp * r * z.pi[i]
                    + hp * wp * (r * z.xphi[i] + z.phi[i])
                    + hp * w(r).powi(5) * r * z.phi[i]
            });
    }
    Ok(out)
}

/// Center-of-mass content of the `ℓ = 1` components: the flux of the
/// boost current with the `τ∂ᵢ` part removed. The boundary term is
/// `−2√3 (4π/3) lim rψ`; the interior part is integrated by parts so its
/// weights decay like `r⁻³`.
pub fn theta_com(fields: &[ModeField], grid: &RadialGrid, fol: &FoliationParams) -> Result<Split<[f64; 3]>> {
    check_fields(fields, grid)?;
    let sl = Slice::new(grid, fol);
    let mut total = [0.0; 3];
    let mut interior = [0.0; 3];
    let mut boundary = [0.0; 3];
    let scri = grid.is_compactified();
    for f in fields {
        let Some(m) = l1_index(f) else { continue };
        let z = reduce(f, grid);
        let tot = sl.integrate_dr(|i| {
            let r = grid.r[i];
            let (h, hp) = (sl.h[i], sl.hp[i]);
            let wp = dw(r);
            wp * h * (1.0 - hp * hp) * r * z.pi[i]
                + wp * (r + h * hp) * (r * z.xphi[i] - z.phi[i])
                + (2.0 * h * hp * wp - r * (r - h * hp) * w(r).powi(5)) * z.phi[i]
        });
        let int = sl.integrate_dr(|i| {
            let r = grid.r[i];
            let (h, hp) = (sl.h[i], sl.hp[i]);
            let hpp = fol.big_h(r).2;
            let wp = dw(r);
            // X[W'(r² + rHH')]
            let dk = ddw(r) * (r * r + r * h * hp) + wp * (2.0 * r + h * hp + r * hp * hp + r * h * hpp);
            wp * h * (1.0 - hp * hp) * r * z.pi[i] - dk * z.phi[i] - wp * (r + h * hp) * z.phi[i]
                + (2.0 * h * hp * wp - r * (r - h * hp) * w(r).powi(5)) * z.phi[i]
        });
        total[m] += norm_sq(1) * tot;
        interior[m] += norm_sq(1) * int;
        if scri {
            boundary[m] += -2.0 * SQRT3 * norm_sq(1) * z.phi[grid.len() - 1];
        }
    }
    if scri {
        Ok(Split { total, boundary: Some(boundary), interior })
    } else {
        Ok(Split { total: interior, boundary: None, interior })
    }
}

/// Bilinear `V`-energy pairing of the `ℓ = 0` component with `tΛW`,
/// `∫ (1−H'²)TψΛW + Xψ X(HΛW) − VψHΛW`, the terms proportional to `τ`
/// integrating to zero.
pub fn bilinear_t_lambda_w(fields: &[ModeField], grid: &RadialGrid, fol: &FoliationParams) -> Result<f64> {
    check_fields(fields, grid)?;
    let sl = Slice::new(grid, fol);
    let mut out = 0.0;
    for f in fields.iter().filter(|f| f.ell == 0) {
        let z = reduce(f, grid);
        out += 4.0 * PI
            * sl.integrate_dr(|i| {
                let r = grid.r[i];
                let (h, hp) = (sl.h[i], sl.hp[i]);
                let lw = lambda_w(r);
                let g1 = hp * lw + h * dlambda_w(r);
                (1.0 - hp * hp) * r * lw * z.pi[i] + r * (z.xphi[i] - z.phi[i] / r) * g1
                    - r * potential(r) * h * lw * z.phi[i]
            });
    }
    Ok(out)
}

/// `√3 ∮ rψ` at null infinity for the `ℓ = 0` component.
pub fn lambda_boundary(fields: &[ModeField], grid: &RadialGrid) -> Result<f64> {
    if !grid.is_compactified() {
        return Err(Error::Unsupported("slice does not reach null infinity".into()));
    }
    let n = grid.len() - 1;
    Ok(fields.iter().filter(|f| f.ell == 0).map(|f| SQRT3 * 4.0 * PI * f.values[n]).sum())
}

/// Scale content: the `tΛW` pairing plus `√3∮rψ` at null infinity.
pub fn theta_lambda(fields: &[ModeField], grid: &RadialGrid, fol: &FoliationParams) -> Result<Split<f64>> {
    let interior = bilinear_t_lambda_w(fields, grid, fol)?;
    match lambda_boundary(fields, grid) {
        Ok(b) => Ok(Split { total: interior + b, boundary: Some(b), interior }),
        Err(_) => Ok(Split { total: interior, boundary: None, interior }),
    }
}

/// Change of the `tΛW` pairing between two slices due to radiation through
/// null infinity, `√3(∮rψ|_{τ₂} − ∮rψ|_{τ₁})`, for solutions of the
/// homogeneous linear equation. The conserved combination is therefore
/// `interior − boundary` of [`theta_lambda`].
pub fn lambda_radiation(phi_scri_1: f64, phi_scri_2: f64) -> f64 {
    SQRT3 * 4.0 * PI * (phi_scri_2 - phi_scri_1)
}

pub fn theta_vector(fields: &[ModeField], grid: &RadialGrid, fol: &FoliationParams) -> Result<ThetaVector> {
    let tau = check_fields(fields, grid)?;
    Ok(ThetaVector {
        mom: theta_mom(fields, grid, fol)?,
        com: theta_com(fields, grid, fol)?.total,
        lam: theta_lambda(fields, grid, fol)?.total,
        tau,
    })
}

/// Localized unstable-mode pairings with their error terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaPair {
    pub plus: f64,
    pub minus: f64,
    /// `∂_τα_± ∓ ℷα_±`, identical for both signs.
    pub err: f64,
}

/// `α_± = ∫ χ_{R₁} Y (Tψ ± ℷψ)` on the `ℓ = 0` component, and
/// `Err = ∫ (YΔχ + 2Y'χ')ψ − χYF`. The identity `∂_τα_± = ±ℷα_± + Err`
/// holds exactly while `χ_{R₁}` is supported in the flat part of the slice.
pub fn alpha_pm(
    fields: &[ModeField],
    spec: &SpectralData,
    grid: &RadialGrid,
    fol: &FoliationParams,
    forcing: Option<&dyn Fn(f64) -> f64>,
) -> Result<AlphaPair> {
    check_fields(fields, grid)?;
    let sl = Slice { grid, h: Vec::new(), hp: Vec::new() };
    let r1 = fol.r1;
    let lam = spec.lamed;
    let dy = |r: f64| {
        let e = 1e-4 * r.max(1.0);
        (spec.eval_y(r + e) - spec.eval_y((r - e).max(0.0))) / (r + e - (r - e).max(0.0))
    };
    let (mut plus, mut minus, mut err) = (0.0, 0.0, 0.0);
    for f in fields.iter().filter(|f| f.ell == 0) {
        let (phi, pi) = f.r_times(grid);
        let pair = |sign: f64| {
            sl.integrate_dr(|i| {
                let r = grid.r[i];
                let c = fol.chi_r(r, r1).0;
                c * spec.eval_y(r) * r * (pi[i] + sign * lam * phi[i])
            })
        };
        plus += 4.0 * PI * pair(1.0);
        minus += 4.0 * PI * pair(-1.0);
        err += 4.0 * PI
            * sl.integrate_dr(|i| {
                let r = grid.r[i];
                let (c, cp, cpp) = fol.chi_r(r, r1);
                let y = spec.eval_y(r);
                let lap_chi = cpp + 2.0 * cp / r;
                let mut v = (y * lap_chi + 2.0 * dy(r) * cp) * r * phi[i];
                if let Some(fc) = forcing {
                    v -= c * y * fc(r) * r * r;
                }
                v
            });
    }
    Ok(AlphaPair { plus, minus, err })
}

/// `lim r∂_uf` along `Σ_τ` for `f(t, r)`, with `∂_u = ∂_t − ∂_r`, by
/// Richardson extrapolation in `1/r`.
pub fn radiation_trace(f: impl Fn(f64, f64) -> f64, fol: &FoliationParams, tau: f64) -> f64 {
    let g = |r: f64| {
        let t = fol.time(tau, r);
        let e = 1e-3 * r;
        let ft = (f(t + e, r) - f(t - e, r)) / (2.0 * e);
        let fr = (f(t, r + e) - f(t, r - e)) / (2.0 * e);
        r * (ft - fr)
    };
    let base = 4.0 * fol.null_radius();
    let mut table: Vec<f64> = (0..5).map(|k| g(base * 2f64.powi(k))).collect();
    for level in 1..table.len() {
        let fac = 2f64.powi(level as i32);
        for k in (level..table.len()).rev() {
            table[k] = (fac * table[k] - table[k - 1]) / (fac - 1.0);
        }
    }
    *table.last().unwrap()
}

/// Boundary traces of a compactified run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiationField {
    pub modes: Vec<(usize, usize)>,
    pub tau: Vec<f64>,
    /// Retarded time `u = (t − r)/2` at null infinity.
    pub u: Vec<f64>,
    /// `∂_u^j (rψ)` for `j = 0..=k`, indexed `[j][step][mode]`.
    pub derivs: Vec<Vec<Vec<f64>>>,
    /// `|φ_N − φ_{N−1}|` at the final slice per mode, an estimate of the
    /// gap between the limit and the last finite node.
    pub truncation: Vec<f64>,
}

/// `∂_u^j(rψ)` at null infinity for `j ≤ k`. Orders above one are obtained
/// by differencing the stored `∂_u(rψ)` trace in `τ` (`∂_u = 2∂_τ` there).
pub fn radiation_field(traj: &Trajectory, k: usize) -> Result<RadiationField> {
    if !traj.grid.is_compactified() {
        return Err(Error::Unsupported("radiation field needs a compactified grid".into()));
    }
    let nt = traj.trace_tau.len();
    if k >= 2 && nt < 3 {
        return Err(Error::Order { requested: k, available: 1 });
    }
    let mut derivs = vec![traj.trace_phi.clone()];
    if k >= 1 {
        derivs.push(traj.trace_du.clone());
    }
    for _ in 2..=k {
        let prev = derivs.last().unwrap();
        let nm = prev[0].len();
        let mut next = vec![vec![0.0; nm]; nt];
        for j in 0..nm {
            let col: Vec<f64> = prev.iter().map(|row| row[j]).collect();
            let d = diff_nonuniform(&traj.trace_tau, &col);
            for (s, v) in d.into_iter().enumerate() {
                next[s][j] = 2.0 * v;
            }
        }
        derivs.push(next);
    }
    let last = traj.checkpoints.last().ok_or_else(|| Error::Precondition("empty trajectory".into()))?;
    let n = traj.grid.len() - 1;
    let truncation = last.phi.iter().map(|p| (p[n] - p[n - 1]).abs()).collect();
    Ok(RadiationField {
        modes: traj.modes.clone(),
        tau: traj.trace_tau.clone(),
        u: traj.trace_tau.iter().map(|&t| traj.fol.retarded_time(t, f64::INFINITY)).collect(),
        derivs,
        truncation,
    })
}

/// Second-order derivative of samples on a (possibly decreasing) grid.
fn diff_nonuniform(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut d = vec![0.0; n];
    let three = |i: usize, a: usize, b: usize, c: usize| {
        // derivative at x[i] of the parabola through a, b, c
        let (xa, xb, xc) = (x[a], x[b], x[c]);
        let t = x[i];
        y[a] * ((t - xb) + (t - xc)) / ((xa - xb) * (xa - xc))
            + y[b] * ((t - xa) + (t - xc)) / ((xb - xa) * (xb - xc))
            + y[c] * ((t - xa) + (t - xb)) / ((xc - xa) * (xc - xb))
    };
    d[0] = three(0, 0, 1, 2);
    for i in 1..n - 1 {
        d[i] = three(i, i - 1, i, i + 1);
    }
    d[n - 1] = three(n - 1, n - 3, n - 2, n - 1);
    d
}

/// `E⁰ + Ẽ⁰` of one slice.
pub fn master_flux(fields: &[ModeField], grid: &RadialGrid, fol: &FoliationParams) -> Result<f64> {
    Ok(energy_flux(fields, Potential::Free, grid, fol)?.value + twisted_energy_flux(fields, grid, fol)?.value)
}

/// `E⁰ + Ẽ⁰` restricted to the part `r ≥ r_min` of the slice.
pub fn master_flux_beyond(
    fields: &[ModeField],
    grid: &RadialGrid,
    fol: &FoliationParams,
    r_min: f64,
) -> Result<f64> {
    check_fields(fields, grid)?;
    let sl = Slice::new(grid, fol);
    Ok(fields
        .iter()
        .map(|f| {
            let z = reduce(f, grid);
            let ll = (f.ell * (f.ell + 1)) as f64;
            let v = sl.integrate_dr_from(r_min, |i| {
                let r = grid.r[i];
                let lapse = 1.0 - sl.hp[i] * sl.hp[i];
                let d = z.xphi[i] - z.phi[i] / r;
                let dt = d + r * z.phi[i] / (1.0 + r * r);
                let p2 = z.phi[i].powi(2);
                2.0 * lapse * z.pi[i].powi(2) + d * d + dt * dt + (2.0 * ll / (r * r) + twist_potential(r)) * p2
            });
            0.5 * norm_sq(f.ell) * v
        })
        .sum())
}

/// `X_k = Σ_{j<k} κ_j sup_τ τ^{2j} (E⁰ + Ẽ⁰)[T^jψ](τ)`, the commutators
/// restricted to powers of `T`.
///
/// `T^jψ` is obtained by differencing the checkpoints in `τ`, so at least
/// `k + 1` checkpoints are required for `k ≥ 2`. `kappa` holds one weight
/// per order.
pub fn master_norm(traj: &Trajectory, k: usize, kappa: &[f64]) -> Result<f64> {
    if k == 0 {
        return Ok(0.0);
    }
    check_len(k, kappa.len())?;
    let nc = traj.checkpoints.len();
    if k >= 2 && nc < k + 1 {
        return Err(Error::Order { requested: k, available: nc.saturating_sub(1) });
    }
    let taus = traj.taus();
    let grid = &traj.grid;
    // level j holds fields (φ, Π) of T^jψ at every checkpoint
    let mut level: Vec<Vec<(Vec<f64>, Vec<f64>)>> = traj
        .checkpoints
        .iter()
        .map(|st| st.phi.iter().cloned().zip(st.pi.iter().cloned()).collect())
        .collect();
    let mut total = 0.0;
    for j in 0..k {
        let mut best = 0.0f64;
        for (c, st) in level.iter().enumerate() {
            let fields: Vec<ModeField> = traj
                .modes
                .iter()
                .zip(st)
                .map(|(&(l, m), (p, q))| ModeField::from_r_times(l, m, grid, p, q, taus[c]))
                .collect();
            let f = master_flux(&fields, grid, &traj.fol)?;
            best = best.max(taus[c].abs().powi(2 * j as i32) * f);
        }
        total += kappa[j] * best;
        if j + 1 < k {
            // T(φ, Π) = (Π, TΠ); TΠ by differencing Π in τ
            let nm = traj.modes.len();
            let mut next: Vec<Vec<(Vec<f64>, Vec<f64>)>> = vec![Vec::with_capacity(nm); nc];
            for mode in 0..nm {
                let npts = grid.len();
                let mut tpi = vec![vec![0.0; npts]; nc];
                for node in 0..npts {
                    let col: Vec<f64> = level.iter().map(|s| s[mode].1[node]).collect();
                    for (c, v) in diff_nonuniform(&taus, &col).into_iter().enumerate() {
                        tpi[c][node] = v;
                    }
                }
                for c in 0..nc {
                    next[c].push((level[c][mode].1.clone(), tpi[c].clone()));
                }
            }
            level = next;
        }
    }
    Ok(total)
}

/// Slice data of standard exact solutions, as `ModeField`s on `Σ_τ`.
pub mod exact {
    use super::*;
    use crate::soliton::w;

    /// Static `ΛW` as the `ℓ = 0` component.
    pub fn lambda_w_field(grid: &RadialGrid, tau: f64) -> ModeField {
        let v = grid.sample(lambda_w, -0.5 * SQRT3);
        ModeField::new(0, 0, v, vec![0.0; grid.len()], tau)
    }

    /// Static `∂ᵢW` with `i = m` as an `ℓ = 1` component.
    pub fn dw_field(grid: &RadialGrid, m: usize, tau: f64) -> ModeField {
        let v = grid.sample(dw, 0.0);
        ModeField::new(1, m, v, vec![0.0; grid.len()], tau)
    }

    /// `t∂ᵢW` on `Σ_τ`.
    pub fn t_dw_field(grid: &RadialGrid, fol: &FoliationParams, m: usize, tau: f64) -> ModeField {
        let v = grid.sample(|r| fol.time(tau, r) * dw(r), -SQRT3);
        let t = grid.sample(dw, 0.0);
        ModeField::new(1, m, v, t, tau)
    }

    /// `(∫(∂ᵢW)²)`, the momentum of `t∂ᵢW`, by adaptive quadrature of
    /// `(4π/3)∫ r²W'²` after the substitution `r = tan θ`.
    pub fn momentum_constant() -> f64 {
        4.0 * PI / 3.0 * tan_quadrature(|r| r * r * dw(r).powi(2))
    }

    /// `(4π/3)∫ r³(W'W'' − W⁵W') dr`, the center-of-mass content of `∂ᵢW`.
    pub fn com_constant() -> f64 {
        4.0 * PI / 3.0 * tan_quadrature(|r| r.powi(3) * (dw(r) * ddw(r) - w(r).powi(5) * dw(r)))
    }

    /// `∫_0^∞ f` via `r = tan θ` and composite Gauss–Legendre.
    pub fn tan_quadrature(f: impl Fn(f64) -> f64) -> f64 {
        let (x, wts) = crate::linalg::gauss_legendre(20);
        let panels = 400;
        let h = 0.5 * PI / panels as f64;
        let mut s = 0.0;
        for p in 0..panels {
            let a = p as f64 * h;
            for (xi, wi) in x.iter().zip(&wts) {
                let th = a + 0.5 * h * (xi + 1.0);
                let c = th.cos();
                s += 0.5 * h * wi * f(th.tan()) / (c * c);
            }
        }
        s
    }
}
