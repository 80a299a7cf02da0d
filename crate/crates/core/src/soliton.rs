//! The ground state soliton `W = (1 + r²/3)^{-1/2}` and related profiles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::taylor::Taylor;

pub const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Kelvin transform constants: `|x|⁻¹ W(x/|x|²) = KELVIN_C · W(KELVIN_LAMBDA · |x|)`.
pub const KELVIN_C: f64 = SQRT3;
pub const KELVIN_LAMBDA: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SolitonKind {
    W,
    /// `∂_r W`, also the radial part of the ℓ = 1 kernel element `∂_i W`.
    DW,
    /// `ΛW = (1/2 + r∂_r) W`.
    LambdaW,
    /// `V = 5W⁴`.
    V,
    /// `V⁽¹⁾ = W⁵`.
    V1,
    /// Radial profile of `∂_i W = W'(r) x̂_i`.
    KernelL1,
}

impl SolitonKind {
    pub const ALL: [SolitonKind; 6] = [
        SolitonKind::W,
        SolitonKind::DW,
        SolitonKind::LambdaW,
        SolitonKind::V,
        SolitonKind::V1,
        SolitonKind::KernelL1,
    ];
}

pub fn w(r: f64) -> f64 {
    1.0 / (1.0 + r * r / 3.0).sqrt()
}

pub fn dw(r: f64) -> f64 {
    -(r / 3.0) * w(r).powi(3)
}

pub fn ddw(r: f64) -> f64 {
    let w = w(r);
    -w.powi(3) / 3.0 + r * r / 3.0 * w.powi(5)
}

pub fn lambda_w(r: f64) -> f64 {
    let w = w(r);
    w * (w * w - 0.5)
}

pub fn dlambda_w(r: f64) -> f64 {
    let w = w(r);
    (3.0 * w * w - 0.5) * dw(r)
}

pub fn potential(r: f64) -> f64 {
    5.0 * w(r).powi(4)
}

/// `W` as a truncated Taylor series around `r`.
pub fn w_jet<const N: usize>(r: Taylor<N>) -> Taylor<N> {
    (r * r / 3.0 + 1.0).powf(-0.5)
}

pub fn eval_soliton(kind: SolitonKind, r: f64) -> Result<f64> {
    if !r.is_finite() || r < 0.0 {
        return Err(Error::Domain(format!("radius must be finite and nonnegative, got {r}")));
    }
    Ok(match kind {
        SolitonKind::W => w(r),
        SolitonKind::DW | SolitonKind::KernelL1 => dw(r),
        SolitonKind::LambdaW => lambda_w(r),
        SolitonKind::V => potential(r),
        SolitonKind::V1 => w(r).powi(5),
    })
}

/// `|(KW)(r) − c W(λ r)|` with `KW(x) = |x|⁻¹ W(x/|x|²)`.
pub fn kelvin_scaling_check(r: f64) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!("Kelvin check needs 0 < r < ∞, got {r}")));
    }
    let kw = w(1.0 / r) / r;
    Ok((kw - KELVIN_C * w(KELVIN_LAMBDA * r)).abs())
}

/// `(Δ_ℓ + 5W⁴) f` at `r` for `f` given as a closed form on Taylor jets.
pub fn linearized_residual(f: impl Fn(Taylor<3>) -> Taylor<3>, ell: usize, r: f64) -> f64 {
    let j = f(Taylor::<3>::var(r));
    let ll = (ell * (ell + 1)) as f64;
    j.deriv(2) + 2.0 / r * j.deriv(1) - ll / (r * r) * j.value() + potential(r) * j.value()
}

/// Residual of `(Δ + V)ΛW` at `r`.
pub fn lambda_w_residual(r: f64) -> f64 {
    linearized_residual(
        |t| {
            let w = w_jet(t);
            w * (w * w - 0.5)
        },
        0,
        r,
    )
}

/// Residual of `(Δ_{ℓ=1} + V) W'` at `r`.
pub fn kernel_l1_residual(r: f64) -> f64 {
    linearized_residual(|t| -(t / 3.0) * w_jet(t).powi(3), 1, r)
}

/// Positive radial solution of `Δu + u⁷ − u^q = 0` with `u'(0) = 0`.
#[derive(Clone, Debug)]
pub struct SupercriticalProfile {
    pub q: f64,
    pub grid: RadialGrid,
    pub values: Vec<f64>,
    pub u0: f64,
    /// `lim r u(r)`.
    pub tail_limit: f64,
    /// Maximum ODE residual over the integration meshes.
    pub residual: f64,
    core: Mesh,
    tail: Mesh,
}

#[derive(Clone, Debug)]
struct Mesh {
    x: Vec<f64>,
    y: Vec<f64>,
    dy: Vec<f64>,
}

impl Mesh {
    fn eval(&self, x: f64) -> f64 {
        let h = self.x[1] - self.x[0];
        let k = (((x - self.x[0]) / h).floor() as usize).min(self.x.len() - 2);
        let t = (x - self.x[k]) / h;
        let (y0, y1, d0, d1) = (self.y[k], self.y[k + 1], self.dy[k] * h, self.dy[k + 1] * h);
        let h00 = 2.0 * t.powi(3) - 3.0 * t * t + 1.0;
        let h10 = t.powi(3) - 2.0 * t * t + t;
        let h01 = -2.0 * t.powi(3) + 3.0 * t * t;
        let h11 = t.powi(3) - t * t;
        h00 * y0 + h10 * d0 + h01 * y1 + h11 * d1
    }
}

const CORE_STEP: f64 = 1e-3;
const MATCH_RADIUS: f64 = 20.0;
const CLASSIFY_RADIUS: f64 = 60.0;

fn rk4_radial(
    rhs: impl Fn(f64, f64, f64) -> f64,
    x0: f64,
    y0: f64,
    dy0: f64,
    h: f64,
    steps: usize,
    mut stop: impl FnMut(f64, f64, f64) -> bool,
) -> Mesh {
    let mut m = Mesh { x: vec![x0], y: vec![y0], dy: vec![dy0] };
    let (mut x, mut y, mut v) = (x0, y0, dy0);
    for _ in 0..steps {
        let k1y = v;
        let k1v = rhs(x, y, v);
        let k2y = v + 0.5 * h * k1v;
        let k2v = rhs(x + 0.5 * h, y + 0.5 * h * k1y, k2y);
        let k3y = v + 0.5 * h * k2v;
        let k3v = rhs(x + 0.5 * h, y + 0.5 * h * k2y, k3y);
        let k4y = v + h * k3v;
        let k4v = rhs(x + h, y + h * k3y, k4y);
        y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
        v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        x += h;
        m.x.push(x);
        m.y.push(y);
        m.dy.push(v);
        if stop(x, y, v) {
            break;
        }
    }
    m
}

fn shoot_core(q: f64, u0: f64, radius: f64, stop_on_cross: bool) -> Mesh {
    // series start avoids the 2u'/r singularity
    let h = CORE_STEP;
    let a = (u0.powf(q) - u0.powi(7)) / 6.0;
    let r0 = h;
    let steps = ((radius - r0) / h).round() as usize;
    let mut m = rk4_radial(
        |r, u, du| -2.0 * du / r - u.powi(7) + u.abs().powf(q) * u.signum(),
        r0,
        u0 + a * r0 * r0,
        2.0 * a * r0,
        h,
        steps,
        |_, u, _| stop_on_cross && u < 0.0,
    );
    m.x.insert(0, 0.0);
    m.y.insert(0, u0);
    m.dy.insert(0, 0.0);
    m
}

/// True if the solution from `u0` eventually turns negative.
fn crosses(q: f64, u0: f64) -> bool {
    let m = shoot_core(q, u0, CLASSIFY_RADIUS, true);
    let n = m.y.len() - 1;
    if m.y[n] < 0.0 {
        return true;
    }
    // (r u)' < 0 at the end signals the branch heading for a crossing
    m.y[n] + m.x[n] * m.dy[n] < 0.0
}

/// Tail in `s = 1/r` with `g = r u`: `g'' + 2g'/s = s^{q−5} g^q − s² g⁷`.
fn shoot_tail(q: f64, c: f64, s_end: f64) -> Mesh {
    let n = 4000;
    let h = s_end / n as f64;
    let s0 = h;
    let b = -c.powi(7) / 20.0;
    let mut m = rk4_radial(
        |s, g, dg| -2.0 * dg / s + s.powf(q - 5.0) * g.powf(q) - s * s * g.powi(7),
        s0,
        c + b * s0.powi(4),
        4.0 * b * s0.powi(3),
        h,
        n - 1,
        |_, _, _| false,
    );
    m.x.insert(0, 0.0);
    m.y.insert(0, c);
    m.dy.insert(0, 0.0);
    m
}

fn fd_residual(m: &Mesh, skip: usize, rhs: impl Fn(f64, f64, f64) -> f64) -> f64 {
    let h = m.x[1] - m.x[0];
    let mut worst = 0.0f64;
    for i in skip.max(2)..m.x.len() - 2 {
        let d2 = (-m.dy[i + 2] + 8.0 * m.dy[i + 1] - 8.0 * m.dy[i - 1] + m.dy[i - 2]) / (12.0 * h);
        worst = worst.max((d2 - rhs(m.x[i], m.y[i], m.dy[i])).abs());
    }
    worst
}

pub fn solve_ground_state(q: f64, grid: &RadialGrid, tol: f64) -> Result<SupercriticalProfile> {
    if !(q > 7.0) || !q.is_finite() {
        return Err(Error::Parameter(format!("exponent q must exceed 7, got {q}")));
    }
    if !(tol > 0.0) {
        return Err(Error::Parameter(format!("tolerance must be positive, got {tol}")));
    }
    // scan u(0) = 1 − 2^{-k} towards 1 until the branch flips
    let mut lo = None;
    let mut hi = None;
    let mut prev = 0.5;
    if !crosses(q, prev) {
        for k in 2..40 {
            let u0 = 1.0 - 0.5f64.powi(k);
            if crosses(q, u0) {
                lo = Some(prev);
                hi = Some(u0);
                break;
            }
            prev = u0;
        }
    }
    let (mut lo, mut hi) = match (lo, hi) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(Error::Solver(format!(
                "no shooting bracket found for u(0) in [0.5, {}]",
                1.0 - 0.5f64.powi(39)
            )))
        }
    };
    while hi - lo > 1e-15 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if crosses(q, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let u0 = 0.5 * (lo + hi);
    let core = shoot_core(q, u0, MATCH_RADIUS, false);
    let n = core.y.len() - 1;
    let (rm, um) = (core.x[n], core.y[n]);
    let sm = 1.0 / rm;

    // secant on the tail constant so that s g(s) matches u at the matching radius
    let mismatch = |c: f64| {
        let t = shoot_tail(q, c, sm);
        t.y[t.y.len() - 1] * sm - um
    };
    let mut c0 = rm * um;
    let mut c1 = c0 * 1.01;
    let mut f0 = mismatch(c0);
    let mut f1 = mismatch(c1);
    for _ in 0..60 {
        if (f1 - f0).abs() < 1e-300 || f1.abs() < 1e-15 {
            break;
        }
        let c2 = c1 - f1 * (c1 - c0) / (f1 - f0);
        c0 = c1;
        f0 = f1;
        c1 = c2;
        f1 = mismatch(c1);
    }
    let tail = shoot_tail(q, c1, sm);

    let core_res = fd_residual(&core, 10, |r, u, du| -2.0 * du / r - u.powi(7) + u.powf(q));
    let tail_res = fd_residual(&tail, 10, |s, g, dg| {
        -2.0 * dg / s + s.powf(q - 5.0) * g.powf(q) - s * s * g.powi(7)
    });
    // residual of the u-equation at the tail nodes: Δ_r u = s⁵ Δ_s g
    let residual = core_res.max(tail_res * sm.powi(5));

    let mut values = Vec::with_capacity(grid.len());
    for &r in &grid.r {
        let v = if !r.is_finite() {
            c1
        } else if r <= rm {
            core.eval(r)
        } else {
            tail.eval(1.0 / r) / r
        };
        values.push(v);
    }
    if values.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Solver("ground state profile not strictly positive".into()));
    }
    if residual > tol {
        return Err(Error::Solver(format!("ground state residual {residual:e} exceeds tolerance {tol:e}")));
    }
    Ok(SupercriticalProfile { q, grid: grid.clone(), values, u0, tail_limit: c1, residual, core, tail })
}

impl SupercriticalProfile {
    pub fn eval(&self, r: f64) -> f64 {
        let rm = self.core.x[self.core.x.len() - 1];
        if r <= rm {
            self.core.eval(r)
        } else {
            self.tail.eval(1.0 / r) / r
        }
    }

    /// `max_{m ≤ m_max} sup_{1 ≤ r ≤ r_max} |(r∂_r)^m u| · r`, sampled in `x = ln r`.
    pub fn conormal_bound(&self, m_max: usize, r_max: f64) -> f64 {
        let n = 4000;
        let xmax = r_max.ln();
        let h = xmax / n as f64;
        let pad = m_max + 1;
        let xs: Vec<f64> = (0..n + 1 + 2 * pad).map(|i| (i as f64 - pad as f64) * h).collect();
        let mut f: Vec<f64> = xs.iter().map(|&x| self.eval(x.exp())).collect();
        let mut worst = 0.0f64;
        for m in 0..=m_max {
            for (i, &x) in xs.iter().enumerate().skip(pad).take(n + 1) {
                worst = worst.max(f[i].abs() * x.exp());
            }
            if m < m_max {
                let mut g = vec![0.0; f.len()];
                for i in 1..f.len() - 1 {
                    g[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
                }
                f = g;
            }
        }
        worst
    }
}
