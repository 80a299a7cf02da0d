//! Mode-by-mode evolution of `(□ + V)ψ = F` on the hyperboloidal slices.
//!
//! The unknowns are `φ = rψ` and `Π = Tφ` on a grid uniform in
//! `s = r/(L + r)`, so future null infinity is the node `s = 1`. With
//! `X = ∂_r|_τ` and `H(r) = h(r − R₂)` the equation reads
//!
//! ```text
//! (1 − H'²) TΠ + 2H' XΠ + H'' Π = X²φ + (V − ℓ(ℓ+1)/r²) φ − rF
//! ```
//!
//! which degenerates to a transport constraint for `Π` where `H' = 1`. Rows
//! are divided by `ds/dr` so the system stays regular up to `s = 1`. Time
//! stepping is the two-stage, stiffly accurate SDIRK method, which treats the
//! degenerate rows as algebraic constraints.

use std::collections::HashMap;

use crate::angular::ModeProjector;
use crate::error::{check_len, Error, Result};
use crate::foliation::FoliationParams;
use crate::grid::{ModeField, RadialGrid};
use crate::linalg::{BandLu, BandMatrix};
use crate::soliton::{potential, w};
use crate::taylor::Taylor;

const GAMMA: f64 = 1.0 - std::f64::consts::FRAC_1_SQRT_2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

/// `N[ψ] = (W + ψ)⁵ − W⁵ − 5W⁴ψ`.
pub fn nonlinearity(psi: f64, r: f64) -> f64 {
    nonlinearity_w(psi, w(r))
}

pub fn nonlinearity_w(psi: f64, w: f64) -> f64 {
    let p2 = psi * psi;
    p2 * (10.0 * w * w * w + psi * (10.0 * w * w + psi * (5.0 * w + psi)))
}

#[derive(Clone, Debug)]
pub struct EvolutionConfig {
    /// Number of cells in `s`; the grid has `n + 1` nodes.
    pub n: usize,
    pub scale: f64,
    pub dtau: f64,
    pub modes: Vec<(usize, usize)>,
    pub nonlinear: bool,
    /// Largest tolerated growth of the sup norm in one step, measured
    /// against `max(previous norm, growth_floor)`.
    pub growth_limit: f64,
    pub growth_floor: f64,
    /// Store a checkpoint every this many steps.
    pub checkpoint_every: usize,
    pub fixed_point_tol: f64,
}

impl EvolutionConfig {
    pub fn linear(n: usize, scale: f64, dtau: f64, modes: &[(usize, usize)]) -> Self {
        Self {
            n,
            scale,
            dtau,
            modes: modes.to_vec(),
            nonlinear: false,
            growth_limit: 50.0,
            growth_floor: 1e-8,
            checkpoint_every: 1,
            fixed_point_tol: 1e-13,
        }
    }
}

/// External forcing `F(mode, τ, r)` in `(□ + V)ψ = F`; it must decay like
/// `r⁻³` so that `rF/(ds/dr)` has a limit at null infinity.
pub type Forcing = dyn Fn(usize, f64, f64) -> f64 + Send + Sync;
/// Incoming radiation datum `∂_u(rψ)` at null infinity, per mode and slice time.
pub type ScriData = dyn Fn(usize, f64) -> f64 + Send + Sync;

#[derive(Clone, Debug)]
struct NodeCoef {
    s: f64,
    r: f64,
    sp: f64,
    spp_over_sp: f64,
    hp: f64,
    hpp: f64,
    /// `(1 − H'²)/s'`
    lapse: f64,
    v_over_sp: f64,
    w: f64,
}

/// State on one slice: `φ` and `Π` per mode at the `n + 1` nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionState {
    pub tau: f64,
    pub phi: Vec<Vec<f64>>,
    pub pi: Vec<Vec<f64>>,
}

impl EvolutionState {
    pub fn sup_norm(&self) -> f64 {
        self.phi
            .iter()
            .chain(&self.pi)
            .flat_map(|v| v.iter())
            .fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

/// An eigenmode of the semi-discrete operator `B dY/dτ = A Y` of one `ℓ`.
#[derive(Clone, Debug)]
pub struct DiscreteMode {
    pub ell: usize,
    pub dir: Direction,
    /// The eigenvalue `λ`; the mode evolves like `e^{λτ}`.
    pub rate: f64,
    pub phi: Vec<f64>,
    pub pi: Vec<f64>,
    /// Left eigenvector scaled so that `uᵀ B v = 1`.
    left: Vec<f64>,
    mass: Vec<f64>,
}

/// Stored run: checkpoints plus per-step boundary traces at null infinity.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub grid: RadialGrid,
    pub fol: FoliationParams,
    pub modes: Vec<(usize, usize)>,
    pub checkpoints: Vec<EvolutionState>,
    /// Slice times of the traces.
    pub trace_tau: Vec<f64>,
    /// `rψ` at null infinity per step and mode.
    pub trace_phi: Vec<Vec<f64>>,
    /// `∂_u(rψ) = 2Π` at null infinity per step and mode.
    pub trace_du: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn fields(&self, k: usize) -> Vec<ModeField> {
        to_fields(&self.grid, &self.modes, &self.checkpoints[k])
    }

    pub fn taus(&self) -> Vec<f64> {
        self.checkpoints.iter().map(|s| s.tau).collect()
    }
}

pub fn to_fields(grid: &RadialGrid, modes: &[(usize, usize)], st: &EvolutionState) -> Vec<ModeField> {
    modes
        .iter()
        .enumerate()
        .map(|(k, &(l, m))| ModeField::from_r_times(l, m, grid, &st.phi[k], &st.pi[k], st.tau))
        .collect()
}

pub struct Evolver<'a> {
    pub grid: RadialGrid,
    pub fol: FoliationParams,
    pub cfg: EvolutionConfig,
    coef: Vec<NodeCoef>,
    projector: Option<ModeProjector>,
    forcing: Option<&'a Forcing>,
    data: Option<&'a ScriData>,
    /// Nonlinearity switched off smoothly inside `v < cut` (exterior runs).
    nl_cut: Option<(f64, f64)>,
    ops: HashMap<(usize, Direction), BandMatrix>,
    lus: HashMap<(usize, Direction, u64), BandLu>,
}

impl<'a> Evolver<'a> {
    pub fn new(fol: &FoliationParams, cfg: EvolutionConfig) -> Result<Self> {
        if cfg.n < 8 {
            return Err(Error::Parameter(format!("need at least 8 cells, got {}", cfg.n)));
        }
        if !(cfg.dtau > 0.0) {
            return Err(Error::Parameter(format!("time step must be positive, got {}", cfg.dtau)));
        }
        if cfg.modes.is_empty() {
            return Err(Error::Parameter("no modes requested".into()));
        }
        for &(l, m) in &cfg.modes {
            if l > 2 || m > 2 * l {
                return Err(Error::Unsupported(format!("mode ({l}, {m}) outside ℓ ≤ 2")));
            }
        }
        let grid = RadialGrid::compactified(cfg.n + 1, cfg.scale)?;
        let l = cfg.scale;
        let coef = (0..=cfg.n)
            .map(|j| {
                let s = grid.x[j];
                let r = grid.r[j];
                let sp = (1.0 - s).powi(2) / l;
                let (hp, hpp) = if r.is_finite() {
                    let (_, a, b) = fol.big_h(r);
                    (a, b)
                } else {
                    (1.0, 0.0)
                };
                let lapse = if j == 0 || !r.is_finite() { 0.0 } else { (1.0 - hp * hp) / sp };
                let v_over_sp = if r.is_finite() { potential(r) / sp } else { 0.0 };
                NodeCoef {
                    s,
                    r,
                    sp,
                    spp_over_sp: -2.0 * (1.0 - s) / l,
                    hp,
                    hpp,
                    lapse,
                    v_over_sp,
                    w: if r.is_finite() { w(r) } else { 0.0 },
                }
            })
            .collect();
        let only_radial = cfg.modes.iter().all(|&(l, _)| l == 0);
        let projector = if cfg.nonlinear && !only_radial { Some(ModeProjector::new(&cfg.modes)) } else { None };
        Ok(Self {
            grid,
            fol: fol.clone(),
            cfg,
            coef,
            projector,
            forcing: None,
            data: None,
            nl_cut: None,
            ops: HashMap::new(),
            lus: HashMap::new(),
        })
    }

    pub fn with_forcing(mut self, f: &'a Forcing) -> Self {
        self.forcing = Some(f);
        self
    }

    pub fn with_scri_data(mut self, d: &'a ScriData) -> Self {
        self.data = Some(d);
        self
    }

    /// Multiplies the nonlinearity by a smooth switch that vanishes for
    /// `v = (t + r)/2 < cut − width` and is one for `v > cut`.
    pub fn with_nonlinear_cut(mut self, cut: f64, width: f64) -> Self {
        self.nl_cut = Some((cut, width));
        self
    }

    fn n_unknowns(&self) -> usize {
        2 * self.cfg.n
    }

    fn assemble(&self, ell: usize, dir: Direction) -> BandMatrix {
        let n = self.cfg.n;
        let h = 1.0 / n as f64;
        let mut a = BandMatrix::zeros(2 * n, 4, 4);
        let ll = (ell * (ell + 1)) as f64;
        let l = self.cfg.scale;
        let phi = |j: usize| 2 * (j - 1);
        let pi = |j: usize| 2 * (j - 1) + 1;
        for j in 1..=n {
            a.add(phi(j), pi(j), 1.0);
            let row = pi(j);
            if j == n {
                match dir {
                    Direction::Forward => {
                        // 2 ∂_s Π = −ℓ(ℓ+1)φ/L − rF/s'
                        a.add(row, pi(n), -3.0 / h);
                        a.add(row, pi(n - 1), 4.0 / h);
                        a.add(row, pi(n - 2), -1.0 / h);
                        a.add(row, phi(n), -ll / l);
                    }
                    Direction::Backward => a.add(row, pi(n), -1.0),
                }
                continue;
            }
            let c = &self.coef[j];
            let pot = c.v_over_sp - ll / (l * c.s * c.s);
            a.add(row, phi(j), -2.0 * c.sp / (h * h) + pot);
            a.add(row, phi(j + 1), c.sp / (h * h) + c.spp_over_sp / (2.0 * h));
            if j > 1 {
                a.add(row, phi(j - 1), c.sp / (h * h) - c.spp_over_sp / (2.0 * h));
            }
            a.add(row, pi(j), -c.hpp / c.sp);
            if c.hp != 0.0 {
                let k = -2.0 * c.hp / (2.0 * h);
                match dir {
                    Direction::Forward => {
                        a.add(row, pi(j), 3.0 * k);
                        a.add(row, pi(j - 1), -4.0 * k);
                        a.add(row, pi(j - 2), k);
                    }
                    Direction::Backward if j + 2 <= n => {
                        a.add(row, pi(j), -3.0 * k);
                        a.add(row, pi(j + 1), 4.0 * k);
                        a.add(row, pi(j + 2), -k);
                    }
                    Direction::Backward => {
                        a.add(row, pi(j + 1), k);
                        a.add(row, pi(j - 1), -k);
                    }
                }
            }
        }
        a
    }

    fn mass(&self, idx: usize) -> f64 {
        if idx.is_multiple_of(2) {
            1.0
        } else {
            self.coef[idx / 2 + 1].lapse
        }
    }

    fn prepare(&mut self, ell: usize, dir: Direction, dt: f64) -> Result<()> {
        if !self.ops.contains_key(&(ell, dir)) {
            let a = self.assemble(ell, dir);
            self.ops.insert((ell, dir), a);
        }
        let key = (ell, dir, dt.to_bits());
        if !self.lus.contains_key(&key) {
            let a = &self.ops[&(ell, dir)];
            let mut m = BandMatrix::zeros(self.n_unknowns(), 4, 4);
            for i in 0..self.n_unknowns() {
                m.add(i, i, self.mass(i));
            }
            let m = m.axpy(-GAMMA * dt, a);
            self.lus.insert(key, m.factor()?);
        }
        Ok(())
    }

    fn pack(&self, phi: &[f64], pi: &[f64]) -> Vec<f64> {
        let n = self.cfg.n;
        let mut y = vec![0.0; 2 * n];
        for j in 1..=n {
            y[2 * (j - 1)] = phi[j];
            y[2 * (j - 1) + 1] = pi[j];
        }
        y
    }

    fn unpack(&self, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.cfg.n;
        let mut phi = vec![0.0; n + 1];
        let mut pi = vec![0.0; n + 1];
        for j in 1..=n {
            phi[j] = y[2 * (j - 1)];
            pi[j] = y[2 * (j - 1) + 1];
        }
        (phi, pi)
    }

    /// Inhomogeneous part of the Π rows at slice time `tau`.
    fn source(&self, mode: usize, tau: f64, dir: Direction, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let n = self.cfg.n;
        if let Some(f) = self.forcing {
            let mut vals = vec![0.0; n + 1];
            for j in 1..n {
                let c = &self.coef[j];
                vals[j] = -c.r * f(mode, tau, c.r) / c.sp;
                out[2 * (j - 1) + 1] = vals[j];
            }
            if dir == Direction::Forward {
                out[2 * (n - 1) + 1] = 3.0 * vals[n - 1] - 3.0 * vals[n - 2] + vals[n - 3];
            }
        }
        if dir == Direction::Backward {
            let d = self.data.map_or(0.0, |d| d(mode, tau));
            out[2 * (n - 1) + 1] = 0.5 * d;
        }
    }

    /// `r N[ψ]/s'` projected onto the evolved modes, added to the Π rows.
    fn add_nonlinear(&self, tau: f64, ys: &[Vec<f64>], out: &mut [Vec<f64>]) {
        let n = self.cfg.n;
        let cut = |c: &NodeCoef| -> f64 {
            match self.nl_cut {
                None => 1.0,
                Some((d, width)) => {
                    let v = 0.5 * (self.fol.time(tau, c.r) + c.r);
                    let z = ((v - (d - width)) / width).clamp(0.0, 1.0);
                    z * z * z * (10.0 - 15.0 * z + 6.0 * z * z)
                }
            }
        };
        match &self.projector {
            None => {
                for j in 1..n {
                    let c = &self.coef[j];
                    let psi = ys[0][2 * (j - 1)] / c.r;
                    out[0][2 * (j - 1) + 1] += cut(c) * c.r * nonlinearity_w(psi, c.w) / c.sp;
                }
            }
            Some(p) => {
                let nm = self.cfg.modes.len();
                let mut coeffs = vec![0.0; nm];
                let mut vals = vec![0.0; p.n_points()];
                let mut proj = vec![0.0; nm];
                for j in 1..n {
                    let c = &self.coef[j];
                    for k in 0..nm {
                        coeffs[k] = ys[k][2 * (j - 1)] / c.r;
                    }
                    if coeffs.iter().all(|&x| x == 0.0) {
                        continue;
                    }
                    p.synthesize(&coeffs, &mut vals);
                    vals.iter_mut().for_each(|v| *v = nonlinearity_w(*v, c.w));
                    p.project(&vals, &mut proj);
                    let f = cut(c) * c.r / c.sp;
                    for k in 0..nm {
                        out[k][2 * (j - 1) + 1] += f * proj[k];
                    }
                }
            }
        }
    }

    pub fn state_from_fields(&self, fields: &[ModeField]) -> Result<EvolutionState> {
        check_len(self.cfg.modes.len(), fields.len())?;
        let mut phi = Vec::new();
        let mut pi = Vec::new();
        let mut tau = None;
        for (f, &(l, m)) in fields.iter().zip(&self.cfg.modes) {
            check_len(self.grid.len(), f.values.len())?;
            if (f.ell, f.m) != (l, m) {
                return Err(Error::Parameter(format!("field ({}, {}) does not match mode ({l}, {m})", f.ell, f.m)));
            }
            let (a, b) = f.r_times(&self.grid);
            phi.push(a);
            pi.push(b);
            tau = Some(f.slice_time);
        }
        Ok(EvolutionState { tau: tau.unwrap_or(0.0), phi, pi })
    }

    pub fn fields(&self, st: &EvolutionState) -> Vec<ModeField> {
        to_fields(&self.grid, &self.cfg.modes, st)
    }

    /// Replaces `Π` on the degenerate rows (where `1 − H'² = 0`, including
    /// null infinity) by the values the constraint implies for the given `φ`.
    pub fn make_consistent(&mut self, st: &mut EvolutionState, dir: Direction) -> Result<()> {
        let n = self.cfg.n;
        let rows: Vec<usize> = (1..=n).filter(|&j| self.coef[j].lapse == 0.0).collect();
        if rows.is_empty() {
            return Ok(());
        }
        let j0 = rows[0];
        if rows.len() != n - j0 + 1 {
            return Err(Error::Precondition("degenerate rows are not a contiguous outer block".into()));
        }
        let nm = self.cfg.modes.len();
        let ys: Vec<Vec<f64>> = (0..nm).map(|k| self.pack(&st.phi[k], &st.pi[k])).collect();
        let mut nl = vec![vec![0.0; 2 * n]; nm];
        if self.cfg.nonlinear {
            self.add_nonlinear(st.tau, &ys, &mut nl);
        }
        let mut src = vec![0.0; 2 * n];
        for k in 0..nm {
            let ell = self.cfg.modes[k].0;
            if !self.ops.contains_key(&(ell, dir)) {
                let a = self.assemble(ell, dir);
                self.ops.insert((ell, dir), a);
            }
            let a = &self.ops[&(ell, dir)];
            self.source(k, st.tau, dir, &mut src);
            let m = rows.len();
            let mut sub = BandMatrix::zeros(m, 4, 4);
            let mut rhs = vec![0.0; m];
            let mut y = ys[k].clone();
            for &j in &rows {
                y[2 * (j - 1) + 1] = 0.0;
            }
            let ay = a.matvec(&y);
            for (p, &j) in rows.iter().enumerate() {
                let row = 2 * (j - 1) + 1;
                rhs[p] = -(ay[row] + src[row] + nl[k][row]);
                for (q, &jj) in rows.iter().enumerate() {
                    let col = 2 * (jj - 1) + 1;
                    if a.in_band(row, col) && sub.in_band(p, q) {
                        sub.set(p, q, a.get(row, col));
                    }
                }
            }
            let x = sub.factor()?.solve(&rhs);
            for (p, &j) in rows.iter().enumerate() {
                st.pi[k][j] = x[p];
            }
        }
        Ok(())
    }

    /// Right and left eigenvectors of the semi-discrete operator of mode `ell`
    /// for the eigenvalue nearest `shift`, by shift-invert iteration on the
    /// pencil `A v = λ B v`.
    pub fn discrete_mode(&mut self, ell: usize, dir: Direction, shift: f64) -> Result<DiscreteMode> {
        if !self.ops.contains_key(&(ell, dir)) {
            let a = self.assemble(ell, dir);
            self.ops.insert((ell, dir), a);
        }
        let n2 = self.n_unknowns();
        let mut b = BandMatrix::zeros(n2, 4, 4);
        for i in 0..n2 {
            b.add(i, i, self.mass(i));
        }
        let lu = self.ops[&(ell, dir)].axpy(-shift, &b).factor()?;
        let mass: Vec<f64> = (0..n2).map(|i| self.mass(i)).collect();
        let iterate = |transpose: bool| {
            let mut v = vec![1.0; n2];
            let mut mu = 0.0;
            for _ in 0..200 {
                let bv: Vec<f64> = v.iter().zip(&mass).map(|(a, m)| a * m).collect();
                let next = if transpose { lu.solve_transpose(&bv) } else { lu.solve(&bv) };
                let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
                let new_mu = crate::linalg::dot(&next, &v) / crate::linalg::dot(&v, &v);
                v = next.into_iter().map(|x| x / norm).collect();
                if (new_mu - mu).abs() <= 1e-14 * new_mu.abs() {
                    mu = new_mu;
                    break;
                }
                mu = new_mu;
            }
            (shift + 1.0 / mu, v)
        };
        let (rate, right) = iterate(false);
        let (_, left) = iterate(true);
        let norm: f64 = left.iter().zip(&right).zip(&mass).map(|((u, v), m)| u * m * v).sum();
        if norm.abs() < 1e-300 {
            return Err(Error::Spectral("left and right eigenvectors are B-orthogonal".into()));
        }
        let left = left.into_iter().map(|u| u / norm).collect();
        let (phi, pi) = self.unpack(&right);
        Ok(DiscreteMode { ell, dir, rate, phi, pi, left, mass })
    }

    /// Removes the component along `mode` from every matching mode of the
    /// state and returns the removed coefficients.
    pub fn remove_mode(&self, st: &mut EvolutionState, mode: &DiscreteMode) -> Vec<f64> {
        let mut out = Vec::new();
        for k in 0..self.cfg.modes.len() {
            if self.cfg.modes[k].0 != mode.ell {
                continue;
            }
            let y = self.pack(&st.phi[k], &st.pi[k]);
            let c: f64 = mode.left.iter().zip(&mode.mass).zip(&y).map(|((u, m), y)| u * m * y).sum();
            for j in 1..=self.cfg.n {
                st.phi[k][j] -= c * mode.phi[j];
                st.pi[k][j] -= c * mode.pi[j];
            }
            out.push(c);
        }
        out
    }

    /// One SDIRK2 step of size `cfg.dtau` in the given direction.
    pub fn step(&mut self, st: &EvolutionState, dir: Direction) -> Result<EvolutionState> {
        let dt = dir.sign() * self.cfg.dtau;
        let nm = self.cfg.modes.len();
        for k in 0..nm {
            self.prepare(self.cfg.modes[k].0, dir, dt)?;
        }
        let n2 = self.n_unknowns();
        let y0: Vec<Vec<f64>> = (0..nm).map(|k| self.pack(&st.phi[k], &st.pi[k])).collect();
        let a_coef = [[GAMMA, 0.0], [1.0 - GAMMA, GAMMA]];
        let c_coef = [GAMMA, 1.0];
        let mut ks: Vec<Vec<Vec<f64>>> = vec![vec![vec![0.0; n2]; nm]; 2];
        let mut src = vec![0.0; n2];
        for i in 0..2 {
            let tau_i = st.tau + c_coef[i] * dt;
            let ystar: Vec<Vec<f64>> = (0..nm)
                .map(|k| {
                    let mut y = y0[k].clone();
                    for jst in 0..i {
                        let a = a_coef[i][jst] * dt;
                        for (yy, kk) in y.iter_mut().zip(&ks[jst][k]) {
                            *yy += a * kk;
                        }
                    }
                    y
                })
                .collect();
            let mut base: Vec<Vec<f64>> = Vec::with_capacity(nm);
            for k in 0..nm {
                let ell = self.cfg.modes[k].0;
                let mut b = self.ops[&(ell, dir)].matvec(&ystar[k]);
                self.source(k, tau_i, dir, &mut src);
                b.iter_mut().zip(&src).for_each(|(x, s)| *x += s);
                base.push(b);
            }
            let solve = |this: &Self, rhs: &[Vec<f64>]| -> Vec<Vec<f64>> {
                (0..nm)
                    .map(|k| this.lus[&(this.cfg.modes[k].0, dir, dt.to_bits())].solve(&rhs[k]))
                    .collect()
            };
            let mut kcur = solve(self, &base);
            if self.cfg.nonlinear {
                let mut converged = false;
                for _ in 0..100 {
                    let yst: Vec<Vec<f64>> = (0..nm)
                        .map(|k| ystar[k].iter().zip(&kcur[k]).map(|(y, kk)| y + GAMMA * dt * kk).collect())
                        .collect();
                    let mut rhs = base.clone();
                    self.add_nonlinear(tau_i, &yst, &mut rhs);
                    let knew = solve(self, &rhs);
                    let mut diff = 0.0f64;
                    let mut size = 0.0f64;
                    for k in 0..nm {
                        for (a, b) in knew[k].iter().zip(&kcur[k]) {
                            diff = diff.max((a - b).abs());
                            size = size.max(a.abs());
                        }
                    }
                    kcur = knew;
                    if diff <= self.cfg.fixed_point_tol * (1.0 + size) {
                        converged = true;
                        break;
                    }
                }
                if !converged {
                    return Err(Error::Solver(format!("nonlinear stage iteration stalled at tau = {tau_i}")));
                }
            }
            ks[i] = kcur;
        }
        let mut phi = Vec::with_capacity(nm);
        let mut pi = Vec::with_capacity(nm);
        for k in 0..nm {
            let y: Vec<f64> = (0..n2)
                .map(|q| y0[k][q] + dt * ((1.0 - GAMMA) * ks[0][k][q] + GAMMA * ks[1][k][q]))
                .collect();
            let (a, b) = self.unpack(&y);
            phi.push(a);
            pi.push(b);
        }
        let out = EvolutionState { tau: st.tau + dt, phi, pi };
        let before = st.sup_norm();
        let after = out.sup_norm();
        if !after.is_finite() {
            return Err(Error::Instability { tau: out.tau, growth: f64::INFINITY });
        }
        if after > self.cfg.growth_limit * before.max(self.cfg.growth_floor) {
            return Err(Error::Instability { tau: out.tau, growth: after / before.max(self.cfg.growth_floor) });
        }
        Ok(out)
    }

    /// Evolves until `tau_end`, recording traces and checkpoints. The
    /// observer sees every new state and may stop the run by returning `false`.
    pub fn run(
        &mut self,
        start: EvolutionState,
        tau_end: f64,
        dir: Direction,
        mut observer: impl FnMut(&EvolutionState) -> bool,
    ) -> Result<Trajectory> {
        let dt = self.cfg.dtau;
        let steps = ((tau_end - start.tau).abs() / dt).round() as usize;
        let n = self.cfg.n;
        let mut traj = Trajectory {
            grid: self.grid.clone(),
            fol: self.fol.clone(),
            modes: self.cfg.modes.clone(),
            checkpoints: vec![start.clone()],
            trace_tau: vec![start.tau],
            trace_phi: vec![start.phi.iter().map(|p| p[n]).collect()],
            trace_du: vec![start.pi.iter().map(|p| 2.0 * p[n]).collect()],
        };
        let mut st = start;
        if !observer(&st) {
            return Ok(traj);
        }
        for k in 1..=steps {
            st = self.step(&st, dir)?;
            traj.trace_tau.push(st.tau);
            traj.trace_phi.push(st.phi.iter().map(|p| p[n]).collect());
            traj.trace_du.push(st.pi.iter().map(|p| 2.0 * p[n]).collect());
            let keep = observer(&st);
            if k % self.cfg.checkpoint_every.max(1) == 0 || k == steps || !keep {
                traj.checkpoints.push(st.clone());
            }
            if !keep {
                break;
            }
        }
        Ok(traj)
    }
}

/// `(lapse, rest)` with `lapse · T²ψ = rest` at the finite nodes, where
/// `rest = X²ψ − 2H'XTψ − H''Tψ + (2/r)(Xψ − H'Tψ) − ℓ(ℓ+1)ψ/r² + Vψ − F`.
pub fn wave_rhs(
    field: &ModeField,
    grid: &RadialGrid,
    fol: &FoliationParams,
    pot: impl Fn(f64) -> f64,
    forcing: impl Fn(f64) -> f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    field.validate(grid)?;
    let n = grid.len();
    let x = grid.deriv_r(&field.values);
    let xx = grid.deriv_r(&x);
    let xt = grid.deriv_r(&field.tvalues);
    let ll = (field.ell * (field.ell + 1)) as f64;
    let mut lapse = vec![0.0; n];
    let mut rest = vec![0.0; n];
    for i in 1..n {
        let r = grid.r[i];
        if !r.is_finite() {
            continue;
        }
        let (_, hp, hpp) = fol.big_h(r);
        lapse[i] = 1.0 - hp * hp;
        rest[i] = xx[i] - 2.0 * hp * xt[i] - hpp * field.tvalues[i] + 2.0 / r * (x[i] - hp * field.tvalues[i])
            - ll * field.values[i] / (r * r)
            + pot(r) * field.values[i]
            - forcing(r);
    }
    Ok((lapse, rest))
}

/// Higher `T`-derivatives `ψ_0, …, ψ_{order+1}` from `(ψ, Tψ)` via the
/// equation.
///
/// Where `1 − H'² > ε` the recursion is solved for `T^kψ` directly. On the
/// null part the degenerate equation `2∂_s(rT^{k−1}ψ) = …(T^{k−2}ψ)` is a
/// transport constraint, integrated outward in `s` from the last regular node.
/// `forcing_t(j, r)` returns `T^jF`.
pub fn constraint_fill(
    field: &ModeField,
    grid: &RadialGrid,
    fol: &FoliationParams,
    order: usize,
    forcing_t: impl Fn(usize, f64) -> f64,
) -> Result<Vec<Vec<f64>>> {
    const MAX_ORDER: usize = 8;
    if order > MAX_ORDER {
        return Err(Error::Order { requested: order, available: MAX_ORDER });
    }
    if !grid.is_compactified() {
        return Err(Error::Unsupported("constraint recursion needs a compactified grid".into()));
    }
    field.validate(grid)?;
    let n = grid.len();
    let scale = grid.scale().unwrap_or(1.0);
    let ll = (field.ell * (field.ell + 1)) as f64;
    let h = grid.spacing();
    let eps = 1e-8;
    let lapse: Vec<f64> = (0..n)
        .map(|i| if grid.r[i].is_finite() { 1.0 - fol.big_h(grid.r[i]).1.powi(2) } else { 0.0 })
        .collect();
    let last_regular = (1..n).filter(|&i| lapse[i] > eps).max().unwrap_or(0);
    let (phi0, phi1) = field.r_times(grid);
    let mut stack = vec![phi0, phi1];
    for k in 2..=order + 2 {
        let a = stack[k - 2].clone();
        let xa = grid.deriv_x(&a);
        let xxa = grid.deriv_x(&xa);
        // s'a_ss + (s''/s')a_s + ((V − ℓℓ/r²)/s')a − rT^{k−2}F/s'
        let mut rhs = vec![0.0; n];
        for i in 1..n - 1 {
            let s = grid.x[i];
            let sp = (1.0 - s).powi(2) / scale;
            let r = grid.r[i];
            rhs[i] = sp * xxa[i] - 2.0 * (1.0 - s) / scale * xa[i]
                + (potential(r) / sp - ll / (scale * s * s)) * a[i]
                - r * forcing_t(k - 2, r) / sp;
        }
        let fext = |i: usize| grid.r[i] * forcing_t(k - 2, grid.r[i]) / ((1.0 - grid.x[i]).powi(2) / scale);
        rhs[n - 1] = -ll / scale * a[n - 1] - (3.0 * fext(n - 2) - 3.0 * fext(n - 3) + fext(n - 4));
        // fix the previous level on the null block
        if k >= 3 {
            let prev = &mut stack[k - 1];
            for i in last_regular + 1..n {
                prev[i] = prev[i - 1] + 0.25 * h * (rhs[i - 1] + rhs[i]);
            }
        }
        let b = stack[k - 1].clone();
        let xb = grid.deriv_x(&b);
        let mut next = vec![0.0; n];
        for i in 1..=last_regular {
            let sp = (1.0 - grid.x[i]).powi(2) / scale;
            let (_, hp, hpp) = fol.big_h(grid.r[i]);
            next[i] = (rhs[i] - 2.0 * hp * xb[i] - hpp / sp * b[i]) * sp / lapse[i];
        }
        stack.push(next);
    }
    stack.truncate(order + 2);
    Ok(stack
        .into_iter()
        .map(|phi| {
            let mut v = vec![0.0; n];
            for i in 1..n {
                v[i] = if grid.r[i].is_finite() { phi[i] / grid.r[i] } else { phi[i] };
            }
            if field.ell == 0 {
                let (r1, r2) = (grid.r[1], grid.r[2]);
                v[0] = (v[1] * r2 * r2 - v[2] * r1 * r1) / (r2 * r2 - r1 * r1);
            }
            v
        })
        .collect())
}

/// A manufactured solution `ψ = A(τ) r^ℓ/(1 + r)^{ℓ+1}` with
/// `A(τ) = a₀ + a₁ sin(ωτ)`; the forcing is `F = (□ + V)ψ`.
#[derive(Clone, Copy, Debug)]
pub struct Manufactured {
    pub ell: usize,
    pub a0: f64,
    pub a1: f64,
    pub omega: f64,
}

impl Manufactured {
    fn amp(&self, tau: f64) -> [f64; 3] {
        let (s, c) = (self.omega * tau).sin_cos();
        [self.a0 + self.a1 * s, self.a1 * self.omega * c, -self.a1 * self.omega * self.omega * s]
    }

    fn profile(&self, r: f64) -> [f64; 3] {
        let t = Taylor::<3>::var(r);
        let f = t.powi(self.ell as i32) / (t + 1.0).powi(self.ell as i32 + 1);
        [f.value(), f.deriv(1), f.deriv(2)]
    }

    pub fn psi(&self, tau: f64, r: f64) -> f64 {
        self.amp(tau)[0] * self.profile(r)[0]
    }

    pub fn tpsi(&self, tau: f64, r: f64) -> f64 {
        self.amp(tau)[1] * self.profile(r)[0]
    }

    pub fn ttpsi(&self, tau: f64, r: f64) -> f64 {
        self.amp(tau)[2] * self.profile(r)[0]
    }

    /// `lim rψ` and `∂_u(rψ) = 2T(rψ)` at null infinity.
    pub fn radiation(&self, tau: f64) -> (f64, f64) {
        let a = self.amp(tau);
        (a[0], 2.0 * a[1])
    }

    pub fn forcing(&self, fol: &FoliationParams, tau: f64, r: f64) -> f64 {
        let [a, at, att] = self.amp(tau);
        let [f, fr, frr] = self.profile(r);
        let (_, hp, hpp) = fol.big_h(r);
        let ll = (self.ell * (self.ell + 1)) as f64;
        let (tt, xt, t, x, xx, v) = (att * f, at * fr, at * f, a * fr, a * frr, a * f);
        -(1.0 - hp * hp) * tt + xx - 2.0 * hp * xt - hpp * t + 2.0 / r * (x - hp * t) - ll * v / (r * r)
            + potential(r) * v
    }

    pub fn field(&self, grid: &RadialGrid, m: usize, tau: f64) -> ModeField {
        let (p, dp) = self.radiation(tau);
        let v = grid.sample(|r| self.psi(tau, r), p);
        let t = grid.sample(|r| self.tpsi(tau, r), 0.5 * dp);
        ModeField::new(self.ell, m, v, t, tau)
    }
}
