//! Scattering data at null infinity, the backward construction of solutions
//! in `R_{τ₁,τ₂}`, bisection shooting over the unstable coefficient, the
//! dyadic ledger and the far-exterior construction.
//!
//! Retarded time is `u = (t − r)/2`, so along null infinity `u` and the slice
//! time are related by [`FoliationParams::retarded_time`].

use serde::{Deserialize, Serialize};

use crate::angular::norm_sq;
use crate::currents::{alpha_pm, lambda_radiation, master_flux, master_flux_beyond, theta_vector};
use crate::error::{Error, Result};
use crate::evolution::{constraint_fill, to_fields, Direction, EvolutionConfig, EvolutionState, Evolver, Trajectory};
use crate::foliation::FoliationParams;
use crate::grid::{ModeField, RadialGrid};
use crate::linalg::gauss_legendre;
use crate::spectral::SpectralData;
use crate::taylor::Taylor;

const JET: usize = 9;
/// Largest supported data order `N`; the norms use `N + 1` derivatives.
pub const MAX_DATA_ORDER: usize = JET - 2;

/// One term `c ⟨u⟩^{−z} log^k⟨u⟩`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhgTerm {
    pub z: f64,
    pub k: u32,
    pub coeff: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Profile {
    Zero,
    /// `⟨u⟩^{−q−δ}`.
    PolynomialDecay { delta: f64 },
    Polyhomogeneous { terms: Vec<PhgTerm> },
}

/// Request for radiation data `(rψ)^𝓘(u) Y_{ℓm}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataSpec {
    pub profile: Profile,
    pub q: f64,
    /// Order `N`; norms involve `N + 1` vector fields.
    pub order: usize,
    pub epsilon: f64,
    pub amplitude: f64,
    pub mode: (usize, usize),
    /// Window `(u₁, u₂)` of retarded time carrying data.
    pub u_range: (f64, f64),
    /// The profile is switched off smoothly on `[u₂ − width, u₂]` so that it
    /// is compatible with vanishing data on the last slice; zero disables
    /// the switch.
    pub switch_width: f64,
    /// Check the hypotheses of the main construction (`q > 5`).
    pub main_construction: bool,
}

impl DataSpec {
    /// Data on the part of null infinity between the slices `τ₁` and `τ₂`.
    #[allow(clippy::too_many_arguments)]
    pub fn on_slab(
        profile: Profile,
        q: f64,
        order: usize,
        epsilon: f64,
        amplitude: f64,
        fol: &FoliationParams,
        tau1: f64,
        tau2: f64,
    ) -> Self {
        let u1 = fol.retarded_time(tau1, f64::INFINITY);
        let u2 = fol.retarded_time(tau2, f64::INFINITY);
        Self {
            profile,
            q,
            order,
            epsilon,
            amplitude,
            mode: (0, 0),
            u_range: (u1, u2),
            switch_width: 0.25 * (u2 - u1),
            main_construction: true,
        }
    }
}

/// Validated radiation data with its weighted size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatteringData {
    pub spec: DataSpec,
    /// `(Σ_{j+k≤N+1} ∫⟨u⟩^{2q−1} |(u∂_u)^j Ω^k (rψ)^𝓘|² du dω)^{1/2}`.
    pub norm: f64,
    pub warnings: Vec<String>,
}

/// `e^{−1/z}/(e^{−1/z} + e^{−1/(1−z)})`: zero for `z ≤ 0`, one for `z ≥ 1`.
fn smooth_switch(z: Taylor<JET>) -> Taylor<JET> {
    let v = z.value();
    if v <= 0.0 {
        return Taylor::constant(0.0);
    }
    if v >= 1.0 {
        return Taylor::constant(1.0);
    }
    let a = (-1.0 / z).exp();
    let b = (-1.0 / (1.0 - z)).exp();
    a / (a + b)
}

/// Stirling numbers of the second kind, `S(j, i)` for `j, i ≤ n`.
fn stirling2(n: usize) -> Vec<Vec<f64>> {
    let mut s = vec![vec![0.0; n + 1]; n + 1];
    s[0][0] = 1.0;
    for j in 1..=n {
        for i in 1..=j {
            s[j][i] = i as f64 * s[j - 1][i] + s[j - 1][i - 1];
        }
    }
    s
}

impl ScatteringData {
    fn jet(&self, u: f64) -> Taylor<JET> {
        let sp = &self.spec;
        let x = Taylor::<JET>::var(u);
        let br = (x * x + 1.0).sqrt();
        let base = match &sp.profile {
            Profile::Zero => return Taylor::constant(0.0),
            Profile::PolynomialDecay { delta } => br.powf(-(sp.q + delta)),
            Profile::Polyhomogeneous { terms } => {
                let lg = br.ln();
                terms.iter().fold(Taylor::constant(0.0), |acc, t| {
                    let mut term = br.powf(-t.z) * t.coeff;
                    for _ in 0..t.k {
                        term = term * lg;
                    }
                    acc + term
                })
            }
        };
        if sp.switch_width == 0.0 {
            return base * sp.amplitude;
        }
        let z = (Taylor::constant(sp.u_range.1) - x) / sp.switch_width;
        base * smooth_switch(z) * sp.amplitude
    }

    /// `(rψ)^𝓘(u)`.
    pub fn value(&self, u: f64) -> f64 {
        if u < self.spec.u_range.0 || u > self.spec.u_range.1 {
            return 0.0;
        }
        self.jet(u).value()
    }

    /// `∂_u(rψ)^𝓘(u)`.
    pub fn du(&self, u: f64) -> f64 {
        if u < self.spec.u_range.0 || u > self.spec.u_range.1 {
            return 0.0;
        }
        self.jet(u).deriv(1)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.spec.profile, Profile::Zero) || self.spec.amplitude == 0.0
    }

    /// `(u∂_u)^j(rψ)^𝓘` for `j ≤ N + 1`.
    fn euler_derivs(&self, u: f64, s: &[Vec<f64>]) -> Vec<f64> {
        let t = self.jet(u);
        let n = self.spec.order + 1;
        (0..=n)
            .map(|j| {
                if j == 0 {
                    return t.value();
                }
                (1..=j).map(|i| s[j][i] * u.powi(i as i32) * t.deriv(i)).sum()
            })
            .collect()
    }

    fn weighted_norm(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let sp = &self.spec;
        let n = sp.order + 1;
        let s = stirling2(n);
        let (ell, _) = sp.mode;
        let ll = (ell * (ell + 1)) as f64;
        // Σ_k (ℓ(ℓ+1))^k over the angular part of each |α| = j + k
        let angular: Vec<f64> = (0..=n).map(|j| (0..=n - j).map(|k| ll.powi(k as i32)).sum()).collect();
        let (u1, u2) = sp.u_range;
        let (xs, ws) = gauss_legendre(10);
        let panels = 400;
        let hp = (u2 - u1) / panels as f64;
        let mut total = 0.0;
        for p in 0..panels {
            let a = u1 + p as f64 * hp;
            for (x, w) in xs.iter().zip(&ws) {
                let u = a + 0.5 * hp * (x + 1.0);
                let weight = (1.0 + u * u).powf(sp.q - 0.5);
                let d = self.euler_derivs(u, &s);
                let sum: f64 = d.iter().zip(&angular).map(|(v, c)| c * v * v).sum();
                total += 0.5 * hp * w * weight * sum;
            }
        }
        (norm_sq(ell) * total).sqrt()
    }
}

/// Validates the request and computes the weighted data norm.
pub fn make_data(spec: &DataSpec) -> Result<ScatteringData> {
    let (u1, u2) = spec.u_range;
    if !(spec.q > 0.0 && spec.q.is_finite()) {
        return Err(Error::Parameter(format!("decay rate q must be positive, got {}", spec.q)));
    }
    if !(spec.epsilon > 0.0) {
        return Err(Error::Parameter(format!("size bound must be positive, got {}", spec.epsilon)));
    }
    if !(u1 < u2) || !u1.is_finite() || !u2.is_finite() {
        return Err(Error::Parameter(format!("retarded-time window ({u1}, {u2}) is not ordered")));
    }
    if !(spec.switch_width >= 0.0 && spec.switch_width <= u2 - u1) {
        return Err(Error::Parameter(format!("switch width {} must lie in [0, u2 - u1]", spec.switch_width)));
    }
    if spec.order > MAX_DATA_ORDER {
        return Err(Error::Order { requested: spec.order, available: MAX_DATA_ORDER });
    }
    let (l, m) = spec.mode;
    if l > 2 || m > 2 * l {
        return Err(Error::Unsupported(format!("mode ({l}, {m}) outside ℓ ≤ 2")));
    }
    let mut warnings = Vec::new();
    if spec.main_construction && spec.q <= 5.0 {
        warnings.push(format!("q = {} violates q > 5 required by the main construction", spec.q));
    }
    if let Profile::Polyhomogeneous { terms } = &spec.profile {
        for t in terms {
            if t.z <= spec.q {
                warnings.push(format!("term exponent {} does not exceed q = {}", t.z, spec.q));
            }
        }
    }
    let mut data = ScatteringData { spec: spec.clone(), norm: 0.0, warnings };
    data.norm = data.weighted_norm();
    if data.norm > spec.epsilon {
        return Err(Error::DataTooLarge { norm: data.norm, epsilon: spec.epsilon });
    }
    Ok(data)
}

/// Settings of a backward run from `τ₂` to `τ₁`.
#[derive(Clone, Debug)]
pub struct BackwardConfig {
    pub fol: FoliationParams,
    pub n: usize,
    pub scale: f64,
    pub dtau: f64,
    pub tau1: f64,
    pub tau2: f64,
    /// Number `N` of `T` commutations in the unstable-mode monitor.
    pub order: usize,
    /// Bound for `|α₋[T^Nψ]| τ^{q/2+N}`.
    pub threshold: f64,
    /// Optional bound for `τ^q (E⁰ + Ẽ⁰)[ψ]`.
    pub energy_bound: Option<f64>,
    pub nonlinear: bool,
    pub checkpoint_every: usize,
}

impl BackwardConfig {
    /// Desk-scale defaults with threshold `e^{−ℷR₁/2}`.
    pub fn new(fol: FoliationParams, tau1: f64, tau2: f64, lamed: f64) -> Self {
        let threshold = (-0.5 * lamed * fol.r1).exp();
        let scale = fol.r2;
        Self {
            fol,
            n: 400,
            scale,
            dtau: 0.05,
            tau1,
            tau2,
            order: 2,
            threshold,
            energy_bound: None,
            nonlinear: false,
            checkpoint_every: 20,
        }
    }
}

/// Why a backward run ended.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Exit {
    ReachedStart,
    UnstableMode { tau: f64, alpha: f64 },
    Energy { tau: f64, value: f64, alpha: f64 },
}

impl Exit {
    /// `T(a)`: the slice where the run stopped.
    pub fn stop_time(&self, tau1: f64) -> f64 {
        match *self {
            Exit::ReachedStart => tau1,
            Exit::UnstableMode { tau, .. } | Exit::Energy { tau, .. } => tau,
        }
    }

    /// `S(a) = sign α₋[T^Nψ](T(a))`, zero when the run reached `τ₁`.
    pub fn sign(&self) -> i8 {
        match *self {
            Exit::ReachedStart => 0,
            Exit::UnstableMode { alpha, .. } | Exit::Energy { alpha, .. } => {
                if alpha > 0.0 {
                    1
                } else if alpha < 0.0 {
                    -1
                } else {
                    0
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct BackwardRun {
    pub trajectory: Trajectory,
    pub exit: Exit,
    /// `(τ, α₋[T^Nψ])` at every step.
    pub monitor: Vec<(f64, f64)>,
}

/// `α₋[T^Nψ]` of an `ℓ = 0` field, with `T^Nψ` from the constraint recursion.
pub fn alpha_minus_commuted(
    field: &ModeField,
    grid: &RadialGrid,
    fol: &FoliationParams,
    spec: &SpectralData,
    order: usize,
) -> Result<f64> {
    if field.ell != 0 {
        return Err(Error::Parameter("the unstable-mode pairing acts on the ℓ = 0 component".into()));
    }
    let stack = constraint_fill(field, grid, fol, order, |_, _| 0.0)?;
    let f = ModeField::new(0, 0, stack[order].clone(), stack[order + 1].clone(), field.slice_time);
    Ok(alpha_pm(&[f], spec, grid, fol, None)?.minus)
}

fn run_modes(data: &ScatteringData) -> Vec<(usize, usize)> {
    if data.spec.mode == (0, 0) {
        vec![(0, 0)]
    } else {
        vec![(0, 0), data.spec.mode]
    }
}

fn check_slab(tau1: f64, tau2: f64) -> Result<()> {
    if !(tau1 > 0.0 && tau1 < tau2 && tau2.is_finite()) {
        return Err(Error::Parameter(format!("need 0 < τ₁ < τ₂, got τ₁ = {tau1}, τ₂ = {tau2}")));
    }
    Ok(())
}

/// State on `Σ_{τ₂}`: vanishing data plus the seed `ψ = aℷYχ`, `Tψ = −aYχ`
/// with `χ = χ̄(r/3R₁)`.
fn seeded_state(
    ev: &mut Evolver,
    modes: &[(usize, usize)],
    spec: &SpectralData,
    a: f64,
    tau2: f64,
) -> Result<EvolutionState> {
    let grid = ev.grid.clone();
    let fol = ev.fol.clone();
    let lam = spec.lamed;
    let seed = |r: f64| fol.chi_r(r, 3.0 * fol.r1).0 * spec.eval_y(r);
    let fields: Vec<ModeField> = modes
        .iter()
        .map(|&(l, m)| {
            if (l, m) == (0, 0) {
                ModeField::new(0, 0, grid.sample(|r| a * lam * seed(r), 0.0), grid.sample(|r| -a * seed(r), 0.0), tau2)
            } else {
                ModeField::zeros(l, m, grid.len(), tau2)
            }
        })
        .collect();
    let mut st = ev.state_from_fields(&fields)?;
    ev.make_consistent(&mut st, Direction::Backward)?;
    Ok(st)
}

fn evolution_config(cfg: &BackwardConfig, modes: Vec<(usize, usize)>, scale: f64) -> EvolutionConfig {
    let mut e = EvolutionConfig::linear(cfg.n, cfg.scale, cfg.dtau, &modes);
    e.nonlinear = cfg.nonlinear;
    e.checkpoint_every = cfg.checkpoint_every;
    e.growth_floor = e.growth_floor.max(scale);
    e
}

/// Evolves the modified problem backward from `τ₂`, stopping at the first
/// violation of the unstable-mode or energy bootstrap.
pub fn solve_backward(data: &ScatteringData, a: f64, spec: &SpectralData, cfg: &BackwardConfig) -> Result<BackwardRun> {
    check_slab(cfg.tau1, cfg.tau2)?;
    let modes = run_modes(data);
    let data_idx = modes.iter().position(|&m| m == data.spec.mode).expect("data mode is evolved");
    let fol = cfg.fol.clone();
    let dat = data.clone();
    let scri = move |k: usize, tau: f64| {
        if k == data_idx {
            dat.du(fol.retarded_time(tau, f64::INFINITY))
        } else {
            0.0
        }
    };
    let size = data.spec.amplitude.abs() + a.abs() * spec.lamed * spec.y.values[0].abs();
    let mut ev = Evolver::new(&cfg.fol, evolution_config(cfg, modes.clone(), size))?.with_scri_data(&scri);
    let grid = ev.grid.clone();
    let start = seeded_state(&mut ev, &modes, spec, a, cfg.tau2)?;
    let power = 0.5 * data.spec.q + cfg.order as f64;
    let mut exit = Exit::ReachedStart;
    let mut monitor = Vec::new();
    let mut failure = None;
    let trajectory = ev.run(start, cfg.tau1, Direction::Backward, |st| {
        let fields = to_fields(&grid, &modes, st);
        let alpha = match alpha_minus_commuted(&fields[0], &grid, &cfg.fol, spec, cfg.order) {
            Ok(v) => v,
            Err(e) => {
                failure = Some(e);
                return false;
            }
        };
        monitor.push((st.tau, alpha));
        if alpha.abs() * st.tau.powf(power) >= cfg.threshold {
            exit = Exit::UnstableMode { tau: st.tau, alpha };
            return false;
        }
        if let Some(bound) = cfg.energy_bound {
            match master_flux(&fields, &grid, &cfg.fol) {
                Ok(e) if e * st.tau.powf(data.spec.q) > bound => {
                    exit = Exit::Energy { tau: st.tau, value: e, alpha };
                    return false;
                }
                Ok(_) => {}
                Err(e) => {
                    failure = Some(e);
                    return false;
                }
            }
        }
        true
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(BackwardRun { trajectory, exit, monitor })
}

#[derive(Clone, Debug)]
pub struct ShootConfig {
    /// Scan bound `C₁`; by default twice the seed size that saturates the
    /// threshold on `Σ_{τ₂}`.
    pub c1: Option<f64>,
    /// Bracket width at which bisection gives up; default `10⁻¹⁷ C₁`.
    pub atol: Option<f64>,
    pub max_iter: usize,
    /// How often `C₁` may be doubled when the end signs agree.
    pub enlarge: usize,
}

impl Default for ShootConfig {
    fn default() -> Self {
        Self { c1: None, atol: None, max_iter: 90, enlarge: 4 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BracketStep {
    pub lo: f64,
    pub hi: f64,
    pub a: f64,
    pub stop_tau: f64,
    pub sign: i8,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ShootExit {
    ReachedStart,
    /// The bracket shrank below tolerance without a run reaching `τ₁`.
    NearCritical { width: f64, stop_tau: f64 },
}

#[derive(Clone, Debug)]
pub struct ShootingResult {
    pub a_star: f64,
    pub c1: f64,
    pub history: Vec<BracketStep>,
    pub exit: ShootExit,
    pub run: BackwardRun,
}

/// Seed coefficient at which the seed alone saturates the threshold on `Σ_{τ₂}`.
pub fn saturating_seed(data: &ScatteringData, spec: &SpectralData, cfg: &BackwardConfig) -> Result<f64> {
    check_slab(cfg.tau1, cfg.tau2)?;
    let modes = run_modes(data);
    let mut ev = Evolver::new(&cfg.fol, evolution_config(cfg, modes.clone(), 0.0))?;
    let st = seeded_state(&mut ev, &modes, spec, 1.0, cfg.tau2)?;
    let fields = ev.fields(&st);
    let alpha = alpha_minus_commuted(&fields[0], &ev.grid, &cfg.fol, spec, cfg.order)?;
    if alpha == 0.0 {
        return Err(Error::Precondition("seed has no unstable-mode content".into()));
    }
    Ok(cfg.threshold / (alpha.abs() * cfg.tau2.powf(0.5 * data.spec.q + cfg.order as f64)))
}

/// Bisection on the seed coefficient `a` using the sign map
/// `S(a) = sign α₋[T^Nψ](T(a))`.
pub fn shoot_unstable(
    data: &ScatteringData,
    spec: &SpectralData,
    cfg: &BackwardConfig,
    shoot: &ShootConfig,
) -> Result<ShootingResult> {
    let mut c1 = match shoot.c1 {
        Some(c) if c > 0.0 => c,
        Some(c) => return Err(Error::Parameter(format!("scan bound must be positive, got {c}"))),
        None => 2.0 * saturating_seed(data, spec, cfg)?,
    };
    let mut history = Vec::new();
    let mut attempt = 0;
    let (mut lo, mut hi, s_lo) = loop {
        let low = solve_backward(data, -c1, spec, cfg)?;
        let high = solve_backward(data, c1, spec, cfg)?;
        for (a, run) in [(-c1, &low), (c1, &high)] {
            history.push(BracketStep {
                lo: -c1,
                hi: c1,
                a,
                stop_tau: run.exit.stop_time(cfg.tau1),
                sign: run.exit.sign(),
            });
        }
        for (a, run) in [(-c1, low.clone()), (c1, high.clone())] {
            if run.exit == Exit::ReachedStart {
                return Ok(ShootingResult { a_star: a, c1, history, exit: ShootExit::ReachedStart, run });
            }
        }
        let (sl, sh) = (low.exit.sign(), high.exit.sign());
        if sl * sh == -1 {
            break (-c1, c1, sl);
        }
        if attempt >= shoot.enlarge {
            return Err(Error::Topological { lower: sl, upper: sh });
        }
        attempt += 1;
        c1 *= 2.0;
    };
    let atol = shoot.atol.unwrap_or(1e-17 * c1);
    let mut last = None;
    for _ in 0..shoot.max_iter {
        if hi - lo <= atol {
            break;
        }
        let a = 0.5 * (lo + hi);
        let run = solve_backward(data, a, spec, cfg)?;
        let sign = run.exit.sign();
        history.push(BracketStep { lo, hi, a, stop_tau: run.exit.stop_time(cfg.tau1), sign });
        if run.exit == Exit::ReachedStart {
            return Ok(ShootingResult { a_star: a, c1, history, exit: ShootExit::ReachedStart, run });
        }
        if sign == s_lo {
            lo = a;
        } else {
            hi = a;
        }
        last = Some((a, run));
    }
    let (a_star, run) = match last {
        Some(v) => v,
        None => {
            let a = 0.5 * (lo + hi);
            (a, solve_backward(data, a, spec, cfg)?)
        }
    };
    let stop_tau = run.exit.stop_time(cfg.tau1);
    Ok(ShootingResult { a_star, c1, history, exit: ShootExit::NearCritical { width: hi - lo, stop_tau }, run })
}

/// One dyadic slice `τ = 2^m` of the ledger.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub m: i32,
    pub tau: f64,
    /// `a_τ = |Θ(τ)|² + (E⁰ + Ẽ⁰)(τ)`.
    pub a: f64,
    /// `b_τ = 𝕽^Λ_{τ/2,τ} + 𝓘_{τ/2,τ}`; absent when `τ/2` is not covered.
    pub b: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicLedger {
    pub rows: Vec<LedgerRow>,
    pub gamma: f64,
    /// Smallest `c` with `a_{2^m} ≤ c 2^{−mq}`.
    pub c_decay: f64,
    /// Smallest `C` with
    /// `a_{2^m} ≤ γ⁻¹(a_{2^{m+1}} + b_{2^{m+1}}) + C(a + b)^{3/2} 2^{5m/2}`.
    pub c_recursion: f64,
}

fn find_index(taus: &[f64], tau: f64) -> Option<usize> {
    let tol = 1e-6 * tau.abs().max(1.0);
    taus.iter().position(|t| (t - tau).abs() <= tol)
}

/// `Σ 2N_ℓ (Tφ)²` at null infinity for trace entry `i`, the flux density of
/// `E⁰ + Ẽ⁰` through null infinity per unit slice time.
fn scri_density(traj: &Trajectory, i: usize) -> f64 {
    traj.modes
        .iter()
        .zip(&traj.trace_du[i])
        .map(|(&(l, _), du)| 2.0 * norm_sq(l) * (0.5 * du).powi(2))
        .sum()
}

/// `∫ scri_density dτ` between trace entries `i` and `j`.
fn scri_flux(traj: &Trajectory, i: usize, j: usize) -> f64 {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    (a..b)
        .map(|k| {
            let h = (traj.trace_tau[k + 1] - traj.trace_tau[k]).abs();
            0.5 * h * (scri_density(traj, k) + scri_density(traj, k + 1))
        })
        .sum()
}

/// Tabulates `a_{2^m}`, `b_{2^m}` along a trajectory and fits the constants
/// of the decay claim and of the dyadic recursion with `γ = 0.99`.
pub fn dyadic_ledger(traj: &Trajectory, q: f64) -> Result<DyadicLedger> {
    let taus = traj.taus();
    let (tmin, tmax) = taus.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &t| (a.min(t), b.max(t)));
    if !(tmin > 0.0) {
        return Err(Error::Range(format!("dyadic slices need τ > 0, trajectory starts at {tmin}")));
    }
    let m0 = (tmin.log2() - 1e-9).ceil() as i32;
    let m1 = (tmax.log2() + 1e-9).floor() as i32;
    if m1 - m0 < 2 {
        return Err(Error::Range(format!("τ ∈ [{tmin}, {tmax}] spans fewer than two dyadic slabs")));
    }
    let l0 = traj.modes.iter().position(|&m| m == (0, 0));
    let mut rows = Vec::new();
    for m in m0..=m1 {
        let tau = 2f64.powi(m);
        let k = find_index(&taus, tau).ok_or_else(|| Error::Range(format!("no checkpoint at τ = {tau}")))?;
        let fields = traj.fields(k);
        let th = theta_vector(&fields, &traj.grid, &traj.fol)?;
        let theta2 = th.mom.iter().chain(&th.com).map(|v| v * v).sum::<f64>() + th.lam * th.lam;
        let a = theta2 + master_flux(&fields, &traj.grid, &traj.fol)?;
        let b = if m > m0 {
            let i = find_index(&traj.trace_tau, tau).ok_or_else(|| Error::Range(format!("no trace at τ = {tau}")))?;
            let j = find_index(&traj.trace_tau, 0.5 * tau)
                .ok_or_else(|| Error::Range(format!("no trace at τ = {}", 0.5 * tau)))?;
            let rad = l0.map_or(0.0, |c| lambda_radiation(traj.trace_phi[j][c], traj.trace_phi[i][c]).abs());
            Some(rad + scri_flux(traj, i, j))
        } else {
            None
        };
        rows.push(LedgerRow { m, tau, a, b });
    }
    let gamma = 0.99;
    let c_decay = rows.iter().map(|r| r.a * 2f64.powf(r.m as f64 * q)).fold(0.0, f64::max);
    let mut c_recursion = 0.0f64;
    for w in rows.windows(2) {
        let (lo, up) = (&w[0], &w[1]);
        let s = up.a + up.b.unwrap_or(0.0);
        let excess = lo.a - s / gamma;
        if excess > 0.0 {
            let c = if s > 0.0 { excess / (s.powf(1.5) * 2f64.powf(2.5 * lo.m as f64)) } else { f64::INFINITY };
            c_recursion = c_recursion.max(c);
        }
    }
    Ok(DyadicLedger { rows, gamma, c_decay, c_recursion })
}

/// Settings of a far-exterior run.
#[derive(Clone, Debug)]
pub struct ExteriorConfig {
    pub fol: FoliationParams,
    pub n: usize,
    pub scale: f64,
    pub dtau: f64,
    pub tau1: f64,
    pub tau2: f64,
    /// Width of the smooth switch that removes the nonlinearity for `v < d`.
    pub cut_width: f64,
    pub nonlinear: bool,
    /// Ratios above this value count as a failed bound.
    pub blowup: f64,
    pub checkpoint_every: usize,
}

impl ExteriorConfig {
    pub fn new(fol: FoliationParams, tau1: f64, tau2: f64) -> Self {
        let scale = fol.r2;
        Self {
            fol,
            n: 400,
            scale,
            dtau: 0.05,
            tau1,
            tau2,
            cut_width: 1.0,
            nonlinear: true,
            blowup: 1e3,
            checkpoint_every: 10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExteriorSample {
    pub tau: f64,
    /// Flux of `E⁰ + Ẽ⁰` through the cone `{u = u(τ), v > d}`.
    pub cone: f64,
    /// Flux through null infinity between `τ` and `τ₂`.
    pub incoming: f64,
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct ExteriorRun {
    pub d: f64,
    pub trajectory: Trajectory,
    pub samples: Vec<ExteriorSample>,
    /// `sup_τ C_{τ,d} / (C_{τ₂,d} + 𝓘_{τ,τ₂})`.
    pub constant: f64,
    pub bounded: bool,
    /// `(v, flux beyond v)` on the final slice.
    pub v_profile: Vec<(f64, f64)>,
}

/// Backward construction in `{v > d}` with the nonlinearity switched off
/// inside `v < d`, recording the ratio of cone fluxes to the incoming data.
pub fn exterior_solve(data: &ScatteringData, d: f64, cfg: &ExteriorConfig) -> Result<ExteriorRun> {
    check_slab(cfg.tau1, cfg.tau2)?;
    let fol = &cfg.fol;
    let u_of = |tau: f64| fol.retarded_time(tau, f64::INFINITY);
    let r_cut = |tau: f64| d - u_of(tau);
    if r_cut(cfg.tau2) < fol.null_radius() {
        return Err(Error::Precondition(format!(
            "v-cut d = {d} too small: the cone portion leaves the null region (need d ≥ {})",
            fol.null_radius() + u_of(cfg.tau2)
        )));
    }
    if data.spec.mode != (0, 0) {
        return Err(Error::Unsupported("exterior runs evolve the ℓ = 0 component only".into()));
    }
    let f2 = fol.clone();
    let dat = data.clone();
    let scri = move |_: usize, tau: f64| dat.du(f2.retarded_time(tau, f64::INFINITY));
    let mut ecfg = EvolutionConfig::linear(cfg.n, cfg.scale, cfg.dtau, &[(0, 0)]);
    ecfg.nonlinear = cfg.nonlinear;
    ecfg.checkpoint_every = cfg.checkpoint_every;
    ecfg.growth_floor = ecfg.growth_floor.max(data.spec.amplitude.abs());
    let mut ev = Evolver::new(fol, ecfg)?.with_scri_data(&scri).with_nonlinear_cut(d, cfg.cut_width);
    let grid = ev.grid.clone();
    let mut start = ev.state_from_fields(&[ModeField::zeros(0, 0, grid.len(), cfg.tau2)])?;
    ev.make_consistent(&mut start, Direction::Backward)?;
    let traj = ev.run(start, cfg.tau1, Direction::Backward, |_| true)?;
    let mut samples = Vec::new();
    let mut cone2 = None;
    for (k, st) in traj.checkpoints.iter().enumerate() {
        let fields = traj.fields(k);
        let cone = master_flux_beyond(&fields, &grid, fol, r_cut(st.tau))?;
        let i = find_index(&traj.trace_tau, st.tau).ok_or_else(|| Error::Range(format!("no trace at τ = {}", st.tau)))?;
        let incoming = scri_flux(&traj, 0, i);
        let c2 = *cone2.get_or_insert(cone);
        let denom = c2 + incoming;
        let ratio = (denom > 1e-300).then(|| cone / denom);
        samples.push(ExteriorSample { tau: st.tau, cone, incoming, ratio });
    }
    let constant = samples.iter().filter_map(|s| s.ratio).fold(0.0, f64::max);
    let last = traj.checkpoints.len() - 1;
    let fields = traj.fields(last);
    let tau_last = traj.checkpoints[last].tau;
    let r0 = r_cut(tau_last);
    let v_profile = (0..16)
        .map(|j| {
            let r = r0 * 2f64.powf(j as f64 / 8.0);
            Ok((r + u_of(tau_last), master_flux_beyond(&fields, &grid, fol, r)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExteriorRun { d, bounded: constant <= cfg.blowup, trajectory: traj, samples, constant, v_profile })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::foliation::build_foliation;
    use crate::spectral::unstable_eigenpair;

    fn spectral() -> SpectralData {
        unstable_eigenpair(&RadialGrid::finite(801, 40.0, 1.0).unwrap(), 1e-6).unwrap()
    }

    fn poly_spec(amplitude: f64, q: f64) -> DataSpec {
        let fol = build_foliation(2.0, 6.0, 2).unwrap();
        DataSpec::on_slab(Profile::PolynomialDecay { delta: 0.5 }, q, 2, 10.0, amplitude, &fol, 8.0, 16.0)
    }

    #[test]
    fn zero_data_has_zero_norm() {
        let mut s = poly_spec(1.0, 6.0);
        s.profile = Profile::Zero;
        let d = make_data(&s).unwrap();
        assert_eq!(d.norm, 0.0);
        assert_eq!(d.value(3.0), 0.0);
    }

    #[test]
    fn weighted_norm_matches_direct_quadrature() {
        // independent evaluation with closed-form derivatives of ⟨u⟩^{−p}
        let s = DataSpec {
            profile: Profile::PolynomialDecay { delta: 0.5 },
            q: 6.0,
            order: 1,
            epsilon: 1e3,
            amplitude: 0.3,
            mode: (0, 0),
            u_range: (0.5, 40.0),
            switch_width: 0.0,
            main_construction: true,
        };
        let d = make_data(&s).unwrap();
        let p = 6.5;
        let f = |u: f64| 0.3 * (1.0 + u * u).powf(-p / 2.0);
        // u∂_u⟨u⟩^{−p} = −p u²⟨u⟩^{−p−2}; (u∂_u)² = −p(2u²⟨u⟩^{−p−2} − (p+2)u⁴⟨u⟩^{−p−4})
        let f1 = |u: f64| -p * u * u * f(u) / (1.0 + u * u);
        let f2 = |u: f64| -p * f(u) * (2.0 * u * u / (1.0 + u * u) - (p + 2.0) * u.powi(4) / (1.0 + u * u).powi(2));
        let n = 400_000;
        let h = (40.0 - 0.5) / n as f64;
        let mut acc = 0.0;
        for i in 0..n {
            let u = 0.5 + (i as f64 + 0.5) * h;
            acc += h * (1.0 + u * u).powf(5.5) * (f(u).powi(2) + f1(u).powi(2) + f2(u).powi(2));
        }
        let expect = (4.0 * std::f64::consts::PI * acc).sqrt();
        assert!((d.norm - expect).abs() < 1e-6 * expect, "{} {}", d.norm, expect);
    }

    #[test]
    fn oversized_data_rejected_with_norm() {
        let mut s = poly_spec(1.0, 6.0);
        s.epsilon = 1e-6;
        match make_data(&s) {
            Err(Error::DataTooLarge { norm, epsilon }) => assert!(norm > epsilon),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn low_decay_warns_under_main_flag() {
        let d = make_data(&poly_spec(1e-6, 3.0)).unwrap();
        assert_eq!(d.warnings.len(), 1);
        let mut s = poly_spec(1e-6, 3.0);
        s.main_construction = false;
        assert!(make_data(&s).unwrap().warnings.is_empty());
        assert!(make_data(&poly_spec(1e-6, 6.0)).unwrap().warnings.is_empty());
    }

    #[test]
    fn switch_off_is_smooth_and_complete() {
        let d = make_data(&poly_spec(1e-3, 6.0)).unwrap();
        let (_, u2) = d.spec.u_range;
        assert_eq!(d.value(u2), 0.0);
        assert_eq!(d.du(u2), 0.0);
        assert!(d.value(u2 - d.spec.switch_width - 1e-9) > 0.0);
        let e = 1e-6;
        for &u in &[u2 - 0.3, u2 - 1.0, u2 - 1.7] {
            let fd = (d.value(u + e) - d.value(u - e)) / (2.0 * e);
            assert!((fd - d.du(u)).abs() < 1e-6 * d.du(u).abs().max(1e-12));
        }
    }

    #[test]
    fn zero_data_zero_seed_reaches_start() {
        let fol = build_foliation(2.0, 6.0, 2).unwrap();
        let spec = spectral();
        let mut s = poly_spec(0.0, 6.0);
        s.profile = Profile::Zero;
        let data = make_data(&s).unwrap();
        let mut cfg = BackwardConfig::new(fol, 8.0, 12.0, spec.lamed);
        cfg.n = 200;
        let run = solve_backward(&data, 0.0, &spec, &cfg).unwrap();
        assert_eq!(run.exit, Exit::ReachedStart);
        assert_eq!(run.trajectory.checkpoints.last().unwrap().sup_norm(), 0.0);
    }

    #[test]
    fn seed_exits_earlier_when_larger() {
        let fol = build_foliation(2.0, 6.0, 2).unwrap();
        let spec = spectral();
        let mut s = poly_spec(0.0, 6.0);
        s.profile = Profile::Zero;
        let data = make_data(&s).unwrap();
        let mut cfg = BackwardConfig::new(fol, 8.0, 16.0, spec.lamed);
        cfg.n = 200;
        let c = saturating_seed(&data, &spec, &cfg).unwrap();
        let mut prev = 0.0;
        for k in [1e-2, 1e-1, 0.5] {
            let a = c * k;
            let run = solve_backward(&data, a, &spec, &cfg).unwrap();
            let t = run.exit.stop_time(cfg.tau1);
            assert!(matches!(run.exit, Exit::UnstableMode { .. }), "{k}: {:?}", run.exit);
            assert!(t > 8.0 && t > prev, "{k}: {t} {prev}");
            prev = t;
            // scalar oracle: |α(τ₂)| e^{ℷ(τ₂ − T)} T^{q/2+N} = threshold
            let alpha0 = run.monitor[0].1.abs();
            let g = |tau: f64| alpha0 * (spec.lamed * (16.0 - tau)).exp() * tau.powi(5) - cfg.threshold;
            let (mut lo, mut hi) = (8.0, 16.0);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if g(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            assert!((t - lo).abs() < 0.3, "{k}: stop {t}, oracle {lo}");
        }
    }

    #[test]
    fn shooting_zero_data_gives_zero() {
        let fol = build_foliation(2.0, 6.0, 2).unwrap();
        let spec = spectral();
        let mut s = poly_spec(0.0, 6.0);
        s.profile = Profile::Zero;
        let data = make_data(&s).unwrap();
        let mut cfg = BackwardConfig::new(fol, 8.0, 12.0, spec.lamed);
        cfg.n = 200;
        let res = shoot_unstable(&data, &spec, &cfg, &ShootConfig::default()).unwrap();
        assert_eq!(res.exit, ShootExit::ReachedStart);
        assert!(res.a_star.abs() <= 1e-17 * res.c1);
    }

    #[test]
    fn same_sign_bracket_is_topological_error() {
        let fol = build_foliation(2.0, 6.0, 2).unwrap();
        let spec = spectral();
        let mut s = poly_spec(1.0, 6.0);
        s.epsilon = 1e4;
        let data = make_data(&s).unwrap();
        let mut cfg = BackwardConfig::new(fol, 4.0, 16.0, spec.lamed);
        cfg.n = 200;
        // a tiny scan bound leaves the data-driven sign at both ends
        let shoot = ShootConfig { c1: Some(1e-30), enlarge: 0, ..ShootConfig::default() };
        match shoot_unstable(&data, &spec, &cfg, &shoot) {
            Err(Error::Topological { lower, upper }) => assert_eq!(lower, upper),
            other => panic!("unexpected {:?}", other.map(|r| r.a_star)),
        }
    }

    #[test]
    fn ledger_requires_two_slabs() {
        let fol = build_foliation(2.0, 6.0, 2).unwrap();
        let spec = spectral();
        let mut s = poly_spec(0.0, 6.0);
        s.profile = Profile::Zero;
        let data = make_data(&s).unwrap();
        let mut cfg = BackwardConfig::new(fol, 8.0, 16.0, spec.lamed);
        cfg.n = 100;
        let run = solve_backward(&data, 0.0, &spec, &cfg).unwrap();
        assert!(matches!(dyadic_ledger(&run.trajectory, 6.0), Err(Error::Range(_))));
        cfg.tau1 = 4.0;
        let run = solve_backward(&data, 0.0, &spec, &cfg).unwrap();
        let ledger = dyadic_ledger(&run.trajectory, 6.0).unwrap();
        assert_eq!(ledger.rows.len(), 3);
        assert!(ledger.rows.iter().all(|r| r.a == 0.0 && r.b.unwrap_or(0.0) == 0.0));
        assert_eq!(ledger.c_decay, 0.0);
        assert_eq!(ledger.c_recursion, 0.0);
    }

    #[test]
    fn exterior_zero_data_is_zero() {
        let fol = build_foliation(2.0, 6.0, 2).unwrap();
        let mut s = poly_spec(0.0, 1.0);
        s.profile = Profile::Zero;
        let data = make_data(&s).unwrap();
        let mut cfg = ExteriorConfig::new(fol, 8.0, 12.0);
        cfg.n = 100;
        let run = exterior_solve(&data, 40.0, &cfg).unwrap();
        assert_eq!(run.constant, 0.0);
        assert!(run.v_profile.iter().all(|p| p.1 == 0.0));
        assert!(matches!(exterior_solve(&data, 5.0, &cfg), Err(Error::Precondition(_))));
    }
}
