//! One function per subcommand. Each returns the JSON summary text after
//! writing its artifacts.

use anyhow::{Context, Result};
use critwave::currents::{alpha_pm, bilinear_t_lambda_w, energy_flux, theta_com, theta_mom, Potential};
use critwave::evolution::{Direction, EvolutionConfig, Evolver};
use critwave::modelops::{normal_apply, phg_fit, solve_ball, solve_punctured, BallGrid, FitConfig, PhgExpansion};
use critwave::scattering::{
    dyadic_ledger, exterior_solve, make_data, shoot_unstable, BackwardConfig, BracketStep, DyadicLedger, Exit,
    ExteriorConfig, ExteriorSample, ScatteringData, ShootConfig, ShootExit,
};
use critwave::soliton::solve_ground_state;
use critwave::spectral::{coercivity_constant, standard_functionals, unstable_eigenpair, SpectralData};
use critwave::ModeField;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Command, ExperimentConfig, InitialData};
use crate::output::{num, Output, Provenance, Table};

pub fn run(command: Command, cfg: &ExperimentConfig, out: &Output) -> Result<String> {
    match command {
        Command::Spectrum => spectrum(cfg, out),
        Command::Evolve => evolve(cfg, out),
        Command::Shoot => shoot(cfg, out, false),
        Command::Ledger => shoot(cfg, out, true),
        Command::Exterior => exterior(cfg, out),
        Command::Modelop => modelop(cfg, out),
        Command::PhgFit => fit(cfg, out),
        Command::GroundState => ground_state(cfg, out),
    }
}

fn spectral(cfg: &ExperimentConfig, prov: &mut Provenance) -> Result<SpectralData> {
    let grid = cfg.grid.as_ref().expect("resolved config has a grid").build()?;
    prov.add_grid("spectral", &grid);
    unstable_eigenpair(&grid, cfg.tolerances.spectral).context("unstable eigenpair")
}

#[derive(Serialize)]
struct SpectrumResult {
    lamed: f64,
    residual: f64,
    decay_slope: f64,
    mu: f64,
    mu_per_mode: Vec<(usize, f64)>,
    /// Coercivity constant with the `Y` detector dropped; negative when `Y` is needed.
    mu_without_y: f64,
}

fn spectrum(cfg: &ExperimentConfig, out: &Output) -> Result<String> {
    let mut prov = Provenance::new("spectrum", cfg)?;
    let spec = spectral(cfg, &mut prov)?;
    let g = &spec.grid;
    let all = standard_functionals(&spec, g, None);
    let full = coercivity_constant(&all, g).context("coercivity")?;
    let without: Vec<_> = all.iter().filter(|f| f.name != "Y").cloned().collect();
    let dropped = coercivity_constant(&without, g).context("coercivity without Y")?;
    let mut t = Table::new("spectrum_profile", &["r", "Y"]);
    for (r, y) in g.r.iter().zip(&spec.y.values) {
        if r.is_finite() {
            t.push_nums(&[*r, *y]);
        }
    }
    out.table(&t)?;
    let res = SpectrumResult {
        lamed: spec.lamed,
        residual: spec.residual,
        decay_slope: spec.decay_slope,
        mu: full.mu,
        mu_per_mode: full.per_mode,
        mu_without_y: dropped.mu,
    };
    out.summary(&prov, &res)
}

#[derive(Serialize)]
struct EvolveResult {
    tau_end: f64,
    steps: usize,
    /// The larger of `α_±` on the initial slice.
    dominant: &'static str,
    /// Exponential rate of the dominant `α` between the first and last checkpoints.
    rate: f64,
    max_err_over_energy: f64,
}

fn evolve(cfg: &ExperimentConfig, out: &Output) -> Result<String> {
    let mut prov = Provenance::new("evolve", cfg)?;
    let spec = spectral(cfg, &mut prov)?;
    let o = &cfg.evolve;
    let fol = cfg.foliation.expect("resolved").build()?;
    let mut ec = EvolutionConfig::linear(o.n, fol.r2, o.dtau, &[(0, 0)]);
    ec.nonlinear = o.nonlinear;
    ec.checkpoint_every = o.checkpoint_every;
    let mut ev = Evolver::new(&fol, ec)?;
    let g = ev.grid.clone();
    prov.add_grid("evolution", &g);
    let (phi, tphi) = match o.initial {
        InitialData::UnstableMode { sign } => {
            let y = g.sample(|r| spec.eval_y(r), 0.0);
            let ty = y.iter().map(|v| sign * spec.lamed * v).collect();
            (y, ty)
        }
        InitialData::Gaussian { center, width, amplitude } => {
            (g.sample(|r| amplitude * (-((r - center) / width).powi(2)).exp(), 0.0), vec![0.0; g.len()])
        }
    };
    let mut st = ev.state_from_fields(&[ModeField::new(0, 0, phi, tphi, o.tau_start)])?;
    ev.make_consistent(&mut st, Direction::Forward)?;
    let traj = ev.run(st, o.tau_end, Direction::Forward, |_| true).context("linear evolution")?;
    let mut t = Table::new("flux", &["tau", "quantity", "value"]);
    let mut worst = 0.0f64;
    let mut alphas = Vec::new();
    for k in 0..traj.checkpoints.len() {
        let tau = traj.checkpoints[k].tau;
        let f = traj.fields(k);
        let a = alpha_pm(&f, &spec, &g, &fol, None)?;
        let e = energy_flux(&f, Potential::Free, &g, &fol)?.value;
        let mom = theta_mom(&f, &g, &fol)?;
        let com = theta_com(&f, &g, &fol)?.total;
        let lam = bilinear_t_lambda_w(&f, &g, &fol)?;
        if e > 0.0 {
            worst = worst.max(a.err.abs() / e);
        }
        alphas.push((tau, a.plus, a.minus));
        let rows = [
            ("energy", e),
            ("alpha_plus", a.plus),
            ("alpha_minus", a.minus),
            ("alpha_err", a.err),
            ("theta_mom_x", mom[0]),
            ("theta_mom_y", mom[1]),
            ("theta_mom_z", mom[2]),
            ("theta_com_x", com[0]),
            ("theta_com_y", com[1]),
            ("theta_com_z", com[2]),
            ("theta_lambda_bilinear", lam),
        ];
        for (q, v) in rows {
            t.push(vec![num(tau), q.to_string(), num(v)]);
        }
    }
    out.table(&t)?;
    let (a, b) = (alphas[0], alphas[alphas.len() - 1]);
    let rate = |x: f64, y: f64| (y.abs() / x.abs()).ln() / (b.0 - a.0);
    let (dominant, rate) =
        if a.1.abs() >= a.2.abs() { ("plus", rate(a.1, b.1)) } else { ("minus", rate(a.2, b.2)) };
    let res = EvolveResult {
        tau_end: b.0,
        steps: traj.trace_tau.len() - 1,
        dominant,
        rate,
        max_err_over_energy: worst,
    };
    out.summary(&prov, &res)
}

fn scattering_data(cfg: &ExperimentConfig, fol: &critwave::foliation::FoliationParams, t1: f64, t2: f64) -> Result<ScatteringData> {
    let dc = cfg.data.as_ref().expect("resolved config has data");
    let mut spec = dc.to_spec(fol, t1, t2)?;
    if let Some(target) = dc.target_norm {
        let mut unbounded = spec.clone();
        unbounded.epsilon = f64::MAX;
        let base = make_data(&unbounded).context("data norm")?;
        if !(base.norm > 0.0) {
            return Err(crate::error::ConfigError::new("data.target_norm", "cannot rescale vanishing data").into());
        }
        spec.amplitude *= target / base.norm;
    }
    make_data(&spec).context("scattering data")
}

#[derive(Serialize)]
struct ShootResultJson {
    a_star: f64,
    c1: f64,
    exit: ShootExit,
    run_exit: Exit,
    data_norm: f64,
    data_warnings: Vec<String>,
    history: Vec<BracketStep>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ledger: Option<DyadicLedger>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ledger_note: Option<String>,
}

fn shoot(cfg: &ExperimentConfig, out: &Output, ledger_required: bool) -> Result<String> {
    let name = if ledger_required { "ledger" } else { "shoot" };
    let mut prov = Provenance::new(name, cfg)?;
    let spec = spectral(cfg, &mut prov)?;
    let o = &cfg.shoot;
    let fol = cfg.foliation.expect("resolved").build()?;
    let data = scattering_data(cfg, &fol, o.tau1, o.tau2)?;
    let mut bc = BackwardConfig::new(fol, o.tau1, o.tau2, spec.lamed);
    bc.n = o.n;
    bc.dtau = o.dtau;
    bc.nonlinear = o.nonlinear;
    bc.checkpoint_every = o.checkpoint_every;
    let sc = ShootConfig { c1: o.c1, atol: cfg.tolerances.shoot_atol, max_iter: o.max_iter, ..ShootConfig::default() };
    let r = shoot_unstable(&data, &spec, &bc, &sc).context("shooting")?;
    let traj = &r.run.trajectory;
    prov.add_grid("evolution", &traj.grid);
    let (ledger, note) = match dyadic_ledger(traj, data.spec.q) {
        Ok(l) => (Some(l), None),
        Err(e) if !ledger_required => (None, Some(e.to_string())),
        Err(e) => return Err(e).context("dyadic ledger"),
    };
    if let Some(l) = &ledger {
        let mut t = Table::new("ledger", &["m", "a", "b"]);
        for row in &l.rows {
            t.push(vec![row.m.to_string(), num(row.a), row.b.map_or(String::new(), num)]);
        }
        out.table(&t)?;
    }
    if !ledger_required {
        let mut t = Table::new("trajectory", &["tau", "r", "mode_l", "mode_m", "phi"]);
        for c in &traj.checkpoints {
            for (k, &(l, m)) in traj.modes.iter().enumerate() {
                for (r, v) in traj.grid.r.iter().zip(&c.phi[k]) {
                    t.push(vec![num(c.tau), num(*r), l.to_string(), m.to_string(), num(*v)]);
                }
            }
        }
        out.table(&t)?;
    }
    let res = ShootResultJson {
        a_star: r.a_star,
        c1: r.c1,
        exit: r.exit,
        run_exit: r.run.exit,
        data_norm: data.norm,
        data_warnings: data.warnings.clone(),
        history: r.history,
        ledger,
        ledger_note: note,
    };
    out.summary(&prov, &res)
}

#[derive(Serialize)]
struct ExteriorEntry {
    d: f64,
    constant: f64,
    bounded: bool,
    samples: Vec<ExteriorSample>,
}

#[derive(Serialize)]
struct ExteriorResult {
    data_norm: f64,
    runs: Vec<ExteriorEntry>,
    /// Whether the constant does not increase with `d`.
    non_increasing: bool,
}

fn exterior(cfg: &ExperimentConfig, out: &Output) -> Result<String> {
    let mut prov = Provenance::new("exterior", cfg)?;
    let o = &cfg.exterior;
    let fol = cfg.foliation.expect("resolved").build()?;
    let data = scattering_data(cfg, &fol, o.tau1, o.tau2)?;
    let mut ec = ExteriorConfig::new(fol, o.tau1, o.tau2);
    ec.n = o.n;
    ec.dtau = o.dtau;
    ec.nonlinear = o.nonlinear;
    let mut ds = o.d.clone();
    ds.sort_by(f64::total_cmp);
    let runs: Vec<_> = ds.par_iter().map(|&d| exterior_solve(&data, d, &ec)).collect();
    let mut entries = Vec::new();
    let mut t = Table::new("exterior", &["d", "tau", "quantity", "value"]);
    for (d, run) in ds.iter().zip(runs) {
        let run = run.with_context(|| format!("exterior run with d = {d}"))?;
        prov.add_grid("evolution", &run.trajectory.grid);
        for s in &run.samples {
            let mut rows = vec![("cone", s.cone), ("incoming", s.incoming)];
            if let Some(r) = s.ratio {
                rows.push(("ratio", r));
            }
            for (q, v) in rows {
                t.push(vec![num(*d), num(s.tau), q.to_string(), num(v)]);
            }
        }
        entries.push(ExteriorEntry { d: *d, constant: run.constant, bounded: run.bounded, samples: run.samples });
    }
    out.table(&t)?;
    let non_increasing = entries.windows(2).all(|w| w[1].constant <= w[0].constant);
    out.summary(&prov, &ExteriorResult { data_norm: data.norm, runs: entries, non_increasing })
}

#[derive(Serialize)]
struct ModelopResult {
    u_origin: f64,
    boundary_value: f64,
    condition: f64,
    /// Max of `|N_σ u_smooth − f|` over interior nodes, relative to `max |f|`.
    residual: f64,
}

fn modelop(cfg: &ExperimentConfig, out: &Output) -> Result<String> {
    let prov = Provenance::new("modelop", cfg)?;
    let o = &cfg.modelop;
    let grid = BallGrid::new(o.nodes).map_err(|e| crate::error::ConfigError::new("modelop.nodes", e.to_string()))?;
    let f = |rho: f64| o.forcing.eval(rho);
    let sol = if o.punctured {
        if o.boundary != 0.0 {
            return Err(crate::error::ConfigError::new("modelop.boundary", "punctured solves take F = 0").into());
        }
        solve_punctured(o.sigma, &grid, &f, o.ell)?
    } else {
        solve_ball(o.sigma, &grid, &f, o.boundary, o.ell)?
    };
    let smooth: Vec<f64> =
        grid.rho.iter().zip(&sol.smooth).map(|(r, w)| r.powi(sol.factor as i32) * w).collect();
    let applied = normal_apply(o.sigma, &grid, &smooth, o.ell)?;
    let fv = grid.sample(f);
    let scale = fv.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let residual = applied.iter().zip(&fv).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;
    let mut t = Table::new("profile", &["rho", "u"]);
    for (r, u) in grid.rho.iter().zip(sol.values()) {
        t.push_nums(&[*r, u]);
    }
    out.table(&t)?;
    let res = ModelopResult {
        u_origin: sol.eval(0.0),
        boundary_value: sol.boundary_value(),
        condition: sol.condition,
        residual,
    };
    out.summary(&prov, &res)
}

fn read_samples(path: &std::path::Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut t = Vec::new();
    let mut y = Vec::new();
    for (i, rec) in rdr.deserialize::<(f64, f64)>().enumerate() {
        let (a, b) = rec.map_err(|e| crate::error::ConfigError::new("phg_fit.input", format!("row {}: {e}", i + 1)))?;
        t.push(a);
        y.push(b);
    }
    Ok((t, y))
}

fn fit(cfg: &ExperimentConfig, out: &Output) -> Result<String> {
    let prov = Provenance::new("phg-fit", cfg)?;
    let o = &cfg.phg_fit;
    let (t, y) = read_samples(o.input.as_deref().expect("validated"))?;
    let fc = FitConfig {
        exponents: o.exponents.clone(),
        max_log: o.max_log,
        max_terms: o.max_terms,
        noise: o.noise,
        kappa: o.kappa,
        max_condition: o.max_condition,
    };
    let e: PhgExpansion = phg_fit(&t, &y, &fc)?;
    let mut tab = Table::new("fit", &["t", "y", "fit"]);
    for (a, b) in t.iter().zip(&y) {
        tab.push_nums(&[*a, *b, e.eval(*a)]);
    }
    out.table(&tab)?;
    out.summary(&prov, &e)
}

#[derive(Serialize)]
struct GroundStateResult {
    q: f64,
    u0: f64,
    tail_limit: f64,
    residual: f64,
    positive: bool,
    /// `max_{m' ≤ m} sup_{1 ≤ r ≤ R} |(r∂_r)^{m'} W_q| r` for `m = 0, 1, ...`.
    conormal: Vec<f64>,
}

fn ground_state(cfg: &ExperimentConfig, out: &Output) -> Result<String> {
    let mut prov = Provenance::new("ground-state", cfg)?;
    let grid = cfg.grid.as_ref().expect("resolved").build()?;
    prov.add_grid("radial", &grid);
    let o = &cfg.ground_state;
    let p = solve_ground_state(o.q, &grid, cfg.tolerances.ground_state)?;
    let mut t = Table::new("ground_state", &["r", "W_q"]);
    for (r, v) in grid.r.iter().zip(&p.values) {
        t.push_nums(&[*r, *v]);
    }
    out.table(&t)?;
    let res = GroundStateResult {
        q: o.q,
        u0: p.u0,
        tail_limit: p.tail_limit,
        residual: p.residual,
        positive: p.values.iter().all(|&v| v > 0.0),
        conormal: (0..=o.conormal_order).map(|m| p.conormal_bound(m, o.conormal_radius)).collect(),
    };
    out.summary(&prov, &res)
}
