//! Experiment configuration: one JSON document per run. Every section is
//! optional; missing sections take the per-command defaults below.

use std::path::{Path, PathBuf};

use critwave::foliation::{build_foliation, FoliationParams};
use critwave::scattering::{DataSpec, Profile};
use critwave::RadialGrid;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Spectrum,
    Evolve,
    Shoot,
    Exterior,
    Modelop,
    PhgFit,
    GroundState,
    Ledger,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Evolve => "evolve",
            Command::Shoot => "shoot",
            Command::Exterior => "exterior",
            Command::Modelop => "modelop",
            Command::PhgFit => "phg-fit",
            Command::GroundState => "ground-state",
            Command::Ledger => "ledger",
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// If present it must agree with the subcommand.
    pub command: Option<Command>,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub grid: Option<GridSpec>,
    pub foliation: Option<FoliationSpec>,
    pub data: Option<DataConfig>,
    pub tolerances: Tolerances,
    pub evolve: EvolveOpts,
    pub shoot: ShootOpts,
    pub exterior: ExteriorOpts,
    pub modelop: ModelopOpts,
    pub phg_fit: PhgFitOpts,
    pub ground_state: GroundStateOpts,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nodes: usize,
    /// Outer radius of a finite grid; ignored when `compactified`.
    #[serde(default)]
    pub outer: Option<f64>,
    #[serde(default = "one")]
    pub grading: f64,
    #[serde(default)]
    pub compactified: bool,
    /// Length scale of a compactified grid.
    #[serde(default)]
    pub scale: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl GridSpec {
    pub fn finite(nodes: usize, outer: f64, grading: f64) -> Self {
        Self { nodes, outer: Some(outer), grading, compactified: false, scale: None }
    }

    pub fn build(&self) -> Result<RadialGrid, ConfigError> {
        let g = if self.compactified {
            let scale = self.scale.ok_or_else(|| ConfigError::new("grid.scale", "compactified grids need a scale"))?;
            RadialGrid::compactified(self.nodes, scale)
        } else {
            let outer = self.outer.ok_or_else(|| ConfigError::new("grid.outer", "finite grids need an outer radius"))?;
            RadialGrid::finite(self.nodes, outer, self.grading)
        };
        g.map_err(|e| ConfigError::new("grid", e.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FoliationSpec {
    pub r1: f64,
    pub r2: f64,
    #[serde(default = "two")]
    pub smoothness: usize,
}

fn two() -> usize {
    2
}

impl FoliationSpec {
    pub fn new(r1: f64, r2: f64) -> Self {
        Self { r1, r2, smoothness: 2 }
    }

    pub fn build(&self) -> Result<FoliationParams, ConfigError> {
        build_foliation(self.r1, self.r2, self.smoothness).map_err(|e| ConfigError::new("foliation", e.to_string()))
    }
}

/// Radiation data at null infinity; the retarded-time window comes from the
/// slab of the command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub profile: Profile,
    pub q: f64,
    #[serde(default = "two")]
    pub order: usize,
    pub epsilon: f64,
    pub amplitude: f64,
    /// Rescales the amplitude so that the data norm equals this value.
    #[serde(default)]
    pub target_norm: Option<f64>,
    #[serde(default)]
    pub mode: (usize, usize),
    /// Width of the switch-off as a fraction of the window.
    #[serde(default = "quarter")]
    pub switch_fraction: f64,
    #[serde(default = "yes")]
    pub main_construction: bool,
}

fn quarter() -> f64 {
    0.25
}

fn yes() -> bool {
    true
}

impl DataConfig {
    pub fn to_spec(&self, fol: &FoliationParams, tau1: f64, tau2: f64) -> Result<DataSpec, ConfigError> {
        if !(0.0..1.0).contains(&self.switch_fraction) {
            return Err(ConfigError::new("data.switch_fraction", "must lie in [0, 1)"));
        }
        let mut s =
            DataSpec::on_slab(self.profile.clone(), self.q, self.order, self.epsilon, self.amplitude, fol, tau1, tau2);
        s.mode = self.mode;
        s.switch_width = self.switch_fraction * (s.u_range.1 - s.u_range.0);
        s.main_construction = self.main_construction;
        Ok(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Eigenvalue tolerance of the spectral solve.
    pub spectral: f64,
    /// ODE residual tolerance of the ground state.
    pub ground_state: f64,
    /// Absolute bisection tolerance; default `10⁻¹⁷ C₁`.
    pub shoot_atol: Option<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { spectral: 1e-6, ground_state: 1e-8, shoot_atol: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub enum InitialData {
    /// `(Y, ±ℷY)`.
    UnstableMode { sign: f64 },
    /// `amplitude · e^{−(r−center)²/width²}` with vanishing `T` derivative.
    Gaussian { center: f64, width: f64, amplitude: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveOpts {
    pub n: usize,
    pub dtau: f64,
    pub tau_start: f64,
    pub tau_end: f64,
    pub nonlinear: bool,
    pub initial: InitialData,
    pub checkpoint_every: usize,
}

impl Default for EvolveOpts {
    fn default() -> Self {
        Self {
            n: 400,
            dtau: 0.05,
            tau_start: 0.0,
            tau_end: 2.0,
            nonlinear: false,
            initial: InitialData::UnstableMode { sign: -1.0 },
            checkpoint_every: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShootOpts {
    pub tau1: f64,
    pub tau2: f64,
    pub n: usize,
    pub dtau: f64,
    pub nonlinear: bool,
    pub c1: Option<f64>,
    pub max_iter: usize,
    pub checkpoint_every: usize,
}

impl Default for ShootOpts {
    fn default() -> Self {
        Self { tau1: 16.0, tau2: 32.0, n: 400, dtau: 0.05, nonlinear: false, c1: None, max_iter: 90, checkpoint_every: 20 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExteriorOpts {
    pub tau1: f64,
    pub tau2: f64,
    pub d: Vec<f64>,
    pub n: usize,
    pub dtau: f64,
    pub nonlinear: bool,
}

impl Default for ExteriorOpts {
    fn default() -> Self {
        Self { tau1: 8.0, tau2: 24.0, d: vec![20.0, 40.0], n: 400, dtau: 0.05, nonlinear: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub enum Forcing {
    /// `1/ρ`.
    InverseRho,
    Constant { value: f64 },
    /// `coefficient · ρ^exponent`.
    Power { exponent: f64, coefficient: f64 },
}

impl Forcing {
    pub fn eval(&self, rho: f64) -> f64 {
        match *self {
            Forcing::InverseRho => 1.0 / rho,
            Forcing::Constant { value } => value,
            Forcing::Power { exponent, coefficient } => coefficient * rho.powf(exponent),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelopOpts {
    pub sigma: f64,
    pub ell: usize,
    pub forcing: Forcing,
    /// Boundary value `F = ((1−ρ)^σ u)|_{ρ=1}`.
    pub boundary: f64,
    pub nodes: usize,
    /// Solve on the punctured ball, keeping the `ρ⁰` root at the origin.
    pub punctured: bool,
}

impl Default for ModelopOpts {
    fn default() -> Self {
        Self { sigma: 1.0, ell: 0, forcing: Forcing::InverseRho, boundary: 0.0, nodes: 40, punctured: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhgFitOpts {
    /// CSV file with columns `t,y`; relative paths resolve against the config file.
    pub input: Option<PathBuf>,
    pub exponents: Vec<f64>,
    pub max_log: usize,
    pub max_terms: usize,
    pub noise: f64,
    pub kappa: f64,
    pub max_condition: f64,
}

impl Default for PhgFitOpts {
    fn default() -> Self {
        let d = critwave::modelops::FitConfig::default();
        Self {
            input: None,
            exponents: d.exponents,
            max_log: d.max_log,
            max_terms: d.max_terms,
            noise: d.noise,
            kappa: d.kappa,
            max_condition: d.max_condition,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GroundStateOpts {
    pub q: f64,
    /// Largest `m` in the conormal bound.
    pub conormal_order: usize,
    pub conormal_radius: f64,
}

impl Default for GroundStateOpts {
    fn default() -> Self {
        Self { q: 9.0, conormal_order: 3, conormal_radius: 1e6 }
    }
}

impl ExperimentConfig {
    /// Reads and validates a config file. Errors name the offending field.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("--config", format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        if let Some(input) = &cfg.phg_fit.input {
            if input.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.phg_fit.input = Some(base.join(input));
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            ConfigError::new(&field, e.into_inner().to_string())
        })
    }

    /// Fills in the command-specific defaults and checks that everything the
    /// command needs is consistent, before any computation starts.
    pub fn resolve(mut self, command: Command) -> Result<Self, ConfigError> {
        if let Some(c) = self.command {
            if c != command {
                return Err(ConfigError::new(
                    "command",
                    format!("config is for `{}` but `{}` was requested", c.name(), command.name()),
                ));
            }
        }
        self.command = Some(command);
        if self.grid.is_none() {
            self.grid = match command {
                Command::Spectrum | Command::Evolve | Command::Shoot | Command::Ledger => {
                    Some(GridSpec::finite(801, 40.0, 1.0))
                }
                Command::GroundState => Some(GridSpec::finite(401, 200.0, 1.5)),
                _ => None,
            };
        }
        if self.foliation.is_none() {
            self.foliation = match command {
                Command::Evolve => Some(FoliationSpec::new(10.0, 20.0)),
                Command::Shoot | Command::Ledger | Command::Exterior => Some(FoliationSpec::new(2.0, 6.0)),
                _ => None,
            };
        }
        if self.data.is_none() {
            self.data = match command {
                Command::Shoot | Command::Ledger => Some(DataConfig {
                    profile: Profile::PolynomialDecay { delta: 0.5 },
                    q: 6.0,
                    order: 2,
                    epsilon: 1.0,
                    amplitude: 1e-4,
                    target_norm: None,
                    mode: (0, 0),
                    switch_fraction: 0.25,
                    main_construction: true,
                }),
                Command::Exterior => Some(DataConfig {
                    profile: Profile::PolynomialDecay { delta: 0.5 },
                    q: 1.0,
                    order: 2,
                    epsilon: 10.0,
                    amplitude: 1.0,
                    target_norm: Some(1.0),
                    mode: (0, 0),
                    switch_fraction: 0.25,
                    main_construction: false,
                }),
                _ => None,
            };
        }
        // the ledger needs at least two dyadic slabs
        if command == Command::Ledger && self.shoot == ShootOpts::default() {
            self.shoot.tau1 = 8.0;
        }
        self.validate(command)?;
        Ok(self)
    }

    fn validate(&self, command: Command) -> Result<(), ConfigError> {
        if let Some(g) = &self.grid {
            g.build()?;
        }
        if let Some(f) = &self.foliation {
            f.build()?;
        }
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::new(name, format!("must be positive and finite, got {v}")))
            }
        };
        positive("tolerances.spectral", self.tolerances.spectral)?;
        positive("tolerances.ground_state", self.tolerances.ground_state)?;
        match command {
            Command::Evolve => {
                positive("evolve.dtau", self.evolve.dtau)?;
                if !(self.evolve.tau_end > self.evolve.tau_start) {
                    return Err(ConfigError::new("evolve.tau_end", "must exceed tau_start"));
                }
                if let InitialData::Gaussian { width, .. } = self.evolve.initial {
                    positive("evolve.initial.width", width)?;
                }
            }
            Command::Shoot | Command::Ledger => {
                positive("shoot.dtau", self.shoot.dtau)?;
                positive("shoot.tau1", self.shoot.tau1)?;
                if !(self.shoot.tau2 > self.shoot.tau1) {
                    return Err(ConfigError::new("shoot.tau2", "must exceed tau1"));
                }
            }
            Command::Exterior => {
                positive("exterior.dtau", self.exterior.dtau)?;
                if !(self.exterior.tau2 > self.exterior.tau1) {
                    return Err(ConfigError::new("exterior.tau2", "must exceed tau1"));
                }
                if self.exterior.d.is_empty() {
                    return Err(ConfigError::new("exterior.d", "needs at least one cut"));
                }
            }
            Command::Modelop => {
                positive("modelop.sigma", self.modelop.sigma)?;
            }
            Command::PhgFit => {
                if self.phg_fit.input.is_none() {
                    return Err(ConfigError::new("phg_fit.input", "a CSV file with columns t,y is required"));
                }
            }
            Command::GroundState => {
                if !(self.ground_state.q > 7.0) {
                    return Err(ConfigError::new("ground_state.q", "must exceed 7"));
                }
            }
            Command::Spectrum => {}
        }
        Ok(())
    }
}
