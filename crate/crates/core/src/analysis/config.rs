//! Experiment configuration loaded from TOML or JSON.

use super::LlnSpec;
use crate::error::{Error, Result};
use crate::flux_solver::{FluxGrid, InitialData, Problem};
use crate::geometry::Dim;
use crate::steady_state::{SteadyState, TemperatureProfile, STEADY_SERIES_TOL};
use crate::transport::{DampingModel, MomentQuadrature, PhaseGrid};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Wall temperature profile as written in a configuration file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    /// `T = 1` on the whole boundary.
    Constant,
    /// Slab wall temperatures.
    Walls { left: f64, right: f64 },
    /// `T(theta) = 1 - amplitude (1 + cos theta) / 2` on the circle.
    CosineDip { amplitude: f64 },
    /// Truncated Fourier series on the circle.
    Fourier {
        a0: f64,
        #[serde(default)]
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
    },
}

impl ProfileSpec {
    /// Profile normalised to maximum temperature 1.
    pub fn build(&self, dim: Dim) -> Result<TemperatureProfile> {
        let profile = match self {
            ProfileSpec::Constant => TemperatureProfile::constant(dim),
            ProfileSpec::Walls { left, right } => TemperatureProfile::walls(*left, *right)?,
            ProfileSpec::CosineDip { amplitude } => TemperatureProfile::cosine_dip(*amplitude)?,
            ProfileSpec::Fourier { a0, cos, sin } => TemperatureProfile::fourier(*a0, cos.clone(), sin.clone())?,
        };
        if profile.dim() != dim {
            return Err(Error::config("profile", format!("profile kind does not fit dimension {}", dim.value())));
        }
        Ok(profile)
    }
}

/// Collision damping `nu(zeta) = nu0 (1 + |zeta|)^exponent / kappa`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DampingSpec {
    pub nu0: f64,
    #[serde(default)]
    pub exponent: f64,
    pub kappa: f64,
    /// Monte Carlo only: kill particles instead of reducing their weights.
    #[serde(default)]
    pub killing: bool,
}

impl DampingSpec {
    pub fn model(&self) -> Result<DampingModel> {
        DampingModel::new(self.nu0, self.exponent, self.kappa)
    }
}

/// Moment reconstruction settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransportSpec {
    /// Snapshot times.
    pub times: Vec<f64>,
    /// Snapshot points per axis (slab) or per radius (disk).
    pub points: usize,
    /// Gauss order per axis for the total-mass average.
    pub mass_order: usize,
    pub quadrature: MomentQuadrature,
    pub phase: PhaseGrid,
}

impl Default for TransportSpec {
    fn default() -> Self {
        TransportSpec {
            times: vec![1.0, 5.0, 20.0],
            points: 9,
            mass_order: 8,
            quadrature: MomentQuadrature::default(),
            phase: PhaseGrid::default(),
        }
    }
}

/// Monte Carlo run settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSpec {
    pub particles: usize,
    /// Width of a tally time bin.
    pub time_bin: f64,
    /// Angular tally bins on the circle.
    pub boundary_bins: usize,
    /// Density histogram bins of the final snapshot.
    pub density_bins: usize,
}

impl Default for McSpec {
    fn default() -> Self {
        McSpec { particles: 100_000, time_bin: 1.0, boundary_bins: 16, density_bins: 32 }
    }
}

/// Decay-rate fit settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatesSpec {
    pub window: [f64; 2],
}

impl Default for RatesSpec {
    fn default() -> Self {
        RatesSpec { window: [10.0, 50.0] }
    }
}

/// Complete description of one experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Spatial dimension, 1 (slab) or 2 (disk).
    pub dim: u8,
    /// Accommodation coefficient in `(0, 1]`.
    pub alpha: f64,
    #[serde(default = "default_profile")]
    pub profile: ProfileSpec,
    #[serde(default = "default_initial")]
    pub initial: InitialData,
    #[serde(default)]
    pub damping: Option<DampingSpec>,
    #[serde(default)]
    pub grid: FluxGrid,
    /// Tolerance of the steady-state reflection series.
    #[serde(default = "default_steady_tol")]
    pub steady_series_tol: f64,
    #[serde(default)]
    pub transport: TransportSpec,
    #[serde(default)]
    pub mc: McSpec,
    #[serde(default)]
    pub rates: RatesSpec,
    #[serde(default)]
    pub lln: LlnSpec,
    #[serde(default)]
    pub seed: u64,
    /// Output directory; the command line may override it.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_profile() -> ProfileSpec {
    ProfileSpec::Constant
}

fn default_initial() -> InitialData {
    InitialData::UniformMaxwellian { rho0: 1.0, temperature: 0.5 }
}

fn default_steady_tol() -> f64 {
    STEADY_SERIES_TOL
}

/// Rewrites a validation error as a configuration error on `field`.
fn at(field: &str, e: Error) -> Error {
    match e {
        Error::InvalidParameter { name, message } if name == field => Error::config(field, message),
        Error::InvalidParameter { name, message } => Error::config(format!("{field}.{name}"), message),
        Error::Config { field: inner, message } if !inner.starts_with(field) => {
            Error::config(format!("{field}.{inner}"), message)
        }
        other => other,
    }
}

impl SimConfig {
    /// Minimal configuration with defaults everywhere else.
    pub fn new(dim: Dim, alpha: f64) -> Self {
        SimConfig {
            dim: dim.value() as u8,
            alpha,
            profile: default_profile(),
            initial: default_initial(),
            damping: None,
            grid: FluxGrid::default(),
            steady_series_tol: STEADY_SERIES_TOL,
            transport: TransportSpec::default(),
            mc: McSpec::default(),
            rates: RatesSpec::default(),
            lln: LlnSpec::default(),
            seed: 0,
            output: None,
        }
    }

    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: SimConfig = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::config("config", e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| Error::config("config", e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::config("config", format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn dimension(&self) -> Result<Dim> {
        Dim::from_value(self.dim as usize)
            .map_err(|_| Error::config("dim", format!("must be 1 or 2, got {}", self.dim)))
    }

    /// Checks every section, reporting the offending field.
    pub fn validate(&self) -> Result<()> {
        let dim = self.dimension()?;
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::config("alpha", format!("must lie in (0, 1], got {}", self.alpha)));
        }
        self.profile.build(dim).map_err(|e| at("profile", e))?;
        self.initial.validate().map_err(|e| at("initial", e))?;
        if let Some(d) = &self.damping {
            d.model().map_err(|e| at("damping", e))?;
        }
        self.grid.validate().map_err(|e| at("grid", e))?;
        if dim == Dim::Two && self.grid.n_theta < 3 {
            return Err(Error::config("grid.n_theta", "need at least 3 nodes on the circle"));
        }
        if !(self.steady_series_tol > 0.0 && self.steady_series_tol < 1.0) {
            return Err(Error::config("steady_series_tol", "must lie in (0, 1)"));
        }
        let horizon = self.grid.t_max;
        if self.transport.points == 0 || self.transport.mass_order == 0 {
            return Err(Error::config("transport.points", "must be positive"));
        }
        let mc = &self.mc;
        if mc.particles == 0 {
            return Err(Error::config("mc.particles", "must be positive"));
        }
        if !(mc.time_bin > 0.0 && mc.time_bin <= horizon) {
            return Err(Error::config("mc.time_bin", format!("must lie in (0, {horizon}]")));
        }
        if mc.boundary_bins == 0 || mc.density_bins == 0 {
            return Err(Error::config("mc.boundary_bins", "bin counts must be positive"));
        }
        let [lo, hi] = self.rates.window;
        if !(lo > 0.0 && hi > lo) {
            return Err(Error::config("rates.window", "need 0 < t_lo < t_hi"));
        }
        self.lln.validate().map_err(|e| at("lln", e))?;
        Ok(())
    }

    /// Wall profile, accommodation and initial data as a solver problem.
    pub fn problem(&self) -> Result<Problem> {
        let dim = self.dimension()?;
        let profile = self.profile.build(dim).map_err(|e| at("profile", e))?;
        self.initial.validate().map_err(|e| at("initial", e))?;
        let steady = SteadyState::with_tolerance(profile, self.alpha, self.steady_series_tol)?;
        Ok(Problem { steady, initial: self.initial.clone() })
    }

    /// Snapshot times, checked against the solved horizon.
    pub fn transport_times(&self) -> Result<&[f64]> {
        let horizon = self.grid.t_max;
        if self.transport.times.iter().any(|&t| !(t >= 0.0 && t <= horizon)) {
            return Err(Error::config("transport.times", format!("times must lie in [0, {horizon}]")));
        }
        Ok(&self.transport.times)
    }

    /// Fit window, checked against the solved horizon.
    pub fn rate_window(&self) -> Result<[f64; 2]> {
        let horizon = self.grid.t_max;
        if self.rates.window[1] > horizon {
            return Err(Error::config("rates.window", format!("window end exceeds the horizon {horizon}")));
        }
        Ok(self.rates.window)
    }

    pub fn damping_model(&self) -> Result<Option<DampingModel>> {
        self.damping.as_ref().map(|d| d.model().map_err(|e| at("damping", e))).transpose()
    }
}
