//! Run configuration: every calibration constant in one human-editable TOML file.

use crate::error::{CliError, CliResult};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use solwave::grid::DEFAULT_RHO_MIN;
use solwave::modulation::{self, FixedPointConfig};
use solwave::propagator::{FlowConfig, MIN_DRAWS};
use solwave::randomize::MsParams;
use solwave::soliton::SolitonParams;
use std::path::{Path, PathBuf};

/// File looked up in the working directory when `--config` is absent.
pub const DEFAULT_CONFIG_FILE: &str = "solwave.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub r_max: f64,
    pub points: usize,
    pub rho_min: f64,
    pub rho_max: f64,
    pub rho_step: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { r_max: 40.0, points: 2001, rho_min: DEFAULT_RHO_MIN, rho_max: 24.0, rho_step: 0.025 }
    }
}

impl GridConfig {
    fn validate(&self, section: &str) -> CliResult<()> {
        if !(self.r_max > 0.0) || self.points < 16 {
            return Err(CliError::Config(format!("[{section}] needs r_max > 0 and at least 16 points")));
        }
        if !(self.rho_min > 0.0 && self.rho_min < self.rho_max && self.rho_step > 0.0) {
            return Err(CliError::Config(format!("[{section}] needs 0 < rho_min < rho_max and rho_step > 0")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolitonConfig {
    /// Scale `a` of the soliton the operator is linearized around.
    pub a: f64,
}

impl Default for SolitonConfig {
    fn default() -> Self {
        SolitonConfig { a: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JostSection {
    /// Largest accepted analytic tail correction at `R_max`.
    pub tail_tol: f64,
    /// Threshold `ρ*` above which the symbol bounds are measured.
    pub rho_star: f64,
    /// Coarse grid of the refinement comparison (the fine one doubles both).
    pub coarse_points: usize,
    pub coarse_rho_step: f64,
    pub coarse_rho_max: f64,
}

impl Default for JostSection {
    fn default() -> Self {
        JostSection { tail_tol: 1e-2, rho_star: 0.5, coarse_points: 1001, coarse_rho_step: 0.1, coarse_rho_max: 12.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DftConfig {
    /// First high-frequency annulus; chosen from the Jost table when absent.
    pub k0: Option<usize>,
    /// Exponents of the weighted square-function check.
    pub square_sigma: f64,
    pub square_delta: f64,
}

impl Default for DftConfig {
    fn default() -> Self {
        DftConfig { k0: None, square_sigma: 0.5, square_delta: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    pub samples: usize,
    pub t_max: f64,
    pub seed: u64,
    /// Annuli `k₀ ..= k₀ + extra_ks` are certified.
    pub extra_ks: usize,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig { samples: 10_000, t_max: 100.0, seed: 7, extra_ks: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomizeConfig {
    pub s: f64,
    pub s1: f64,
    pub nu: f64,
    pub eps: f64,
    pub batch: usize,
    pub seed: u64,
}

impl Default for RandomizeConfig {
    fn default() -> Self {
        RandomizeConfig { s: 0.9, s1: 0.9, nu: 0.1, eps: 1e-2, batch: 200, seed: 0 }
    }
}

impl RandomizeConfig {
    pub fn params(&self) -> MsParams {
        MsParams { s: self.s, s1: self.s1, nu: self.nu, eps: self.eps }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowSection {
    /// Time weight exponent `θ` of the `Z` norm.
    pub theta: f64,
    pub t_max: f64,
    /// Output times of `evolve`.
    pub times: Vec<f64>,
}

impl Default for FlowSection {
    fn default() -> Self {
        FlowSection { theta: 0.75, t_max: 10.0, times: vec![0.0, 0.5, 1.0, 2.0, 4.0, 6.0, 8.0, 10.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TailsConfig {
    pub grid: GridConfig,
    pub draws: usize,
    pub seed: u64,
}

impl Default for TailsConfig {
    fn default() -> Self {
        TailsConfig {
            grid: GridConfig { r_max: 20.0, points: 501, rho_min: DEFAULT_RHO_MIN, rho_max: 16.0, rho_step: 0.05 },
            draws: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModulationConfig {
    /// Ball radius used when `--eps` is absent; the largest tested radius with
    /// every contraction ratio below 0.9.
    pub eps0: f64,
    pub grid: GridConfig,
    pub window: f64,
    pub dt: f64,
    pub max_iters: usize,
    pub contraction_tol: f64,
    pub quadrature_tol: f64,
    pub seed: u64,
    pub forcing_theta: f64,
}

impl Default for ModulationConfig {
    fn default() -> Self {
        ModulationConfig {
            eps0: 1e-2,
            grid: GridConfig {
                r_max: modulation::DEFAULT_R_MAX,
                points: modulation::DEFAULT_POINTS,
                rho_min: DEFAULT_RHO_MIN,
                rho_max: modulation::DEFAULT_RHO_MAX,
                rho_step: modulation::DEFAULT_RHO_STEP,
            },
            window: modulation::DEFAULT_WINDOW,
            dt: modulation::DEFAULT_DT,
            max_iters: 30,
            contraction_tol: 1e-9,
            quadrature_tol: 1e-2,
            seed: 11,
            forcing_theta: modulation::FORCING_THETA,
        }
    }
}

impl ModulationConfig {
    pub fn fixed_point(&self, eps: f64, window: f64) -> FixedPointConfig {
        FixedPointConfig {
            eps,
            max_iters: self.max_iters,
            contraction_tol: self.contraction_tol,
            window_t: window,
            dt: self.dt,
            quadrature_tol: self.quadrature_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub soliton: SolitonConfig,
    pub jost: JostSection,
    pub dft: DftConfig,
    pub kernels: KernelConfig,
    pub randomize: RandomizeConfig,
    pub flow: FlowSection,
    pub tails: TailsConfig,
    pub modulation: ModulationConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path`, or `solwave.toml` in the working directory, or the built-in defaults.
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let path = match path {
            Some(p) => p.to_path_buf(),
            None if Path::new(DEFAULT_CONFIG_FILE).exists() => PathBuf::from(DEFAULT_CONFIG_FILE),
            None => {
                let cfg = RunConfig::default();
                cfg.validate()?;
                return Ok(cfg);
            }
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML serialization.
    pub fn hash(&self) -> String {
        format!("{:x}", Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> CliResult<()> {
        let config = |e: solwave::Error| CliError::Config(e.to_string());
        self.grid.validate("grid")?;
        self.tails.grid.validate("tails.grid")?;
        self.modulation.grid.validate("modulation.grid")?;
        SolitonParams::new(self.soliton.a).and_then(|p| p.check_window()).map_err(config)?;
        self.randomize.params().validate().map_err(config)?;
        if self.randomize.batch == 0 {
            return Err(CliError::Config("[randomize] batch must be positive".into()));
        }
        FlowConfig::new(self.flow.times.clone(), self.flow.t_max, self.flow.theta).map_err(config)?;
        FlowConfig::new(vec![0.0], self.flow.t_max, self.modulation.forcing_theta).map_err(config)?;
        if self.tails.draws < MIN_DRAWS {
            return Err(CliError::Config(format!("[tails] draws must be at least {MIN_DRAWS}")));
        }
        if self.kernels.samples == 0 || !(self.kernels.t_max > 0.0) {
            return Err(CliError::Config("[kernels] needs samples > 0 and t_max > 0".into()));
        }
        if !(self.jost.tail_tol > 0.0 && self.jost.rho_star > 0.0) || self.jost.coarse_points < 16 {
            return Err(CliError::Config("[jost] needs tail_tol > 0, rho_star > 0 and coarse_points >= 16".into()));
        }
        if self.dft.k0 == Some(0) {
            return Err(CliError::Config("[dft] k0 must be at least 1".into()));
        }
        let m = &self.modulation;
        m.fixed_point(m.eps0, m.window).validate().map_err(config)?;
        Ok(())
    }
}
