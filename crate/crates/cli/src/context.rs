//! Grids, transforms and test data shared by the subcommands and the acceptance suite.

use crate::config::{GridConfig, RunConfig};
use crate::error::CliResult;
use solwave::dft::{k0_for, BumpFamily, DistortedTransform};
use solwave::grid::{make_frequency_grid, make_grid, FrequencyGrid, GridScheme, RadialGrid, SQRT_4PI};
use solwave::jost::JostConfig;
use solwave::modulation::ModulationProblem;
use solwave::randomize::{decompose, DataPair};
use solwave::soliton::{potential, PotentialProfile, SolitonParams};
use std::sync::OnceLock;

/// The distorted and free transforms of `H` on one grid, with its annuli.
pub struct Setup {
    pub grid: RadialGrid,
    pub freqs: FrequencyGrid,
    pub v: PotentialProfile,
    pub t: DistortedTransform,
    pub free: DistortedTransform,
    pub bumps: BumpFamily,
}

impl Setup {
    pub fn build(g: &GridConfig, a: f64, jost: JostConfig, k0: Option<usize>) -> CliResult<Self> {
        let grid = make_grid(g.r_max, g.points, GridScheme::Uniform)?;
        let freqs = make_frequency_grid(g.rho_min, g.rho_max, g.rho_step)?;
        let v = potential(SolitonParams::new(a)?, &grid);
        let t = DistortedTransform::build(&v, &grid, &freqs, jost)?;
        let free = DistortedTransform::free(&grid, &freqs);
        let k0 = match k0 {
            Some(k) => k,
            None => k0_for(&v, &grid, g.rho_max)?,
        };
        let bumps = BumpFamily::new(k0, g.rho_max)?;
        Ok(Setup { grid, freqs, v, t, free, bumps })
    }
}

/// `√(4π)·r·(e^{−(r−c)²/2w²} + e^{−(r+c)²/2w²})`, whose odd extension is smooth.
pub fn gaussian(grid: &RadialGrid, width: f64, centre: f64, amp: f64) -> Vec<f64> {
    grid.r()
        .iter()
        .map(|&r| {
            let g = |c: f64| (-(r - c).powi(2) / (2.0 * width * width)).exp();
            amp * SQRT_4PI * r * (g(centre) + g(-centre))
        })
        .collect()
}

/// Rough data split into annuli, used by `randomize`.
pub fn rough_data(s: &Setup) -> CliResult<DataPair> {
    let f = DataPair::new(gaussian(&s.grid, 0.2, 1.0, 1.0), gaussian(&s.grid, 0.25, 2.0, 0.5))?;
    Ok(decompose(&f, &s.t, &s.free, &s.bumps)?)
}

/// Data of the tail experiments, sized for the reduced grid.
pub fn tail_data(s: &Setup) -> CliResult<DataPair> {
    let f = DataPair::new(gaussian(&s.grid, 0.3, 1.0, 1.0), gaussian(&s.grid, 0.35, 2.0, 0.5))?;
    Ok(decompose(&f, &s.t, &s.free, &s.bumps)?)
}

/// Lazily built setups for one configuration.
pub struct Context {
    pub cfg: RunConfig,
    main: OnceLock<Setup>,
    tails: OnceLock<Setup>,
    modulation: OnceLock<(ModulationProblem, usize)>,
}

impl Context {
    pub fn new(cfg: RunConfig) -> Self {
        Context { cfg, main: OnceLock::new(), tails: OnceLock::new(), modulation: OnceLock::new() }
    }

    fn jost_config(&self) -> JostConfig {
        JostConfig { tail_tol: self.cfg.jost.tail_tol, ..Default::default() }
    }

    fn cached<'a, T>(cell: &'a OnceLock<T>, build: impl FnOnce() -> CliResult<T>) -> CliResult<&'a T> {
        if let Some(v) = cell.get() {
            return Ok(v);
        }
        let v = build()?;
        Ok(cell.get_or_init(|| v))
    }

    pub fn main(&self) -> CliResult<&Setup> {
        Self::cached(&self.main, || Setup::build(&self.cfg.grid, self.cfg.soliton.a, self.jost_config(), self.cfg.dft.k0))
    }

    pub fn tails(&self) -> CliResult<&Setup> {
        Self::cached(&self.tails, || Setup::build(&self.cfg.tails.grid, self.cfg.soliton.a, self.jost_config(), None))
    }

    /// The modulation problem and the `k₀` of its rough forcing profile.
    pub fn modulation(&self) -> CliResult<&(ModulationProblem, usize)> {
        Self::cached(&self.modulation, || {
            let m = &self.cfg.modulation;
            let g = &m.grid;
            let grid = make_grid(g.r_max, g.points, GridScheme::Uniform)?;
            let freqs = make_frequency_grid(g.rho_min, g.rho_max, g.rho_step)?;
            let v = potential(SolitonParams::new(1.0)?, &grid);
            let t = DistortedTransform::build(&v, &grid, &freqs, self.jost_config())?;
            let k0 = k0_for(&v, &grid, g.rho_max)?;
            Ok((ModulationProblem::new(t, DistortedTransform::free(&grid, &freqs))?, k0))
        })
    }
}
