use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no negative eigenvalue found")]
    NoNegativeEigenvalue,
    #[error("found {0} radial negative eigenvalues, expected exactly one")]
    MultipleNegativeEigenvalues(usize),
    #[error("residual {residual:.3e} above tolerance {tol:.1e} ({what})")]
    Residual { what: &'static str, residual: f64, tol: f64 },
    #[error("Volterra iteration did not converge at rho = {rho}")]
    NonConvergent { rho: f64 },
    #[error("tail correction {size:.3e} at R_max = {r_max} exceeds {tol:.1e}; enlarge R_max")]
    TailTooLarge { size: f64, r_max: f64, tol: f64 },
    #[error("Dirichlet violation {0:.3e} at r = 0")]
    Dirichlet(f64),
    #[error("phase {phase:.1} too large for panel width {panel:.3e}; refine the frequency grid by {factor}x")]
    PhaseTooLarge { phase: f64, panel: f64, factor: usize },
    #[error("projection index k = {k} lies strictly between 0 and k0 = {k0}")]
    ProjectionIndex { k: usize, k0: usize },
    #[error("randomization tail {tail:.3e} above 1e-3 of total {total:.3e}")]
    TruncationTail { tail: f64, total: f64 },
    #[error("CFL violated: dt = {dt:.3e} > {limit:.3e}")]
    Cfl { dt: f64, limit: f64 },
    #[error("operation requires a spectral decomposition")]
    MissingDecomposition,
    #[error("rank-one term needs a soliton potential")]
    NotSolitonPotential,
    #[error("unsupported norm: {0}")]
    UnsupportedNorm(String),
    #[error("insufficient draws: {0}")]
    InsufficientDraws(String),
    #[error("modulation parameter a = {0} left (1/2, 3/2)")]
    ModulationWindow(f64),
    #[error("tail of the h integral {tail:.3e} exceeds 1% of |h| = {h:.3e}")]
    HTail { tail: f64, h: f64 },
    #[error("unstable mode not cancelled: |x_+(T)| = {x:.3e} > {bound:.3e}")]
    Cancellation { x: f64, bound: f64 },
    #[error("iterate left the ball: X-norm {norm:.3e} > radius {radius:.3e}")]
    LeftBall { norm: f64, radius: f64 },
    #[error("Duhamel quadrature not converged: Richardson estimate {estimate:.3e} > {tol:.1e}")]
    Duhamel { estimate: f64, tol: f64 },
    #[error("Picard iteration did not converge in {0} passes")]
    MaxIters(usize),
    #[error("bound ratio diverges under refinement: {0}")]
    BoundViolated(String),
}

pub type Result<T> = std::result::Result<T, Error>;
