use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("inverse transform left an imaginary residue of {residue:e} (tolerance {tol:e})")]
    NonHermitianInput { residue: f64, tol: f64 },
    #[error("sampled function is not finite at flat index {index}")]
    NonFiniteSample { index: usize },
    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),
    #[error("padding factor {factor} does not map {points} points to an even lattice")]
    BadFactor { factor: String, points: usize },
    #[error("input mean {mean:e} exceeds the zero-mode tolerance {tol:e} (relative to rms)")]
    NonZeroMean { mean: f64, tol: f64 },
    #[error("inadmissible order: {0}")]
    InadmissibleOrder(String),
    #[error("order formula is not an integer for N={dim}, k={k}")]
    NotAdmissible { dim: usize, k: usize },
    #[error("Riesz factor vanishes numerically; ratio is undefined")]
    DegenerateRatio,
    #[error("direct convolution needs {cost:e} kernel evaluations, above the cap {cap:e}")]
    CostCapExceeded { cost: f64, cap: f64 },
    #[error("support radius {radius} exceeds the allowed margin {limit}")]
    SupportTooLarge { radius: f64, limit: f64 },
    #[error("Hessian index k={k} must satisfy 1 <= k <= {dim}")]
    BadK { k: usize, dim: usize },
    #[error("exponent p={0} must be >= 1")]
    BadP(f64),
    #[error("ball contains no grid points")]
    EmptyBall,
    #[error("cube side of {side} cells is below the minimum of 2")]
    CubeTooSmall { side: usize },
    #[error("invalid cube: {0}")]
    InvalidCube(String),
    #[error("invalid atom: {0}")]
    InvalidAtom(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("fixed-point iteration diverged after {iterations} iterations")]
    Diverged { iterations: usize },
    #[error("fixed-point iteration hit the iteration cap ({iterations})")]
    MaxIter { iterations: usize },
    #[error("point lies outside the convex set")]
    PointOutsideSet,
    #[error("point is farther than delta from every net center")]
    NotCovered,
    #[error("fixed-point finder stalled; best residual {best_residual:e}")]
    FinderStalled { best_residual: f64 },
}
