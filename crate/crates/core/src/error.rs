use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid loop: {0}")]
    InvalidPath(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("path touches the origin at node {index}")]
    PathTouchesOrigin { index: usize },

    #[error("angular increment {increment:.3} rad between nodes {index} and {next} is not below pi; refine the grid")]
    AmbiguousWinding { index: usize, next: usize, increment: f64 },

    #[error("path has zero kinetic energy")]
    ZeroVelocity,

    #[error("growth bound violated at t = {t}, x = ({x1}, {x2}): |U|/(1+|x|^alpha) = {ratio} > C = {bound}")]
    GrowthViolation { t: f64, x1: f64, x2: f64, ratio: f64, bound: f64 },

    #[error("grid node {index} sits exactly at the origin; enable collision-aware quadrature")]
    ExactZeroSample { index: usize },

    #[error("node {index} has |x| = {radius:e}, inside the safe radius {safe_radius:e}")]
    TooCloseToCollision { index: usize, radius: f64, safe_radius: f64 },

    #[error("path is outside the constraint class (collision-free with winding zero)")]
    NotInConstraintClass,

    #[error("no start converged: best gradient norm {best_grad_norm:e} after {iterations} iterations")]
    NoConvergence { best_grad_norm: f64, iterations: usize },

    #[error("line search step underflowed while every trial step changed the winding number")]
    WindingLost,

    #[error("endpoints are antipodal; the two-arc structure is degenerate")]
    AntipodalEndpoints,

    #[error("shooting failed for the {side} arc: {reason}")]
    ShootingFailed { side: &'static str, reason: String },

    #[error("suspected collisions at t = {t1} and t = {t2} are closer than 10 grid cells")]
    OverlappingEvents { t1: f64, t2: f64 },

    #[error("delta = {delta} needs a half-window of {needed}, event window is only {available}")]
    WindowExceeded { delta: f64, needed: f64, available: f64 },

    #[error("ingoing and outgoing directions coincide (gap {gap:e}); surgery does not apply")]
    CoincidentDirections { gap: f64 },

    #[error("integration failed: {0}")]
    Integration(String),
}
