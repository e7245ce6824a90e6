use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("ray at phi={phi} never leaves the level set w={level} within horizon {horizon}")]
    NoCrossing { phi: f64, level: f64, horizon: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("zeta is non-positive at phi index {phi_index}, level index {level_index}")]
    NonPositiveZeta { phi_index: usize, level_index: usize },

    #[error("distance {distance:e} between distinct regions is below the singular threshold")]
    SingularDistance { distance: f64 },

    #[error("contour field became multivalued at t={t} (phi index {phi_index}, level index {level_index}): {reason}")]
    MultivaluedContour {
        t: f64,
        phi_index: usize,
        level_index: usize,
        reason: String,
    },

    #[error("alignment equation did not converge after {iterations} iterations at phi={phi}")]
    NoConvergence { phi: f64, iterations: usize },

    #[error("alignment branch jumped by {jump} between consecutive nodes at phi={phi}")]
    BranchJump { phi: f64, jump: f64 },

    #[error("lost continuity of the alignment branch")]
    ThetaBranchLoss,

    #[error("base radius R(phi) is not centrally symmetric (max mismatch {mismatch:e})")]
    AsymmetricBase { mismatch: f64 },

    #[error("CFL number {cfl} exceeds 0.5")]
    CflViolation { cfl: f64 },

    #[error("point vortices {i} and {j} came within {distance:e}")]
    CloseEncounter { i: usize, j: usize, distance: f64 },

    #[error("level {0} is outside the stored range")]
    LevelOutOfRange(f64),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
