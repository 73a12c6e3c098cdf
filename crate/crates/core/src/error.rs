use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// `I - Q` is singular or the chain has a transient class that is never left.
    #[error("chain is not absorbing: {0}")]
    NonAbsorbing(String),

    #[error("eigen-iteration did not converge within {iterations} iterations (last change {change:e})")]
    EigenNonConvergence { iterations: usize, change: f64 },

    #[error("survival mass underflow at tau = {tau}")]
    SurvivalUnderflow { tau: usize },

    #[error("grid too coarse: n = {coarse} and n = {fine} disagree by {rel_diff:e} (tolerance {tolerance:e})")]
    GridTooCoarse {
        coarse: usize,
        fine: usize,
        rel_diff: f64,
        tolerance: f64,
    },

    #[error("bracket [{lo}, {hi}] does not straddle the target (ARL {arl_lo} .. {arl_hi})")]
    BracketFailure {
        lo: f64,
        hi: f64,
        arl_lo: f64,
        arl_hi: f64,
    },

    #[error("in-control ARL is not monotone in the free parameter near {at}")]
    NonMonotone { at: f64 },

    #[error("calibration infeasible: {0}")]
    Infeasible(String),

    #[error("simulation starved: only {survivors} runs survived to tau = {tau}")]
    ConditioningStarvation { survivors: u64, tau: usize },

    /// A chain builder produced a state space that does not match the
    /// documented state count. Always a bug in this crate.
    #[error("internal construction error: {0}")]
    Construction(String),
}
