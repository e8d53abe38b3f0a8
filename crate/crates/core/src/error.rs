use alloc::string::String;
use alloc::vec::Vec;

use crate::numerics::C64;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{routine} did not converge after {iterations} iterations")]
    NoConvergence {
        routine: &'static str,
        iterations: usize,
    },
    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid subarray selection: {0}")]
    InvalidSelection(String),
    #[error("unsupported constellation order {0}")]
    UnsupportedModulation(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(
        "artificial-noise null space is trivial: rank(H') = {rank} with {n_t} selected subarrays (projector norm {mu:e})"
    )]
    DegenerateProjector { rank: usize, n_t: usize, mu: f64 },
    #[error("index {index} out of range (limit {limit})")]
    OutOfRange { index: usize, limit: usize },
    #[error("SDP solver hit {iterations} iterations (primal residual {primal_residual:e}, dual residual {dual_residual:e}, gap {gap:e})")]
    SdpMaxIterations {
        iterations: usize,
        primal_residual: f64,
        dual_residual: f64,
        gap: f64,
        best: alloc::boxed::Box<crate::sdp::SdpSolution>,
    },
    #[error("SDP is {0} infeasible")]
    SdpInfeasible(&'static str),
    #[error("SDP problem shape not supported: {0}")]
    SdpUnsupported(&'static str),
    #[error("ADMM block ({m}, {m_prime}) failed: {source}")]
    AdmmBlock {
        m: usize,
        m_prime: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
    #[error("ADMM did not reach consensus in {iterations} outer iterations")]
    AdmmMaxIterations {
        iterations: usize,
        residual_history: Vec<f64>,
    },
    #[error("non-finite objective in {stage}")]
    NonFinite {
        stage: &'static str,
        iterate: Vec<C64>,
    },
    #[error("every candidate subset has a degenerate AN projector")]
    AllSubsetsDegenerate,
    #[error("no FLOP model for {0}")]
    UnsupportedMethod(&'static str),
}
