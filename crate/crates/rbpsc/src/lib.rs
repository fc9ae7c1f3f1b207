//! Solver and benchmarking toolkit for the restless bandit problem with
//! switching costs (RBPSC).
//!
//! `N` sites evolve as independent Markov chains; `M <= N` servers each occupy
//! one site per period, collecting active rewards where they sit and paying a
//! cost whenever they move. Unserved sites keep evolving under their passive
//! dynamics. Together with fictitious passive agents marking the unserved
//! sites, the server positions form a permutation of the sites, and an action
//! is the permutation the agents move to next.
//!
//! The crate provides:
//!
//! * [`instance`] — problem data, validation, random generation, file I/O,
//!   and the one-step reward/transition model;
//! * [`lp`] — a small sparse LP layer returning primal values, duals and
//!   reduced costs with residual certificates;
//! * [`exact`] — exact solution of small instances via the occupation-measure
//!   LP, plus value-iteration and policy-evaluation oracles;
//! * [`relaxation`] — the polynomial-size LP over first-order marginals of
//!   the occupation measure, with full dual extraction;
//! * [`policies`] — one-step lookahead, primal-dual and greedy policies, all
//!   reduced to linear assignment problems;
//! * [`simulate`] — seeded Monte-Carlo policy evaluation;
//! * [`bounds`] — dual-feasibility audits and the occupation-measure gap
//!   bound for the lookahead policy;
//! * [`harness`] — benchmark runner producing experiment tables as CSV.
//!
//! A quick tour (also the opening example of the guide in `book/`):
//!
//! ```
//! use rbpsc::instance::generate_random_instance;
//! use rbpsc::exact::solve_exact;
//! use rbpsc::relaxation::solve_relaxation;
//!
//! let inst = generate_random_instance(7, 3, 1, 2, 1.0, 1.0).unwrap();
//! let exact = solve_exact(&inst).unwrap();
//! let relax = solve_relaxation(&inst).unwrap();
//! // The relaxation upper-bounds the optimal discounted reward.
//! assert!(relax.objective >= exact.optimal_value - 1e-6);
//! ```

pub mod bounds;
pub mod exact;
pub mod harness;
pub mod instance;
pub mod lp;
pub mod perm;
pub mod policies;
pub mod relaxation;
pub mod simulate;

pub use instance::{ProblemInstance, SiteModel};
pub use perm::Permutation;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("size guard exceeded: {0}")]
    GuardExceeded(String),
    #[error("linear program {0}")]
    Lp(String),
    #[error("instance hash mismatch: relaxation solved on a different instance")]
    HashMismatch,
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
