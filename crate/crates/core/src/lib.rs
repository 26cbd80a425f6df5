//! Adaptive-mass optimal transport between nonnegative discrete measures.
//!
//! The adaptive problem minimizes `<plan, C>` over nonnegative plans whose
//! row sums stay below `mu` and column sums below `nu`. Costs may be
//! negative, and the transported mass is decided by the cost structure
//! instead of being fixed in advance.
//!
//! - [`exact`]: network simplex on the augmented balanced problem, with
//!   certified nonpositive dual potentials.
//! - [`entropic`]: log-domain Sinkhorn sweeps with potentials clipped at 0.
//! - [`baselines`]: full-mass and fixed-mass comparators.
//! - [`analysis`]: mass-allocation and duality certificates, c-transforms.
//! - [`alignment`]: small-scale partial domain alignment experiments.
//! - [`io`] and [`cli`]: text formats, JSON reports and the `aot` binary.

pub mod alignment;
pub mod analysis;
pub mod baselines;
pub mod cli;
pub mod entropic;
pub mod error;
pub mod exact;
pub mod io;
pub mod measures;
mod simplex;
pub mod toy;

pub use error::{AotError, Result};
pub use exact::solve_aot_exact;
pub use measures::{
    make_cost, make_measure, summarize_plan, CostMatrix, DiscreteMeasure, DualPotentials, MarginalReport,
    SolveReport, TransportPlan, DEFAULT_TOL,
};
pub use simplex::PIVOT_LIMIT_FACTOR;
