//! Metric learning across heterogeneous domains.
//!
//! A source domain (fully labeled) and a target domain (few labels, many
//! unlabeled samples) live in feature spaces of different dimension. Both are
//! mapped into an implicit common space whose squared distance is the quadratic
//! form `zᵀ M z` with `z = [x; -y]` and `M` positive semi-definite. `M` is
//! learned by cyclic Bregman projections under a LogDet regularizer, subject to
//! slack-bounded pair constraints (posterior alignment) and a bound on the
//! linear-kernel maximum mean discrepancy (prior alignment).
//!
//! The crate is `no_std` and needs only `alloc`. File formats, toy data and the
//! command-line front end live in the companion `mlhd` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod baselines;
mod error;
pub mod eval;
pub mod kernel;
pub mod linalg;
pub mod metric;
pub mod solver;

pub use error::{Error, ErrorKind, Result};
pub use linalg::{EigenPair, Matrix, SymMatrix};
pub use metric::{
    Bound, ConstraintOrientation, ConstraintSet, DomainData, Label, MetricModel, PairConstraint, Relation,
};
pub use solver::{FitReport, SolverConfig, SolverState};
