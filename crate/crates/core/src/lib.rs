//! Class-probability estimation through empirical risk minimization with
//! proper composite losses.
//!
//! - [`loss`]: partial losses, conditional risks, optimal sets `v*(eta)`,
//!   links with extended inverses, and the built-in catalog
//!   (`sq`, `log`, `sqh`, `hinge`, `zero-one`).
//! - [`properness`]: grid audits of properness, strictness and degeneracy,
//!   the disjoint-cover check, `delta(eps)` and modulus-of-continuity
//!   estimates, Bregman divergences.
//! - [`erm`]: finite-support problems, sampling, exact true-risk and
//!   empirical-risk minimizers for linear models, exact excess risk and tail
//!   probabilities.
//! - [`harness`]: convergence and misspecification experiments and the
//!   three-point squared vs squared-hinge reproduction.

pub mod erm;
pub mod error;
pub mod harness;
pub mod loss;
pub mod numeric;
pub mod properness;

pub use error::{CpeError, Result};
pub use loss::{
    catalog, composite, cpe_form, BuiltinLoss, CatalogEntry, CompositeLoss, LinkFunction, LossSpec,
    OptimalSet, PredictionSpace, Probability, SetKind,
};
