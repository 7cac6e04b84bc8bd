//! Finite-support problems, sampling, and risk minimization over linear
//! models `f(x) = w . phi(x)`.
//!
//! The true risk and the empirical risk share one weighted objective, so
//! [`true_risk_minimizer`] and [`empirical_risk_minimizer`] run the same
//! solvers: weighted least squares for `sq`, damped Newton for `log`,
//! gradient descent for `sqh`. Excess risks and tail probabilities are exact
//! sums over the support.

mod model;
mod problem;
pub mod solver;

pub use model::{
    empirical_risk_minimizer, empirical_risk_minimizer_with, estimate_eta, exact_excess_risk,
    exact_l1_error, exact_tail_probability, fit_counts, true_risk_minimizer, true_risk_minimizer_with,
    FitOptions, FittedModel, FITTABLE,
};
pub use problem::{sample, sample_counts, DiscreteProblem, FeatureMap, LabeledSample, SupportPoint, MASS_TOL};
pub use solver::{SolverReport, SqMode};
