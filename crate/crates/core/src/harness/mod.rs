//! End-to-end experiments: convergence of ERM estimates with the Markov
//! tail check, Bregman projection under misspecification, and the
//! three-point squared vs squared-hinge reproduction.

pub mod convergence;
pub mod misspec;
pub mod repro;
pub mod report;

use crate::erm::{DiscreteProblem, FeatureMap, SupportPoint};
use crate::numeric::sigmoid;

pub use convergence::{derive_seed, run_convergence, ConvergenceConfig, ConvergenceReport, SizeSummary, TailRow};
pub use misspec::{bregman_projection, run_misspecification, MisspecPoint, MisspecReport};
pub use repro::{three_point_reproduction, Branch, ReproReport};
pub use report::{emit_report, render_report, write_atomic, Report, ReportFormat};

/// `x = (-1, 0, 3)`, `eta = (0, 1/3, 1)`, equal mass, affine features.
pub fn three_point_problem() -> DiscreteProblem {
    DiscreteProblem::uniform_1d(&[-1.0, 0.0, 3.0], &[0.0, 1.0 / 3.0, 1.0], FeatureMap::Affine)
        .expect("three-point problem is valid")
}

/// Weights `(slope, bias)` generating [`reference_log_problem`].
pub const REFERENCE_LOG_WEIGHTS: [f64; 2] = [0.75, -0.25];

/// A well-specified logistic problem: five equally likely points
/// `x = -2..=2` with `eta = sigmoid(0.75 x - 0.25)`.
pub fn reference_log_problem() -> DiscreteProblem {
    let support = (-2..=2)
        .map(|k| {
            let x = k as f64;
            SupportPoint {
                x: vec![x],
                p: 0.2,
                eta: sigmoid(REFERENCE_LOG_WEIGHTS[0] * x + REFERENCE_LOG_WEIGHTS[1]),
            }
        })
        .collect();
    DiscreteProblem::new(support, FeatureMap::Affine).expect("reference problem is valid")
}

/// `x = (-1, 0, 1)`, `eta = (0.2, 0.5, 0.8)`, equal mass: not constant, so
/// constant models are misspecified.
pub fn misspecified_reference_problem() -> DiscreteProblem {
    DiscreteProblem::uniform_1d(&[-1.0, 0.0, 1.0], &[0.2, 0.5, 0.8], FeatureMap::Affine)
        .expect("three-point problem is valid")
}
