use serde::{Deserialize, Serialize};

use crate::erm::{estimate_eta, exact_excess_risk, true_risk_minimizer, DiscreteProblem, FeatureMap, FittedModel};
use crate::error::{CpeError, Result};
use crate::loss::{composite, CompositeLoss};
use crate::numeric;
use crate::properness::bregman_divergence;

/// Required agreement between the fitted and the oracle `eta_hat`.
pub const ORACLE_TOL: f64 = 1e-6;
const ORACLE_SWEEPS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MisspecPoint {
    pub x: Vec<f64>,
    pub p: f64,
    pub eta: f64,
    pub eta_hat: f64,
    pub oracle_eta_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MisspecReport {
    pub loss: String,
    pub feature_map: FeatureMap,
    pub weights: Vec<f64>,
    pub oracle_weights: Vec<f64>,
    pub points: Vec<MisspecPoint>,
    /// Excess risk of the restricted true-risk minimizer.
    pub excess_floor: f64,
    /// `sum_i p_i D(eta_i, q_i)` at the oracle's projection.
    pub bregman_floor: f64,
    pub max_disagreement: f64,
    pub agrees: bool,
    pub well_specified: bool,
}

/// `sum_i p_i D(eta_i, psi^-1(w . phi(x_i)))`, infinite where `D` is undefined.
fn projection_objective(cl: &CompositeLoss, problem: &DiscreteProblem, fm: FeatureMap, w: &[f64]) -> f64 {
    problem.support().iter().try_fold(0.0, |acc, pt| {
        let v: f64 = fm.apply(&pt.x).iter().zip(w).map(|(a, b)| a * b).sum();
        let q = cl.estimate(v).ok()?.value();
        Some(acc + pt.p * bregman_divergence(cl, pt.eta, q).ok()?)
    })
    .unwrap_or(f64::INFINITY)
}

/// Minimizes the projection objective directly, by cyclic golden-section
/// searches over single coordinates, without touching the ERM solvers.
pub fn bregman_projection(cl: &CompositeLoss, problem: &DiscreteProblem, fm: FeatureMap) -> Result<Vec<f64>> {
    let dim = fm.dim(problem.input_dim());
    let mut w = vec![0.0; dim];
    for sweep in 0..ORACLE_SWEEPS {
        let mut moved = 0.0f64;
        for k in 0..dim {
            let along = |t: f64| {
                let mut trial = w.clone();
                trial[k] = t;
                projection_objective(cl, problem, fm, &trial)
            };
            let (a, b) = numeric::bracket_convex(along, f64::NEG_INFINITY, f64::INFINITY);
            let m = numeric::golden_section(along, a, b, 1e-13, 2_000)?;
            if m.value <= along(w[k]) {
                moved = moved.max((m.x - w[k]).abs());
                w[k] = m.x;
            }
        }
        if moved <= 1e-11 * (1.0 + w.iter().fold(0.0f64, |s, x| s.max(x.abs()))) {
            return Ok(w);
        }
        if sweep + 1 == ORACLE_SWEEPS {
            return Err(CpeError::NonConvergence {
                what: "Bregman projection oracle",
                iterations: ORACLE_SWEEPS,
                achieved: moved,
                target: 1e-11,
            });
        }
    }
    Ok(w)
}

/// Fits the true-risk minimizer under a restricted feature map and compares
/// its `eta_hat` with the Bregman projection of `eta` onto the same class.
pub fn run_misspecification(
    problem: &DiscreteProblem,
    loss_name: &str,
    restricted: FeatureMap,
) -> Result<MisspecReport> {
    let cl = composite(loss_name)?;
    let restricted_problem = problem.with_feature_map(restricted);
    let fit: FittedModel = true_risk_minimizer(&restricted_problem, loss_name)?;
    let oracle_w = bregman_projection(&cl, problem, restricted)?;
    let oracle = FittedModel::new(oracle_w.clone(), loss_name, restricted)?;

    let points = problem
        .support()
        .iter()
        .map(|pt| {
            Ok(MisspecPoint {
                x: pt.x.clone(),
                p: pt.p,
                eta: pt.eta,
                eta_hat: estimate_eta(&fit, &pt.x)?.value(),
                oracle_eta_hat: estimate_eta(&oracle, &pt.x)?.value(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_disagreement = points
        .iter()
        .map(|p| (p.eta_hat - p.oracle_eta_hat).abs())
        .fold(0.0, f64::max);
    let excess_floor = exact_excess_risk(&restricted_problem, &fit)?;
    Ok(MisspecReport {
        loss: loss_name.to_string(),
        feature_map: restricted,
        weights: fit.weights.clone(),
        oracle_weights: oracle_w.clone(),
        bregman_floor: projection_objective(&cl, problem, restricted, &oracle_w),
        excess_floor,
        agrees: max_disagreement <= ORACLE_TOL,
        max_disagreement,
        well_specified: excess_floor <= super::convergence::WELL_SPECIFIED_TOL,
        points,
    })
}
