use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{CpeError, Result};
use crate::loss::{composite, lookup, BuiltinLoss, CompositeLoss, LossSpec, Probability};

use super::problem::{DiscreteProblem, FeatureMap, LabeledSample};
use super::solver::{self, SolverReport, SqMode, WeightedDesign};

/// Losses the ERM solvers handle.
pub const FITTABLE: [&str; 3] = ["sq", "log", "sqh"];

/// A linear model `x -> w . phi(x)` fitted under a catalog loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub weights: Vec<f64>,
    #[serde(rename = "loss")]
    pub loss_name: String,
    pub feature_map: FeatureMap,
    #[serde(default, skip_serializing_if = "is_default_mode")]
    pub sq_mode: SqMode,
    #[serde(default)]
    pub solver_report: SolverReport,
}

fn is_default_mode(mode: &SqMode) -> bool {
    *mode == SqMode::default()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FitOptions {
    pub sq_mode: SqMode,
}

impl FittedModel {
    pub fn new(weights: Vec<f64>, loss_name: &str, feature_map: FeatureMap) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(CpeError::invalid("model weights must be finite"));
        }
        Ok(FittedModel {
            weights,
            loss_name: loss_name.to_string(),
            feature_map,
            sq_mode: SqMode::default(),
            solver_report: SolverReport::default(),
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: FittedModel = serde_json::from_str(text).map_err(|source| CpeError::Json {
            context: "model".into(),
            source,
        })?;
        Self::new(model.weights.clone(), &model.loss_name, model.feature_map)?;
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CpeError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// The composite loss whose link inverts this model's predictions.
    pub fn composite(&self) -> Result<CompositeLoss> {
        composite(&self.loss_name)
    }

    /// `f(x) = w . phi(x)`.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let phi = self.feature_map.apply(x);
        if phi.len() != self.weights.len() {
            return Err(CpeError::invalid(format!(
                "model has {} weights but the {} features of x have dimension {}",
                self.weights.len(),
                self.feature_map.name(),
                phi.len()
            )));
        }
        Ok(phi.iter().zip(&self.weights).map(|(a, b)| a * b).sum())
    }
}

/// `eta_hat(x) = psi^-1(f(x))`.
pub fn estimate_eta(model: &FittedModel, x: &[f64]) -> Result<Probability> {
    let cl = model.composite()?;
    cl.estimate(model.predict(x)?)
}

/// The loss on the space a linear model predicts into: the squared loss is
/// taken over the whole line so unconstrained fits can be scored.
fn scoring_loss(loss_name: &str) -> Result<LossSpec> {
    let loss = lookup(loss_name)?.loss().clone();
    Ok(match loss.as_builtin() {
        Some(BuiltinLoss::Squared) => LossSpec::squared_real_line(),
        _ => loss,
    })
}

/// `sum_i p_i Delta L(eta_i, f(x_i))`, against the pointwise Bayes risk.
pub fn exact_excess_risk(problem: &DiscreteProblem, model: &FittedModel) -> Result<f64> {
    let loss = scoring_loss(&model.loss_name)?;
    problem.support().iter().try_fold(0.0, |acc, pt| {
        Ok(acc + pt.p * loss.conditional_excess_risk(pt.eta, model.predict(&pt.x)?)?)
    })
}

/// `P(|eta(X) - eta_hat(X)| > eps)`, summed exactly over the support.
pub fn exact_tail_probability(problem: &DiscreteProblem, model: &FittedModel, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(CpeError::invalid(format!("eps {eps} must be positive")));
    }
    let cl = model.composite()?;
    problem.support().iter().try_fold(0.0, |acc, pt| {
        let eta_hat = cl.estimate(model.predict(&pt.x)?)?.value();
        Ok(if (pt.eta - eta_hat).abs() > eps { acc + pt.p } else { acc })
    })
}

/// `E_X |eta(X) - eta_hat(X)|`.
pub fn exact_l1_error(problem: &DiscreteProblem, model: &FittedModel) -> Result<f64> {
    let cl = model.composite()?;
    problem.support().iter().try_fold(0.0, |acc, pt| {
        let eta_hat = cl.estimate(model.predict(&pt.x)?)?.value();
        Ok(acc + pt.p * (pt.eta - eta_hat).abs())
    })
}

fn check_fittable(loss_name: &str) -> Result<()> {
    composite(loss_name)?;
    if !FITTABLE.contains(&loss_name) {
        return Err(CpeError::UnsupportedLoss {
            loss: loss_name.to_string(),
            operation: "empirical risk minimization",
        });
    }
    Ok(())
}

fn fit_design(
    design: &WeightedDesign,
    loss_name: &str,
    feature_map: FeatureMap,
    opts: FitOptions,
) -> Result<FittedModel> {
    let (w, report) = match loss_name {
        "sq" => match opts.sq_mode {
            SqMode::Truncated => solver::solve_squared(design)?,
            SqMode::Constrained => solver::solve_squared_constrained(design)?,
        },
        "log" => solver::solve_logistic(design)?,
        "sqh" => solver::solve_squared_hinge(design)?,
        other => {
            return Err(CpeError::UnsupportedLoss {
                loss: other.to_string(),
                operation: "empirical risk minimization",
            })
        }
    };
    finish(w, loss_name, feature_map, opts, report)
}

fn finish(
    w: DVector<f64>,
    loss_name: &str,
    feature_map: FeatureMap,
    opts: FitOptions,
    report: SolverReport,
) -> Result<FittedModel> {
    if w.iter().any(|x| !x.is_finite()) {
        return Err(CpeError::Numeric(format!("{loss_name} solver returned non-finite weights")));
    }
    Ok(FittedModel {
        weights: w.iter().copied().collect(),
        loss_name: loss_name.to_string(),
        feature_map,
        sq_mode: if loss_name == "sq" { opts.sq_mode } else { SqMode::default() },
        solver_report: report,
    })
}

/// `f_0 = argmin_w sum_i p_i L(eta_i, w . phi(x_i))`.
pub fn true_risk_minimizer(problem: &DiscreteProblem, loss_name: &str) -> Result<FittedModel> {
    true_risk_minimizer_with(problem, loss_name, FitOptions::default())
}

pub fn true_risk_minimizer_with(
    problem: &DiscreteProblem,
    loss_name: &str,
    opts: FitOptions,
) -> Result<FittedModel> {
    check_fittable(loss_name)?;
    let support = problem.support();
    if problem.feature_dim() > support.len() {
        return Err(CpeError::invalid(format!(
            "feature dimension {} exceeds the support size {}",
            problem.feature_dim(),
            support.len()
        )));
    }
    let fm = problem.feature_map();
    let rows: Vec<Vec<f64>> = support.iter().map(|pt| fm.apply(&pt.x)).collect();
    let design = WeightedDesign::new(
        &rows,
        support.iter().map(|pt| pt.p * pt.eta).collect(),
        support.iter().map(|pt| pt.p * (1.0 - pt.eta)).collect(),
    )?;
    fit_design(&design, loss_name, fm, opts)
}

/// `f_n = argmin_w (1/n) sum_i l(y_i, w . phi(x_i))`.
pub fn empirical_risk_minimizer(
    sample: &LabeledSample,
    loss_name: &str,
    feature_map: FeatureMap,
) -> Result<FittedModel> {
    empirical_risk_minimizer_with(sample, loss_name, feature_map, FitOptions::default())
}

pub fn empirical_risk_minimizer_with(
    sample: &LabeledSample,
    loss_name: &str,
    feature_map: FeatureMap,
    opts: FitOptions,
) -> Result<FittedModel> {
    check_fittable(loss_name)?;
    if sample.is_empty() {
        return Err(CpeError::invalid("sample is empty"));
    }
    // group repeated inputs, in order of first appearance
    let mut xs: Vec<&[f64]> = Vec::new();
    let mut counts: Vec<(usize, usize)> = Vec::new();
    for (x, y) in &sample.pairs {
        let k = match xs.iter().position(|seen| *seen == x.as_slice()) {
            Some(k) => k,
            None => {
                xs.push(x);
                counts.push((0, 0));
                xs.len() - 1
            }
        };
        if *y == 1 {
            counts[k].0 += 1;
        } else {
            counts[k].1 += 1;
        }
    }
    let n = sample.len() as f64;
    let rows: Vec<Vec<f64>> = xs.iter().map(|x| feature_map.apply(x)).collect();
    let design = WeightedDesign::new(
        &rows,
        counts.iter().map(|c| c.0 as f64 / n).collect(),
        counts.iter().map(|c| c.1 as f64 / n).collect(),
    )?;
    fit_design(&design, loss_name, feature_map, opts)
}

/// ERM from per-support-point label counts, equivalent to
/// [`empirical_risk_minimizer`] on the corresponding sample.
pub fn fit_counts(
    problem: &DiscreteProblem,
    counts: &[(usize, usize)],
    loss_name: &str,
    opts: FitOptions,
) -> Result<FittedModel> {
    check_fittable(loss_name)?;
    let n: usize = counts.iter().map(|c| c.0 + c.1).sum();
    if n == 0 || counts.len() != problem.support().len() {
        return Err(CpeError::invalid("counts must be nonempty and match the support"));
    }
    let fm = problem.feature_map();
    let seen: Vec<usize> = (0..counts.len()).filter(|&i| counts[i].0 + counts[i].1 > 0).collect();
    let rows: Vec<Vec<f64>> = seen.iter().map(|&i| fm.apply(&problem.support()[i].x)).collect();
    let design = WeightedDesign::new(
        &rows,
        seen.iter().map(|&i| counts[i].0 as f64 / n as f64).collect(),
        seen.iter().map(|&i| counts[i].1 as f64 / n as f64).collect(),
    )?;
    fit_design(&design, loss_name, fm, opts)
}
