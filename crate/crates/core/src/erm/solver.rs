//! Minimizers of `sum_i a_i l(+1, w . phi_i) + b_i l(-1, w . phi_i)` over `w`.
//!
//! The same weighted objective covers the true risk (`a_i = p_i eta_i`,
//! `b_i = p_i (1 - eta_i)`) and the empirical risk (`a_i`, `b_i` the label
//! frequencies of point `i` in the sample).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CpeError, Result};
use crate::numeric::{sigmoid, softplus};

/// Stopping tolerance on the gradient norm (normal-equation residual for sq).
pub const GRADIENT_TOL: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 100_000;
/// Logistic weights stop growing at this norm on separable data.
pub const WEIGHT_NORM_CAP: f64 = 1e3;
/// Relative singular-value cutoff below which a design counts as singular.
pub const RANK_TOL: f64 = 1e-12;
/// Gradient steps between active-set Newton attempts for the squared hinge.
const NEWTON_EVERY: usize = 20;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SolverReport {
    pub iterations: usize,
    /// Gradient norm at the returned weights; for sq, the normal-equation residual.
    pub final_gradient_norm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// How the squared loss treats its `[-1, 1]` prediction space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SqMode {
    /// Unconstrained least squares; predictions are clamped only when inverted.
    #[default]
    Truncated,
    /// Least squares subject to `|w . phi_i| <= 1` at every design point.
    Constrained,
}

/// Rows `phi_i` with positive and negative label weights.
#[derive(Debug, Clone)]
pub struct WeightedDesign {
    pub phi: DMatrix<f64>,
    pub pos: Vec<f64>,
    pub neg: Vec<f64>,
}

impl WeightedDesign {
    pub fn new(rows: &[Vec<f64>], pos: Vec<f64>, neg: Vec<f64>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || d == 0 || rows.iter().any(|r| r.len() != d) {
            return Err(CpeError::invalid("design needs at least one row of a common positive width"));
        }
        if pos.len() != rows.len() || neg.len() != rows.len() {
            return Err(CpeError::invalid("label weights must match the design rows"));
        }
        let phi = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
        Ok(WeightedDesign { phi, pos, neg })
    }

    pub fn dim(&self) -> usize {
        self.phi.ncols()
    }

    pub fn predictions(&self, w: &DVector<f64>) -> DVector<f64> {
        &self.phi * w
    }

    fn total(&self, i: usize) -> f64 {
        self.pos[i] + self.neg[i]
    }

    /// `Phi^T diag(c) Phi` for per-row weights `c`.
    fn gram(&self, c: impl Fn(usize) -> f64) -> DMatrix<f64> {
        let d = self.dim();
        let mut g = DMatrix::zeros(d, d);
        for i in 0..self.phi.nrows() {
            let ci = c(i);
            if ci == 0.0 {
                continue;
            }
            let row = self.phi.row(i);
            g += ci * row.transpose() * row;
        }
        g
    }

    /// `Phi^T r` for per-row scalars `r`.
    fn pullback(&self, r: impl Fn(usize) -> f64) -> DVector<f64> {
        let mut g = DVector::zeros(self.dim());
        for i in 0..self.phi.nrows() {
            let ri = r(i);
            if ri != 0.0 {
                g += ri * self.phi.row(i).transpose();
            }
        }
        g
    }
}

fn singular_check(m: &DMatrix<f64>) -> Result<()> {
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if !(max > 0.0) || min <= RANK_TOL * max {
        return Err(CpeError::RankDeficient {
            dim: m.nrows(),
            pivot: if max > 0.0 { min / max } else { 0.0 },
        });
    }
    Ok(())
}

/// Weighted least squares on targets `(a - b) / (a + b)` with weights `a + b`:
/// `a (1 - v)^2 + b (1 + v)^2` equals `(a + b) (v - t)^2` plus a constant.
pub fn solve_squared(design: &WeightedDesign) -> Result<(DVector<f64>, SolverReport)> {
    let gram = design.gram(|i| design.total(i));
    singular_check(&gram)?;
    let target = |i: usize| {
        let c = design.total(i);
        if c == 0.0 {
            0.0
        } else {
            design.pos[i] - design.neg[i]
        }
    };
    let rhs = design.pullback(target);
    let chol = gram.clone().cholesky().ok_or(CpeError::RankDeficient {
        dim: gram.nrows(),
        pivot: 0.0,
    })?;
    let mut w = chol.solve(&rhs);
    let residual = |w: &DVector<f64>| &gram * w - &rhs;
    // a couple of refinement passes tighten the normal equations on poorly scaled designs
    for _ in 0..3 {
        let r = residual(&w);
        if r.norm() <= GRADIENT_TOL {
            break;
        }
        w -= chol.solve(&r);
    }
    let norm = residual(&w).norm();
    if !(norm <= GRADIENT_TOL) {
        return Err(CpeError::NonConvergence {
            what: "weighted least squares",
            iterations: 4,
            achieved: norm,
            target: GRADIENT_TOL,
        });
    }
    Ok((
        w,
        SolverReport {
            iterations: 1,
            final_gradient_norm: norm,
            warning: None,
        },
    ))
}

/// Least squares subject to `|w . phi_i| <= 1`, by Hildreth's dual coordinate ascent.
pub fn solve_squared_constrained(design: &WeightedDesign) -> Result<(DVector<f64>, SolverReport)> {
    let (free, free_report) = solve_squared(design)?;
    let v = design.predictions(&free);
    if v.iter().all(|x| x.abs() <= 1.0) {
        return Ok((free, free_report));
    }
    // minimize w'Qw/2 - q'w subject to G w <= 1 with G = [Phi; -Phi]
    let q_mat = 2.0 * design.gram(|i| design.total(i));
    let q_inv = q_mat
        .clone()
        .try_inverse()
        .ok_or(CpeError::RankDeficient { dim: q_mat.nrows(), pivot: 0.0 })?;
    let m = design.phi.nrows();
    let rows: Vec<DVector<f64>> = (0..2 * m)
        .map(|k| {
            let r = design.phi.row(k % m).transpose();
            if k < m {
                r
            } else {
                -r
            }
        })
        .collect();
    let directions: Vec<DVector<f64>> = rows.iter().map(|g| &q_inv * g).collect();
    let curvature: Vec<f64> = rows.iter().zip(&directions).map(|(g, d)| g.dot(d)).collect();
    let mut lambda = vec![0.0; 2 * m];
    let mut w = free;
    let mut sweeps = 0;
    loop {
        let mut change = 0.0f64;
        for k in 0..2 * m {
            if curvature[k] <= 0.0 {
                continue;
            }
            let step = (rows[k].dot(&w) - 1.0) / curvature[k];
            let next = (lambda[k] + step).max(0.0);
            let delta = next - lambda[k];
            if delta != 0.0 {
                w -= delta * &directions[k];
                lambda[k] = next;
                change = change.max(delta.abs());
            }
        }
        sweeps += 1;
        let violation = rows.iter().map(|g| g.dot(&w) - 1.0).fold(0.0f64, f64::max);
        if change <= 1e-15 || (violation <= 1e-13 && change <= 1e-13) {
            break;
        }
        if sweeps >= MAX_ITERATIONS {
            return Err(CpeError::NonConvergence {
                what: "constrained least squares",
                iterations: sweeps,
                achieved: violation.max(change),
                target: 1e-13,
            });
        }
    }
    // stationarity of the Lagrangian
    let rhs = 2.0 * design.pullback(|i| design.pos[i] - design.neg[i]);
    let mut kkt = &q_mat * &w - rhs;
    for (g, l) in rows.iter().zip(&lambda) {
        kkt += *l * g;
    }
    Ok((
        w,
        SolverReport {
            iterations: sweeps,
            final_gradient_norm: kkt.norm(),
            warning: None,
        },
    ))
}

fn logistic_objective(design: &WeightedDesign, w: &DVector<f64>) -> f64 {
    design
        .predictions(w)
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let mut s = 0.0;
            if design.pos[i] > 0.0 {
                s += design.pos[i] * softplus(-v);
            }
            if design.neg[i] > 0.0 {
                s += design.neg[i] * softplus(v);
            }
            s
        })
        .sum()
}

fn logistic_gradient(design: &WeightedDesign, w: &DVector<f64>) -> DVector<f64> {
    let v = design.predictions(w);
    design.pullback(|i| design.total(i) * sigmoid(v[i]) - design.pos[i])
}

fn logistic_hessian(design: &WeightedDesign, w: &DVector<f64>) -> DMatrix<f64> {
    let v = design.predictions(w);
    design.gram(|i| design.total(i) * sigmoid(v[i]) * sigmoid(-v[i]))
}

/// Solves `(H + mu I) d = -g`, raising `mu` until the factorization succeeds.
fn damped_newton_direction(h: &DMatrix<f64>, g: &DVector<f64>) -> DVector<f64> {
    let d = h.nrows();
    let scale = h.diagonal().amax().max(f64::MIN_POSITIVE);
    let mut mu = 0.0;
    loop {
        let shifted = h + DMatrix::identity(d, d) * mu;
        if let Some(chol) = shifted.cholesky() {
            let step = chol.solve(&(-g));
            if step.iter().all(|x| x.is_finite()) {
                return step;
            }
        }
        mu = if mu == 0.0 { 1e-14 * scale } else { mu * 10.0 };
        if mu > 1e6 * scale {
            return -g.clone();
        }
    }
}

/// Damped Newton with Armijo backtracking. On separable data the weights
/// grow without bound; they stop at norm 10^3 with a warning.
pub fn solve_logistic(design: &WeightedDesign) -> Result<(DVector<f64>, SolverReport)> {
    let mut w = DVector::zeros(design.dim());
    let mut f = logistic_objective(design, &w);
    let mut g = logistic_gradient(design, &w);
    let mut iterations = 0;
    while g.norm() > GRADIENT_TOL {
        if iterations >= MAX_ITERATIONS {
            return Err(CpeError::NonConvergence {
                what: "logistic Newton solver",
                iterations,
                achieved: g.norm(),
                target: GRADIENT_TOL,
            });
        }
        iterations += 1;
        let h = logistic_hessian(design, &w);
        let d = damped_newton_direction(&h, &g);
        let slope = g.dot(&d);
        let mut t = 1.0;
        let mut accepted = None;
        // below this decrement the objective cannot resolve an Armijo test
        let resolvable = -slope > 1e-12 * (1.0 + f.abs());
        while resolvable && t > 1e-20 {
            let trial = &w + t * &d;
            let ft = logistic_objective(design, &trial);
            if ft <= f + 1e-4 * t * slope {
                accepted = Some((trial, ft));
                break;
            }
            t *= 0.5;
        }
        let (trial, ft) = match accepted {
            Some(x) => x,
            None => {
                // the objective has stopped resolving the decrease: take the
                // full step if it still shrinks the gradient
                let trial = &w + &d;
                if logistic_gradient(design, &trial).norm() >= g.norm() {
                    return Err(CpeError::NonConvergence {
                        what: "logistic Newton solver",
                        iterations,
                        achieved: g.norm(),
                        target: GRADIENT_TOL,
                    });
                }
                let ft = logistic_objective(design, &trial);
                (trial, ft)
            }
        };
        if trial.norm() > WEIGHT_NORM_CAP {
            let capped = &trial * (WEIGHT_NORM_CAP / trial.norm());
            let gn = logistic_gradient(design, &capped).norm();
            return Ok((
                capped,
                SolverReport {
                    iterations,
                    final_gradient_norm: gn,
                    warning: Some(format!(
                        "weight norm reached the cap {WEIGHT_NORM_CAP} (separable sample); gradient norm {gn:.3e}"
                    )),
                },
            ));
        }
        w = trial;
        f = ft;
        g = logistic_gradient(design, &w);
    }
    Ok((
        w,
        SolverReport {
            iterations,
            final_gradient_norm: g.norm(),
            warning: None,
        },
    ))
}

fn hinge_parts(design: &WeightedDesign, w: &DVector<f64>) -> (f64, DVector<f64>, DVector<f64>) {
    let v = design.predictions(w);
    let mut f = 0.0;
    let slopes = DVector::from_fn(v.len(), |i, _| {
        let up = (1.0 - v[i]).max(0.0);
        let down = (1.0 + v[i]).max(0.0);
        f += design.pos[i] * up * up + design.neg[i] * down * down;
        2.0 * (design.neg[i] * down - design.pos[i] * up)
    });
    let g = design.pullback(|i| slopes[i]);
    (f, g, v)
}

/// Exact minimizer of the quadratic that agrees with the squared hinge
/// objective on the current activity pattern (least-norm step when singular).
fn active_set_step(design: &WeightedDesign, v: &DVector<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    let h = 2.0 * design.gram(|i| {
        let a = if v[i] < 1.0 { design.pos[i] } else { 0.0 };
        let b = if v[i] > -1.0 { design.neg[i] } else { 0.0 };
        a + b
    });
    let svd = h.svd(true, true);
    let cutoff = RANK_TOL * svd.singular_values.max();
    svd.solve(&(-g), cutoff).ok()
}

/// Gradient descent with step `1 / L`, `L = 2 lambda_max(Phi^T diag(a + b) Phi)`,
/// interleaved with active-set Newton steps that are kept only when they
/// lower the objective.
pub fn solve_squared_hinge(design: &WeightedDesign) -> Result<(DVector<f64>, SolverReport)> {
    let lipschitz = 2.0 * design.gram(|i| design.total(i)).symmetric_eigenvalues().max();
    if !(lipschitz > 0.0) {
        return Err(CpeError::RankDeficient {
            dim: design.dim(),
            pivot: 0.0,
        });
    }
    let step = 1.0 / lipschitz;
    let mut w = DVector::zeros(design.dim());
    let (mut f, mut g, mut v) = hinge_parts(design, &w);
    let mut iterations = 0;
    while g.norm() > GRADIENT_TOL {
        if iterations >= MAX_ITERATIONS {
            return Err(CpeError::NonConvergence {
                what: "squared-hinge gradient descent",
                iterations,
                achieved: g.norm(),
                target: GRADIENT_TOL,
            });
        }
        iterations += 1;
        if iterations % NEWTON_EVERY == 0 {
            if let Some(d) = active_set_step(design, &v, &g) {
                let mut t = 1.0;
                while t > 1e-6 {
                    let trial = &w + t * &d;
                    let (ft, gt, _) = hinge_parts(design, &trial);
                    if ft <= f && (ft < f || gt.norm() < g.norm()) {
                        w = trial;
                        g = gt;
                        break;
                    }
                    t *= 0.5;
                }
                if g.norm() <= GRADIENT_TOL {
                    break;
                }
            }
        }
        w -= step * &g;
        (f, g, v) = hinge_parts(design, &w);
    }
    Ok((
        w,
        SolverReport {
            iterations,
            final_gradient_norm: g.norm(),
            warning: None,
        },
    ))
}
