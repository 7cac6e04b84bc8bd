//! Grid audits of composite losses.
//!
//! A composite loss `(l, psi)` is proper and non-degenerate iff
//! `psi(eta)` lies in `v*(eta)` for every `eta`, and strictly proper iff in
//! addition no image point of `psi` lies in two different optimal sets. The
//! audits here check these conditions on a uniform `eta` grid, estimate the
//! excess-risk threshold `delta(eps)` and the modulus of continuity that
//! control the probability error, and evaluate the Bregman divergence
//! generated by `-L*_psi`.
//!
//! All sup/inf estimates are over uniform grids and report their step.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CpeError, Result};
use crate::loss::{clamp_excess, BuiltinLoss, CompositeLoss, LinkFunction, LossSpec, OptimalSet};
use crate::numeric;

/// Slack for comparing conditional risks that should be equal.
pub const RISK_TOL: f64 = 1e-12;
/// An excess risk below this counts as optimal.
pub const OPTIMALITY_TOL: f64 = 1e-9;
/// Refinement levels around `eta = 1/2` for the strong-properness constant.
pub const REFINEMENT_LEVELS: u32 = 3;

/// A uniform grid `i / n`, `i = 0..=n`, on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaGrid {
    n: usize,
}

impl EtaGrid {
    pub fn with_step(step: f64) -> Result<Self> {
        if !(step > 0.0 && step <= 0.5) {
            return Err(CpeError::invalid(format!("grid step {step} must lie in (0, 0.5]")));
        }
        let n = (1.0 / step).round().max(2.0) as usize;
        Ok(EtaGrid { n })
    }

    pub fn step(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn intervals(&self) -> usize {
        self.n
    }

    pub fn point(&self, i: usize) -> f64 {
        i as f64 / self.n as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..=self.n).map(|i| self.point(i)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    /// `L(eta1, psi(eta1)) > L(eta1, psi(eta2))`: `eta1` does not minimize `L_psi(eta1, .)`.
    Properness,
    /// No image point of `psi` is optimal at `eta1`.
    NonDegeneracy,
    /// `v` lies in `v*(eta1)`, `v*(eta2)` and the image of `psi`.
    Strictness,
    /// `v` belongs to no optimal set.
    Cover,
    /// `v` lies in both `v*(eta1)` and `v*(eta2)`.
    Disjointness,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub condition: Condition,
    pub eta1: f64,
    pub eta2: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaPoint {
    pub eps: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropernessReport {
    pub loss: String,
    pub link: String,
    pub grid_step: f64,
    pub is_proper: bool,
    pub is_strictly_proper: bool,
    pub is_degenerate: bool,
    pub witness: Option<Witness>,
    pub deltas: Vec<DeltaPoint>,
}

/// Checks properness, non-degeneracy and strictness of `cl` on an `eta` grid.
///
/// Properness compares `L(eta, psi(eta))` against `L(eta, psi(q))` for every
/// grid `q`. Non-degeneracy asks that some image point be optimal at every
/// `eta`. Strictness asks that no image point lie in two optimal sets. The
/// first violation found (in that order) is reported as the witness.
pub fn audit_properness(cl: &CompositeLoss, grid_step: f64) -> Result<PropernessReport> {
    if !(grid_step > 0.0 && grid_step <= 0.1) {
        return Err(CpeError::invalid(format!("grid step {grid_step} must lie in (0, 0.1]")));
    }
    let grid = EtaGrid::with_step(grid_step)?;
    let loss = cl.loss();
    let etas = grid.points();
    let image: Vec<f64> = etas.iter().map(|&e| cl.predict(e)).collect();
    for &v in &image {
        loss.space().check(v)?;
    }
    let optimal_risks = etas
        .iter()
        .map(|&e| loss.optimal_conditional_risk(e))
        .collect::<Result<Vec<_>>>()?;
    let sets = etas
        .iter()
        .map(|&e| loss.optimal_set(e))
        .collect::<Result<Vec<_>>>()?;
    let member_tol = if loss.as_builtin().is_some() { 0.0 } else { 1e-6 };

    // per grid eta: (properness violation, optimal image point found)
    let rows: Vec<(Option<Witness>, bool)> = (0..etas.len())
        .into_par_iter()
        .map(|i| {
            let eta = etas[i];
            let own = loss.risk_unchecked(eta, image[i]);
            let mut violation = None;
            let mut hit = false;
            for (j, &v) in image.iter().enumerate() {
                let r = loss.risk_unchecked(eta, v);
                if violation.is_none() && own > r + RISK_TOL * (1.0 + r.abs()) {
                    violation = Some(Witness {
                        condition: Condition::Properness,
                        eta1: eta,
                        eta2: etas[j],
                        v,
                    });
                }
                hit |= r - optimal_risks[i] <= OPTIMALITY_TOL;
            }
            (violation, hit)
        })
        .collect();

    let proper_witness = rows.iter().find_map(|(w, _)| *w);
    let degenerate_witness = rows.iter().enumerate().find_map(|(i, (_, hit))| {
        (!hit).then_some(Witness {
            condition: Condition::NonDegeneracy,
            eta1: etas[i],
            eta2: etas[i],
            v: image[i],
        })
    });
    let strict_witness = (0..image.len()).into_par_iter().find_map_first(|j| {
        let v = image[j];
        let mut owners = sets
            .iter()
            .enumerate()
            .filter(|(_, s)| contains_within(s, v, member_tol))
            .map(|(i, _)| etas[i]);
        let first = owners.next()?;
        owners.next().map(|second| Witness {
            condition: Condition::Strictness,
            eta1: first,
            eta2: second,
            v,
        })
    });

    let is_proper = proper_witness.is_none();
    let is_degenerate = degenerate_witness.is_some();
    let is_strictly_proper = is_proper && !is_degenerate && strict_witness.is_none();
    Ok(PropernessReport {
        loss: loss.name().to_string(),
        link: cl.link().name().to_string(),
        grid_step: grid.step(),
        is_proper,
        is_strictly_proper,
        is_degenerate,
        witness: proper_witness.or(degenerate_witness).or(strict_witness),
        deltas: Vec::new(),
    })
}

impl PropernessReport {
    /// Attaches `delta(eps)` estimates when the audited loss is strictly proper.
    pub fn with_deltas(mut self, cl: &CompositeLoss, epsilons: &[f64]) -> Result<Self> {
        if self.is_strictly_proper {
            self.deltas = delta_curve(cl, epsilons, self.grid_step)?;
        }
        Ok(self)
    }
}

fn contains_within(set: &OptimalSet, v: f64, tol: f64) -> bool {
    if tol == 0.0 {
        return set.contains(v);
    }
    let slack = tol * (1.0 + v.abs());
    set.contains(v) || set.contains(v - slack) || set.contains(v + slack) || {
        set.lower.is_finite() && (v - set.lower).abs() <= slack
            || set.upper.is_finite() && (v - set.upper).abs() <= slack
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverReport {
    pub loss: String,
    pub grid_step: f64,
    pub covers: bool,
    pub disjoint: bool,
    pub witness: Option<Witness>,
}

impl CoverReport {
    pub fn holds(&self) -> bool {
        self.covers && self.disjoint
    }
}

/// Checks that the optimal sets over an `eta` grid are pairwise disjoint
/// (endpoint arithmetic on the typed sets) and that every prediction is
/// optimal for some `eta`.
///
/// Coverage is tested on a prediction grid with one point per `eta` grid
/// point across the space (clipped to `[-10, 10]`, plus far points on
/// unbounded sides). A prediction `v` is covered when `min_eta Delta L(eta, v)`
/// vanishes; `Delta L(., v)` is convex in `eta`, so the minimum is found by
/// golden-section search.
pub fn check_disjoint_cover(loss: &LossSpec, grid_step: f64) -> Result<CoverReport> {
    let grid = EtaGrid::with_step(grid_step)?;
    let etas = grid.points();
    let sets = etas
        .iter()
        .map(|&e| loss.optimal_set(e))
        .collect::<Result<Vec<_>>>()?;

    let disjoint_witness = (0..sets.len()).into_par_iter().find_map_first(|i| {
        sets.iter().enumerate().skip(i + 1).find_map(|(j, other)| {
            sets[i].intersect(other).map(|common| Witness {
                condition: Condition::Disjointness,
                eta1: etas[i],
                eta2: etas[j],
                v: common.representative(),
            })
        })
    });

    let space = loss.space();
    let lo = space.lower.max(-10.0);
    let hi = space.upper.min(10.0);
    let mut probes: Vec<f64> = (0..=grid.intervals())
        .map(|k| lo + (hi - lo) * k as f64 / grid.intervals() as f64)
        .collect();
    for far in [20.0, 50.0, 100.0, 1e3, 1e4] {
        if !space.lower.is_finite() {
            probes.push(-far);
        }
        if !space.upper.is_finite() {
            probes.push(far);
        }
    }
    let gaps: Vec<Option<Witness>> = probes
        .par_iter()
        .map(|&v| {
            let excess = |eta: f64| loss.conditional_excess_risk(eta, v).unwrap_or(f64::INFINITY);
            let best = numeric::golden_section(excess, 0.0, 1.0, 1e-12, 500)
                .map(|m| m.value)
                .unwrap_or(f64::INFINITY)
                .min(excess(0.0))
                .min(excess(1.0));
            (best > OPTIMALITY_TOL).then_some(Witness {
                condition: Condition::Cover,
                eta1: f64::NAN,
                eta2: f64::NAN,
                v,
            })
        })
        .collect();
    let cover_witness = gaps.into_iter().flatten().next();

    Ok(CoverReport {
        loss: loss.name().to_string(),
        grid_step: grid.step(),
        covers: cover_witness.is_none(),
        disjoint: disjoint_witness.is_none(),
        witness: disjoint_witness.or(cover_witness),
    })
}

/// Decides on a grid whether any link can make `loss` strictly proper.
///
/// Such a link must pick, for every `eta`, a point of `v*(eta)` that lies
/// in no other optimal set. Candidates are drawn from each set's sample
/// points; on success the chosen `(eta, v)` pairs are returned, otherwise a
/// witness `eta` whose every candidate is shared.
pub fn strictly_proper_link(loss: &LossSpec, grid_step: f64) -> Result<Result<Vec<(f64, f64)>, Witness>> {
    let grid = EtaGrid::with_step(grid_step)?;
    let etas = grid.points();
    let sets = etas
        .iter()
        .map(|&e| loss.optimal_set(e))
        .collect::<Result<Vec<_>>>()?;
    let choices: Vec<Result<(f64, f64), Witness>> = (0..sets.len())
        .into_par_iter()
        .map(|i| {
            let mut blocked = None;
            for v in sets[i].sample_points() {
                let clash = sets
                    .iter()
                    .enumerate()
                    .find(|(k, s)| *k != i && s.contains(v))
                    .map(|(k, _)| k);
                match clash {
                    None => return Ok((etas[i], v)),
                    Some(k) if blocked.is_none() => {
                        blocked = Some(Witness {
                            condition: Condition::Strictness,
                            eta1: etas[i],
                            eta2: etas[k],
                            v,
                        })
                    }
                    Some(_) => {}
                }
            }
            Err(blocked.expect("optimal sets have sample points"))
        })
        .collect();
    Ok(choices.into_iter().collect())
}

/// Links worth auditing for `loss`: its catalog link when it has one, plus
/// the shapes `v*` suggests (`sign(2 eta - 1)`, `2 eta - 1`, logit).
pub fn candidate_links(loss: &LossSpec) -> Vec<LinkFunction> {
    match loss.as_builtin() {
        Some(BuiltinLoss::Hinge) | Some(BuiltinLoss::ZeroOne) => vec![
            LinkFunction::sign(),
            LinkFunction::twice_minus_one(),
            LinkFunction::logit(),
        ],
        Some(BuiltinLoss::Logistic) => vec![LinkFunction::logit()],
        Some(BuiltinLoss::SquaredCpe) | Some(BuiltinLoss::LogCpe) => vec![LinkFunction::identity()],
        _ => vec![LinkFunction::twice_minus_one()],
    }
}

fn require_estimable(cl: &CompositeLoss) -> Result<()> {
    let audit_only = matches!(
        cl.loss().as_builtin(),
        Some(BuiltinLoss::Hinge) | Some(BuiltinLoss::ZeroOne)
    );
    if audit_only || !cl.link().has_inverse() {
        return Err(CpeError::UnsupportedLoss {
            loss: cl.name().to_string(),
            operation: "modulus estimation",
        });
    }
    Ok(())
}

/// Excess risks `Delta L_psi(eta_i, eta_j)` as a dense row-major table.
fn excess_table(cl: &CompositeLoss, grid: EtaGrid) -> Result<Vec<f64>> {
    let n = grid.intervals() + 1;
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| cl.excess_risk(grid.point(i), grid.point(j)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(rows.concat())
}

/// `delta(eps)`: the smallest excess risk `Delta L_psi(eta, q)` over grid
/// pairs with `|eta - q| >= eps`, the largest admissible threshold in
/// `Delta L_psi < delta => |eta - q| < eps` up to grid error.
pub fn estimate_delta(cl: &CompositeLoss, eps: f64, grid_step: f64) -> Result<f64> {
    require_estimable(cl)?;
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(CpeError::invalid(format!("eps {eps} must lie in (0, 1]")));
    }
    if grid_step > eps / 10.0 + 1e-15 {
        return Err(CpeError::invalid(format!(
            "grid step {grid_step} must be at most eps/10 = {}",
            eps / 10.0
        )));
    }
    let grid = EtaGrid::with_step(grid_step)?;
    let n = grid.intervals();
    let gap = (eps * n as f64 - 1e-9).ceil() as usize;
    let best = (0..=n)
        .into_par_iter()
        .map(|i| {
            let eta = grid.point(i);
            let left = (0..=i.saturating_sub(gap)).take_while(|&j| i >= gap && j + gap <= i);
            let right = (i + gap)..=n;
            left.chain(right)
                .map(|j| cl.excess_risk(eta, grid.point(j)))
                .try_fold(f64::INFINITY, |acc, r| r.map(|r| acc.min(r)))
        })
        .try_reduce(|| f64::INFINITY, |a, b| Ok(a.min(b)))?;
    Ok(best)
}

/// `delta(eps)` for several `eps` on one grid.
pub fn delta_curve(cl: &CompositeLoss, epsilons: &[f64], grid_step: f64) -> Result<Vec<DeltaPoint>> {
    epsilons
        .iter()
        .map(|&eps| {
            let step = grid_step.min(eps / 10.0);
            estimate_delta(cl, eps, step).map(|delta| DeltaPoint { eps, delta })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulusPoint {
    pub t: f64,
    pub omega: f64,
}

/// Empirical modulus of continuity `omega(t)` of the inverted conditional-risk branches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusEstimate {
    pub grid_step: f64,
    pub points: Vec<ModulusPoint>,
}

/// `omega(t)`: the largest `|eta - q|` over grid pairs with `Delta L_psi(eta, q) <= t`.
pub fn estimate_modulus(cl: &CompositeLoss, t_grid: &[f64], grid_step: f64) -> Result<ModulusEstimate> {
    require_estimable(cl)?;
    if let Some(t) = t_grid.iter().find(|t| !(**t >= 0.0)) {
        return Err(CpeError::invalid(format!("modulus threshold {t} must be nonnegative")));
    }
    let grid = EtaGrid::with_step(grid_step)?;
    let table = excess_table(cl, grid)?;
    let n = grid.intervals() + 1;
    let points = t_grid
        .iter()
        .map(|&t| {
            let limit = t * (1.0 + 1e-12);
            let omega = (0..n)
                .into_par_iter()
                .map(|i| {
                    (0..n)
                        .filter(|&j| table[i * n + j] <= limit)
                        .map(|j| (grid.point(i) - grid.point(j)).abs())
                        .fold(0.0, f64::max)
                })
                .reduce(|| 0.0, f64::max);
            ModulusPoint { t, omega }
        })
        .collect();
    Ok(ModulusEstimate {
        grid_step: grid.step(),
        points,
    })
}

/// `sup (eta - q)^2 / Delta L_psi(eta, q)` over grid pairs, refined three
/// times by a factor of ten in a window around `eta = 1/2`.
///
/// The logistic loss approaches its optimal constant 1/2 only as both
/// arguments meet at 1/2; the squared CPE loss gives exactly 1.
pub fn verify_strong_constant(cl: &CompositeLoss, grid_step: f64) -> Result<f64> {
    require_estimable(cl)?;
    if !(grid_step > 0.0 && grid_step <= 1e-3 + 1e-15) {
        return Err(CpeError::invalid(format!("grid step {grid_step} must lie in (0, 1e-3]")));
    }
    let grid = EtaGrid::with_step(grid_step)?;
    let ratio = |eta: f64, q: f64| -> Result<f64> {
        let d2 = (eta - q).powi(2);
        let ex = cl.excess_risk(eta, q)?;
        Ok(if ex == 0.0 { f64::INFINITY } else { d2 / ex })
    };
    let pts = grid.points();
    let mut best = max_pair_ratio(&pts, &ratio)?;
    let mut step = grid.step();
    for _ in 0..REFINEMENT_LEVELS {
        step /= 10.0;
        let window: Vec<f64> = (-10i32..=10).map(|k| 0.5 + k as f64 * step).collect();
        best = best.max(max_pair_ratio(&window, &ratio)?);
    }
    Ok(best)
}

fn max_pair_ratio<F>(pts: &[f64], ratio: &F) -> Result<f64>
where
    F: Fn(f64, f64) -> Result<f64> + Sync,
{
    pts.par_iter()
        .map(|&eta| {
            pts.iter()
                .filter(|&&q| q != eta)
                .map(|&q| ratio(eta, q))
                .try_fold(0.0f64, |acc, r| r.map(|r| acc.max(r)))
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub pairs: usize,
    pub violations: usize,
    pub first: Option<(f64, f64)>,
}

/// Counts grid pairs with `Delta L_psi(eta, q) < c (eta - q)^2`.
pub fn quadratic_bound_violations(cl: &CompositeLoss, c: f64, grid_step: f64) -> Result<BoundCheck> {
    let grid = EtaGrid::with_step(grid_step)?;
    let n = grid.intervals() + 1;
    let rows: Vec<(usize, Option<(f64, f64)>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let eta = grid.point(i);
            let mut count = 0;
            let mut first = None;
            for j in 0..n {
                let q = grid.point(j);
                if cl.excess_risk(eta, q)? < c * (eta - q).powi(2) {
                    count += 1;
                    first.get_or_insert((eta, q));
                }
            }
            Ok((count, first))
        })
        .collect::<Result<_>>()?;
    Ok(BoundCheck {
        pairs: n * n,
        violations: rows.iter().map(|r| r.0).sum(),
        first: rows.iter().find_map(|r| r.1),
    })
}

/// `D(eta, q) = g(eta) - g(q) - g'(q) (eta - q)` for the generator `g = -L*_psi`.
pub fn bregman_divergence(cl: &CompositeLoss, eta: f64, eta_hat: f64) -> Result<f64> {
    let slope = cl.generator_slope(eta_hat)?;
    let g_eta = -cl.optimal_risk(eta)?;
    let g_hat = -cl.optimal_risk(eta_hat)?;
    clamp_excess(g_eta - g_hat - slope * (eta - eta_hat))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::{composite, cpe_form, LossSpec};

    #[test]
    fn grid_construction() {
        let g = EtaGrid::with_step(1e-3).unwrap();
        assert_eq!(g.intervals(), 1000);
        assert_eq!(g.point(500), 0.5);
        assert!(EtaGrid::with_step(0.0).is_err());
    }

    #[test]
    fn sq_composite_is_strictly_proper() {
        let r = audit_properness(&composite("sq").unwrap(), 1e-3).unwrap();
        assert!(r.is_proper && r.is_strictly_proper && !r.is_degenerate);
        assert!(r.witness.is_none());
    }

    #[test]
    fn hinge_with_sign_link_is_proper_but_not_strict() {
        let cl = CompositeLoss::new(LossSpec::builtin(BuiltinLoss::Hinge), LinkFunction::sign());
        let r = audit_properness(&cl, 1e-3).unwrap();
        assert!(r.is_proper && !r.is_degenerate && !r.is_strictly_proper);
        let w = r.witness.unwrap();
        assert_eq!(w.condition, Condition::Strictness);
        let loss = cl.loss();
        assert!(loss.optimal_set(w.eta1).unwrap().contains(w.v));
        assert!(loss.optimal_set(w.eta2).unwrap().contains(w.v));
        assert_ne!(w.eta1, w.eta2);
    }

    #[test]
    fn constant_link_is_proper_but_degenerate() {
        let cl = CompositeLoss::new(LossSpec::builtin(BuiltinLoss::Logistic), LinkFunction::constant(0.0));
        let r = audit_properness(&cl, 1e-2).unwrap();
        assert!(r.is_proper);
        assert!(r.is_degenerate);
        assert!(!r.is_strictly_proper);
        assert_eq!(r.witness.unwrap().condition, Condition::NonDegeneracy);
    }

    #[test]
    fn improper_link_is_caught() {
        // logistic loss read through the squared link is not proper
        let cl = CompositeLoss::new(LossSpec::builtin(BuiltinLoss::Logistic), LinkFunction::twice_minus_one());
        let r = audit_properness(&cl, 1e-2).unwrap();
        assert!(!r.is_proper && !r.is_strictly_proper);
        assert_eq!(r.witness.unwrap().condition, Condition::Properness);
    }

    #[test]
    fn audit_rejects_coarse_grid() {
        assert!(audit_properness(&composite("sq").unwrap(), 0.2).is_err());
    }

    #[test]
    fn disjoint_cover_examples() {
        let sqh = LossSpec::builtin(BuiltinLoss::SquaredHinge);
        assert!(check_disjoint_cover(&sqh, 1e-2).unwrap().holds());
        let log = LossSpec::builtin(BuiltinLoss::Logistic);
        assert!(check_disjoint_cover(&log, 1e-2).unwrap().holds());

        let sq_r = check_disjoint_cover(&LossSpec::squared_real_line(), 1e-2).unwrap();
        assert!(sq_r.disjoint && !sq_r.covers);
        let w = sq_r.witness.unwrap();
        assert_eq!(w.condition, Condition::Cover);
        assert!(w.v.abs() > 1.0);
        // restricted to [-1, 1] the squared loss covers its space
        assert!(check_disjoint_cover(&LossSpec::builtin(BuiltinLoss::Squared), 1e-2).unwrap().holds());

        let hinge = check_disjoint_cover(&LossSpec::builtin(BuiltinLoss::Hinge), 1e-2).unwrap();
        assert!(hinge.covers && !hinge.disjoint);
        assert_eq!(hinge.witness.unwrap().condition, Condition::Disjointness);
    }

    #[test]
    fn strictly_proper_links_exist_only_for_natural_losses() {
        for name in ["sq", "log", "sqh"] {
            let loss = composite(name).unwrap().loss().clone();
            assert!(strictly_proper_link(&loss, 1e-2).unwrap().is_ok(), "{name}");
        }
        for b in [BuiltinLoss::Hinge, BuiltinLoss::ZeroOne] {
            let w = strictly_proper_link(&LossSpec::builtin(b), 1e-2).unwrap().unwrap_err();
            assert_ne!(w.eta1, w.eta2);
        }
    }

    #[test]
    fn delta_examples() {
        let sq = cpe_form("sq").unwrap();
        assert!((estimate_delta(&sq, 0.1, 1e-3).unwrap() - 0.01).abs() < 1e-6);
        assert!((estimate_delta(&sq, 1.0, 1e-3).unwrap() - 1.0).abs() < 1e-12);
        let log = composite("log").unwrap();
        let d = estimate_delta(&log, 0.1, 1e-3).unwrap();
        assert!((0.02..=0.0203).contains(&d), "{d}");
        // the squared composite measures excess risk at four times the CPE scale
        let d = estimate_delta(&composite("sq").unwrap(), 0.1, 1e-3).unwrap();
        assert!((d - 0.04).abs() < 1e-6);
    }

    #[test]
    fn delta_preconditions() {
        let sq = cpe_form("sq").unwrap();
        assert!(estimate_delta(&sq, 0.1, 0.05).is_err());
        assert!(estimate_delta(&sq, 0.0, 1e-3).is_err());
        let hinge = CompositeLoss::new(LossSpec::builtin(BuiltinLoss::Hinge), LinkFunction::sign());
        assert!(matches!(
            estimate_delta(&hinge, 0.1, 1e-3),
            Err(CpeError::UnsupportedLoss { .. })
        ));
    }

    #[test]
    fn modulus_examples() {
        let sq = cpe_form("sq").unwrap();
        let m = estimate_modulus(&sq, &[0.0, 0.04], 1e-3).unwrap();
        assert_eq!(m.points[0].omega, 0.0);
        assert!((m.points[1].omega - 0.2).abs() <= 1e-3);
        let log = composite("log").unwrap();
        let m = estimate_modulus(&log, &[0.02], 1e-3).unwrap();
        assert!(m.points[0].omega <= 0.1);
    }

    #[test]
    fn strong_constant_examples() {
        let sq = cpe_form("sq").unwrap();
        assert!((verify_strong_constant(&sq, 1e-3).unwrap() - 1.0).abs() < 1e-9);
        let log = composite("log").unwrap();
        let c = verify_strong_constant(&log, 1e-3).unwrap();
        assert!((0.499..0.5).contains(&c), "{c}");
    }

    #[test]
    fn bregman_examples() {
        let sq = cpe_form("sq").unwrap();
        assert!((bregman_divergence(&sq, 0.7, 0.2).unwrap() - 0.25).abs() < 1e-12);
        let log = composite("log").unwrap();
        let kl = 0.2 * (0.2f64 / 0.4).ln() + 0.8 * (0.8f64 / 0.6).ln();
        assert!((bregman_divergence(&log, 0.2, 0.4).unwrap() - kl).abs() < 1e-12);
        for cl in [sq.clone(), log.clone(), composite("sqh").unwrap()] {
            assert_eq!(bregman_divergence(&cl, 0.35, 0.35).unwrap(), 0.0);
        }
        assert!(matches!(bregman_divergence(&log, 0.3, 0.0), Err(CpeError::Domain { .. })));
        assert!(bregman_divergence(&log, 0.3, 1.0).is_err());
    }

    #[test]
    fn bregman_of_user_composite_uses_finite_differences() {
        use std::sync::Arc;
        let pos: crate::loss::PartialLossFn = Arc::new(|v| (1.0 - v).powi(2));
        let neg: crate::loss::PartialLossFn = Arc::new(|v| (1.0 + v).powi(2));
        let loss = LossSpec::custom("my-sq", pos, neg, crate::PredictionSpace::real_line());
        let cl = CompositeLoss::new(loss, LinkFunction::twice_minus_one());
        let d = bregman_divergence(&cl, 0.7, 0.2).unwrap();
        assert!((d - 4.0 * 0.25).abs() < 1e-8, "{d}");
    }
}
