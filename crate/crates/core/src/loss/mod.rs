//! Partial losses, conditional risks, optimal sets and link functions.
//!
//! A binary loss is given by its two partial losses `l(+1, v)` and `l(-1, v)`
//! over a prediction space `V`. The conditional risk at posterior `eta` is
//! `eta l(+1, v) + (1 - eta) l(-1, v)`; its minimum over `V` is the optimal
//! conditional risk and its set of minimizers is `v*(eta)`.
//!
//! Built-in losses use closed forms throughout. User-supplied losses fall back
//! to golden-section search under a convexity assumption.

mod catalog;
mod composite;
mod link;
mod space;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{CpeError, Result};
use crate::numeric::{self, binary_entropy, binary_kl, sigmoid, softplus};

pub use catalog::{catalog, composite, cpe_form, lookup, CatalogEntry, CATALOG_NAMES};
pub use composite::CompositeLoss;
pub use link::{truncate, LinkFn, LinkFunction, LOGIT_CLAMP};
pub use space::{OptimalSet, PredictionSpace, Probability, SetKind};

/// Argument tolerance of the golden-section fallback.
pub const ARGMIN_TOL: f64 = 1e-10;
/// Negative excess risks above this are round-off and clamp to zero.
pub const EXCESS_ROUNDOFF: f64 = 1e-9;

const GOLDEN_MAX_ITER: usize = 2_000;
const UNIMODAL_SAMPLES: usize = 400;
const FLAT_TOL: f64 = 1e-14;
const POINT_WIDTH: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BuiltinLoss {
    /// `(1 - y v)^2`
    Squared,
    /// `ln(1 + exp(-y v))`
    Logistic,
    /// `max(0, 1 - y v)^2`
    SquaredHinge,
    /// `max(0, 1 - y v)`
    Hinge,
    /// `1{sign(y v) != 1}`, with a tie at `v = 0` costing 1/2 for either label.
    ZeroOne,
    /// Squared loss as a CPE loss on `[0, 1]`: `(1 - q)^2`, `q^2`.
    SquaredCpe,
    /// Log loss as a CPE loss on `[0, 1]`: `-ln q`, `-ln(1 - q)`.
    LogCpe,
}

impl BuiltinLoss {
    fn partial_pos(self, v: f64) -> f64 {
        match self {
            BuiltinLoss::Squared => (1.0 - v).powi(2),
            BuiltinLoss::Logistic => softplus(-v),
            BuiltinLoss::SquaredHinge => (1.0 - v).max(0.0).powi(2),
            BuiltinLoss::Hinge => (1.0 - v).max(0.0),
            BuiltinLoss::ZeroOne => zero_one(v),
            BuiltinLoss::SquaredCpe => (1.0 - v).powi(2),
            BuiltinLoss::LogCpe => -v.ln(),
        }
    }

    fn partial_neg(self, v: f64) -> f64 {
        match self {
            BuiltinLoss::Squared => (1.0 + v).powi(2),
            BuiltinLoss::Logistic => softplus(v),
            BuiltinLoss::SquaredHinge => (1.0 + v).max(0.0).powi(2),
            BuiltinLoss::Hinge => (1.0 + v).max(0.0),
            BuiltinLoss::ZeroOne => zero_one(-v),
            BuiltinLoss::SquaredCpe => v * v,
            BuiltinLoss::LogCpe => -(-v).ln_1p(),
        }
    }

    fn default_space(self) -> PredictionSpace {
        match self {
            BuiltinLoss::Squared => PredictionSpace::symmetric_unit(),
            BuiltinLoss::SquaredCpe | BuiltinLoss::LogCpe => PredictionSpace::unit_interval(),
            _ => PredictionSpace::real_line(),
        }
    }

    fn optimal_risk(self, eta: f64) -> f64 {
        match self {
            BuiltinLoss::Squared | BuiltinLoss::SquaredHinge => 4.0 * eta * (1.0 - eta),
            BuiltinLoss::Logistic | BuiltinLoss::LogCpe => binary_entropy(eta),
            BuiltinLoss::Hinge => 2.0 * eta.min(1.0 - eta),
            BuiltinLoss::ZeroOne => eta.min(1.0 - eta),
            BuiltinLoss::SquaredCpe => eta * (1.0 - eta),
        }
    }

    fn optimal_set(self, eta: f64) -> OptimalSet {
        match self {
            BuiltinLoss::Squared => OptimalSet::point(2.0 * eta - 1.0),
            BuiltinLoss::Logistic => {
                if eta == 0.0 {
                    OptimalSet::point(f64::NEG_INFINITY)
                } else if eta == 1.0 {
                    OptimalSet::point(f64::INFINITY)
                } else {
                    OptimalSet::point((eta / (1.0 - eta)).ln())
                }
            }
            BuiltinLoss::SquaredHinge => {
                if eta == 0.0 {
                    OptimalSet::at_most(-1.0)
                } else if eta == 1.0 {
                    OptimalSet::at_least(1.0)
                } else {
                    OptimalSet::point(2.0 * eta - 1.0)
                }
            }
            BuiltinLoss::Hinge => {
                if eta == 0.0 {
                    OptimalSet::at_most(-1.0)
                } else if eta == 1.0 {
                    OptimalSet::at_least(1.0)
                } else if eta == 0.5 {
                    OptimalSet::closed(-1.0, 1.0)
                } else if eta > 0.5 {
                    OptimalSet::point(1.0)
                } else {
                    OptimalSet::point(-1.0)
                }
            }
            BuiltinLoss::ZeroOne => {
                if eta > 0.5 {
                    OptimalSet::above(0.0)
                } else if eta < 0.5 {
                    OptimalSet::below(0.0)
                } else {
                    OptimalSet::all()
                }
            }
            BuiltinLoss::SquaredCpe | BuiltinLoss::LogCpe => OptimalSet::point(eta),
        }
    }

    /// Closed-form excess risk that avoids subtracting two nearly equal risks.
    fn excess(self, eta: f64, v: f64, risk: f64) -> f64 {
        match self {
            BuiltinLoss::Squared => (v - (2.0 * eta - 1.0)).powi(2),
            BuiltinLoss::SquaredHinge if v.abs() <= 1.0 => (v - (2.0 * eta - 1.0)).powi(2),
            BuiltinLoss::SquaredCpe => (v - eta).powi(2),
            BuiltinLoss::LogCpe => binary_kl(eta, v),
            BuiltinLoss::Logistic => {
                let q = sigmoid(v);
                if eta > 0.0 && eta < 1.0 && (q - eta).abs() < 0.25 {
                    binary_kl(eta, q)
                } else {
                    risk - binary_entropy(eta)
                }
            }
            _ => risk - self.optimal_risk(eta),
        }
    }
}

fn zero_one(margin: f64) -> f64 {
    if margin > 0.0 {
        0.0
    } else if margin < 0.0 {
        1.0
    } else {
        0.5
    }
}

pub type PartialLossFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum LossKind {
    Builtin(BuiltinLoss),
    Custom { pos: PartialLossFn, neg: PartialLossFn },
}

/// A binary loss given by its partial losses over a prediction space.
#[derive(Clone)]
pub struct LossSpec {
    name: String,
    kind: LossKind,
    space: PredictionSpace,
}

impl fmt::Debug for LossSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LossSpec")
            .field("name", &self.name)
            .field("space", &self.space)
            .finish()
    }
}

impl LossSpec {
    pub fn builtin(loss: BuiltinLoss) -> Self {
        let name = match loss {
            BuiltinLoss::Squared => "sq",
            BuiltinLoss::Logistic => "log",
            BuiltinLoss::SquaredHinge => "sqh",
            BuiltinLoss::Hinge => "hinge",
            BuiltinLoss::ZeroOne => "zero-one",
            BuiltinLoss::SquaredCpe => "sq-cpe",
            BuiltinLoss::LogCpe => "log-cpe",
        };
        LossSpec {
            name: name.into(),
            kind: LossKind::Builtin(loss),
            space: loss.default_space(),
        }
    }

    /// Squared loss over the whole real line instead of `[-1, 1]`: the space a
    /// plain linear model actually predicts into.
    pub fn squared_real_line() -> Self {
        LossSpec {
            name: "sq".into(),
            kind: LossKind::Builtin(BuiltinLoss::Squared),
            space: PredictionSpace::real_line(),
        }
    }

    pub fn custom(
        name: impl Into<String>,
        pos: PartialLossFn,
        neg: PartialLossFn,
        space: PredictionSpace,
    ) -> Self {
        LossSpec {
            name: name.into(),
            kind: LossKind::Custom { pos, neg },
            space,
        }
    }

    /// A loss tabulated on strictly increasing prediction knots and linearly
    /// interpolated between them. The prediction space is the knot range.
    pub fn tabulated(
        name: impl Into<String>,
        knots: Vec<f64>,
        pos: Vec<f64>,
        neg: Vec<f64>,
    ) -> Result<Self> {
        if knots.len() < 2 || pos.len() != knots.len() || neg.len() != knots.len() {
            return Err(CpeError::invalid("tabulated loss needs >= 2 knots and matching value columns"));
        }
        if knots.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(CpeError::invalid("tabulated loss knots must be strictly increasing"));
        }
        if pos.iter().chain(&neg).any(|x| !x.is_finite() || *x < 0.0) {
            return Err(CpeError::invalid("tabulated partial losses must be finite and nonnegative"));
        }
        let space = PredictionSpace::new(knots[0], knots[knots.len() - 1])?;
        let knots = Arc::new(knots);
        let interp = |values: Vec<f64>| -> PartialLossFn {
            let knots = Arc::clone(&knots);
            Arc::new(move |v: f64| {
                let i = knots.partition_point(|k| *k <= v).clamp(1, knots.len() - 1);
                let t = (v - knots[i - 1]) / (knots[i] - knots[i - 1]);
                values[i - 1] + t * (values[i] - values[i - 1])
            })
        };
        Ok(LossSpec {
            name: name.into(),
            kind: LossKind::Custom {
                pos: interp(pos),
                neg: interp(neg),
            },
            space,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn space(&self) -> PredictionSpace {
        self.space
    }

    pub fn as_builtin(&self) -> Option<BuiltinLoss> {
        match self.kind {
            LossKind::Builtin(b) => Some(b),
            LossKind::Custom { .. } => None,
        }
    }

    pub fn partial_pos(&self, v: f64) -> f64 {
        match &self.kind {
            LossKind::Builtin(b) => b.partial_pos(v),
            LossKind::Custom { pos, .. } => pos(v),
        }
    }

    pub fn partial_neg(&self, v: f64) -> f64 {
        match &self.kind {
            LossKind::Builtin(b) => b.partial_neg(v),
            LossKind::Custom { neg, .. } => neg(v),
        }
    }

    /// Conditional risk without domain checks; a zero weight never meets an
    /// infinite partial loss.
    pub(crate) fn risk_unchecked(&self, eta: f64, v: f64) -> f64 {
        let pos = if eta > 0.0 { eta * self.partial_pos(v) } else { 0.0 };
        let neg = if eta < 1.0 { (1.0 - eta) * self.partial_neg(v) } else { 0.0 };
        pos + neg
    }

    fn check_eta(eta: f64) -> Result<f64> {
        Probability::new(eta).map(Probability::value)
    }

    /// `L(eta, v) = eta l(+1, v) + (1 - eta) l(-1, v)`.
    pub fn conditional_risk(&self, eta: f64, v: f64) -> Result<f64> {
        let eta = Self::check_eta(eta)?;
        self.space.check(v)?;
        Ok(self.risk_unchecked(eta, v))
    }

    /// `L*(eta)`, the minimum of the conditional risk over the prediction space.
    pub fn optimal_conditional_risk(&self, eta: f64) -> Result<f64> {
        let eta = Self::check_eta(eta)?;
        match self.kind {
            LossKind::Builtin(b) => Ok(b.optimal_risk(eta)),
            LossKind::Custom { .. } => self.minimize(eta).map(|m| m.value),
        }
    }

    /// `L*(eta)` by golden-section search, for any loss with a convex
    /// conditional risk. Built-ins use it only to cross-check closed forms.
    pub fn optimal_conditional_risk_numeric(&self, eta: f64) -> Result<f64> {
        let eta = Self::check_eta(eta)?;
        self.minimize(eta).map(|m| m.value)
    }

    fn bracket(&self, eta: f64) -> (f64, f64) {
        numeric::bracket_convex(
            |v| self.risk_unchecked(eta, v),
            self.space.lower,
            self.space.upper,
        )
    }

    fn minimize(&self, eta: f64) -> Result<numeric::Minimum> {
        let f = |v: f64| self.risk_unchecked(eta, v);
        let (a, b) = self.bracket(eta);
        if !numeric::is_unimodal(f, a, b, UNIMODAL_SAMPLES, 1e-12) {
            return Err(CpeError::NotUnimodal {
                loss: self.name.clone(),
                eta,
            });
        }
        numeric::golden_section(f, a, b, ARGMIN_TOL, GOLDEN_MAX_ITER)
    }

    /// `v*(eta)`: exact typed sets for built-ins.
    pub fn optimal_set(&self, eta: f64) -> Result<OptimalSet> {
        let eta = Self::check_eta(eta)?;
        match self.kind {
            LossKind::Builtin(b) => Ok(b.optimal_set(eta)),
            LossKind::Custom { .. } => self.optimal_set_numeric(eta),
        }
    }

    /// `v*(eta)` bracketed numerically: the golden-section minimizer widened
    /// by bisection to the region where the risk stays within round-off of the
    /// minimum. Regions narrower than `1e-5` collapse to a point.
    pub fn optimal_set_numeric(&self, eta: f64) -> Result<OptimalSet> {
        let eta = Self::check_eta(eta)?;
        let min = self.minimize(eta)?;
        let f = |v: f64| self.risk_unchecked(eta, v);
        let target = min.value + FLAT_TOL * (1.0 + min.value.abs());
        let (a, b) = self.bracket(eta);
        let edge = |outer: f64, unbounded: bool| -> (f64, bool) {
            if f(outer) <= target {
                // flat all the way to the bracket edge
                return if unbounded { (outer.signum() * f64::INFINITY, false) } else { (outer, true) };
            }
            let (mut out, mut inn) = (outer, min.x);
            for _ in 0..200 {
                let mid = 0.5 * (out + inn);
                if mid == out || mid == inn {
                    break;
                }
                if f(mid) <= target {
                    inn = mid;
                } else {
                    out = mid;
                }
            }
            (inn, true)
        };
        let (lo, lo_closed) = edge(a, !self.space.lower.is_finite());
        let (hi, hi_closed) = edge(b, !self.space.upper.is_finite());
        if hi - lo <= POINT_WIDTH {
            return Ok(OptimalSet::point(min.x));
        }
        Ok(OptimalSet {
            lower: lo,
            upper: hi,
            lower_closed: lo_closed,
            upper_closed: hi_closed,
        })
    }

    /// `Delta L(eta, v) = L(eta, v) - L*(eta)`, clamped at zero for round-off.
    pub fn conditional_excess_risk(&self, eta: f64, v: f64) -> Result<f64> {
        let eta = Self::check_eta(eta)?;
        self.space.check(v)?;
        let risk = self.risk_unchecked(eta, v);
        let raw = match self.kind {
            LossKind::Builtin(b) => b.excess(eta, v, risk),
            LossKind::Custom { .. } => risk - self.minimize(eta)?.value,
        };
        clamp_excess(raw)
    }
}

pub(crate) fn clamp_excess(raw: f64) -> Result<f64> {
    if raw.is_nan() {
        Err(CpeError::Numeric("excess risk evaluated to NaN".into()))
    } else if raw < -EXCESS_ROUNDOFF {
        Err(CpeError::Numeric(format!("negative excess risk {raw:.3e}")))
    } else {
        Ok(raw.max(0.0))
    }
}
