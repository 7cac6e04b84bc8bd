use crate::error::{CpeError, Result};
use crate::numeric::binary_kl;

use super::link::LOGIT_CLAMP;
use super::{clamp_excess, BuiltinLoss, LinkFunction, LossSpec, Probability};

/// Step of the central difference used for generator slopes of user losses.
pub const GENERATOR_FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Canonical {
    /// squared or squared hinge with `2 eta - 1`
    Squared,
    /// logistic with the logit
    Logistic,
    SquaredCpe,
    LogCpe,
}

/// A loss paired with a link, `l_psi(y, q) = l(y, psi(q))`.
///
/// Properness is never assumed; see [`crate::properness`] for the audit.
#[derive(Debug, Clone)]
pub struct CompositeLoss {
    loss: LossSpec,
    link: LinkFunction,
}

impl CompositeLoss {
    pub fn new(loss: LossSpec, link: LinkFunction) -> Self {
        CompositeLoss { loss, link }
    }

    pub fn loss(&self) -> &LossSpec {
        &self.loss
    }

    pub fn link(&self) -> &LinkFunction {
        &self.link
    }

    pub fn name(&self) -> &str {
        self.loss.name()
    }

    fn canonical(&self) -> Option<Canonical> {
        match (self.loss.as_builtin()?, self.link.name()) {
            (BuiltinLoss::Squared | BuiltinLoss::SquaredHinge, "2eta-1") => Some(Canonical::Squared),
            (BuiltinLoss::Logistic, "logit") => Some(Canonical::Logistic),
            (BuiltinLoss::SquaredCpe, "identity") => Some(Canonical::SquaredCpe),
            (BuiltinLoss::LogCpe, "identity") => Some(Canonical::LogCpe),
            _ => None,
        }
    }

    /// `psi(q)`
    pub fn predict(&self, q: f64) -> f64 {
        self.link.forward(q)
    }

    /// `L_psi(eta, q) = L(eta, psi(q))`.
    pub fn risk(&self, eta: f64, q: f64) -> Result<f64> {
        Probability::new(q)?;
        self.loss.conditional_risk(eta, self.link.forward(q))
    }

    /// `Delta L_psi(eta, q)`, using closed forms for the built-in pairs so
    /// that tiny excess risks keep full relative precision.
    pub fn excess_risk(&self, eta: f64, q: f64) -> Result<f64> {
        let eta = Probability::new(eta)?.value();
        let q = Probability::new(q)?.value();
        match self.canonical() {
            Some(Canonical::Squared) => Ok(4.0 * (eta - q).powi(2)),
            Some(Canonical::SquaredCpe) => Ok((eta - q).powi(2)),
            Some(Canonical::Logistic) => {
                clamp_excess(binary_kl(eta, q.clamp(LOGIT_CLAMP, 1.0 - LOGIT_CLAMP)))
            }
            Some(Canonical::LogCpe) => clamp_excess(binary_kl(eta, q)),
            None => self.loss.conditional_excess_risk(eta, self.link.forward(q)),
        }
    }

    /// `L*_psi(eta)`. For a proper composite loss this is `L(eta, psi(eta))`.
    pub fn optimal_risk(&self, eta: f64) -> Result<f64> {
        if self.canonical().is_some() {
            self.loss.optimal_conditional_risk(eta)
        } else {
            self.risk(eta, eta)
        }
    }

    /// Derivative of the Bregman generator `-L*_psi` at `eta`.
    ///
    /// Closed form for built-in pairs, central difference with step `1e-6`
    /// otherwise (one-sided within a step of 0 or 1).
    pub fn generator_slope(&self, eta: f64) -> Result<f64> {
        let eta = Probability::new(eta)?.value();
        let logit = |e: f64| -> Result<f64> {
            if e <= 0.0 || e >= 1.0 {
                Err(CpeError::Domain {
                    value: e,
                    domain: "(0, 1) (the log-loss generator is not differentiable at the endpoints)".into(),
                })
            } else {
                Ok((e / (1.0 - e)).ln())
            }
        };
        match self.canonical() {
            Some(Canonical::Squared) => Ok(4.0 * (2.0 * eta - 1.0)),
            Some(Canonical::SquaredCpe) => Ok(2.0 * eta - 1.0),
            Some(Canonical::Logistic | Canonical::LogCpe) => logit(eta),
            None => {
                let h = GENERATOR_FD_STEP;
                let lo = (eta - h).max(0.0);
                let hi = (eta + h).min(1.0);
                let g = |e: f64| self.optimal_risk(e).map(|r| -r);
                Ok((g(hi)? - g(lo)?) / (hi - lo))
            }
        }
    }

    /// The class-probability estimate `psi^-1(v)`.
    pub fn estimate(&self, v: f64) -> Result<Probability> {
        self.link.inverse(v).map_err(|e| match e {
            CpeError::UnsupportedLoss { operation, .. } => CpeError::UnsupportedLoss {
                loss: self.loss.name().to_string(),
                operation,
            },
            other => other,
        })
    }
}
