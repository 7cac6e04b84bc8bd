use std::fmt;
use std::sync::Arc;

use crate::error::{CpeError, Result};
use crate::numeric::sigmoid;

use super::space::Probability;

/// Probabilities closer to 0 or 1 than this are clamped before taking a logit.
pub const LOGIT_CLAMP: f64 = 1e-12;

pub type LinkFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum LinkKind {
    /// `2 eta - 1`, inverse `T((v + 1) / 2)` with truncation to `[0, 1]`.
    TwiceMinusOne,
    Logit,
    Identity,
    /// `sign(2 eta - 1)`: the only shape a proper link for hinge or 0-1 can take.
    Sign,
    Constant(f64),
    Custom {
        forward: LinkFn,
        inverse: Option<LinkFn>,
    },
}

/// A link `psi: [0, 1] -> V` together with its extended inverse `V -> [0, 1]`.
#[derive(Clone)]
pub struct LinkFunction {
    name: String,
    kind: LinkKind,
}

/// Truncation onto `[0, 1]`.
pub fn truncate(u: f64) -> f64 {
    u.clamp(0.0, 1.0)
}

impl LinkFunction {
    pub fn twice_minus_one() -> Self {
        LinkFunction {
            name: "2eta-1".into(),
            kind: LinkKind::TwiceMinusOne,
        }
    }

    pub fn logit() -> Self {
        LinkFunction {
            name: "logit".into(),
            kind: LinkKind::Logit,
        }
    }

    pub fn identity() -> Self {
        LinkFunction {
            name: "identity".into(),
            kind: LinkKind::Identity,
        }
    }

    pub fn sign() -> Self {
        LinkFunction {
            name: "sign".into(),
            kind: LinkKind::Sign,
        }
    }

    pub fn constant(value: f64) -> Self {
        LinkFunction {
            name: format!("constant({value})"),
            kind: LinkKind::Constant(value),
        }
    }

    pub fn custom(name: impl Into<String>, forward: LinkFn, inverse: Option<LinkFn>) -> Self {
        LinkFunction {
            name: name.into(),
            kind: LinkKind::Custom { forward, inverse },
        }
    }

    /// Looks up a link by its CLI name.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "2eta-1" => Ok(Self::twice_minus_one()),
            "logit" => Ok(Self::logit()),
            "identity" => Ok(Self::identity()),
            "sign" => Ok(Self::sign()),
            "zero" => Ok(Self::constant(0.0)),
            other => Err(CpeError::invalid(format!(
                "unknown link `{other}` (expected one of 2eta-1, logit, identity, sign, zero)"
            ))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn has_inverse(&self) -> bool {
        match &self.kind {
            LinkKind::TwiceMinusOne | LinkKind::Logit | LinkKind::Identity => true,
            LinkKind::Sign | LinkKind::Constant(_) => false,
            LinkKind::Custom { inverse, .. } => inverse.is_some(),
        }
    }

    /// `psi(eta)`. The logit clamps `eta` to `[1e-12, 1 - 1e-12]` so the
    /// result stays finite.
    pub fn forward(&self, eta: f64) -> f64 {
        match &self.kind {
            LinkKind::TwiceMinusOne => 2.0 * eta - 1.0,
            LinkKind::Logit => {
                let e = eta.clamp(LOGIT_CLAMP, 1.0 - LOGIT_CLAMP);
                (e / (1.0 - e)).ln()
            }
            LinkKind::Identity => eta,
            LinkKind::Sign => {
                let s = 2.0 * eta - 1.0;
                if s > 0.0 {
                    1.0
                } else if s < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            LinkKind::Constant(c) => *c,
            LinkKind::Custom { forward, .. } => forward(eta),
        }
    }

    /// The extended inverse `psi^-1(v)`, total on the prediction space.
    pub fn inverse(&self, v: f64) -> Result<Probability> {
        if v.is_nan() {
            return Err(CpeError::Domain {
                value: v,
                domain: "extended reals".into(),
            });
        }
        let eta = match &self.kind {
            LinkKind::TwiceMinusOne => truncate(0.5 * (v + 1.0)),
            LinkKind::Logit => sigmoid(v),
            LinkKind::Identity => truncate(v),
            LinkKind::Custom {
                inverse: Some(inv), ..
            } => inv(v),
            _ => {
                return Err(CpeError::UnsupportedLoss {
                    loss: self.name.clone(),
                    operation: "link inversion",
                })
            }
        };
        Probability::new(eta)
    }
}

impl fmt::Debug for LinkFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LinkFunction").field("name", &self.name).finish()
    }
}
