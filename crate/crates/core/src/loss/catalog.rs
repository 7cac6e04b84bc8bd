use crate::error::{CpeError, Result};

use super::{BuiltinLoss, CompositeLoss, LinkFunction, LossSpec};

/// Names of the built-in losses, in catalog order.
pub const CATALOG_NAMES: [&str; 5] = ["sq", "log", "sqh", "hinge", "zero-one"];

/// A catalog row: a usable composite loss, or a loss kept only for auditing
/// because no link makes it strictly proper.
#[derive(Debug, Clone)]
pub enum CatalogEntry {
    Composite(CompositeLoss),
    AuditOnly(LossSpec),
}

impl CatalogEntry {
    pub fn name(&self) -> &str {
        self.loss().name()
    }

    pub fn loss(&self) -> &LossSpec {
        match self {
            CatalogEntry::Composite(c) => c.loss(),
            CatalogEntry::AuditOnly(l) => l,
        }
    }

    pub fn link(&self) -> Option<&LinkFunction> {
        match self {
            CatalogEntry::Composite(c) => Some(c.link()),
            CatalogEntry::AuditOnly(_) => None,
        }
    }

    pub fn composite(&self) -> Option<&CompositeLoss> {
        match self {
            CatalogEntry::Composite(c) => Some(c),
            CatalogEntry::AuditOnly(_) => None,
        }
    }
}

/// Squared, logistic and squared hinge with their links; hinge and 0-1 without.
pub fn catalog() -> Vec<CatalogEntry> {
    CATALOG_NAMES
        .iter()
        .map(|name| lookup(name).expect("catalog names resolve"))
        .collect()
}

pub fn lookup(name: &str) -> Result<CatalogEntry> {
    let composite = |loss, link| CatalogEntry::Composite(CompositeLoss::new(LossSpec::builtin(loss), link));
    match name {
        "sq" => Ok(composite(BuiltinLoss::Squared, LinkFunction::twice_minus_one())),
        "log" => Ok(composite(BuiltinLoss::Logistic, LinkFunction::logit())),
        "sqh" => Ok(composite(BuiltinLoss::SquaredHinge, LinkFunction::twice_minus_one())),
        "hinge" => Ok(CatalogEntry::AuditOnly(LossSpec::builtin(BuiltinLoss::Hinge))),
        "zero-one" => Ok(CatalogEntry::AuditOnly(LossSpec::builtin(BuiltinLoss::ZeroOne))),
        other => Err(CpeError::invalid(format!(
            "unknown loss `{other}` (expected one of {})",
            CATALOG_NAMES.join(", ")
        ))),
    }
}

/// The composite loss registered under `name`.
pub fn composite(name: &str) -> Result<CompositeLoss> {
    match lookup(name)? {
        CatalogEntry::Composite(c) => Ok(c),
        CatalogEntry::AuditOnly(l) => Err(CpeError::UnsupportedLoss {
            loss: l.name().to_string(),
            operation: "class-probability estimation",
        }),
    }
}

/// The CPE form on `[0, 1]` with an identity link: `(1 - q)^2, q^2` for the
/// squared family and `-ln q, -ln(1 - q)` for the logistic loss. Excess
/// risks here are measured directly in probability units, a quarter of the
/// squared composite's and equal to the logistic composite's.
pub fn cpe_form(name: &str) -> Result<CompositeLoss> {
    let loss = match name {
        "sq" | "sqh" | "sq-cpe" => BuiltinLoss::SquaredCpe,
        "log" | "log-cpe" => BuiltinLoss::LogCpe,
        other => {
            lookup(other)?;
            return Err(CpeError::UnsupportedLoss {
                loss: other.to_string(),
                operation: "a CPE form",
            });
        }
    };
    Ok(CompositeLoss::new(LossSpec::builtin(loss), LinkFunction::identity()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::PredictionSpace;

    #[test]
    fn catalog_has_five_entries() {
        let cat = catalog();
        assert_eq!(cat.len(), 5);
        let names: Vec<_> = cat.iter().map(|e| e.name().to_string()).collect();
        assert_eq!(names, CATALOG_NAMES);
    }

    #[test]
    fn sq_lives_on_symmetric_unit_interval() {
        assert_eq!(lookup("sq").unwrap().loss().space(), PredictionSpace::symmetric_unit());
    }

    #[test]
    fn hinge_and_zero_one_carry_no_link() {
        assert!(lookup("hinge").unwrap().link().is_none());
        assert!(lookup("zero-one").unwrap().link().is_none());
        assert!(matches!(composite("hinge"), Err(CpeError::UnsupportedLoss { .. })));
        assert!(lookup("probit").is_err());
    }

    #[test]
    fn cpe_forms() {
        let sq = cpe_form("sq").unwrap();
        assert!((sq.excess_risk(0.5, 0.3).unwrap() - 0.04).abs() < 1e-15);
        let composite_sq = composite("sq").unwrap();
        assert!((composite_sq.excess_risk(0.5, 0.3).unwrap() - 0.16).abs() < 1e-15);
        assert!(cpe_form("hinge").is_err());
    }
}
