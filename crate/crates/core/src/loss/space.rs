use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{CpeError, Result};

/// A probability in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Probability(f64);

impl Probability {
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Probability(value))
        } else {
            Err(CpeError::Domain {
                value,
                domain: "[0, 1]".into(),
            })
        }
    }

    /// Clamps into `[0, 1]`; NaN maps to 1/2.
    pub fn saturating(value: f64) -> Self {
        if value.is_nan() {
            Probability(0.5)
        } else {
            Probability(value.clamp(0.0, 1.0))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Probability {
    type Error = CpeError;

    fn try_from(value: f64) -> Result<Self> {
        Probability::new(value)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

/// The prediction space `V`. Finite endpoints are included, infinite ones are not.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionSpace {
    pub lower: f64,
    pub upper: f64,
}

impl PredictionSpace {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if lower.is_nan() || upper.is_nan() || !(lower < upper) {
            return Err(CpeError::invalid(format!(
                "prediction space needs lower < upper, got [{lower}, {upper}]"
            )));
        }
        Ok(PredictionSpace { lower, upper })
    }

    pub const fn real_line() -> Self {
        PredictionSpace {
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        }
    }

    pub const fn symmetric_unit() -> Self {
        PredictionSpace { lower: -1.0, upper: 1.0 }
    }

    pub const fn unit_interval() -> Self {
        PredictionSpace { lower: 0.0, upper: 1.0 }
    }

    pub fn is_bounded(&self) -> bool {
        self.lower.is_finite() && self.upper.is_finite()
    }

    pub fn contains(&self, v: f64) -> bool {
        v.is_finite() && v >= self.lower && v <= self.upper
    }

    pub fn check(&self, v: f64) -> Result<()> {
        if self.contains(v) {
            Ok(())
        } else {
            Err(CpeError::Domain {
                value: v,
                domain: self.to_string(),
            })
        }
    }
}

impl fmt::Display for PredictionSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let open = if self.lower.is_finite() { '[' } else { '(' };
        let close = if self.upper.is_finite() { ']' } else { ')' };
        write!(f, "{open}{}, {}{close}", self.lower, self.upper)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SetKind {
    Point,
    Interval,
    HalfLine,
    All,
}

/// A connected set of predictions with typed endpoints: the minimizers `v*(eta)`.
///
/// A point at `+-inf` stands for a minimum that is only approached in the
/// limit (logistic loss at `eta` in `{0, 1}`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalSet {
    pub lower: f64,
    pub upper: f64,
    pub lower_closed: bool,
    pub upper_closed: bool,
}

impl OptimalSet {
    pub fn point(v: f64) -> Self {
        OptimalSet {
            lower: v,
            upper: v,
            lower_closed: true,
            upper_closed: true,
        }
    }

    pub fn closed(lower: f64, upper: f64) -> Self {
        OptimalSet {
            lower,
            upper,
            lower_closed: true,
            upper_closed: true,
        }
    }

    /// `[lower, +inf)`
    pub fn at_least(lower: f64) -> Self {
        OptimalSet {
            lower,
            upper: f64::INFINITY,
            lower_closed: true,
            upper_closed: false,
        }
    }

    /// `(-inf, upper]`
    pub fn at_most(upper: f64) -> Self {
        OptimalSet {
            lower: f64::NEG_INFINITY,
            upper,
            lower_closed: false,
            upper_closed: true,
        }
    }

    /// `(lower, +inf)`
    pub fn above(lower: f64) -> Self {
        OptimalSet {
            lower,
            upper: f64::INFINITY,
            lower_closed: false,
            upper_closed: false,
        }
    }

    /// `(-inf, upper)`
    pub fn below(upper: f64) -> Self {
        OptimalSet {
            lower: f64::NEG_INFINITY,
            upper,
            lower_closed: false,
            upper_closed: false,
        }
    }

    pub fn all() -> Self {
        OptimalSet {
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
            lower_closed: false,
            upper_closed: false,
        }
    }

    pub fn kind(&self) -> SetKind {
        match (self.lower.is_finite(), self.upper.is_finite()) {
            _ if self.lower == self.upper => SetKind::Point,
            (true, true) => SetKind::Interval,
            (false, false) => SetKind::All,
            _ => SetKind::HalfLine,
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        if self.kind() == SetKind::Point {
            return v == self.lower;
        }
        let above = if self.lower_closed { v >= self.lower } else { v > self.lower };
        let below = if self.upper_closed { v <= self.upper } else { v < self.upper };
        above && below
    }

    pub fn intersect(&self, other: &OptimalSet) -> Option<OptimalSet> {
        let (lower, lower_closed) = if self.lower > other.lower {
            (self.lower, self.lower_closed)
        } else if other.lower > self.lower {
            (other.lower, other.lower_closed)
        } else {
            (self.lower, self.lower_closed && other.lower_closed)
        };
        let (upper, upper_closed) = if self.upper < other.upper {
            (self.upper, self.upper_closed)
        } else if other.upper < self.upper {
            (other.upper, other.upper_closed)
        } else {
            (self.upper, self.upper_closed && other.upper_closed)
        };
        let nonempty = lower < upper || (lower == upper && lower_closed && upper_closed);
        nonempty.then_some(OptimalSet {
            lower,
            upper,
            lower_closed,
            upper_closed,
        })
    }

    /// A point of the set; finite whenever the set has a finite member.
    pub fn representative(&self) -> f64 {
        match (self.lower.is_finite(), self.upper.is_finite()) {
            (true, true) => 0.5 * (self.lower + self.upper),
            (true, false) => self.lower + if self.lower_closed { 0.0 } else { 1.0 },
            (false, true) => self.upper - if self.upper_closed { 0.0 } else { 1.0 },
            (false, false) if self.lower == self.upper => self.lower,
            (false, false) => 0.0,
        }
    }

    /// A handful of members spread over the set, including closed endpoints.
    pub fn sample_points(&self) -> Vec<f64> {
        match self.kind() {
            SetKind::Point => vec![self.lower],
            SetKind::Interval => {
                let mut pts = vec![
                    self.lower + 0.25 * (self.upper - self.lower),
                    0.5 * (self.lower + self.upper),
                    self.lower + 0.75 * (self.upper - self.lower),
                ];
                if self.lower_closed {
                    pts.push(self.lower);
                }
                if self.upper_closed {
                    pts.push(self.upper);
                }
                pts
            }
            SetKind::HalfLine => {
                let (anchor, dir, closed) = if self.lower.is_finite() {
                    (self.lower, 1.0, self.lower_closed)
                } else {
                    (self.upper, -1.0, self.upper_closed)
                };
                let mut pts: Vec<f64> = [0.5, 1.0, 10.0, 1e3].iter().map(|d| anchor + dir * d).collect();
                if closed {
                    pts.push(anchor);
                }
                pts
            }
            SetKind::All => vec![-100.0, -1.0, 0.0, 0.5, 1.0, 100.0],
        }
    }
}

impl fmt::Display for OptimalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.kind() == SetKind::Point {
            return write!(f, "{{{}}}", self.lower);
        }
        let open = if self.lower_closed { '[' } else { '(' };
        let close = if self.upper_closed { ']' } else { ')' };
        write!(f, "{open}{}, {}{close}", self.lower, self.upper)
    }
}
