//! Small one-dimensional numerical routines shared by the loss calculus and
//! the misspecification oracle.

use crate::error::{CpeError, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Largest magnitude an unbounded bracket is allowed to expand to.
pub const BRACKET_CAP: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
    pub iterations: usize,
}

/// Golden-section search for the minimizer of a unimodal `f` on `[a, b]`.
///
/// Stops when the bracket is narrower than `tol * (1 + |x|)`.
pub fn golden_section<F>(f: F, mut a: f64, mut b: f64, tol: f64, max_iter: usize) -> Result<Minimum>
where
    F: Fn(f64) -> f64,
{
    if !(a <= b) {
        return Err(CpeError::invalid(format!("golden section bracket [{a}, {b}] is empty")));
    }
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut iterations = 0;
    while (b - a) > tol * (1.0 + 0.5 * (a + b).abs()) {
        if iterations >= max_iter {
            return Err(CpeError::NonConvergence {
                what: "golden-section search",
                iterations,
                achieved: b - a,
                target: tol,
            });
        }
        iterations += 1;
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    // the endpoints are candidates too: flat or monotone functions end up there
    let mid = 0.5 * (a + b);
    let best = [(mid, f(mid)), (a, f(a)), (b, f(b)), (c, fc), (d, fd)]
        .into_iter()
        .fold((mid, f64::INFINITY), |acc, (x, v)| if v < acc.1 { (x, v) } else { acc });
    Ok(Minimum {
        x: best.0,
        value: best.1,
        iterations,
    })
}

/// Finds a finite bracket `[a, b]` inside `[lower, upper]` that contains the
/// minimizer of a convex `f`, expanding geometrically along unbounded sides.
pub fn bracket_convex<F>(f: F, lower: f64, upper: f64) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    let mut a = if lower.is_finite() { lower } else { upper.min(0.0) - 1.0 };
    let mut b = if upper.is_finite() { upper } else { lower.max(0.0) + 1.0 };
    if !lower.is_finite() {
        // walk left while the function keeps decreasing
        let mut step = 1.0;
        while a > -BRACKET_CAP && f(a - step) < f(a) {
            a = (a - step).max(-BRACKET_CAP);
            step *= 2.0;
        }
        a = (a - step).max(-BRACKET_CAP);
    }
    if !upper.is_finite() {
        let mut step = 1.0;
        while b < BRACKET_CAP && f(b + step) < f(b) {
            b = (b + step).min(BRACKET_CAP);
            step *= 2.0;
        }
        b = (b + step).min(BRACKET_CAP);
    }
    (a, b)
}

/// Checks that `f` sampled on `samples + 1` points of `[a, b]` is nonincreasing
/// and then nondecreasing, allowing `slack` of round-off per step.
pub fn is_unimodal<F>(f: F, a: f64, b: f64, samples: usize, slack: f64) -> bool
where
    F: Fn(f64) -> f64,
{
    let values: Vec<f64> = (0..=samples)
        .map(|i| f(a + (b - a) * i as f64 / samples as f64))
        .collect();
    let mut rising = false;
    for w in values.windows(2) {
        let tol = slack * (1.0 + w[0].abs());
        if w[1] > w[0] + tol {
            rising = true;
        } else if rising && w[1] < w[0] - tol {
            return false;
        }
    }
    true
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `x ln x` with the continuous extension `0 ln 0 = 0`.
pub fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Binary entropy in nats.
pub fn binary_entropy(eta: f64) -> f64 {
    -xlogx(eta) - xlogx(1.0 - eta)
}

/// `x - ln(1 + x)` with full relative precision for small `x`.
pub fn x_minus_ln_1p(x: f64) -> f64 {
    if x.abs() < 0.1 {
        // alternating series x^2/2 - x^3/3 + ...; 0.1^18 is below f64 resolution
        let mut term = x * x;
        let mut sum = 0.0;
        for k in 2..20 {
            sum += term / k as f64;
            term *= -x;
        }
        sum
    } else {
        x - x.ln_1p()
    }
}

/// Binary KL divergence `KL(eta || q)` in nats.
///
/// Written as `eta phi(d / eta) + (1 - eta) phi(-d / (1 - eta))` with
/// `phi(x) = x - ln(1 + x)` and `d = q - eta`, which keeps full relative
/// precision as `q` approaches `eta`.
pub fn binary_kl(eta: f64, q: f64) -> f64 {
    let d = q - eta;
    // the limits eta -> 0 and eta -> 1 of the two terms are d and -d
    let pos = if eta == 0.0 {
        d
    } else if q == 0.0 {
        f64::INFINITY
    } else {
        eta * x_minus_ln_1p(d / eta)
    };
    let neg = if eta == 1.0 {
        -d
    } else if q == 1.0 {
        f64::INFINITY
    } else {
        (1.0 - eta) * x_minus_ln_1p(-d / (1.0 - eta))
    };
    pos + neg
}
