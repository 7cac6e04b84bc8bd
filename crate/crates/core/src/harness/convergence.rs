use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::erm::{
    exact_excess_risk, exact_l1_error, exact_tail_probability, fit_counts, sample_counts, true_risk_minimizer,
    DiscreteProblem, FeatureMap, FitOptions, FittedModel,
};
use crate::error::{CpeError, Result};
use crate::loss::composite;
use crate::properness::{estimate_delta, DeltaPoint};

/// Absolute slack in `tail <= excess / delta`, covering the grid error of `delta`.
pub const MARKOV_SLACK: f64 = 1e-6;
/// True-risk excess below which a problem counts as well specified.
pub const WELL_SPECIFIED_TOL: f64 = 1e-9;
/// Largest fraction of failed fits per sample size before a run aborts.
pub const MAX_FAILURE_RATE: f64 = 0.05;

fn default_repetitions() -> usize {
    200
}

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceConfig {
    pub problem: DiscreteProblem,
    pub loss_name: String,
    pub sample_sizes: Vec<usize>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    pub epsilons: Vec<f64>,
    #[serde(default = "default_seed")]
    pub root_seed: u64,
    /// Declares that `eta` is not representable; otherwise such problems are rejected.
    #[serde(default)]
    pub misspecified: bool,
}

impl ConvergenceConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CpeError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| CpeError::Json {
            context: path.display().to_string(),
            source,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_sizes.is_empty() || self.sample_sizes[0] == 0 {
            return Err(CpeError::invalid("sample sizes must be nonempty and positive"));
        }
        if self.sample_sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CpeError::invalid("sample sizes must be strictly increasing"));
        }
        if self.repetitions == 0 {
            return Err(CpeError::invalid("repetitions must be at least 1"));
        }
        if self.epsilons.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
            return Err(CpeError::invalid("epsilons must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub n: usize,
    pub eps: f64,
    pub mean_tail: f64,
    pub median_tail: f64,
    pub q90_tail: f64,
    pub mean_l1: f64,
    pub mean_excess_risk: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeSummary {
    pub n: usize,
    pub fits: usize,
    pub failures: usize,
    pub solver_warnings: usize,
    pub mean_l1: f64,
    pub sd_l1: f64,
    pub mean_excess_risk: f64,
    pub sd_excess_risk: f64,
}

impl SizeSummary {
    pub fn se_l1(&self) -> f64 {
        if self.fits == 0 {
            f64::INFINITY
        } else {
            self.sd_l1 / (self.fits as f64).sqrt()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub n: usize,
    pub repetition: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub loss: String,
    pub feature_map: FeatureMap,
    pub feature_map_version: u32,
    pub root_seed: u64,
    pub repetitions: usize,
    pub misspecified: bool,
    /// Excess risk of the true-risk minimizer: 0 when well specified, the
    /// Bregman floor otherwise.
    pub excess_floor: f64,
    pub deltas: Vec<DeltaPoint>,
    pub rows: Vec<TailRow>,
    pub sizes: Vec<SizeSummary>,
    pub markov_violations: usize,
    /// Consecutive sizes where mean L1 error rose by more than two standard errors.
    pub monotonicity_violations: usize,
    /// For misspecified runs: mean excess risk at the largest n within two
    /// standard deviations of the floor.
    pub floor_check: Option<bool>,
    /// Least-squares slope of log mean L1 error against log n (descriptive only).
    pub l1_log_log_slope: Option<f64>,
    pub failures: Vec<FailureRecord>,
}

impl ConvergenceReport {
    pub fn invariant_violations(&self) -> usize {
        self.markov_violations + self.monotonicity_violations + usize::from(self.floor_check == Some(false))
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of repetition `rep` at sample size `n`.
pub fn derive_seed(root_seed: u64, rep: usize, n: usize) -> u64 {
    let h = splitmix64(root_seed);
    let h = splitmix64(h ^ rep as u64);
    splitmix64(h ^ (n as u64).rotate_left(32))
}

struct Fit {
    l1: f64,
    excess: f64,
    tails: Vec<f64>,
    warned: bool,
    markov_violations: usize,
}

fn run_one(cfg: &ConvergenceConfig, deltas: &[DeltaPoint], n: usize, rep: usize) -> Result<Fit> {
    let counts = sample_counts(&cfg.problem, n, derive_seed(cfg.root_seed, rep, n))?;
    let model: FittedModel = fit_counts(&cfg.problem, &counts, &cfg.loss_name, FitOptions::default())?;
    let excess = exact_excess_risk(&cfg.problem, &model)?;
    let tails = cfg
        .epsilons
        .iter()
        .map(|&eps| exact_tail_probability(&cfg.problem, &model, eps))
        .collect::<Result<Vec<_>>>()?;
    let markov_violations = tails
        .iter()
        .zip(deltas)
        .filter(|(tail, d)| **tail > excess / d.delta + MARKOV_SLACK)
        .count();
    Ok(Fit {
        l1: exact_l1_error(&cfg.problem, &model)?,
        excess,
        tails,
        warned: model.solver_report.warning.is_some(),
        markov_violations,
    })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

fn median(sorted: &[f64]) -> f64 {
    let m = sorted.len();
    if m % 2 == 1 {
        sorted[m / 2]
    } else {
        0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
    }
}

/// Nearest-rank quantile of sorted values.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn log_log_slope(sizes: &[SizeSummary]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = sizes
        .iter()
        .filter(|s| s.fits > 0 && s.mean_l1 > 0.0)
        .map(|s| ((s.n as f64).ln(), s.mean_l1.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// Repeated sample / fit / score runs over the configured sample sizes.
///
/// Each fit is scored exactly over the support, and the Markov inequality
/// `P(|eta - eta_hat| > eps) <= excess / delta(eps)` is checked per fit.
pub fn run_convergence(cfg: &ConvergenceConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let cl = composite(&cfg.loss_name)?;
    let f0 = true_risk_minimizer(&cfg.problem, &cfg.loss_name)?;
    let excess_floor = exact_excess_risk(&cfg.problem, &f0)?;
    if excess_floor > WELL_SPECIFIED_TOL && !cfg.misspecified {
        return Err(CpeError::invalid(format!(
            "problem is not well specified for `{}` under {} features (best-in-class excess risk {excess_floor:.3e}); \
             set `misspecified` to run it anyway",
            cfg.loss_name,
            cfg.problem.feature_map().name()
        )));
    }
    let deltas = cfg
        .epsilons
        .iter()
        .map(|&eps| estimate_delta(&cl, eps, (eps / 10.0).min(1e-3)).map(|delta| DeltaPoint { eps, delta }))
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    let mut sizes = Vec::new();
    let mut failures = Vec::new();
    let mut markov_violations = 0;
    for &n in &cfg.sample_sizes {
        let outcomes: Vec<Result<Fit>> = (0..cfg.repetitions)
            .into_par_iter()
            .map(|rep| run_one(cfg, &deltas, n, rep))
            .collect();
        let mut fits = Vec::with_capacity(outcomes.len());
        let mut size_failures = 0;
        for (rep, outcome) in outcomes.into_iter().enumerate() {
            match outcome {
                Ok(fit) => fits.push(fit),
                Err(e) => {
                    size_failures += 1;
                    failures.push(FailureRecord {
                        n,
                        repetition: rep,
                        message: e.to_string(),
                    });
                }
            }
        }
        if size_failures as f64 > MAX_FAILURE_RATE * cfg.repetitions as f64 {
            let first: Vec<String> = failures
                .iter()
                .filter(|f| f.n == n)
                .take(3)
                .map(|f| format!("rep {}: {}", f.repetition, f.message))
                .collect();
            return Err(CpeError::Numeric(format!(
                "{size_failures} of {} fits failed at n = {n}; first failures: {}",
                cfg.repetitions,
                first.join("; ")
            )));
        }
        markov_violations += fits.iter().map(|f| f.markov_violations).sum::<usize>();
        let l1: Vec<f64> = fits.iter().map(|f| f.l1).collect();
        let excess: Vec<f64> = fits.iter().map(|f| f.excess).collect();
        let summary = SizeSummary {
            n,
            fits: fits.len(),
            failures: size_failures,
            solver_warnings: fits.iter().filter(|f| f.warned).count(),
            mean_l1: mean(&l1),
            sd_l1: sd(&l1),
            mean_excess_risk: mean(&excess),
            sd_excess_risk: sd(&excess),
        };
        for (k, &eps) in cfg.epsilons.iter().enumerate() {
            let mut tails: Vec<f64> = fits.iter().map(|f| f.tails[k]).collect();
            tails.sort_by(f64::total_cmp);
            rows.push(TailRow {
                n,
                eps,
                mean_tail: mean(&tails),
                median_tail: median(&tails),
                q90_tail: quantile(&tails, 0.9),
                mean_l1: summary.mean_l1,
                mean_excess_risk: summary.mean_excess_risk,
            });
        }
        sizes.push(summary);
    }

    let monotonicity_violations = sizes
        .windows(2)
        .filter(|w| w[1].mean_l1 > w[0].mean_l1 + 2.0 * w[0].se_l1().hypot(w[1].se_l1()))
        .count();
    let floor_check = cfg.misspecified.then(|| {
        let last = sizes.last().expect("sample sizes are nonempty");
        (last.mean_excess_risk - excess_floor).abs() <= 2.0 * last.sd_excess_risk + WELL_SPECIFIED_TOL
    });
    Ok(ConvergenceReport {
        loss: cfg.loss_name.clone(),
        feature_map: cfg.problem.feature_map(),
        feature_map_version: cfg.problem.feature_map().version(),
        root_seed: cfg.root_seed,
        repetitions: cfg.repetitions,
        misspecified: cfg.misspecified,
        excess_floor,
        deltas,
        l1_log_log_slope: log_log_slope(&sizes),
        rows,
        sizes,
        markov_violations,
        monotonicity_violations,
        floor_check,
        failures,
    })
}
