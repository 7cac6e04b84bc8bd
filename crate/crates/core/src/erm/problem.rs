use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CpeError, Result};

/// Tolerance on the total mass of a problem's marginal.
pub const MASS_TOL: f64 = 1e-9;

/// Named feature maps `x -> phi(x)`; the hypothesis class is `{x -> w . phi(x)}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureMap {
    /// The coordinates followed by a constant 1.
    Affine,
    /// The coordinates alone.
    Linear,
    /// A single constant 1: constant models.
    Constant,
}

impl FeatureMap {
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "affine" => Ok(FeatureMap::Affine),
            "linear" => Ok(FeatureMap::Linear),
            "constant" => Ok(FeatureMap::Constant),
            other => Err(CpeError::invalid(format!(
                "unknown feature map `{other}` (expected affine, linear or constant)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureMap::Affine => "affine",
            FeatureMap::Linear => "linear",
            FeatureMap::Constant => "constant",
        }
    }

    /// Maps are versioned so reports pin down the hypothesis class; all are at v1.
    pub fn version(self) -> u32 {
        1
    }

    pub fn dim(self, input_dim: usize) -> usize {
        match self {
            FeatureMap::Affine => input_dim + 1,
            FeatureMap::Linear => input_dim,
            FeatureMap::Constant => 1,
        }
    }

    pub fn apply(self, x: &[f64]) -> Vec<f64> {
        match self {
            FeatureMap::Affine => x.iter().copied().chain([1.0]).collect(),
            FeatureMap::Linear => x.to_vec(),
            FeatureMap::Constant => vec![1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportPoint {
    pub x: Vec<f64>,
    pub p: f64,
    pub eta: f64,
}

/// A distribution on finitely many points with class-probability function `eta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProblem")]
pub struct DiscreteProblem {
    support: Vec<SupportPoint>,
    feature_map: FeatureMap,
}

#[derive(Deserialize)]
struct RawProblem {
    support: Vec<SupportPoint>,
    feature_map: FeatureMap,
}

impl TryFrom<RawProblem> for DiscreteProblem {
    type Error = CpeError;

    fn try_from(raw: RawProblem) -> Result<Self> {
        DiscreteProblem::new(raw.support, raw.feature_map)
    }
}

impl DiscreteProblem {
    pub fn new(support: Vec<SupportPoint>, feature_map: FeatureMap) -> Result<Self> {
        let first = support
            .first()
            .ok_or_else(|| CpeError::invalid("problem support is empty"))?;
        let dim = first.x.len();
        for (i, pt) in support.iter().enumerate() {
            if pt.x.len() != dim {
                return Err(CpeError::invalid(format!(
                    "support point {i} has dimension {} (expected {dim})",
                    pt.x.len()
                )));
            }
            if pt.x.iter().any(|c| !c.is_finite()) {
                return Err(CpeError::invalid(format!("support point {i} has a non-finite coordinate")));
            }
            if !(pt.p > 0.0 && pt.p <= 1.0) {
                return Err(CpeError::invalid(format!("support point {i}: p = {} not in (0, 1]", pt.p)));
            }
            if !(0.0..=1.0).contains(&pt.eta) {
                return Err(CpeError::invalid(format!("support point {i}: eta = {} not in [0, 1]", pt.eta)));
            }
            if support[..i].iter().any(|q| q.x == pt.x) {
                return Err(CpeError::invalid(format!("support point {i} repeats an earlier point")));
            }
        }
        let mass: f64 = support.iter().map(|pt| pt.p).sum();
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(CpeError::invalid(format!("marginal masses sum to {mass}, not 1")));
        }
        Ok(DiscreteProblem { support, feature_map })
    }

    /// Equal marginal mass on one-dimensional points.
    pub fn uniform_1d(xs: &[f64], etas: &[f64], feature_map: FeatureMap) -> Result<Self> {
        if xs.len() != etas.len() {
            return Err(CpeError::invalid("x and eta lists differ in length"));
        }
        let p = 1.0 / xs.len() as f64;
        let support = xs
            .iter()
            .zip(etas)
            .map(|(&x, &eta)| SupportPoint { x: vec![x], p, eta })
            .collect();
        Self::new(support, feature_map)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|source| CpeError::Json {
            context: "problem".into(),
            source,
        })
    }

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

    pub fn support(&self) -> &[SupportPoint] {
        &self.support
    }

    pub fn feature_map(&self) -> FeatureMap {
        self.feature_map
    }

    pub fn input_dim(&self) -> usize {
        self.support[0].x.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_map.dim(self.input_dim())
    }

    /// The same distribution under another hypothesis class.
    pub fn with_feature_map(&self, feature_map: FeatureMap) -> Self {
        DiscreteProblem {
            support: self.support.clone(),
            feature_map,
        }
    }

    pub fn etas(&self) -> Vec<f64> {
        self.support.iter().map(|pt| pt.eta).collect()
    }
}

/// Labelled draws `(x_i, y_i)` with `y_i` in `{-1, +1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub pairs: Vec<(Vec<f64>, i8)>,
    pub seed: u64,
}

impl LabeledSample {
    /// A sample with given pairs; labels must be `-1` or `+1`.
    pub fn from_pairs(pairs: Vec<(Vec<f64>, i8)>, seed: u64) -> Result<Self> {
        if pairs.is_empty() {
            return Err(CpeError::invalid("sample is empty"));
        }
        if let Some((_, y)) = pairs.iter().find(|(_, y)| *y != 1 && *y != -1) {
            return Err(CpeError::invalid(format!("label {y} is not -1 or +1")));
        }
        Ok(LabeledSample { pairs, seed })
    }

    /// A sample holding `pos[i]` positive and `neg[i]` negative copies of support point `i`.
    pub fn from_counts(problem: &DiscreteProblem, pos: &[usize], neg: &[usize]) -> Result<Self> {
        if pos.len() != problem.support.len() || neg.len() != problem.support.len() {
            return Err(CpeError::invalid("count lists must match the support size"));
        }
        let mut pairs = Vec::new();
        for (pt, (&np, &nn)) in problem.support.iter().zip(pos.iter().zip(neg)) {
            pairs.extend(std::iter::repeat_n((pt.x.clone(), 1), np));
            pairs.extend(std::iter::repeat_n((pt.x.clone(), -1), nn));
        }
        Self::from_pairs(pairs, 0)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn positive_fraction(&self) -> f64 {
        self.pairs.iter().filter(|(_, y)| *y == 1).count() as f64 / self.len() as f64
    }
}

/// Draws `n` points from the marginal and labels each `+1` with probability `eta(x)`.
pub fn sample(problem: &DiscreteProblem, n: usize, seed: u64) -> Result<LabeledSample> {
    if n == 0 {
        return Err(CpeError::invalid("sample size must be at least 1"));
    }
    let mut pairs = Vec::with_capacity(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let index = WeightedIndex::new(problem.support.iter().map(|pt| pt.p))
        .map_err(|e| CpeError::invalid(format!("marginal: {e}")))?;
    for _ in 0..n {
        let i = index.sample(&mut rng);
        let pt = &problem.support[i];
        let y = if rng.gen::<f64>() < pt.eta { 1 } else { -1 };
        pairs.push((pt.x.clone(), y));
    }
    Ok(LabeledSample { pairs, seed })
}

/// Per-support-point `(positives, negatives)` of the sample [`sample`] draws
/// with the same seed, without materializing the pairs.
pub fn sample_counts(problem: &DiscreteProblem, n: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let index = WeightedIndex::new(problem.support.iter().map(|pt| pt.p))
        .map_err(|e| CpeError::invalid(format!("marginal: {e}")))?;
    let mut counts = vec![(0usize, 0usize); problem.support.len()];
    for _ in 0..n {
        let i = index.sample(&mut rng);
        if rng.gen::<f64>() < problem.support[i].eta {
            counts[i].0 += 1;
        } else {
            counts[i].1 += 1;
        }
    }
    Ok(counts)
}
