use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::difficulty::global_score;
use crate::error::{LabError, Result};
use crate::losses::ProblemKind;
use crate::vecspace::{BaseDistribution, LabeledExample, ParamVector};

/// Law of the per-example global scores planted in a pool.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScoreLaw {
    /// Every example is fit exactly by the optimum.
    Zero,
    PointMass { psi: f64 },
    /// `|N(0, sd^2)|`.
    HalfGaussian { sd: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl ScoreLaw {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ScoreLaw::Zero => true,
            ScoreLaw::PointMass { psi } => psi.is_finite() && psi >= 0.0,
            ScoreLaw::HalfGaussian { sd } => sd.is_finite() && sd > 0.0,
            ScoreLaw::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo < hi,
        };
        if !ok {
            return Err(LabError::InvalidParameter(format!("invalid score law {self:?}")));
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        match *self {
            ScoreLaw::Zero => 0.0,
            ScoreLaw::PointMass { psi } => psi,
            ScoreLaw::HalfGaussian { sd } => sd * (2.0 / std::f64::consts::PI).sqrt(),
            ScoreLaw::Uniform { lo, hi } => 0.5 * (lo + hi),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            ScoreLaw::Zero | ScoreLaw::PointMass { .. } => 0.0,
            ScoreLaw::HalfGaussian { sd } => sd * sd * (1.0 - 2.0 / std::f64::consts::PI),
            ScoreLaw::Uniform { lo, hi } => (hi - lo).powi(2) / 12.0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ScoreLaw::Zero => 0.0,
            ScoreLaw::PointMass { psi } => psi,
            ScoreLaw::HalfGaussian { sd } => Normal::new(0.0, sd).expect("validated sd").sample(rng).abs(),
            ScoreLaw::Uniform { lo, hi } => rng.random_range(lo..hi),
        }
    }
}

/// A pool member with its stable id and planted global score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolExample {
    pub id: usize,
    pub ex: LabeledExample,
    pub psi: f64,
}

/// A finite training set with a planted optimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pool {
    pub w_bar: ParamVector,
    pub examples: Vec<PoolExample>,
}

impl Pool {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// The pool with every data vector scaled by `a` and the optimum by
    /// `1 / a`. Margins, and hence all scores, are unchanged.
    pub fn rescaled(&self, a: f64) -> Result<Pool> {
        Ok(Pool {
            w_bar: self.w_bar.scale(1.0 / a)?,
            examples: self
                .examples
                .iter()
                .map(|p| Ok(PoolExample { id: p.id, ex: p.ex.rescaled(a)?, psi: p.psi }))
                .collect::<Result<_>>()?,
        })
    }
}

/// Draws `size` examples from `dist` with scores from `law`.
///
/// Regression labels are `y = x . w_bar +- psi` with a fair sign. Hinge
/// labels are `sign(x . w_bar)`, after which the features are shifted along
/// `w_bar` until the margin `y (x . w_bar)` equals `1 - psi`; a zero score
/// only lifts margins below 1 up to 1.
pub fn build_pool<R: Rng + ?Sized>(
    problem: &ProblemKind,
    dist: &BaseDistribution,
    w_bar: &ParamVector,
    size: usize,
    law: &ScoreLaw,
    rng: &mut R,
) -> Result<Pool> {
    problem.validate()?;
    dist.validate()?;
    law.validate()?;
    if size == 0 {
        return Err(LabError::InvalidParameter("pool size must be at least 1".into()));
    }
    if w_bar.feature_dim() != dist.dim() {
        return Err(LabError::Dimension { expected: dist.dim() + 1, found: w_bar.len() });
    }
    let d = dist.dim();
    let wf = &w_bar.coords()[..d];
    let wf_sq: f64 = wf.iter().map(|v| v * v).sum();
    if problem.is_hinge() && wf_sq == 0.0 {
        return Err(LabError::InvalidParameter("hinge optimum needs a nonzero feature part".into()));
    }
    let mut examples = Vec::with_capacity(size);
    for id in 0..size {
        let x = dist.sample_base(rng);
        let psi = law.sample(rng);
        let ex = if problem.is_hinge() {
            let margin = x.dot(w_bar)?;
            let y = if margin >= 0.0 { 1.0 } else { -1.0 };
            let target = if psi > 0.0 { 1.0 - psi } else { (y * margin).max(1.0) };
            let shift = y * target - margin;
            let mut c = x.into_inner();
            for (ci, wi) in c.iter_mut().zip(wf) {
                *ci += shift * wi / wf_sq;
            }
            LabeledExample::classification(ParamVector::new(c)?, y)?
        } else {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let y = x.dot(w_bar)? + sign * psi;
            LabeledExample::new(x, y)?
        };
        let psi = if problem.is_hinge() { psi } else { global_score(problem, &ex, w_bar)? };
        examples.push(PoolExample { id, ex, psi });
    }
    Ok(Pool { w_bar: w_bar.clone(), examples })
}
