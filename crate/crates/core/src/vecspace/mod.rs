//! Core numeric types: parameter vectors, labeled examples, base data
//! distributions and seeded randomness streams.
//!
//! Every vector lives in `R^(d+1)`: `d` feature coordinates followed by the
//! bias slot. A data point `x` carries `1` in that slot, so `x . w` is the
//! affine prediction `a . features + b` of the hypothesis `w = [a, b]`.

mod distribution;
mod marginal;
mod rng;

pub use distribution::{Atom, BaseDistribution};
pub use marginal::{Marginal, ATOM_TOLERANCE};
pub use rng::RngStream;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// A point of the parameter space `R^(d+1)`; also used for data vectors,
/// gradient steps and hyperplane normals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    /// Builds a vector of length at least 2 with finite entries.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(LabError::InvalidParameter(format!(
                "parameter vectors need a feature and a bias slot, got length {}",
                coords.len()
            )));
        }
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(LabError::NonFinite(format!("coordinate {bad}")));
        }
        Ok(Self(coords))
    }

    /// Appends the bias coordinate `1` to a feature vector.
    pub fn from_features(features: &[f64]) -> Result<Self> {
        let mut coords = Vec::with_capacity(features.len() + 1);
        coords.extend_from_slice(features);
        coords.push(1.0);
        Self::new(coords)
    }

    pub fn zeros(len: usize) -> Result<Self> {
        Self::new(vec![0.0; len])
    }

    /// The `i`-th standard basis vector of length `len`.
    pub fn basis(len: usize, i: usize) -> Result<Self> {
        if i >= len {
            return Err(LabError::Dimension { expected: len, found: i + 1 });
        }
        let mut v = vec![0.0; len];
        v[i] = 1.0;
        Self::new(v)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of feature coordinates (`len - 1`).
    pub fn feature_dim(&self) -> usize {
        self.0.len() - 1
    }

    pub fn bias(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    pub fn dot(&self, other: &ParamVector) -> Result<f64> {
        dot(self, other)
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn add(&self, other: &ParamVector) -> Result<ParamVector> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ParamVector) -> Result<ParamVector> {
        self.zip_with(other, |a, b| a - b)
    }

    /// `self + factor * other`.
    pub fn add_scaled(&self, factor: f64, other: &ParamVector) -> Result<ParamVector> {
        self.zip_with(other, |a, b| a + factor * b)
    }

    pub fn scale(&self, factor: f64) -> Result<ParamVector> {
        ParamVector::new(self.0.iter().map(|c| c * factor).collect())
    }

    pub fn distance(&self, other: &ParamVector) -> Result<f64> {
        check_len(self, other)?;
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
    }

    /// Cosine of the angle between two nonzero vectors.
    pub fn cosine(&self, other: &ParamVector) -> Result<f64> {
        let denom = self.norm() * other.norm();
        if denom == 0.0 {
            return Err(LabError::InvalidParameter("cosine of a zero vector".into()));
        }
        Ok(self.dot(other)? / denom)
    }

    fn zip_with(&self, other: &ParamVector, f: impl Fn(f64, f64) -> f64) -> Result<ParamVector> {
        check_len(self, other)?;
        ParamVector::new(self.0.iter().zip(&other.0).map(|(a, b)| f(*a, *b)).collect())
    }
}

impl TryFrom<Vec<f64>> for ParamVector {
    type Error = LabError;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        ParamVector::new(v)
    }
}

impl From<ParamVector> for Vec<f64> {
    fn from(v: ParamVector) -> Self {
        v.0
    }
}

fn check_len(a: &ParamVector, b: &ParamVector) -> Result<()> {
    if a.len() != b.len() {
        return Err(LabError::Dimension { expected: a.len(), found: b.len() });
    }
    Ok(())
}

/// `sum_i a_i b_i`.
pub fn dot(a: &ParamVector, b: &ParamVector) -> Result<f64> {
    check_len(a, b)?;
    Ok(a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum())
}

/// A data point `x = [features, 1]` with its label.
///
/// The bias slot of `x` is exactly 1, except for examples produced by
/// [`LabeledExample::rescaled`], whose whole vector (bias slot included) was
/// multiplied by the scale factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    x: ParamVector,
    y: f64,
}

impl LabeledExample {
    pub fn new(x: ParamVector, y: f64) -> Result<Self> {
        if x.bias() != 1.0 {
            return Err(LabError::ContractViolation(format!(
                "data vectors carry 1 in the bias slot, found {}",
                x.bias()
            )));
        }
        if !y.is_finite() {
            return Err(LabError::NonFinite(format!("label {y}")));
        }
        Ok(Self { x, y })
    }

    pub fn from_features(features: &[f64], y: f64) -> Result<Self> {
        Self::new(ParamVector::from_features(features)?, y)
    }

    /// A classification example; the label must be `+1` or `-1`.
    pub fn classification(x: ParamVector, y: f64) -> Result<Self> {
        if y.abs() != 1.0 {
            return Err(LabError::ContractViolation(format!("hinge labels are +1 or -1, found {y}")));
        }
        Self::new(x, y)
    }

    /// The example `(a x, y)`: the entire vector, bias slot included, scaled
    /// by `a`. Used to relate a norm-`a` hinge problem to a unit-norm one.
    pub fn rescaled(&self, a: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(LabError::InvalidParameter(format!("scale must be positive, got {a}")));
        }
        Ok(Self { x: self.x.scale(a)?, y: self.y })
    }

    pub fn x(&self) -> &ParamVector {
        &self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn feature_dim(&self) -> usize {
        self.x.feature_dim()
    }
}
