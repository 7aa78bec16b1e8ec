use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::marginal::{Marginal, ATOM_TOLERANCE};
use super::ParamVector;
use crate::error::{LabError, Result};

/// One support point of a [`BaseDistribution::PointMass`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub features: Vec<f64>,
    pub weight: f64,
}

/// Law of the feature part of `x`; the bias slot is appended after sampling.
///
/// Only families whose one-dimensional projections have closed-form
/// densities are offered, because the conditioned samplers and the
/// density-ratio estimators evaluate those densities exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseDistribution {
    /// `N(0, I_dim)`.
    StandardGaussian { dim: usize },
    /// Uniform on the centered ball of the given radius.
    UniformBall { dim: usize, radius: f64 },
    /// Uniform on the axis-aligned box `prod_k [lower_k, upper_k]`.
    UniformBox { lower: Vec<f64>, upper: Vec<f64> },
    /// Finitely many atoms with positive weights summing to one.
    PointMass { atoms: Vec<Atom> },
}

impl BaseDistribution {
    pub fn standard_gaussian(dim: usize) -> Result<Self> {
        let d = Self::StandardGaussian { dim };
        d.validate()?;
        Ok(d)
    }

    pub fn uniform_ball(dim: usize, radius: f64) -> Result<Self> {
        let d = Self::UniformBall { dim, radius };
        d.validate()?;
        Ok(d)
    }

    /// The symmetric box `[-half_width, half_width]^dim`.
    pub fn uniform_box(dim: usize, half_width: f64) -> Result<Self> {
        Self::uniform_box_bounds(vec![-half_width; dim], vec![half_width; dim])
    }

    pub fn uniform_box_bounds(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let d = Self::UniformBox { lower, upper };
        d.validate()?;
        Ok(d)
    }

    pub fn point_mass(atoms: Vec<Atom>) -> Result<Self> {
        let d = Self::PointMass { atoms };
        d.validate()?;
        Ok(d)
    }

    /// A point mass at a single feature vector.
    pub fn single_atom(features: Vec<f64>) -> Result<Self> {
        Self::point_mass(vec![Atom { features, weight: 1.0 }])
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(LabError::InvalidParameter(m));
        match self {
            Self::StandardGaussian { dim } if *dim == 0 => invalid("dimension must be positive".into()),
            Self::UniformBall { dim, radius } => {
                if *dim == 0 {
                    invalid("dimension must be positive".into())
                } else if !(radius.is_finite() && *radius > 0.0) {
                    invalid(format!("ball radius must be positive, got {radius}"))
                } else {
                    Ok(())
                }
            }
            Self::UniformBox { lower, upper } => {
                if lower.is_empty() || lower.len() != upper.len() {
                    invalid("box bounds must be nonempty and of equal length".into())
                } else if lower.iter().zip(upper).any(|(l, u)| !(l.is_finite() && u.is_finite() && u > l)) {
                    invalid("box half-widths must be positive".into())
                } else {
                    Ok(())
                }
            }
            Self::PointMass { atoms } => {
                let Some(first) = atoms.first() else {
                    return invalid("point mass needs at least one atom".into());
                };
                let dim = first.features.len();
                if dim == 0 || atoms.iter().any(|a| a.features.len() != dim) {
                    return invalid("atoms must share a positive dimension".into());
                }
                if atoms.iter().any(|a| !(a.weight > 0.0) || a.features.iter().any(|f| !f.is_finite())) {
                    return invalid("atom weights must be positive and coordinates finite".into());
                }
                let total: f64 = atoms.iter().map(|a| a.weight).sum();
                if (total - 1.0).abs() > 1e-9 {
                    return invalid(format!("atom weights sum to {total}, not 1"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Number of features `d`.
    pub fn dim(&self) -> usize {
        match self {
            Self::StandardGaussian { dim } | Self::UniformBall { dim, .. } => *dim,
            Self::UniformBox { lower, .. } => lower.len(),
            Self::PointMass { atoms } => atoms[0].features.len(),
        }
    }

    pub fn sample_features<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            Self::StandardGaussian { dim } => gaussian_vec(*dim, rng),
            Self::UniformBall { dim, radius } => {
                let z = gaussian_vec(*dim, rng);
                let norm = z.iter().map(|c| c * c).sum::<f64>().sqrt();
                let u: f64 = rng.random();
                let r = radius * u.powf(1.0 / *dim as f64);
                z.into_iter().map(|c| c / norm * r).collect()
            }
            Self::UniformBox { lower, upper } => {
                lower.iter().zip(upper).map(|(l, u)| l + (u - l) * rng.random::<f64>()).collect()
            }
            Self::PointMass { atoms } => {
                let pick: f64 = rng.random();
                let mut acc = 0.0;
                for atom in atoms {
                    acc += atom.weight;
                    if pick < acc {
                        return atom.features.clone();
                    }
                }
                atoms[atoms.len() - 1].features.clone()
            }
        }
    }

    /// Draws `x = [features, 1]`.
    pub fn sample_base<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        ParamVector::from_features(&self.sample_features(rng)).expect("sampled features are finite")
    }

    /// Marginal law of feature coordinate `k`.
    pub fn axis_marginal(&self, k: usize) -> Result<Marginal> {
        if k >= self.dim() {
            return Err(LabError::Dimension { expected: self.dim(), found: k + 1 });
        }
        Ok(match self {
            Self::StandardGaussian { .. } => Marginal::Gaussian { mean: 0.0, sd: 1.0 },
            Self::UniformBall { dim, radius } => Marginal::PowerSemicircle {
                center: 0.0,
                half_width: *radius,
                exponent: (*dim as f64 - 1.0) / 2.0,
            },
            Self::UniformBox { lower, upper } => Marginal::Uniform { lo: lower[k], hi: upper[k] },
            Self::PointMass { atoms } => Marginal::Discrete {
                atoms: atoms.iter().map(|a| (a.features[k], a.weight)).collect(),
            },
        })
    }

    /// Law of the scalar `u = x . dir` for `x = [features, 1]`.
    pub fn projection(&self, dir: &ParamVector) -> Result<Marginal> {
        let (of, ob) = self.split_direction(dir)?;
        let s = of.iter().map(|c| c * c).sum::<f64>().sqrt();
        if s == 0.0 && !matches!(self, Self::PointMass { .. }) {
            return Ok(Marginal::Discrete { atoms: vec![(ob, 1.0)] });
        }
        Ok(match self {
            Self::StandardGaussian { .. } => Marginal::Gaussian { mean: ob, sd: s },
            Self::UniformBall { dim, radius } => Marginal::PowerSemicircle {
                center: ob,
                half_width: s * radius,
                exponent: (*dim as f64 - 1.0) / 2.0,
            },
            Self::UniformBox { lower, upper } => {
                let k = single_axis(of).ok_or_else(|| {
                    LabError::UnsupportedConditioning(
                        "uniform box projections are only closed-form along a coordinate axis".into(),
                    )
                })?;
                let (a, b) = (ob + of[k] * lower[k], ob + of[k] * upper[k]);
                Marginal::Uniform { lo: a.min(b), hi: a.max(b) }
            }
            Self::PointMass { atoms } => Marginal::Discrete {
                atoms: atoms.iter().map(|a| (dot_features(&a.features, of) + ob, a.weight)).collect(),
            },
        })
    }

    /// Draws features from the conditional law given `x . dir == u`.
    pub fn sample_given_projection<R: Rng + ?Sized>(
        &self,
        dir: &ParamVector,
        u: f64,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let (of, ob) = self.split_direction(dir)?;
        let s = of.iter().map(|c| c * c).sum::<f64>().sqrt();
        if s == 0.0 && !matches!(self, Self::PointMass { .. }) {
            if (u - ob).abs() > ATOM_TOLERANCE * ob.abs().max(1.0) {
                return Err(LabError::UnsupportedConditioning(format!(
                    "projection is the constant {ob}, cannot condition on {u}"
                )));
            }
            return Ok(self.sample_features(rng));
        }
        match self {
            Self::StandardGaussian { dim } => {
                let e: Vec<f64> = of.iter().map(|c| c / s).collect();
                let t = (u - ob) / s;
                let z = gaussian_vec(*dim, rng);
                let along = dot_features(&z, &e);
                Ok(z.iter().zip(&e).map(|(zi, ei)| zi - along * ei + t * ei).collect())
            }
            Self::UniformBall { dim, radius } => {
                let e: Vec<f64> = of.iter().map(|c| c / s).collect();
                let t = (u - ob) / s;
                if t.abs() > *radius {
                    return Err(LabError::UnsupportedConditioning(format!(
                        "projection {u} lies outside the ball's support"
                    )));
                }
                let mut g: Vec<f64> = e.iter().map(|ei| t * ei).collect();
                if *dim > 1 {
                    let rho = (radius * radius - t * t).max(0.0).sqrt();
                    let z = gaussian_vec(*dim, rng);
                    let along = dot_features(&z, &e);
                    let perp: Vec<f64> = z.iter().zip(&e).map(|(zi, ei)| zi - along * ei).collect();
                    let pnorm = perp.iter().map(|c| c * c).sum::<f64>().sqrt();
                    let v: f64 = rng.random();
                    let radial = rho * v.powf(1.0 / (*dim as f64 - 1.0));
                    for (gi, pi) in g.iter_mut().zip(&perp) {
                        *gi += radial * pi / pnorm;
                    }
                }
                Ok(g)
            }
            Self::UniformBox { lower, upper } => {
                let k = single_axis(of).ok_or_else(|| {
                    LabError::UnsupportedConditioning(
                        "uniform box conditionals are only closed-form along a coordinate axis".into(),
                    )
                })?;
                let xk = (u - ob) / of[k];
                let slack = ATOM_TOLERANCE * (upper[k] - lower[k]);
                if xk < lower[k] - slack || xk > upper[k] + slack {
                    return Err(LabError::UnsupportedConditioning(format!(
                        "projection {u} lies outside the box's support"
                    )));
                }
                let mut g = self.sample_features(rng);
                g[k] = xk;
                Ok(g)
            }
            Self::PointMass { atoms } => {
                let matches: Vec<&Atom> = atoms
                    .iter()
                    .filter(|a| {
                        let ua = dot_features(&a.features, of) + ob;
                        (ua - u).abs() <= ATOM_TOLERANCE * ua.abs().max(1.0)
                    })
                    .collect();
                if matches.is_empty() {
                    return Err(LabError::UnsupportedConditioning(format!("no atom projects onto {u}")));
                }
                let total: f64 = matches.iter().map(|a| a.weight).sum();
                let pick = rng.random::<f64>() * total;
                let mut acc = 0.0;
                for atom in &matches {
                    acc += atom.weight;
                    if pick < acc {
                        return Ok(atom.features.clone());
                    }
                }
                Ok(matches[matches.len() - 1].features.clone())
            }
        }
    }

    fn split_direction<'a>(&self, dir: &'a ParamVector) -> Result<(&'a [f64], f64)> {
        if dir.feature_dim() != self.dim() {
            return Err(LabError::Dimension { expected: self.dim() + 1, found: dir.len() });
        }
        let c = dir.coords();
        Ok((&c[..c.len() - 1], c[c.len() - 1]))
    }
}

fn gaussian_vec<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

fn dot_features(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn single_axis(of: &[f64]) -> Option<usize> {
    let mut nonzero = of.iter().enumerate().filter(|(_, c)| **c != 0.0);
    match (nonzero.next(), nonzero.next()) {
        (Some((k, _)), None) => Some(k),
        _ => None,
    }
}
