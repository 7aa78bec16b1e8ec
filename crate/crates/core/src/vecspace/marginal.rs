//! One-dimensional laws: the marginal of a data distribution along a single
//! direction. These back every density evaluation the estimators need
//! (the four-point density ratio and the hinge integral).

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::beta::beta_reg;
use statrs::function::gamma::ln_gamma;

use crate::error::{LabError, Result};

/// Tolerance used to decide whether a point coincides with a discrete atom.
pub const ATOM_TOLERANCE: f64 = 1e-9;

/// A univariate law with analytically known density and distribution function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Marginal {
    Gaussian { mean: f64, sd: f64 },
    Uniform { lo: f64, hi: f64 },
    /// Density proportional to `(1 - ((x - center) / half_width)^2)^exponent`
    /// on `[center - half_width, center + half_width]`. The projection of a
    /// uniform `d`-ball has exponent `(d - 1) / 2`.
    PowerSemicircle { center: f64, half_width: f64, exponent: f64 },
    /// Finitely many atoms `(location, mass)`; "density" means point mass.
    Discrete { atoms: Vec<(f64, f64)> },
}

impl Marginal {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Marginal::Gaussian { mean, sd } => mean.is_finite() && sd.is_finite() && *sd > 0.0,
            Marginal::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && hi > lo,
            Marginal::PowerSemicircle { center, half_width, exponent } => {
                center.is_finite() && half_width.is_finite() && *half_width > 0.0 && *exponent >= 0.0
            }
            Marginal::Discrete { atoms } => {
                let total: f64 = atoms.iter().map(|a| a.1).sum();
                !atoms.is_empty()
                    && atoms.iter().all(|(x, m)| x.is_finite() && *m > 0.0)
                    && (total - 1.0).abs() < 1e-9
            }
        };
        if ok {
            Ok(())
        } else {
            Err(LabError::NonNormalizable(format!("{self:?}")))
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Marginal::Discrete { .. })
    }

    /// Density at `x`, or the point mass at `x` for discrete laws.
    pub fn pdf(&self, x: f64) -> f64 {
        match self {
            Marginal::Gaussian { mean, sd } => {
                let z = (x - mean) / sd;
                (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
            }
            Marginal::Uniform { lo, hi } => {
                if x >= *lo && x <= *hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            Marginal::PowerSemicircle { center, half_width, exponent } => {
                let t = (x - center) / half_width;
                if t.abs() > 1.0 {
                    return 0.0;
                }
                let log_norm = ln_gamma(exponent + 1.5)
                    - 0.5 * std::f64::consts::PI.ln()
                    - ln_gamma(exponent + 1.0)
                    - half_width.ln();
                let base = 1.0 - t * t;
                if base <= 0.0 {
                    return if *exponent == 0.0 { log_norm.exp() } else { 0.0 };
                }
                (log_norm + exponent * base.ln()).exp()
            }
            Marginal::Discrete { atoms } => atoms
                .iter()
                .filter(|(a, _)| (a - x).abs() <= ATOM_TOLERANCE * a.abs().max(1.0))
                .map(|(_, m)| m)
                .sum(),
        }
    }

    /// `P(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Marginal::Gaussian { mean, sd } => standard_normal().cdf((x - mean) / sd),
            Marginal::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Marginal::PowerSemicircle { center, half_width, exponent } => {
                let t = (x - center) / half_width;
                if t <= -1.0 {
                    0.0
                } else if t >= 1.0 {
                    1.0
                } else {
                    // (t + 1) / 2 is Beta(k + 1, k + 1) distributed.
                    beta_reg(exponent + 1.0, exponent + 1.0, 0.5 * (t + 1.0))
                }
            }
            Marginal::Discrete { atoms } => atoms.iter().filter(|(a, _)| *a <= x).map(|(_, m)| m).sum(),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Marginal::Gaussian { mean, .. } => *mean,
            Marginal::Uniform { lo, hi } => 0.5 * (lo + hi),
            Marginal::PowerSemicircle { center, .. } => *center,
            Marginal::Discrete { atoms } => atoms.iter().map(|(a, m)| a * m).sum(),
        }
    }

    /// Smallest interval outside of which each tail holds less than `tail`
    /// probability. Exact support for compactly supported laws.
    pub fn effective_support(&self, tail: f64) -> (f64, f64) {
        match self {
            Marginal::Gaussian { mean, sd } => {
                let z = -standard_normal().inverse_cdf(tail);
                (mean - z * sd, mean + z * sd)
            }
            Marginal::Uniform { lo, hi } => (*lo, *hi),
            Marginal::PowerSemicircle { center, half_width, .. } => {
                (center - half_width, center + half_width)
            }
            Marginal::Discrete { atoms } => atoms.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), (a, _)| {
                (l.min(*a), h.max(*a))
            }),
        }
    }
}

fn standard_normal() -> Normal {
    Normal::standard()
}
