//! Expected one-step convergence rates: Monte Carlo estimators, their closed
//! forms, the hinge integral by quadrature, and monotonicity probes over
//! score grids.
//!
//! For regression the rate is the expected decrease of `||w - w_bar||^2`
//! after one step; for hinge it is the expected increase of the cosine
//! between the hypothesis and the optimum.

mod engine;
mod hinge;
mod monotone;
mod regression;

pub use engine::{run_blocks, BLOCK_SIZE};
pub use hinge::{
    closed_delta_hinge_local, hinge_bound_integrand, hinge_decrement, hinge_first_order_residual,
    hinge_first_order_residuals, mc_delta_hinge, mc_delta_hinge_curve, mc_delta_hinge_local, mc_delta_hinge_local_curve, quad_delta_hinge,
};
pub use monotone::{
    monotonicity_probe, monotonicity_probe_at, IntervalTest, MonotonicityReport, Verdict, Z_THRESHOLD,
};
pub use regression::{
    branch_cross_term, closed_delta_regression, closed_delta_regression_local, closed_delta_regression_se,
    d_delta_d_lambda, d_delta_d_psi, eta_bound, first_order_delta_regression_local, mc_delta_regression,
    mc_delta_regression_curve, mc_delta_regression_local, mc_delta_regression_local_curve, moment_oracle, nabla,
    regression_decrement, DistributionMoments, MomentEstimate,
};

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::stats::MultiStats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMethod {
    MonteCarlo,
    ClosedForm,
    Quadrature,
}

/// A rate value with its standard error. Only Monte Carlo estimates carry a
/// nonzero error, and only when the sampled quantity actually varies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: u64,
    pub method: EstimateMethod,
}

impl RateEstimate {
    pub fn closed_form(value: f64) -> Self {
        Self { mean: value, std_error: 0.0, n: 0, method: EstimateMethod::ClosedForm }
    }

    pub fn quadrature(value: f64) -> Self {
        Self { mean: value, std_error: 0.0, n: 0, method: EstimateMethod::Quadrature }
    }

    /// Component `i` of a Monte Carlo accumulator.
    pub fn from_stats(stats: &MultiStats, i: usize) -> Self {
        Self {
            mean: stats.mean(i),
            std_error: stats.std_error(i),
            n: stats.count(),
            method: EstimateMethod::MonteCarlo,
        }
    }

    /// The linear combination `sum_i c_i * mean_i` of a Monte Carlo accumulator.
    pub fn from_linear(stats: &MultiStats, coeffs: &[f64]) -> Self {
        Self {
            mean: coeffs.iter().zip(stats.means()).map(|(c, m)| c * m).sum(),
            std_error: stats.linear_std_error(coeffs),
            n: stats.count(),
            method: EstimateMethod::MonteCarlo,
        }
    }

    /// `(self - other) / std`, with independent errors combined in quadrature.
    pub fn z_against(&self, other: &RateEstimate) -> Option<f64> {
        let se = self.std_error.hypot(other.std_error);
        (se > 0.0).then(|| (self.mean - other.mean) / se)
    }
}

/// Rate estimates over a grid of scores. Monte Carlo curves built with common
/// random numbers also carry the paired differences between neighbours,
/// whose errors are far smaller than those of the points themselves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub scores: Vec<f64>,
    pub points: Vec<RateEstimate>,
    pub differences: Option<Vec<RateEstimate>>,
}

impl Curve {
    /// A curve of independently estimated (or exact) points.
    pub fn from_points(points: Vec<(f64, RateEstimate)>) -> Self {
        let (scores, points) = points.into_iter().unzip();
        Self { scores, points, differences: None }
    }

    /// Points and neighbour differences from one accumulator whose component
    /// `i` is the rate at `scores[i]`.
    pub fn paired(scores: Vec<f64>, stats: &MultiStats) -> Self {
        let k = scores.len();
        let points = (0..k).map(|i| RateEstimate::from_stats(stats, i)).collect();
        let differences = (1..k)
            .map(|i| {
                let mut c = vec![0.0; k];
                c[i] = 1.0;
                c[i - 1] = -1.0;
                RateEstimate::from_linear(stats, &c)
            })
            .collect();
        Self { scores, points, differences: Some(differences) }
    }

    /// Difference between neighbours `i` and `i + 1`.
    pub fn difference(&self, i: usize) -> RateEstimate {
        match &self.differences {
            Some(d) => d[i],
            None => {
                let (a, b) = (self.points[i], self.points[i + 1]);
                RateEstimate {
                    mean: b.mean - a.mean,
                    std_error: a.std_error.hypot(b.std_error),
                    n: a.n.min(b.n),
                    method: b.method,
                }
            }
        }
    }

    /// Finite-difference slope between neighbours `i` and `i + 1`.
    pub fn slope(&self, i: usize) -> RateEstimate {
        let d = self.difference(i);
        let h = self.scores[i + 1] - self.scores[i];
        RateEstimate { mean: d.mean / h, std_error: d.std_error / h.abs(), ..d }
    }
}

pub(crate) fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(LabError::InvalidParameter(format!("Monte Carlo needs at least 2 draws, got {n}")));
    }
    Ok(())
}

pub(crate) fn check_eta(eta: f64) -> Result<()> {
    if !(eta.is_finite() && eta >= 0.0) {
        return Err(LabError::InvalidParameter(format!("step size must be nonnegative, got {eta}")));
    }
    Ok(())
}
