//! Constructive witnesses for the two negative results: preferring easy
//! examples by local score can slow convergence near the optimum, and the
//! hinge rate need not decrease with the global score below `1 - cos(theta)`.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, Normal};

use crate::error::{LabError, Result};
use crate::estimators::{
    check_eta, check_n, hinge_bound_integrand, mc_delta_hinge, quad_delta_hinge, run_blocks, RateEstimate,
};
use crate::geometry::{hinge_bound_b, HingeFrame};
use crate::vecspace::{BaseDistribution, ParamVector, RngStream};

/// Largest number of halvings tried by the local-score search.
pub const MAX_HALVINGS: u32 = 40;

/// Significance, in standard errors, required of a verdict.
const Z: f64 = 3.0;

/// Standard deviation of the label noise `y = x . w_bar + eps`.
const NOISE_SD: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Construction {
    /// `w = w_bar + delta * e_0`, examples drawn at fixed local score.
    LocalScore { upsilon: f64, eta: f64, delta: f64, halvings: u32, w: Vec<f64> },
    /// Second-axis marginal uniform on `(B(psi1), B(psi2))`.
    HingeLowPsi { theta: f64, eta: f64, psi1: f64, psi2: f64, b1: f64, b2: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub name: String,
    pub estimate: RateEstimate,
}

impl Measurement {
    fn new(name: &str, estimate: RateEstimate) -> Self {
        Self { name: name.to_string(), estimate }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub construction: Construction,
    pub measurements: Vec<Measurement>,
    /// True when the claimed inequality holds at 3 standard errors.
    pub verdict: bool,
}

impl CounterexampleReport {
    pub fn measurement(&self, name: &str) -> Option<&RateEstimate> {
        self.measurements.iter().find(|m| m.name == name).map(|m| &m.estimate)
    }
}

/// Rate at fixed local score `upsilon` for the hypothesis `w`, together with
/// the conditional mean of `r^2`.
///
/// Labels follow `y = x . w_bar + eps` with standard normal noise. Fixing
/// `|x . w - y| = upsilon` leaves `x` with density proportional to
/// `p(x) * f_eps(x . (w - w_bar) - s * upsilon)` for a random sign `s`, which
/// is sampled by self-normalized importance weighting of base draws.
fn local_rate_at(
    dist: &BaseDistribution,
    w_bar: &ParamVector,
    w: &ParamVector,
    upsilon: f64,
    eta: f64,
    n: usize,
    stream: &RngStream,
) -> Result<(RateEstimate, RateEstimate)> {
    let noise = Normal::new(0.0, NOISE_SD).map_err(|e| LabError::InvalidParameter(e.to_string()))?;
    let offset = w.sub(w_bar)?;
    let stats = run_blocks(n, 3, stream, |rng, out| {
        let x = dist.sample_base(rng);
        let sign = if rand::Rng::random::<bool>(rng) { 1.0 } else { -1.0 };
        let t = x.dot(&offset)?;
        let weight = noise.pdf(t - sign * upsilon);
        let r2 = x.norm_sq();
        // ||w - w_bar||^2 - ||w' - w_bar||^2 with w' = w - 2 eta s upsilon x.
        let decrement = 4.0 * eta * sign * upsilon * t - 4.0 * eta * eta * upsilon * upsilon * r2;
        out.copy_from_slice(&[weight * decrement, weight * r2, weight]);
        Ok(())
    })?;
    let w_mean = stats.mean(2);
    if w_mean <= 0.0 {
        return Err(LabError::ConstructionFailed("importance weights vanished".into()));
    }
    let ratio = |i: usize| {
        let value = stats.mean(i) / w_mean;
        let mut coeffs = [0.0; 3];
        coeffs[i] = 1.0;
        coeffs[2] = -value;
        RateEstimate {
            mean: value,
            std_error: stats.linear_std_error(&coeffs) / w_mean,
            ..RateEstimate::from_stats(&stats, i)
        }
    };
    Ok((ratio(0), ratio(1)))
}

/// Searches `delta = 1, 1/2, 1/4, ...` for a hypothesis `w = w_bar + delta e_0`
/// at which the rate at local score `upsilon` is negative at 3 standard
/// errors and below `-2 eta^2 upsilon^2 E[r^2]` within 3 standard errors.
///
/// A zero step size yields a zero rate and a false verdict.
pub fn build_local_score_witness(
    dist: &BaseDistribution,
    w_bar: &ParamVector,
    upsilon: f64,
    eta: f64,
    n: usize,
    stream: &RngStream,
) -> Result<CounterexampleReport> {
    dist.validate()?;
    check_n(n)?;
    check_eta(eta)?;
    if matches!(dist, BaseDistribution::PointMass { .. }) {
        return Err(LabError::InvalidParameter("the local-score construction needs a continuous law".into()));
    }
    if w_bar.feature_dim() != dist.dim() {
        return Err(LabError::Dimension { expected: dist.dim() + 1, found: w_bar.len() });
    }
    if !(upsilon.is_finite() && upsilon > 0.0) {
        return Err(LabError::InvalidParameter(format!("local score must be positive, got {upsilon}")));
    }
    let e = ParamVector::basis(w_bar.len(), 0)?;
    let mut delta = 1.0;
    for halvings in 0..=MAX_HALVINGS {
        let w = w_bar.add_scaled(delta, &e)?;
        let (rate, r2) = local_rate_at(dist, w_bar, &w, upsilon, eta, n, stream)?;
        let bound = -2.0 * eta * eta * upsilon * upsilon * r2.mean;
        let verdict = rate.mean + Z * rate.std_error < 0.0 && rate.mean < bound + Z * rate.std_error;
        if verdict || eta == 0.0 {
            return Ok(CounterexampleReport {
                construction: Construction::LocalScore { upsilon, eta, delta, halvings, w: w.into_inner() },
                measurements: vec![
                    Measurement::new("delta_upsilon", rate),
                    Measurement::new("m_r2", r2),
                    Measurement::new("bound", RateEstimate::closed_form(bound)),
                ],
                verdict,
            });
        }
        delta *= 0.5;
    }
    Err(LabError::ConstructionFailed(format!("no witness after {MAX_HALVINGS} halvings")))
}

/// Builds a second-axis law supported on `(B(psi1), B(psi2))` so that no
/// example at `psi1` activates the hinge, then checks `Delta(psi1) == 0`
/// exactly by quadrature and `Delta(psi2) > 0` at 3 standard errors.
pub fn build_hinge_low_psi(
    frame: &HingeFrame,
    psi1: f64,
    psi2: f64,
    eta: f64,
    n: usize,
    stream: &RngStream,
) -> Result<CounterexampleReport> {
    let c = frame.cos_theta();
    if !(c > 0.0 && 0.0 < psi1 && psi1 < psi2 && psi2 < 1.0 - c) {
        return Err(LabError::InvalidParameter(format!(
            "need cos(theta) > 0 and 0 < psi1 < psi2 < 1 - cos(theta) = {}, got psi1 = {psi1}, psi2 = {psi2}",
            1.0 - c
        )));
    }
    check_eta(eta)?;
    let (b1, b2) = (hinge_bound_b(psi1, frame), hinge_bound_b(psi2, frame));
    let dist = BaseDistribution::uniform_box_bounds(vec![-1.0, b1], vec![1.0, b2])?;
    let f2 = dist.axis_marginal(1)?;
    let quad1 = quad_delta_hinge(&f2, frame, psi1, eta)?;
    let quad2 = quad_delta_hinge(&f2, frame, psi2, eta)?;
    let mc1 = mc_delta_hinge(&dist, frame, psi1, eta, n, &stream.substream(0))?;
    let mc2 = mc_delta_hinge(&dist, frame, psi2, eta, n, &stream.substream(1))?;
    let edge = hinge_bound_integrand(b2, psi2, frame);
    let verdict = quad1 == 0.0 && mc2.mean - Z * mc2.std_error > 0.0 && edge > 0.0;
    Ok(CounterexampleReport {
        construction: Construction::HingeLowPsi { theta: frame.theta(), eta, psi1, psi2, b1, b2 },
        measurements: vec![
            Measurement::new("quad_delta_psi1", RateEstimate::quadrature(quad1)),
            Measurement::new("quad_delta_psi2", RateEstimate::quadrature(quad2)),
            Measurement::new("mc_delta_psi1", mc1),
            Measurement::new("mc_delta_psi2", mc2),
            Measurement::new("integrand_at_b2", RateEstimate::closed_form(edge)),
        ],
        verdict,
    })
}
