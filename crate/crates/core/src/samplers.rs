//! Example generators conditioned on a fixed global score, and optionally a
//! fixed local score as well.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geometry::{check_frame_dim, hinge_bound_b, hinge_chi, region_classify, zenith, Branch, HingeFrame, Region};
use crate::vecspace::{BaseDistribution, LabeledExample, ParamVector};

/// Relative tolerance for the post-hoc score checks.
pub const SCORE_TOLERANCE: f64 = 1e-9;

/// An example drawn at fixed difficulty, with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionedDraw {
    pub ex: LabeledExample,
    pub psi: f64,
    /// Local score, when the draw was conditioned on it.
    pub upsilon: Option<f64>,
    /// Regression region, for draws conditioned on both scores.
    pub region: Option<Region>,
    /// Hinge only: whether `x_2 < B(psi)`, i.e. the hinge is active at `w_t`.
    pub active: Option<bool>,
    /// Regression only: which of the two labels was drawn.
    pub branch: Option<Branch>,
}

impl ConditionedDraw {
    /// The same regression draw with the other label.
    pub fn mirrored(&self, w_bar: &ParamVector) -> Result<ConditionedDraw> {
        let branch = match self.branch {
            Some(Branch::Plus) => Branch::Minus,
            Some(Branch::Minus) => Branch::Plus,
            None => {
                return Err(LabError::InvalidParameter("only regression draws have a mirror branch".into()))
            }
        };
        let y = self.ex.x().dot(w_bar)? + branch.sign() * self.psi;
        Ok(ConditionedDraw {
            ex: LabeledExample::new(self.ex.x().clone(), y)?,
            branch: Some(branch),
            upsilon: None,
            region: None,
            ..self.clone()
        })
    }
}

fn check_psi(psi: f64) -> Result<()> {
    if !(psi.is_finite() && psi >= 0.0) {
        return Err(LabError::InvalidParameter(format!("scores must be nonnegative, got {psi}")));
    }
    Ok(())
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= SCORE_TOLERANCE * scale.max(1.0)
}

/// Regression draw with `|x . w_bar - y| = psi`; both labels equally likely.
pub fn draw_given_psi_regression<R: Rng + ?Sized>(
    dist: &BaseDistribution,
    w_bar: &ParamVector,
    psi: f64,
    rng: &mut R,
) -> Result<ConditionedDraw> {
    check_psi(psi)?;
    let x = dist.sample_base(rng);
    let branch = if rng.random::<bool>() { Branch::Plus } else { Branch::Minus };
    let y = x.dot(w_bar)? + branch.sign() * psi;
    Ok(ConditionedDraw {
        ex: LabeledExample::new(x, y)?,
        psi,
        upsilon: None,
        region: None,
        active: None,
        branch: Some(branch),
    })
}

/// Regression draw with global score `psi` and local score `upsilon` at `w_t`.
///
/// Fixing both scores pins the zenith coordinate `u` to one of four values,
/// one per region. The region is drawn with probability proportional to the
/// zenith marginal's density there, and the transverse part of `x` comes from
/// the base law's exact conditional given `u`.
pub fn draw_given_psi_upsilon_regression<R: Rng + ?Sized>(
    dist: &BaseDistribution,
    w_bar: &ParamVector,
    w_t: &ParamVector,
    psi: f64,
    upsilon: f64,
    rng: &mut R,
) -> Result<ConditionedDraw> {
    check_psi(psi)?;
    check_psi(upsilon)?;
    let (lambda, dir) = zenith(w_t, w_bar)?;
    let marginal = dist.projection(&dir)?;
    let us = Region::ALL.map(|r| r.zenith_coordinate(psi, upsilon, lambda));
    let weights = us.map(|u| marginal.pdf(u));
    let total: f64 = weights.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(LabError::UnsupportedConditioning(format!(
            "zenith density vanishes at all four points for psi = {psi}, upsilon = {upsilon}"
        )));
    }
    let pick = rng.random::<f64>() * total;
    let mut idx = 3;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if pick < acc {
            idx = i;
            break;
        }
    }
    while weights[idx] == 0.0 {
        idx -= 1;
    }
    let chosen = Region::ALL[idx];
    let features = dist.sample_given_projection(&dir, us[idx], rng)?;
    let x = ParamVector::from_features(&features)?;
    let branch = chosen.branch();
    let fit = x.dot(w_bar)?;
    let y = fit + branch.sign() * psi;
    let pred = x.dot(w_t)?;
    let got_upsilon = (pred - y).abs();
    if !close(got_upsilon, upsilon, pred.abs().max(y.abs())) {
        return Err(LabError::ContractViolation(format!(
            "conditioned draw has local score {got_upsilon}, requested {upsilon}"
        )));
    }
    let (region, _) = region_classify(x.dot(&dir)?, psi, lambda, branch);
    Ok(ConditionedDraw {
        ex: LabeledExample::new(x, y)?,
        psi,
        upsilon: Some(upsilon),
        region: Some(region),
        active: None,
        branch: Some(branch),
    })
}

fn hinge_example(mut features: Vec<f64>, label: f64) -> Result<LabeledExample> {
    if label == -1.0 {
        for f in &mut features {
            *f = -*f;
        }
    } else if label != 1.0 {
        return Err(LabError::InvalidParameter(format!("hinge labels are +1 or -1, got {label}")));
    }
    LabeledExample::classification(ParamVector::from_features(&features)?, label)
}

/// Hinge draw on the hyperplane `x . w_bar = 1 - psi` of the canonical frame,
/// with `y = +1`.
pub fn draw_given_psi_hinge<R: Rng + ?Sized>(
    dist: &BaseDistribution,
    frame: &HingeFrame,
    psi: f64,
    rng: &mut R,
) -> Result<ConditionedDraw> {
    draw_given_psi_hinge_labeled(dist, frame, psi, 1.0, rng)
}

/// As [`draw_given_psi_hinge`]; `label = -1` negates the features and the
/// label together, which leaves every margin unchanged.
pub fn draw_given_psi_hinge_labeled<R: Rng + ?Sized>(
    dist: &BaseDistribution,
    frame: &HingeFrame,
    psi: f64,
    label: f64,
    rng: &mut R,
) -> Result<ConditionedDraw> {
    check_psi(psi)?;
    check_frame_dim(dist.dim())?;
    let mut features = dist.sample_features(rng);
    features[0] = 1.0 - psi;
    let active = features[1] < hinge_bound_b(psi, frame);
    Ok(ConditionedDraw {
        ex: hinge_example(features, label)?,
        psi,
        upsilon: None,
        region: None,
        active: Some(active),
        branch: None,
    })
}

/// Hinge draw with both scores fixed: `x_1 = 1 - psi`, `x_2 = chi(psi, upsilon)`.
/// The remaining features keep their base-law marginals.
pub fn draw_given_psi_upsilon_hinge<R: Rng + ?Sized>(
    dist: &BaseDistribution,
    frame: &HingeFrame,
    psi: f64,
    upsilon: f64,
    rng: &mut R,
) -> Result<ConditionedDraw> {
    draw_given_psi_upsilon_hinge_labeled(dist, frame, psi, upsilon, 1.0, rng)
}

pub fn draw_given_psi_upsilon_hinge_labeled<R: Rng + ?Sized>(
    dist: &BaseDistribution,
    frame: &HingeFrame,
    psi: f64,
    upsilon: f64,
    label: f64,
    rng: &mut R,
) -> Result<ConditionedDraw> {
    check_psi(psi)?;
    if !(upsilon.is_finite() && upsilon > 0.0) {
        return Err(LabError::InvalidParameter(format!("local score must be positive, got {upsilon}")));
    }
    check_frame_dim(dist.dim())?;
    let mut features = dist.sample_features(rng);
    features[0] = 1.0 - psi;
    features[1] = hinge_chi(psi, upsilon, frame);
    Ok(ConditionedDraw {
        ex: hinge_example(features, label)?,
        psi,
        upsilon: Some(upsilon),
        region: None,
        active: Some(true),
        branch: None,
    })
}
