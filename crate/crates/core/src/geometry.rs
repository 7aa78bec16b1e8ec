//! Parameter-space geometry: the hyperplane `Omega_x = {w : x . w = y}`,
//! polar coordinates about the optimum, the angle `beta`, and the
//! two-axis hinge frame.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::vecspace::{LabeledExample, ParamVector};

/// Below this distance between `w_t` and `w_bar` the zenith is undefined.
pub const POLE_TOLERANCE: f64 = 1e-12;

/// Smallest `sin(theta)` accepted by [`HingeFrame`].
pub const FRAME_TOLERANCE: f64 = 1e-9;

/// Polar coordinates of a data vector about the pole `w_bar`, with zenith
/// `w_bar - w_t`. The remaining sphere angles are never needed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarDecomposition {
    pub r: f64,
    pub cos_theta: f64,
    pub lambda: f64,
}

impl PolarDecomposition {
    /// `u = r cos(theta)`, the coordinate of `x` along the zenith.
    pub fn u(&self) -> f64 {
        self.r * self.cos_theta
    }
}

/// Orientation of the current hinge hypothesis relative to the optimum.
///
/// In the canonical embedding `w_bar = e_0` and
/// `w_t = cos(theta) e_0 + sin(theta) e_1`, both with zero bias weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FrameAngle", into = "FrameAngle")]
pub struct HingeFrame {
    cos_theta: f64,
    sin_theta: f64,
}

#[derive(Serialize, Deserialize)]
struct FrameAngle {
    theta: f64,
}

impl TryFrom<FrameAngle> for HingeFrame {
    type Error = LabError;

    fn try_from(a: FrameAngle) -> Result<Self> {
        HingeFrame::from_angle(a.theta)
    }
}

impl From<HingeFrame> for FrameAngle {
    fn from(f: HingeFrame) -> Self {
        FrameAngle { theta: f.theta() }
    }
}

impl HingeFrame {
    /// Frame with the given cosine; `sin(theta)` is taken positive.
    pub fn from_cos(cos_theta: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&cos_theta) {
            return Err(LabError::InvalidParameter(format!("cosine {cos_theta} outside [-1, 1]")));
        }
        let sin_theta = (1.0 - cos_theta * cos_theta).sqrt();
        if sin_theta <= FRAME_TOLERANCE {
            return Err(LabError::FrameDegeneracy { sin_theta });
        }
        Ok(Self { cos_theta, sin_theta })
    }

    /// Frame for `theta` in `(0, pi)`. A cosine within rounding of zero is
    /// snapped to exactly zero so that `theta = pi/2` has a vanishing cosine.
    pub fn from_angle(theta: f64) -> Result<Self> {
        let c = theta.cos();
        Self::from_cos(if c.abs() < 1e-15 { 0.0 } else { c })
    }

    pub fn cos_theta(&self) -> f64 {
        self.cos_theta
    }

    pub fn sin_theta(&self) -> f64 {
        self.sin_theta
    }

    pub fn tan_theta(&self) -> f64 {
        self.sin_theta / self.cos_theta
    }

    pub fn theta(&self) -> f64 {
        self.cos_theta.acos()
    }

    /// `w_bar = e_0` in `R^(d+1)`; needs `d >= 2`.
    pub fn optimum(&self, d: usize) -> Result<ParamVector> {
        check_frame_dim(d)?;
        ParamVector::basis(d + 1, 0)
    }

    /// `w_t = cos(theta) e_0 + sin(theta) e_1` in `R^(d+1)`; needs `d >= 2`.
    pub fn current(&self, d: usize) -> Result<ParamVector> {
        check_frame_dim(d)?;
        let mut c = vec![0.0; d + 1];
        c[0] = self.cos_theta;
        c[1] = self.sin_theta;
        ParamVector::new(c)
    }
}

pub(crate) fn check_frame_dim(d: usize) -> Result<()> {
    if d < 2 {
        return Err(LabError::InvalidParameter(format!(
            "the hinge frame needs at least two features, got {d}"
        )));
    }
    Ok(())
}

/// Projection of `w_bar` onto `Omega_x`.
pub fn project_onto_omega(w_bar: &ParamVector, ex: &LabeledExample) -> Result<ParamVector> {
    let x = ex.x();
    let r2 = x.norm_sq();
    if r2 == 0.0 {
        return Err(LabError::DegenerateHyperplane);
    }
    let residual = x.dot(w_bar)? - ex.y();
    w_bar.add_scaled(-residual / r2, x)
}

/// Zenith distance and unit direction `(w_bar - w_t) / lambda`.
pub fn zenith(w_t: &ParamVector, w_bar: &ParamVector) -> Result<(f64, ParamVector)> {
    let diff = w_bar.sub(w_t)?;
    let lambda = diff.norm();
    if lambda < POLE_TOLERANCE {
        return Err(LabError::PoleDegeneracy { lambda });
    }
    Ok((lambda, diff.scale(1.0 / lambda)?))
}

pub fn polar_decompose(x: &ParamVector, w_t: &ParamVector, w_bar: &ParamVector) -> Result<PolarDecomposition> {
    let (lambda, dir) = zenith(w_t, w_bar)?;
    let r = x.norm();
    let cos_theta = if r == 0.0 { 0.0 } else { (x.dot(&dir)? / r).clamp(-1.0, 1.0) };
    Ok(PolarDecomposition { r, cos_theta, lambda })
}

/// `arccos(min(psi / (lambda r), 1))`.
pub fn beta(r: f64, psi: f64, lambda: f64) -> f64 {
    (psi / (lambda * r)).min(1.0).acos()
}

/// `B(psi) = (psi - 1) / tan(theta) + 1 / sin(theta)`: on the hyperplane
/// `x . w_bar = 1 - psi`, the hinge is active at `w_t` iff `x_2 < B(psi)`.
pub fn hinge_bound_b(psi: f64, frame: &HingeFrame) -> f64 {
    (psi - 1.0) * frame.cos_theta / frame.sin_theta + 1.0 / frame.sin_theta
}

/// The second-axis coordinate pinned by both scores:
/// `(psi - 1) / tan(theta) + (1 - upsilon) / sin(theta)`.
pub fn hinge_chi(psi: f64, upsilon: f64, frame: &HingeFrame) -> f64 {
    (psi - 1.0) * frame.cos_theta / frame.sin_theta + (1.0 - upsilon) / frame.sin_theta
}

/// Which of the two labels compatible with a global score was drawn:
/// `Plus` is `y = x . w_bar + psi`, `Minus` is `y = x . w_bar - psi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

/// The four regression regions relating the local score to the zenith
/// coordinate `u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    A1,
    A2,
    A3,
    A4,
}

impl Region {
    pub const ALL: [Region; 4] = [Region::A1, Region::A2, Region::A3, Region::A4];

    pub fn branch(self) -> Branch {
        match self {
            Region::A1 | Region::A2 => Branch::Plus,
            Region::A3 | Region::A4 => Branch::Minus,
        }
    }

    /// The zenith coordinate `u` at which this region yields local score `upsilon`.
    pub fn zenith_coordinate(self, psi: f64, upsilon: f64, lambda: f64) -> f64 {
        let lu = match self {
            Region::A1 => -psi + upsilon,
            Region::A2 => -psi - upsilon,
            Region::A3 => psi + upsilon,
            Region::A4 => psi - upsilon,
        };
        lu / lambda
    }
}

/// Region and local score of a point with zenith coordinate `u`. Boundary
/// points go to A1 (plus branch) or A3 (minus branch).
pub fn region_classify(u: f64, psi: f64, lambda: f64, branch: Branch) -> (Region, f64) {
    let lu = lambda * u;
    match branch {
        Branch::Plus if lu >= -psi => (Region::A1, lu + psi),
        Branch::Plus => (Region::A2, -lu - psi),
        Branch::Minus if lu >= psi => (Region::A3, lu - psi),
        Branch::Minus => (Region::A4, psi - lu),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, SQRT_2};

    fn v(c: &[f64]) -> ParamVector {
        ParamVector::new(c.to_vec()).unwrap()
    }

    #[test]
    fn projection_examples() {
        let w_bar = v(&[1.0, 2.0]);
        let on_plane = LabeledExample::from_features(&[3.0], 5.0).unwrap();
        assert_eq!(project_onto_omega(&w_bar, &on_plane).unwrap(), w_bar);
        let axis = LabeledExample::new(v(&[0.0, 1.0]), 2.0).unwrap();
        assert_eq!(project_onto_omega(&v(&[0.0, 0.0]), &axis).unwrap().coords(), &[0.0, 2.0]);
    }

    #[test]
    fn polar_examples() {
        let w_t = v(&[0.0, 0.0]);
        let w_bar = v(&[1.0, 1.0]);
        let p = polar_decompose(&v(&[2.0, 2.0]), &w_t, &w_bar).unwrap();
        assert_relative_eq!(p.cos_theta, 1.0, epsilon = 1e-15);
        assert_relative_eq!(p.lambda, SQRT_2, epsilon = 1e-15);
        let p = polar_decompose(&v(&[1.0, -1.0]), &w_t, &w_bar).unwrap();
        assert_eq!(p.cos_theta, 0.0);
        let p = polar_decompose(&v(&[-1.0, -1.0]), &w_t, &w_bar).unwrap();
        assert_relative_eq!(p.cos_theta, -1.0, epsilon = 1e-15);
        assert!(matches!(polar_decompose(&w_bar, &w_bar, &w_bar), Err(LabError::PoleDegeneracy { .. })));
    }

    #[test]
    fn beta_examples() {
        assert_eq!(beta(1.0, 2.0, 1.0), 0.0);
        assert_eq!(beta(1.0, 0.0, 1.0), FRAC_PI_2);
        assert_relative_eq!(beta(2.0, 1.0, 1.0), FRAC_PI_3, epsilon = 1e-15);
    }

    #[test]
    fn hinge_bound_examples() {
        let right = HingeFrame::from_angle(FRAC_PI_2).unwrap();
        assert_eq!(right.cos_theta(), 0.0);
        for psi in [0.0, 0.4, 1.7] {
            assert_eq!(hinge_bound_b(psi, &right), 1.0);
        }
        let f = HingeFrame::from_angle(1.1).unwrap();
        assert_relative_eq!(hinge_bound_b(1.0, &f), 1.0 / f.sin_theta(), epsilon = 1e-15);
        let q = HingeFrame::from_angle(FRAC_PI_4).unwrap();
        assert_relative_eq!(hinge_bound_b(1.0, &q), SQRT_2, epsilon = 1e-15);
        assert!(matches!(HingeFrame::from_cos(1.0), Err(LabError::FrameDegeneracy { .. })));
    }

    #[test]
    fn chi_examples() {
        let f = HingeFrame::from_angle(0.9).unwrap();
        assert_eq!(hinge_chi(0.3, 0.0, &f), hinge_bound_b(0.3, &f));
        let right = HingeFrame::from_angle(FRAC_PI_2).unwrap();
        assert_relative_eq!(hinge_chi(0.5, 0.3, &right), 0.7, epsilon = 1e-15);
        for (psi, ups) in [(0.2, 0.5), (1.3, 2.0), (0.0, 0.1)] {
            let x = v(&[1.0 - psi, hinge_chi(psi, ups, &f), 1.0]);
            let w_t = f.current(2).unwrap();
            assert!((1.0 - x.dot(&w_t).unwrap() - ups).abs() < 1e-10);
        }
    }

    #[test]
    fn region_examples() {
        assert_eq!(region_classify(-1.0, 1.0, 1.0, Branch::Plus), (Region::A1, 0.0));
        let (r, u) = region_classify(1.5, 1.0, 1.0, Branch::Minus);
        assert_eq!(r, Region::A3);
        assert_relative_eq!(u, 0.5);
        let (r, u) = region_classify(0.3, 1.0, 1.0, Branch::Minus);
        assert_eq!(r, Region::A4);
        assert_relative_eq!(u, 0.7, epsilon = 1e-15);
    }

    #[test]
    fn frame_serializes_as_angle() {
        let f = HingeFrame::from_angle(FRAC_PI_3).unwrap();
        let back: HingeFrame = serde_json::from_str(&serde_json::to_string(&f).unwrap()).unwrap();
        assert_relative_eq!(back.cos_theta(), f.cos_theta(), epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn projection_identity(
            f in prop::collection::vec(-3f64..3.0, 1..4),
            wb in prop::collection::vec(-3f64..3.0, 4),
            y in -5f64..5.0,
        ) {
            let ex = LabeledExample::from_features(&f, y).unwrap();
            let w_bar = v(&wb[..f.len() + 1]);
            let z = project_onto_omega(&w_bar, &ex).unwrap();
            prop_assert!((ex.x().dot(&z).unwrap() - y).abs() < 1e-10);
            let psi2 = (ex.x().dot(&w_bar).unwrap() - y).powi(2);
            let lhs = ex.x().norm_sq() * w_bar.sub(&z).unwrap().norm_sq();
            prop_assert!((lhs - psi2).abs() <= 1e-9 * psi2.max(1.0));
        }

        #[test]
        fn region_round_trip(
            psi in 0f64..3.0,
            ups in 1e-6f64..3.0,
            lambda in 0.1f64..4.0,
            idx in 0usize..4,
        ) {
            let region = Region::ALL[idx];
            let u = region.zenith_coordinate(psi, ups, lambda);
            let (back, ups_back) = region_classify(u, psi, lambda, region.branch());
            prop_assert!((ups_back - ups).abs() < 1e-9);
            prop_assert_eq!(back, region);
        }
    }
}
