//! Losses, analytic gradients and single-example SGD steps.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::vecspace::{LabeledExample, ParamVector};

/// Tolerance on `||w|| == A` for hinge hypotheses.
pub const NORM_TOLERANCE: f64 = 1e-9;

/// Margin distance below which the hinge loss is treated as non-differentiable.
pub const KINK_TOLERANCE: f64 = 1e-6;

/// The optimization problem and its step size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemKind {
    /// Least squares, `(x . w - y)^2`.
    Regression { eta: f64 },
    /// Hinge loss `max(1 - (x . w) y, 0)` with hypotheses on the sphere of radius `norm`.
    HingeClassification { eta: f64, norm: f64 },
}

impl ProblemKind {
    pub fn regression(eta: f64) -> Result<Self> {
        let p = Self::Regression { eta };
        p.validate()?;
        Ok(p)
    }

    pub fn hinge(eta: f64, norm: f64) -> Result<Self> {
        let p = Self::HingeClassification { eta, norm };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let (eta, norm) = match *self {
            Self::Regression { eta } => (eta, 1.0),
            Self::HingeClassification { eta, norm } => (eta, norm),
        };
        if !(eta.is_finite() && eta > 0.0) {
            return Err(LabError::InvalidParameter(format!("step size must be positive, got {eta}")));
        }
        if !(norm.is_finite() && norm > 0.0) {
            return Err(LabError::InvalidParameter(format!("norm constraint must be positive, got {norm}")));
        }
        Ok(())
    }

    pub fn eta(&self) -> f64 {
        match *self {
            Self::Regression { eta } | Self::HingeClassification { eta, .. } => eta,
        }
    }

    pub fn is_hinge(&self) -> bool {
        matches!(self, Self::HingeClassification { .. })
    }

    /// One SGD step on `ex` from `w`.
    pub fn step(&self, ex: &LabeledExample, w: &ParamVector) -> Result<ParamVector> {
        match *self {
            Self::Regression { eta } => sgd_step_regression(ex, w, eta),
            Self::HingeClassification { eta, norm } => sgd_step_hinge(ex, w, eta, norm),
        }
    }
}

pub(crate) fn check_norm(w: &ParamVector, norm: f64) -> Result<()> {
    let actual = w.norm();
    if (actual - norm).abs() > NORM_TOLERANCE * norm.max(1.0) {
        return Err(LabError::ContractViolation(format!(
            "hinge hypotheses must have norm {norm}, found {actual}"
        )));
    }
    Ok(())
}

/// `(x . w - y)^2` without the hinge norm check.
pub fn squared_loss(ex: &LabeledExample, w: &ParamVector) -> Result<f64> {
    let r = ex.x().dot(w)? - ex.y();
    Ok(r * r)
}

/// `max(1 - (x . w) y, 0)` without the norm check.
pub fn hinge_value(ex: &LabeledExample, w: &ParamVector) -> Result<f64> {
    Ok((1.0 - ex.x().dot(w)? * ex.y()).max(0.0))
}

pub fn loss(problem: &ProblemKind, ex: &LabeledExample, w: &ParamVector) -> Result<f64> {
    match *problem {
        ProblemKind::Regression { .. } => squared_loss(ex, w),
        ProblemKind::HingeClassification { norm, .. } => {
            check_norm(w, norm)?;
            hinge_value(ex, w)
        }
    }
}

/// `w - 2 eta (x . w - y) x`.
pub fn sgd_step_regression(ex: &LabeledExample, w: &ParamVector, eta: f64) -> Result<ParamVector> {
    let residual = ex.x().dot(w)? - ex.y();
    w.add_scaled(-2.0 * eta * residual, ex.x())
}

/// Projected hinge step: move by `eta * x y` when `(x . w) y <= 1`, then
/// rescale onto the sphere of radius `norm`. An inactive step returns `w`
/// itself.
pub fn sgd_step_hinge(ex: &LabeledExample, w: &ParamVector, eta: f64, norm: f64) -> Result<ParamVector> {
    check_norm(w, norm)?;
    let margin = ex.x().dot(w)? * ex.y();
    if margin > 1.0 || eta == 0.0 {
        return Ok(w.clone());
    }
    let moved = w.add_scaled(eta * ex.y(), ex.x())?;
    let len = moved.norm();
    if len == 0.0 {
        return Err(LabError::DegenerateProjection);
    }
    moved.scale(norm / len)
}

/// Analytic gradient of the loss in `w`; the hinge kink takes the active branch.
pub fn gradient(problem: &ProblemKind, ex: &LabeledExample, w: &ParamVector) -> Result<ParamVector> {
    match problem {
        ProblemKind::Regression { .. } => {
            let residual = ex.x().dot(w)? - ex.y();
            ex.x().scale(2.0 * residual)
        }
        ProblemKind::HingeClassification { .. } => {
            if ex.x().dot(w)? * ex.y() <= 1.0 {
                ex.x().scale(-ex.y())
            } else {
                ParamVector::zeros(w.len())
            }
        }
    }
}

/// Largest coordinate gap between the analytic gradient and central finite
/// differences, relative to the larger gradient magnitude.
///
/// The hinge case perturbs `w` off the norm sphere, so the raw loss is
/// differenced there.
pub fn grad_check(problem: &ProblemKind, ex: &LabeledExample, w: &ParamVector) -> Result<f64> {
    let raw: fn(&LabeledExample, &ParamVector) -> Result<f64> = match problem {
        ProblemKind::Regression { .. } => squared_loss,
        ProblemKind::HingeClassification { .. } => {
            let margin = 1.0 - ex.x().dot(w)? * ex.y();
            if margin.abs() <= KINK_TOLERANCE {
                return Err(LabError::NonDifferentiable { margin });
            }
            hinge_value
        }
    };
    let analytic = gradient(problem, ex, w)?;
    let h = 1e-6 * w.norm().max(1.0);
    let mut numeric = Vec::with_capacity(w.len());
    for i in 0..w.len() {
        let mut plus = w.coords().to_vec();
        let mut minus = plus.clone();
        plus[i] += h;
        minus[i] -= h;
        let fp = raw(ex, &ParamVector::new(plus)?)?;
        let fm = raw(ex, &ParamVector::new(minus)?)?;
        numeric.push((fp - fm) / (2.0 * h));
    }
    let gap = analytic.coords().iter().zip(&numeric).map(|(a, n)| (a - n).abs()).fold(0.0, f64::max);
    if gap == 0.0 {
        return Ok(0.0);
    }
    let scale = analytic.coords().iter().chain(&numeric).map(|c| c.abs()).fold(0.0, f64::max);
    Ok(gap / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn ex(f: &[f64], y: f64) -> LabeledExample {
        LabeledExample::from_features(f, y).unwrap()
    }

    fn v(c: &[f64]) -> ParamVector {
        ParamVector::new(c.to_vec()).unwrap()
    }

    #[test]
    fn regression_loss_examples() {
        let p = ProblemKind::regression(0.1).unwrap();
        assert_eq!(loss(&p, &ex(&[2.0], 5.0), &v(&[1.0, 3.0])).unwrap(), 0.0);
        assert_eq!(loss(&p, &ex(&[1.0], 2.0), &v(&[0.0, 0.0])).unwrap(), 4.0);
    }

    #[test]
    fn hinge_loss_examples() {
        let p = ProblemKind::hinge(0.1, 1.0).unwrap();
        // w = e_0 so x . w is the first feature.
        let w = v(&[1.0, 0.0]);
        assert_eq!(loss(&p, &ex(&[2.0], 1.0), &w).unwrap(), 0.0);
        assert_eq!(loss(&p, &ex(&[-1.0], 1.0), &w).unwrap(), 2.0);
        assert!(matches!(loss(&p, &ex(&[2.0], 1.0), &v(&[2.0, 0.0])), Err(LabError::ContractViolation(_))));
    }

    #[test]
    fn regression_step_examples() {
        let w = sgd_step_regression(&ex(&[1.0], 1.0), &v(&[0.0, 0.0]), 0.1).unwrap();
        assert_relative_eq!(w.coords()[0], 0.2, epsilon = 1e-15);
        assert_relative_eq!(w.coords()[1], 0.2, epsilon = 1e-15);
        let fixed = v(&[1.0, 3.0]);
        assert_eq!(sgd_step_regression(&ex(&[2.0], 5.0), &fixed, 0.3).unwrap(), fixed);
        let w = sgd_step_regression(&ex(&[1.0], 0.0), &v(&[1.0, 1.0]), 0.25).unwrap();
        assert_eq!(w.coords(), &[0.0, 0.0]);
    }

    #[test]
    fn hinge_step_examples() {
        let w = v(&[1.0, 0.0]);
        assert_eq!(sgd_step_hinge(&ex(&[2.0], 1.0), &w, 0.5, 1.0).unwrap(), w);
        // x = [0, 1] is the bias direction: feature 0, bias 1.
        let stepped = sgd_step_hinge(&ex(&[0.0], 1.0), &w, 1.0, 1.0).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_relative_eq!(stepped.coords()[0], h, epsilon = 1e-15);
        assert_relative_eq!(stepped.coords()[1], h, epsilon = 1e-15);
    }

    #[test]
    fn hinge_margin_tie_is_active() {
        let w = v(&[1.0, 0.0]);
        let moved = sgd_step_hinge(&ex(&[1.0], 1.0), &w, 0.5, 1.0).unwrap();
        assert_ne!(moved, w);
    }

    #[test]
    fn hinge_degenerate_projection() {
        let w = v(&[0.0, 1.0]);
        let e = LabeledExample::classification(v(&[0.0, 1.0]), -1.0).unwrap();
        assert_eq!(sgd_step_hinge(&e, &w, 1.0, 1.0).unwrap_err(), LabError::DegenerateProjection);
    }

    #[test]
    fn grad_check_examples() {
        let reg = ProblemKind::regression(0.1).unwrap();
        assert!(grad_check(&reg, &ex(&[1.5, -0.3], 0.7), &v(&[0.2, 0.4, -1.0])).unwrap() < 1e-6);
        let hinge = ProblemKind::hinge(0.1, 1.0).unwrap();
        let w = v(&[0.6, 0.8, 0.0]);
        assert_eq!(grad_check(&hinge, &ex(&[3.0, 0.0], 1.0), &w).unwrap(), 0.0);
        assert!(grad_check(&hinge, &ex(&[0.2, 0.1], 1.0), &w).unwrap() < 1e-6);
        assert!(matches!(
            grad_check(&hinge, &ex(&[1.0 / 0.6, 0.0], 1.0), &w),
            Err(LabError::NonDifferentiable { .. })
        ));
    }

    proptest! {
        #[test]
        fn regression_step_moves_toward_hyperplane(
            f in prop::collection::vec(-2f64..2.0, 1..5),
            w0 in prop::collection::vec(-2f64..2.0, 5),
            y in -3f64..3.0,
            frac in 0.05f64..0.95,
        ) {
            let e = ex(&f, y);
            let w = v(&w0[..f.len() + 1]);
            let before = (e.x().dot(&w).unwrap() - y).abs();
            prop_assume!(before > 1e-9);
            let eta = frac / e.x().norm_sq();
            let w1 = sgd_step_regression(&e, &w, eta).unwrap();
            prop_assert!((e.x().dot(&w1).unwrap() - y).abs() < before);
        }

        #[test]
        fn hinge_step_stays_on_sphere(
            f in prop::collection::vec(-3f64..3.0, 2),
            angle in 0f64..std::f64::consts::TAU,
            norm in 0.1f64..10.0,
            eta in 0.0f64..2.0,
            y in prop::sample::select(vec![-1.0, 1.0]),
        ) {
            let e = LabeledExample::classification(ParamVector::from_features(&f).unwrap(), y).unwrap();
            let w = v(&[norm * angle.cos(), norm * angle.sin(), 0.0]);
            if let Ok(w1) = sgd_step_hinge(&e, &w, eta, norm) {
                prop_assert!((w1.norm() - norm).abs() <= NORM_TOLERANCE * norm.max(1.0));
            }
        }

        #[test]
        fn losses_are_nonnegative(
            f in prop::collection::vec(-3f64..3.0, 2),
            w in prop::collection::vec(-3f64..3.0, 3),
            y in -3f64..3.0,
        ) {
            let e = ex(&f, y);
            let w = v(&w);
            let l = squared_loss(&e, &w).unwrap();
            prop_assert!(l >= 0.0);
            prop_assert_eq!(l == 0.0, e.x().dot(&w).unwrap() == y);
            let h = hinge_value(&e, &w).unwrap();
            prop_assert!(h >= 0.0);
            prop_assert_eq!(h == 0.0, e.x().dot(&w).unwrap() * y >= 1.0);
        }
    }
}
