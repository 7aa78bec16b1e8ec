//! Difficulty scores: a monotone transform of an example's loss, measured
//! under the optimal hypothesis (global) or the current one (local).

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::losses::{check_norm, ProblemKind};
use crate::vecspace::{LabeledExample, ParamVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreTag {
    /// Measured under the optimal hypothesis `w_bar` (written `psi`).
    Global,
    /// Measured under the current hypothesis `w_t` (written `upsilon`).
    Local,
}

/// The transform applied to the loss. Fixed by the problem: every closed
/// form assumes square root for least squares and identity for hinge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreTransform {
    SquareRoot,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreKind {
    pub tag: ScoreTag,
    pub transform: ScoreTransform,
}

impl ScoreKind {
    pub fn for_problem(problem: &ProblemKind, tag: ScoreTag) -> Self {
        let transform = match problem {
            ProblemKind::Regression { .. } => ScoreTransform::SquareRoot,
            ProblemKind::HingeClassification { .. } => ScoreTransform::Identity,
        };
        Self { tag, transform }
    }
}

fn score(problem: &ProblemKind, ex: &LabeledExample, w: &ParamVector) -> Result<f64> {
    match *problem {
        // sqrt((x . w - y)^2), computed without the round trip through the square.
        ProblemKind::Regression { .. } => Ok((ex.x().dot(w)? - ex.y()).abs()),
        ProblemKind::HingeClassification { norm, .. } => {
            check_norm(w, norm)?;
            Ok((1.0 - ex.x().dot(w)? * ex.y()).max(0.0))
        }
    }
}

/// `psi`: transformed loss under the optimal hypothesis.
pub fn global_score(problem: &ProblemKind, ex: &LabeledExample, w_bar: &ParamVector) -> Result<f64> {
    score(problem, ex, w_bar)
}

/// `upsilon`: transformed loss under the current hypothesis.
pub fn local_score(problem: &ProblemKind, ex: &LabeledExample, w_t: &ParamVector) -> Result<f64> {
    score(problem, ex, w_t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{hinge_bound_b, polar_decompose, region_classify, Branch, HingeFrame};
    use crate::vecspace::{BaseDistribution, RngStream};
    use rand::Rng;

    fn v(c: &[f64]) -> ParamVector {
        ParamVector::new(c.to_vec()).unwrap()
    }

    #[test]
    fn global_score_examples() {
        let reg = ProblemKind::regression(0.1).unwrap();
        let w_bar = v(&[1.0, 2.0]);
        let realizable = LabeledExample::from_features(&[3.0], 5.0).unwrap();
        assert_eq!(global_score(&reg, &realizable, &w_bar).unwrap(), 0.0);
        let off = LabeledExample::from_features(&[3.0], 8.0).unwrap();
        assert_eq!(global_score(&reg, &off, &w_bar).unwrap(), 3.0);
        let hinge = ProblemKind::hinge(0.1, 1.0).unwrap();
        let e = LabeledExample::classification(v(&[0.25, 1.0]), 1.0).unwrap();
        assert_eq!(global_score(&hinge, &e, &v(&[1.0, 0.0])).unwrap(), 0.75);
    }

    #[test]
    fn local_equals_global_at_optimum() {
        let reg = ProblemKind::regression(0.1).unwrap();
        let w = v(&[0.3, -1.2, 0.5]);
        let e = LabeledExample::from_features(&[1.0, 2.0], -0.4).unwrap();
        assert_eq!(local_score(&reg, &e, &w).unwrap(), global_score(&reg, &e, &w).unwrap());
    }

    #[test]
    fn local_score_matches_region_formula() {
        let reg = ProblemKind::regression(0.1).unwrap();
        let dist = BaseDistribution::standard_gaussian(3).unwrap();
        let w_bar = v(&[1.0, -0.5, 0.2, 0.3]);
        let w_t = v(&[0.1, 0.4, -0.6, 1.0]);
        let mut rng = RngStream::new(11, 0).rng();
        for _ in 0..10_000 {
            let x = dist.sample_base(&mut rng);
            let psi: f64 = rng.random::<f64>() * 2.0;
            let branch = if rng.random::<bool>() { Branch::Plus } else { Branch::Minus };
            let y = x.dot(&w_bar).unwrap() + branch.sign() * psi;
            let e = LabeledExample::new(x.clone(), y).unwrap();
            let p = polar_decompose(&x, &w_t, &w_bar).unwrap();
            let (_, ups) = region_classify(p.u(), psi, p.lambda, branch);
            let direct = local_score(&reg, &e, &w_t).unwrap();
            assert!((ups - direct).abs() < 1e-9 * direct.max(1.0));
        }
    }

    #[test]
    fn hinge_inactive_side_has_zero_local_score() {
        let hinge = ProblemKind::hinge(0.1, 1.0).unwrap();
        let f = HingeFrame::from_angle(1.0).unwrap();
        let psi = 0.4;
        let b = hinge_bound_b(psi, &f);
        for extra in [0.0, 0.1, 3.0] {
            let e = LabeledExample::classification(v(&[1.0 - psi, b + extra, 1.0]), 1.0).unwrap();
            assert!(local_score(&hinge, &e, &f.current(2).unwrap()).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn hinge_scores_survive_joint_rescaling() {
        let a = 3.0;
        let e = LabeledExample::classification(v(&[0.2, -0.1, 1.0]), 1.0).unwrap();
        let unit = v(&[0.6, 0.8, 0.0]);
        let big = unit.scale(a).unwrap();
        let p_big = ProblemKind::hinge(0.1, a).unwrap();
        let p_unit = ProblemKind::hinge(0.1, 1.0).unwrap();
        let s_big = global_score(&p_big, &e, &big).unwrap();
        let s_unit = global_score(&p_unit, &e.rescaled(a).unwrap(), &unit).unwrap();
        assert!((s_big - s_unit).abs() < 1e-12);
    }
}
