use super::{check_eta, check_n, run_blocks, Curve, RateEstimate};
use crate::error::{LabError, Result};
use crate::geometry::{check_frame_dim, hinge_bound_b, hinge_chi, HingeFrame};
use crate::losses::sgd_step_hinge;
use crate::samplers::{draw_given_psi_hinge, draw_given_psi_upsilon_hinge};
use crate::vecspace::{BaseDistribution, LabeledExample, Marginal, ParamVector, RngStream};

/// Lower-tail mass dropped when truncating an unbounded second-axis marginal.
const QUADRATURE_TAIL: f64 = 1e-13;

/// `cos(w_{t+1}, w_bar) - cos(w_t, w_bar)` for one projected step on the
/// unit sphere.
pub fn hinge_decrement(ex: &LabeledExample, w_t: &ParamVector, w_bar: &ParamVector, eta: f64) -> Result<f64> {
    let next = sgd_step_hinge(ex, w_t, eta, 1.0)?;
    Ok(next.dot(w_bar)? - w_t.dot(w_bar)?)
}

/// First-order rate contributed by a second-axis coordinate `x2` (before the
/// factor `eta`): `(1 - psi) sin^2(theta) - x2 sin(theta) cos(theta)`.
pub fn hinge_bound_integrand(x2: f64, psi: f64, frame: &HingeFrame) -> f64 {
    let (c, s) = (frame.cos_theta(), frame.sin_theta());
    (1.0 - psi) * s * s - x2 * s * c
}

fn frame_vectors(dist: &BaseDistribution, frame: &HingeFrame) -> Result<(ParamVector, ParamVector)> {
    check_frame_dim(dist.dim())?;
    Ok((frame.optimum(dist.dim())?, frame.current(dist.dim())?))
}

/// Monte Carlo rate at global score `psi` in the canonical hinge frame.
pub fn mc_delta_hinge(
    dist: &BaseDistribution,
    frame: &HingeFrame,
    psi: f64,
    eta: f64,
    n: usize,
    stream: &RngStream,
) -> Result<RateEstimate> {
    Ok(mc_delta_hinge_curve(dist, frame, &[psi], eta, n, stream)?.points[0])
}

/// Monte Carlo rates over a grid of global scores with common random numbers.
pub fn mc_delta_hinge_curve(
    dist: &BaseDistribution,
    frame: &HingeFrame,
    psis: &[f64],
    eta: f64,
    n: usize,
    stream: &RngStream,
) -> Result<Curve> {
    check_n(n)?;
    check_eta(eta)?;
    let (w_bar, w_t) = frame_vectors(dist, frame)?;
    let stats = run_blocks(n, psis.len(), stream, |rng, out| {
        let start = rng.clone();
        for (slot, &psi) in out.iter_mut().zip(psis) {
            let mut shared = start.clone();
            let draw = draw_given_psi_hinge(dist, frame, psi, &mut shared)?;
            *slot = hinge_decrement(&draw.ex, &w_t, &w_bar, eta)?;
            *rng = shared;
        }
        Ok(())
    })?;
    Ok(Curve::paired(psis.to_vec(), &stats))
}

/// Monte Carlo estimate of the gap between the exact rate and its
/// first-order integral at each step size in `etas`, on common draws.
///
/// Each draw contributes its exact cosine increment minus
/// `eta * J(x2)` when the hinge is active, so the estimate is unbiased for
/// `Delta - quadrature` and its per-draw spread is only `O(eta^2)`.
pub fn hinge_first_order_residuals(
    dist: &BaseDistribution,
    frame: &HingeFrame,
    psi: f64,
    etas: &[f64],
    n: usize,
    stream: &RngStream,
) -> Result<Curve> {
    check_n(n)?;
    for &eta in etas {
        check_eta(eta)?;
    }
    let (w_bar, w_t) = frame_vectors(dist, frame)?;
    let stats = run_blocks(n, etas.len(), stream, |rng, out| {
        let draw = draw_given_psi_hinge(dist, frame, psi, rng)?;
        let x = draw.ex.x();
        let active = x.dot(&w_t)? * draw.ex.y() <= 1.0;
        let first = if active { hinge_bound_integrand(x.coords()[1], psi, frame) } else { 0.0 };
        for (slot, &eta) in out.iter_mut().zip(etas) {
            *slot = hinge_decrement(&draw.ex, &w_t, &w_bar, eta)? - eta * first;
        }
        Ok(())
    })?;
    Ok(Curve::paired(etas.to_vec(), &stats))
}

/// Single-step-size form of [`hinge_first_order_residuals`].
pub fn hinge_first_order_residual(
    dist: &BaseDistribution,
    frame: &HingeFrame,
    psi: f64,
    eta: f64,
    n: usize,
    stream: &RngStream,
) -> Result<RateEstimate> {
    Ok(hinge_first_order_residuals(dist, frame, psi, &[eta], n, stream)?.points[0])
}

/// First-order hinge rate by quadrature:
/// `eta * integral_{-inf}^{B(psi)} J(x2) f2(x2) dx2`, with `f2` the
/// second-axis marginal. Discrete marginals sum their atoms with
/// `x2 <= B(psi)` (the margin tie is active).
pub fn quad_delta_hinge(f2: &Marginal, frame: &HingeFrame, psi: f64, eta: f64) -> Result<f64> {
    f2.validate()?;
    check_eta(eta)?;
    let b = hinge_bound_b(psi, frame);
    if let Marginal::Discrete { atoms } = f2 {
        return Ok(eta
            * atoms.iter().filter(|(x, _)| *x <= b).map(|(x, m)| m * hinge_bound_integrand(*x, psi, frame)).sum::<f64>());
    }
    let (lo, hi) = f2.effective_support(QUADRATURE_TAIL);
    let upper = b.min(hi);
    if upper <= lo {
        return Ok(0.0);
    }
    let out = quadrature::integrate(|x| hinge_bound_integrand(x, psi, frame) * f2.pdf(x), lo, upper, 1e-14);
    let value = eta * out.integral;
    if !value.is_finite() {
        return Err(LabError::NonFinite(format!("hinge quadrature returned {value}")));
    }
    Ok(value)
}

/// Monte Carlo rate at fixed global and local scores.
pub fn mc_delta_hinge_local(
    dist: &BaseDistribution,
    frame: &HingeFrame,
    psi: f64,
    upsilon: f64,
    eta: f64,
    n: usize,
    stream: &RngStream,
) -> Result<RateEstimate> {
    Ok(mc_delta_hinge_local_curve(dist, frame, psi, &[upsilon], eta, n, stream)?.points[0])
}

/// Monte Carlo rates over a grid of local scores with common random numbers.
pub fn mc_delta_hinge_local_curve(
    dist: &BaseDistribution,
    frame: &HingeFrame,
    psi: f64,
    upsilons: &[f64],
    eta: f64,
    n: usize,
    stream: &RngStream,
) -> Result<Curve> {
    check_n(n)?;
    check_eta(eta)?;
    let (w_bar, w_t) = frame_vectors(dist, frame)?;
    let stats = run_blocks(n, upsilons.len(), stream, |rng, out| {
        let start = rng.clone();
        for (slot, &ups) in out.iter_mut().zip(upsilons) {
            let mut shared = start.clone();
            let draw = draw_given_psi_upsilon_hinge(dist, frame, psi, ups, &mut shared)?;
            *slot = hinge_decrement(&draw.ex, &w_t, &w_bar, eta)?;
            *rng = shared;
        }
        Ok(())
    })?;
    Ok(Curve::paired(upsilons.to_vec(), &stats))
}

/// `eta [(1 - psi) sin^2(theta) - chi(psi, ups) sin(theta) cos(theta)]`,
/// whose slope in `ups` is `eta cos(theta)`.
pub fn closed_delta_hinge_local(psi: f64, upsilon: f64, frame: &HingeFrame, eta: f64) -> Result<f64> {
    if !(upsilon.is_finite() && upsilon > 0.0) {
        return Err(LabError::InvalidParameter(format!("local score must be positive, got {upsilon}")));
    }
    Ok(eta * hinge_bound_integrand(hinge_chi(psi, upsilon, frame), psi, frame))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use statrs::distribution::{Continuous, ContinuousCDF, Normal};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3};

    /// Closed form of the first-order integral for a standard normal second
    /// axis: `alpha Phi(B) + beta phi(B)` with `alpha = (1 - psi) s^2` and
    /// `beta = s c` (the mean of x2 below B is `-phi(B) / Phi(B)`).
    fn gaussian_first_order(psi: f64, frame: &HingeFrame, eta: f64) -> f64 {
        let n = Normal::standard();
        let b = hinge_bound_b(psi, frame);
        let (c, s) = (frame.cos_theta(), frame.sin_theta());
        eta * ((1.0 - psi) * s * s * n.cdf(b) + s * c * n.pdf(b))
    }

    #[test]
    fn quadrature_matches_gaussian_closed_form() {
        let g = Marginal::Gaussian { mean: 0.0, sd: 1.0 };
        for theta in [0.4, FRAC_PI_3, FRAC_PI_2, 2.0] {
            let frame = HingeFrame::from_angle(theta).unwrap();
            for psi in [0.0, 0.3, 0.8, 1.5, 2.0] {
                let q = quad_delta_hinge(&g, &frame, psi, 1e-3).unwrap();
                assert_relative_eq!(q, gaussian_first_order(psi, &frame, 1e-3), epsilon = 1e-15, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn quadrature_examples() {
        let frame = HingeFrame::from_angle(FRAC_PI_3).unwrap();
        let above = Marginal::Uniform { lo: 5.0, hi: 6.0 };
        assert_eq!(quad_delta_hinge(&above, &frame, 0.5, 1e-3).unwrap(), 0.0);
        let right = HingeFrame::from_angle(FRAC_PI_2).unwrap();
        let g = Marginal::Gaussian { mean: 0.2, sd: 1.3 };
        let q = quad_delta_hinge(&g, &right, 0.4, 1e-3).unwrap();
        assert_relative_eq!(q, 1e-3 * 0.6 * g.cdf(1.0), max_relative = 1e-9);
        let atoms = Marginal::Discrete { atoms: vec![(0.0, 0.5), (5.0, 0.5)] };
        let q = quad_delta_hinge(&atoms, &frame, 0.5, 1.0).unwrap();
        assert_relative_eq!(q, 0.5 * 0.5 * 0.75, epsilon = 1e-15);
    }

    #[test]
    fn inactive_draws_and_zero_step_give_zero() {
        let frame = HingeFrame::from_angle(FRAC_PI_3).unwrap();
        let b = hinge_bound_b(0.5, &frame);
        let dist = BaseDistribution::uniform_box_bounds(vec![-1.0, b + 0.1], vec![1.0, b + 1.0]).unwrap();
        let s = RngStream::new(1, 0);
        let est = mc_delta_hinge(&dist, &frame, 0.5, 1e-2, 10_000, &s).unwrap();
        assert_eq!((est.mean, est.std_error), (0.0, 0.0));
        let g = BaseDistribution::standard_gaussian(2).unwrap();
        let est = mc_delta_hinge(&g, &frame, 0.5, 0.0, 10_000, &s).unwrap();
        assert_eq!(est.mean, 0.0);
    }

    #[test]
    fn label_flip_leaves_increment_unchanged() {
        use crate::samplers::draw_given_psi_hinge_labeled;
        let dist = BaseDistribution::standard_gaussian(3).unwrap();
        let frame = HingeFrame::from_angle(1.1).unwrap();
        let (w_bar, w_t) = (frame.optimum(3).unwrap(), frame.current(3).unwrap());
        let s = RngStream::new(9, 0);
        let (mut a, mut b) = (s.rng(), s.rng());
        for _ in 0..1000 {
            let pos = draw_given_psi_hinge_labeled(&dist, &frame, 0.7, 1.0, &mut a).unwrap();
            let neg = draw_given_psi_hinge_labeled(&dist, &frame, 0.7, -1.0, &mut b).unwrap();
            let dp = hinge_decrement(&pos.ex, &w_t, &w_bar, 0.01).unwrap();
            let dn = hinge_decrement(&neg.ex, &w_t, &w_bar, 0.01).unwrap();
            assert_eq!(dp, dn);
        }
    }

    #[test]
    fn local_closed_form_examples() {
        let right = HingeFrame::from_angle(FRAC_PI_2).unwrap();
        for ups in [0.1, 0.5, 2.0] {
            assert_relative_eq!(closed_delta_hinge_local(0.3, ups, &right, 0.01).unwrap(), 0.007, epsilon = 1e-15);
        }
        let frame = HingeFrame::from_angle(FRAC_PI_3).unwrap();
        let h = 1e-4;
        let fd = (closed_delta_hinge_local(0.4, 0.5 + h, &frame, 0.01).unwrap()
            - closed_delta_hinge_local(0.4, 0.5 - h, &frame, 0.01).unwrap())
            / (2.0 * h);
        assert!((fd - 0.01 * frame.cos_theta()).abs() < 1e-9);
        // At psi = 1 the rate is -eta chi s c, negative when chi > 0.
        assert!(closed_delta_hinge_local(1.0, 0.5, &frame, 0.01).unwrap() < 0.0);
    }

    #[test]
    fn residual_is_second_order() {
        let dist = BaseDistribution::standard_gaussian(2).unwrap();
        let frame = HingeFrame::from_angle(FRAC_PI_3).unwrap();
        let res = hinge_first_order_residuals(&dist, &frame, 0.8, &[2e-3, 1e-3], 100_000, &RngStream::new(5, 0))
            .unwrap();
        let ratio = res.points[0].mean / res.points[1].mean;
        assert!((3.0..5.0).contains(&ratio), "ratio {ratio}");
    }
}
