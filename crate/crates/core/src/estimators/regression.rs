use serde::{Deserialize, Serialize};

use super::{check_eta, check_n, run_blocks, Curve, RateEstimate};
use crate::error::{LabError, Result};
use crate::geometry::zenith;
use crate::losses::sgd_step_regression;
use crate::samplers::{draw_given_psi_regression, draw_given_psi_upsilon_regression};
use crate::vecspace::{BaseDistribution, LabeledExample, ParamVector, RngStream};

/// The three expectations in the closed-form regression rate, over the
/// data law with `r = ||x||` and `theta` measured from the zenith
/// `w_bar - w_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionMoments {
    /// `E[r^2]`
    pub m_r2: f64,
    /// `E[r^2 cos^2 theta]`
    pub m_r2c2: f64,
    /// `E[r^4 cos^2 theta]`
    pub m_r4c2: f64,
}

impl DistributionMoments {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.m_r2, self.m_r2c2, self.m_r4c2].iter().all(|m| m.is_finite() && *m >= 0.0)
            && self.m_r2c2 <= self.m_r2 * (1.0 + 1e-12);
        if ok {
            Ok(())
        } else {
            Err(LabError::InvalidParameter(format!("inconsistent moments {self:?}")))
        }
    }
}

/// Moments with the covariance matrix of their estimates (all zero when exact).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub moments: DistributionMoments,
    /// Covariance of the three estimates, ordered `(m_r2, m_r2c2, m_r4c2)`.
    pub covariance: [[f64; 3]; 3],
    pub n: u64,
}

fn moment_terms(x: &ParamVector, dir: &ParamVector) -> Result<[f64; 3]> {
    let r2 = x.norm_sq();
    let u = x.dot(dir)?;
    Ok([r2, u * u, r2 * u * u])
}

/// Estimates the rate moments. Fixing the global score only constrains the
/// label, so the law of `x` given `psi` is the base law itself; point masses
/// are summed exactly.
pub fn moment_oracle(
    dist: &BaseDistribution,
    w_bar: &ParamVector,
    w_t: &ParamVector,
    psi: f64,
    n: usize,
    stream: &RngStream,
) -> Result<MomentEstimate> {
    if !(psi.is_finite() && psi >= 0.0) {
        return Err(LabError::InvalidParameter(format!("scores must be nonnegative, got {psi}")));
    }
    let (_, dir) = zenith(w_t, w_bar)?;
    if let BaseDistribution::PointMass { atoms } = dist {
        let mut m = [0.0; 3];
        for atom in atoms {
            let t = moment_terms(&ParamVector::from_features(&atom.features)?, &dir)?;
            for (acc, v) in m.iter_mut().zip(t) {
                *acc += atom.weight * v;
            }
        }
        return Ok(MomentEstimate {
            moments: DistributionMoments { m_r2: m[0], m_r2c2: m[1], m_r4c2: m[2] },
            covariance: [[0.0; 3]; 3],
            n: 0,
        });
    }
    check_n(n)?;
    let stats = run_blocks(n, 3, stream, |rng, out| {
        let x = dist.sample_base(rng);
        out.copy_from_slice(&moment_terms(&x, &dir)?);
        Ok(())
    })?;
    let count = stats.count() as f64;
    let mut covariance = [[0.0; 3]; 3];
    for (i, row) in covariance.iter_mut().enumerate() {
        for (j, c) in row.iter_mut().enumerate() {
            *c = stats.covariance(i, j) / count;
        }
    }
    Ok(MomentEstimate {
        moments: DistributionMoments { m_r2: stats.mean(0), m_r2c2: stats.mean(1), m_r4c2: stats.mean(2) },
        covariance,
        n: stats.count(),
    })
}

/// `4 (eta lambda^2 m_r2c2 - eta^2 lambda^2 m_r4c2 - eta^2 psi^2 m_r2)`.
pub fn closed_delta_regression(m: &DistributionMoments, psi: f64, lambda: f64, eta: f64) -> f64 {
    let l2 = lambda * lambda;
    4.0 * (eta * l2 * m.m_r2c2 - eta * eta * l2 * m.m_r4c2 - eta * eta * psi * psi * m.m_r2)
}

/// Standard error of the closed form propagated from the moment estimates.
pub fn closed_delta_regression_se(est: &MomentEstimate, psi: f64, lambda: f64, eta: f64) -> f64 {
    let l2 = lambda * lambda;
    let g = [-4.0 * eta * eta * psi * psi, 4.0 * eta * l2, -4.0 * eta * eta * l2];
    let mut var = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            var += g[i] * g[j] * est.covariance[i][j];
        }
    }
    var.max(0.0).sqrt()
}

/// `d Delta / d psi = -8 eta^2 m_r2 psi`.
pub fn d_delta_d_psi(m: &DistributionMoments, psi: f64, eta: f64) -> f64 {
    -8.0 * eta * eta * m.m_r2 * psi
}

/// `d Delta / d lambda = 8 eta lambda (m_r2c2 - eta m_r4c2)`.
pub fn d_delta_d_lambda(m: &DistributionMoments, lambda: f64, eta: f64) -> f64 {
    8.0 * eta * lambda * (m.m_r2c2 - eta * m.m_r4c2)
}

/// Largest step size for which the rate grows with the distance to the
/// optimum: `m_r2c2 / m_r4c2`.
pub fn eta_bound(m: &DistributionMoments) -> Result<f64> {
    if m.m_r4c2 <= 0.0 {
        return Err(LabError::UnsupportedConditioning(
            "E[r^4 cos^2] vanishes: the data law is concentrated where r = 0 or cos = 0".into(),
        ));
    }
    Ok(m.m_r2c2 / m.m_r4c2)
}

/// `||w_t - w_bar||^2 - ||w_{t+1} - w_bar||^2` for one regression step.
pub fn regression_decrement(ex: &LabeledExample, w_t: &ParamVector, w_bar: &ParamVector, eta: f64) -> Result<f64> {
    let next = sgd_step_regression(ex, w_t, eta)?;
    Ok(w_t.sub(w_bar)?.norm_sq() - next.sub(w_bar)?.norm_sq())
}

/// Monte Carlo rate at global score `psi`. Each draw evaluates both labels
/// of the same `x` and averages them (exact stratification over the two
/// equally likely branches).
pub fn mc_delta_regression(
    dist: &BaseDistribution,
    w_bar: &ParamVector,
    w_t: &ParamVector,
    psi: f64,
    eta: f64,
    n: usize,
    stream: &RngStream,
) -> Result<RateEstimate> {
    let curve = mc_delta_regression_curve(dist, w_bar, w_t, &[psi], eta, n, stream)?;
    Ok(curve.points[0])
}

/// Monte Carlo rates over a grid of global scores with common random numbers.
pub fn mc_delta_regression_curve(
    dist: &BaseDistribution,
    w_bar: &ParamVector,
    w_t: &ParamVector,
    psis: &[f64],
    eta: f64,
    n: usize,
    stream: &RngStream,
) -> Result<Curve> {
    check_n(n)?;
    check_eta(eta)?;
    zenith(w_t, w_bar)?;
    let stats = run_blocks(n, psis.len(), stream, |rng, out| {
        let start = rng.clone();
        for (slot, &psi) in out.iter_mut().zip(psis) {
            let mut shared = start.clone();
            let draw = draw_given_psi_regression(dist, w_bar, psi, &mut shared)?;
            let other = draw.mirrored(w_bar)?;
            *slot = 0.5
                * (regression_decrement(&draw.ex, w_t, w_bar, eta)?
                    + regression_decrement(&other.ex, w_t, w_bar, eta)?);
            *rng = shared;
        }
        Ok(())
    })?;
    Ok(Curve::paired(psis.to_vec(), &stats))
}

/// Monte Carlo rate at fixed global and local scores.
#[allow(clippy::too_many_arguments)]
pub fn mc_delta_regression_local(
    dist: &BaseDistribution,
    w_bar: &ParamVector,
    w_t: &ParamVector,
    psi: f64,
    upsilon: f64,
    eta: f64,
    n: usize,
    stream: &RngStream,
) -> Result<RateEstimate> {
    let curve = mc_delta_regression_local_curve(dist, w_bar, w_t, psi, &[upsilon], eta, n, stream)?;
    Ok(curve.points[0])
}

/// Monte Carlo rates over a grid of local scores with common random numbers.
#[allow(clippy::too_many_arguments)]
pub fn mc_delta_regression_local_curve(
    dist: &BaseDistribution,
    w_bar: &ParamVector,
    w_t: &ParamVector,
    psi: f64,
    upsilons: &[f64],
    eta: f64,
    n: usize,
    stream: &RngStream,
) -> Result<Curve> {
    check_n(n)?;
    check_eta(eta)?;
    let stats = run_blocks(n, upsilons.len(), stream, |rng, out| {
        let start = rng.clone();
        for (slot, &ups) in out.iter_mut().zip(upsilons) {
            let mut shared = start.clone();
            let draw = draw_given_psi_upsilon_regression(dist, w_bar, w_t, psi, ups, &mut shared)?;
            *slot = regression_decrement(&draw.ex, w_t, w_bar, eta)?;
            *rng = shared;
        }
        Ok(())
    })?;
    Ok(Curve::paired(upsilons.to_vec(), &stats))
}

/// Four-point density contrast of the zenith marginal `f`:
/// `(f(a) - f(b) - f(c) + f(d)) / (f(a) + f(b) + f(c) + f(d))` at
/// `a, b, c, d = (psi + ups, psi - ups, -psi + ups, -psi - ups) / lambda`.
pub fn nabla<F: Fn(f64) -> f64>(f: F, psi: f64, upsilon: f64, lambda: f64) -> Result<f64> {
    let a = f((psi + upsilon) / lambda);
    let b = f((psi - upsilon) / lambda);
    let c = f((-psi + upsilon) / lambda);
    let d = f((-psi - upsilon) / lambda);
    let total = a + b + c + d;
    if !(total > 0.0) {
        return Err(LabError::UndefinedNabla);
    }
    Ok((a - b - c + d) / total)
}

fn check_nabla(nabla: f64) -> Result<()> {
    if !(nabla.abs() <= 1.0) {
        return Err(LabError::InvalidParameter(format!("density contrast must lie in [-1, 1], got {nabla}")));
    }
    Ok(())
}

/// `4 eta (psi^2 + ups^2 + 2 psi ups nabla)`, which is
/// `4 eta E[lambda^2 u^2 | psi, ups]`: the squared-projection form of the
/// first-order local rate. It omits the
/// cross term between the label offset and `u`, which does not vanish once
/// the local score is fixed; see [`first_order_delta_regression_local`].
pub fn closed_delta_regression_local(psi: f64, upsilon: f64, eta: f64, nabla: f64) -> Result<f64> {
    check_nabla(nabla)?;
    Ok(4.0 * eta * (psi * psi + upsilon * upsilon + 2.0 * psi * upsilon * nabla))
}

/// `4 eta (ups^2 + psi ups nabla)`: the first-order term of the expected
/// decrement given both scores, `4 eta E[(x . w_t - y)(x . (w_t - w_bar))]`,
/// summed over the four regions. This is what Monte Carlo reproduces.
pub fn first_order_delta_regression_local(psi: f64, upsilon: f64, eta: f64, nabla: f64) -> Result<f64> {
    check_nabla(nabla)?;
    Ok(4.0 * eta * (upsilon * upsilon + psi * upsilon * nabla))
}

/// Mean of `s psi (x . (w_bar - w_t))` over draws with random label branch
/// `s = +-1`: the cross term that vanishes by the symmetry of the two labels.
pub fn branch_cross_term(
    dist: &BaseDistribution,
    w_bar: &ParamVector,
    w_t: &ParamVector,
    psi: f64,
    n: usize,
    stream: &RngStream,
) -> Result<RateEstimate> {
    check_n(n)?;
    let toward = w_bar.sub(w_t)?;
    zenith(w_t, w_bar)?;
    let stats = run_blocks(n, 1, stream, |rng, out| {
        let draw = draw_given_psi_regression(dist, w_bar, psi, rng)?;
        let sign = draw.branch.map_or(0.0, |b| b.sign());
        out[0] = sign * psi * draw.ex.x().dot(&toward)?;
        Ok(())
    })?;
    Ok(RateEstimate::from_stats(&stats, 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vecspace::Atom;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn v(c: &[f64]) -> ParamVector {
        ParamVector::new(c.to_vec()).unwrap()
    }

    fn unit_atom() -> BaseDistribution {
        // x = [0, 1]: r = 1, aligned with the zenith e_bias.
        BaseDistribution::single_atom(vec![0.0]).unwrap()
    }

    #[test]
    fn point_mass_rates() {
        let (w_t, w_bar) = (v(&[0.0, 0.0]), v(&[0.0, 1.0]));
        let s = RngStream::new(1, 0);
        let d0 = mc_delta_regression(&unit_atom(), &w_bar, &w_t, 0.0, 0.1, 1000, &s).unwrap();
        assert_relative_eq!(d0.mean, 0.36, epsilon = 1e-12);
        assert_eq!(d0.std_error, 0.0);
        let d1 = mc_delta_regression(&unit_atom(), &w_bar, &w_t, 1.0, 0.1, 1000, &s).unwrap();
        assert_relative_eq!(d1.mean, 0.32, epsilon = 1e-12);
        let still = mc_delta_regression(&unit_atom(), &w_bar, &w_t, 1.0, 0.0, 1000, &s).unwrap();
        assert_eq!(still.mean, 0.0);
    }

    #[test]
    fn closed_form_examples() {
        let m = DistributionMoments { m_r2: 1.0, m_r2c2: 1.0, m_r4c2: 1.0 };
        assert_relative_eq!(closed_delta_regression(&m, 0.0, 1.0, 0.1), 0.36, epsilon = 1e-15);
        assert_relative_eq!(closed_delta_regression(&m, 1.0, 1.0, 0.1), 0.32, epsilon = 1e-15);
        let bound = eta_bound(&m).unwrap();
        assert_eq!(d_delta_d_lambda(&m, 1.3, bound), 0.0);
    }

    #[test]
    fn eta_bound_examples() {
        let (w_t, w_bar) = (v(&[0.0, 0.0]), v(&[1.0, 0.0]));
        let s = RngStream::new(0, 0);
        let two = BaseDistribution::single_atom(vec![2.0]).unwrap();
        // x = [2, 1] against the zenith e_0: r^2 = 5, u = 2.
        let m = moment_oracle(&two, &w_bar, &w_t, 0.0, 0, &s).unwrap().moments;
        assert_relative_eq!(eta_bound(&m).unwrap(), 4.0 / (5.0 * 4.0), epsilon = 1e-15);
        let r2 = DistributionMoments { m_r2: 4.0, m_r2c2: 4.0, m_r4c2: 16.0 };
        assert_eq!(eta_bound(&r2).unwrap(), 0.25);
        let mix = DistributionMoments { m_r2: 2.5, m_r2c2: 2.5, m_r4c2: 8.5 };
        assert_relative_eq!(eta_bound(&mix).unwrap(), 5.0 / 17.0, epsilon = 1e-15);
        let flat = DistributionMoments { m_r2: 1.0, m_r2c2: 0.0, m_r4c2: 0.0 };
        assert!(eta_bound(&flat).is_err());
    }

    #[test]
    fn point_mass_moments_are_exact() {
        let atoms = BaseDistribution::point_mass(vec![
            Atom { features: vec![0.0, 0.0], weight: 0.5 },
            Atom { features: vec![1.0, 0.0], weight: 0.5 },
        ])
        .unwrap();
        let (w_t, w_bar) = (v(&[0.0, 0.0, 0.0]), v(&[0.0, 0.0, 2.0]));
        let est = moment_oracle(&atoms, &w_bar, &w_t, 0.3, 0, &RngStream::new(0, 0)).unwrap();
        assert_eq!(est.moments, DistributionMoments { m_r2: 1.5, m_r2c2: 1.0, m_r4c2: 1.5 });
        assert_eq!(est.covariance, [[0.0; 3]; 3]);
    }

    #[test]
    fn gaussian_moments_agree_across_seeds() {
        let dist = BaseDistribution::standard_gaussian(3).unwrap();
        let w_bar = v(&[1.0, 0.5, -0.5, 0.2]);
        let w_t = v(&[0.0, 0.0, 0.0, 0.0]);
        let a = moment_oracle(&dist, &w_bar, &w_t, 0.0, 200_000, &RngStream::new(1, 0)).unwrap();
        let b = moment_oracle(&dist, &w_bar, &w_t, 0.0, 200_000, &RngStream::new(2, 0)).unwrap();
        let pairs = [
            (a.moments.m_r2, b.moments.m_r2),
            (a.moments.m_r2c2, b.moments.m_r2c2),
            (a.moments.m_r4c2, b.moments.m_r4c2),
        ];
        for (i, (x, y)) in pairs.iter().enumerate() {
            let se = (a.covariance[i][i] + b.covariance[i][i]).sqrt();
            assert!((x - y).abs() < 4.0 * se, "moment {i}: {x} vs {y} (se {se})");
            assert!(a.moments.m_r2c2 <= a.moments.m_r2);
        }
    }

    #[test]
    fn nabla_examples() {
        let flat = |_: f64| 0.25;
        assert_eq!(nabla(flat, 0.3, 0.2, 1.0).unwrap(), 0.0);
        let phi = |u: f64| (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt();
        assert_relative_eq!(nabla(phi, 1.0, 1.0, 1.0).unwrap(), -(1.0f64).tanh(), epsilon = 1e-12);
        assert!((nabla(phi, 1.0, 1.0, 1.0).unwrap() + 0.7616).abs() < 1e-4);
        assert_eq!(nabla(|_| 0.0, 1.0, 1.0, 1.0).unwrap_err(), LabError::UndefinedNabla);
    }

    #[test]
    fn local_closed_form_examples() {
        assert_eq!(closed_delta_regression_local(0.7, 0.7, 0.1, -1.0).unwrap(), 0.0);
        assert_relative_eq!(closed_delta_regression_local(1.0, 2.0, 0.1, 0.0).unwrap(), 2.0, epsilon = 1e-15);
        assert!(closed_delta_regression_local(1.0, 2.0, 0.1, 1.5).is_err());
        assert_relative_eq!(first_order_delta_regression_local(1.0, 2.0, 0.1, 0.0).unwrap(), 1.6, epsilon = 1e-15);
    }

    #[test]
    fn local_mc_matches_first_order_form_on_uniform_box() {
        // Zenith along feature 0 of a wide box: all four zenith points are
        // interior, so the density contrast is 0.
        let dist = BaseDistribution::uniform_box(2, 3.0).unwrap();
        let (w_t, w_bar) = (v(&[0.0, 0.0, 0.0]), v(&[1.0, 0.0, 0.0]));
        let eta = 1e-3;
        let est =
            mc_delta_regression_local(&dist, &w_bar, &w_t, 1.0, 0.5, eta, 200_000, &RngStream::new(3, 0)).unwrap();
        let first = first_order_delta_regression_local(1.0, 0.5, eta, 0.0).unwrap();
        // Second-order term: -4 eta^2 ups^2 E[r^2 | u], |u| <= 1.5, r^2 <= 1 + 9 + 2.25.
        let second = 4.0 * eta * eta * 0.25 * 12.25;
        assert!((est.mean - first).abs() < 3.0 * est.std_error + second);
        let squared_projection = closed_delta_regression_local(1.0, 0.5, eta, 0.0).unwrap();
        assert!((est.mean - squared_projection).abs() > 10.0 * (3.0 * est.std_error + second));
    }

    #[test]
    fn branch_symmetry_cross_term_vanishes() {
        let dist = BaseDistribution::standard_gaussian(2).unwrap();
        let (w_t, w_bar) = (v(&[0.3, 0.0, 0.1]), v(&[1.0, -0.5, 0.4]));
        let est = branch_cross_term(&dist, &w_bar, &w_t, 0.8, 100_000, &RngStream::new(4, 0)).unwrap();
        assert!(est.mean.abs() < 3.0 * est.std_error);
    }

    proptest! {
        #[test]
        fn nabla_is_bounded(
            m in -2f64..2.0, sd in 0.1f64..3.0,
            psi in 0f64..3.0, ups in 0f64..3.0, lambda in 0.1f64..3.0,
        ) {
            let f = |u: f64| (-0.5 * ((u - m) / sd).powi(2)).exp();
            if let Ok(value) = nabla(f, psi, ups, lambda) {
                prop_assert!(value.abs() <= 1.0);
            }
        }

        #[test]
        fn psi_derivative_matches_central_difference(
            m_r2 in 0.1f64..5.0, frac in 0f64..1.0, m_r4c2 in 0.1f64..20.0,
            psi in 0f64..2.0, lambda in 0.1f64..3.0, eta in 1e-4f64..0.1,
        ) {
            let m = DistributionMoments { m_r2, m_r2c2: frac * m_r2, m_r4c2 };
            let h = 1e-4 * psi.max(1.0);
            let fd = (closed_delta_regression(&m, psi + h, lambda, eta)
                - closed_delta_regression(&m, psi - h, lambda, eta)) / (2.0 * h);
            let exact = d_delta_d_psi(&m, psi, eta);
            prop_assert!(exact <= 0.0);
            prop_assert!((fd - exact).abs() <= 1e-7 * exact.abs().max(1e-6));
        }
    }
}
