//! The verification suite: twelve numbered criteria plus informational
//! checks that depend on the configured problem.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, PI};

use curriculum_lab::counterexamples::{build_hinge_low_psi, build_local_score_witness};
use curriculum_lab::curriculum::{build_pool, run_training, PolicyKind, SchedulePolicy, ScoreLaw};
use curriculum_lab::estimators::{
    closed_delta_hinge_local, closed_delta_regression, closed_delta_regression_local, closed_delta_regression_se,
    d_delta_d_lambda, d_delta_d_psi, eta_bound, first_order_delta_regression_local, hinge_first_order_residuals,
    mc_delta_hinge, mc_delta_hinge_curve, mc_delta_hinge_local_curve, mc_delta_regression_curve,
    mc_delta_regression_local_curve, moment_oracle, monotonicity_probe_at, nabla, quad_delta_hinge, Verdict,
};
use curriculum_lab::geometry::{zenith, HingeFrame};
use curriculum_lab::losses::{grad_check, ProblemKind};
use curriculum_lab::samplers::draw_given_psi_regression;
use curriculum_lab::stats::{ks_two_sample, sign_test_p};
use curriculum_lab::vecspace::{BaseDistribution, LabeledExample, Marginal, ParamVector, RngStream};
use curriculum_lab::{LabError, Result};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{default_w_bar, ExperimentConfig, SuiteParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Inconclusive,
    /// A violation that occurs only outside the conditions a result assumes; does not fail the suite.
    ExpectedViolation,
}

impl CheckStatus {
    pub fn label(self) -> &'static str {
        match self {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Inconclusive => "INCONCLUSIVE",
            CheckStatus::ExpectedViolation => "EXPECTED-VIOLATION",
        }
    }

    pub fn is_ok(self) -> bool {
        matches!(self, CheckStatus::Pass | CheckStatus::ExpectedViolation)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub id: String,
    /// Position in the numbered acceptance list, if the check is one of them.
    pub criterion: Option<u8>,
    pub title: String,
    pub status: CheckStatus,
    pub z_scores: Vec<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub config_hash: String,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

/// Number of numbered criteria.
pub const CRITERIA: u8 = 12;

struct Outcome {
    ok: bool,
    z_scores: Vec<f64>,
    detail: String,
}

impl Outcome {
    fn new(ok: bool, z_scores: Vec<f64>, detail: String) -> Self {
        Self { ok, z_scores, detail }
    }
}

fn stream(seed: u64, tag: u64) -> RngStream {
    RngStream::new(seed, tag)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().map(|z| z.abs()).fold(0.0, f64::max)
}

/// `w_bar - lambda e_0`.
fn offset(w_bar: &ParamVector, lambda: f64) -> Result<ParamVector> {
    w_bar.add_scaled(-lambda, &ParamVector::basis(w_bar.len(), 0)?)
}

fn psi_grid() -> Vec<f64> {
    (0..=8).map(|i| 0.25 * i as f64).collect()
}

fn regression_oracle(seed: u64, p: &SuiteParams) -> Result<Outcome> {
    let eta = 0.01;
    let psis = psi_grid();
    let mut zs = Vec::new();
    let mut min_bound = f64::INFINITY;
    for (i, d) in [2usize, 5].into_iter().enumerate() {
        let dist = BaseDistribution::standard_gaussian(d)?;
        let w_bar = default_w_bar(d)?;
        for (j, lambda) in [0.5, 1.0, 2.0].into_iter().enumerate() {
            let w_t = offset(&w_bar, lambda)?;
            let tag = 1000 + 20 * i as u64 + 2 * j as u64;
            let est = moment_oracle(&dist, &w_bar, &w_t, 0.0, p.n, &stream(seed, tag))?;
            min_bound = min_bound.min(eta_bound(&est.moments)?);
            let curve = mc_delta_regression_curve(&dist, &w_bar, &w_t, &psis, eta, p.n, &stream(seed, tag + 1))?;
            for (&psi, mc) in psis.iter().zip(&curve.points) {
                let closed = closed_delta_regression(&est.moments, psi, lambda, eta);
                let se = mc.std_error.hypot(closed_delta_regression_se(&est, psi, lambda, eta));
                zs.push((mc.mean - closed) / se);
            }
        }
    }
    let worst = max_abs(&zs);
    let ok = eta <= min_bound && worst <= p.tolerances.z;
    Ok(Outcome::new(ok, zs, format!("max |z| = {worst:.2} over 54 cells; eta = {eta} <= eta_bound >= {min_bound:.4}")))
}

fn global_monotonicity(seed: u64, p: &SuiteParams) -> Result<Outcome> {
    let eta = 0.01;
    let dist = BaseDistribution::standard_gaussian(3)?;
    let w_bar = default_w_bar(3)?;
    let w_t = offset(&w_bar, 1.0)?;
    let psis = psi_grid();
    let est = moment_oracle(&dist, &w_bar, &w_t, 0.0, p.n, &stream(seed, 2000))?;
    let derivative_ok = psis.iter().all(|&psi| d_delta_d_psi(&est.moments, psi, eta) <= 0.0);
    let curve = mc_delta_regression_curve(&dist, &w_bar, &w_t, &psis, eta, p.n, &stream(seed, 2001))?;
    let report = monotonicity_probe_at(&curve, p.tolerances.z)?;
    let zs: Vec<f64> = report.intervals.iter().filter_map(|t| t.z).collect();
    let conclusive = report.intervals.iter().filter(|t| t.conclusive).count();
    let ok = derivative_ok && report.verdict == Verdict::Decreasing;
    Ok(Outcome::new(
        ok,
        zs,
        format!(
            "analytic derivative <= 0: {derivative_ok}; verdict {:?} with {conclusive}/{} conclusive intervals",
            report.verdict,
            report.intervals.len()
        ),
    ))
}

fn lambda_clause(_seed: u64, _p: &SuiteParams) -> Result<Outcome> {
    let dist = BaseDistribution::single_atom(vec![2.0, 1.0])?;
    let w_bar = default_w_bar(2)?;
    let w_t = offset(&w_bar, 1.0)?;
    let m = moment_oracle(&dist, &w_bar, &w_t, 0.0, 2, &stream(0, 0))?.moments;
    let bound = eta_bound(&m)?;
    let above = d_delta_d_lambda(&m, 1.0, 2.0 * bound);
    let below = d_delta_d_lambda(&m, 1.0, 0.5 * bound);
    Ok(Outcome::new(
        above < 0.0 && below > 0.0,
        Vec::new(),
        format!("eta_bound = {bound}; dDelta/dlambda = {above:e} at 2x, {below:e} at 0.5x"),
    ))
}

fn local_monotonicity(seed: u64, p: &SuiteParams) -> Result<Outcome> {
    let eta = 0.01;
    let psi = 0.2;
    let ups = [0.2, 0.3, 0.4, 0.5, 0.6];
    let dist = BaseDistribution::uniform_box(2, 1.0)?;
    let w_bar = default_w_bar(2)?;
    let w_t = offset(&w_bar, 1.0)?;
    let (lambda, dir) = zenith(&w_t, &w_bar)?;
    let marginal = dist.projection(&dir)?;
    let mut squared_projection = Vec::new();
    let mut first_order = Vec::new();
    let mut nabla_zero = true;
    for &u in &ups {
        let nb = nabla(|x| marginal.pdf(x), psi, u, lambda)?;
        nabla_zero &= nb == 0.0;
        squared_projection.push(closed_delta_regression_local(psi, u, eta, nb)?);
        first_order.push(first_order_delta_regression_local(psi, u, eta, nb)?);
    }
    let increasing = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]);
    let closed_ok = increasing(&squared_projection) && increasing(&first_order);
    let curve = mc_delta_regression_local_curve(&dist, &w_bar, &w_t, psi, &ups, eta, p.slope_n, &stream(seed, 4000))?;
    let zs: Vec<f64> = (0..ups.len() - 1)
        .map(|i| {
            let d = curve.difference(i);
            if d.std_error > 0.0 {
                d.mean / d.std_error
            } else if d.mean > 0.0 {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let mc_ok = zs.iter().all(|&z| z >= p.tolerances.z);
    let min_z = zs.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(Outcome::new(
        nabla_zero && closed_ok && mc_ok,
        zs.into_iter().filter(|z| z.is_finite()).collect(),
        format!("density contrast zero: {nabla_zero}; closed forms increasing: {closed_ok}; min slope z = {min_z:.1}"),
    ))
}

fn nabla_bounds(seed: u64, p: &SuiteParams) -> Result<Outcome> {
    let mut rng = stream(seed, 5000).rng();
    let (mut defined, mut worst) = (0usize, 0.0f64);
    for _ in 0..p.nabla_tuples {
        let marginal = match rng.random_range(0..3) {
            0 => Marginal::Gaussian { mean: rng.random_range(-1.0..1.0), sd: rng.random_range(0.3..2.0) },
            1 => Marginal::Uniform { lo: rng.random_range(-2.0..-0.2), hi: rng.random_range(0.2..2.0) },
            _ => Marginal::PowerSemicircle {
                center: rng.random_range(-0.5..0.5),
                half_width: rng.random_range(0.5..2.5),
                exponent: rng.random_range(0.0..3.0),
            },
        };
        let psi = rng.random_range(0.0..2.0);
        let ups = rng.random_range(0.01..2.0);
        let lambda = rng.random_range(0.2..3.0);
        match nabla(|x| marginal.pdf(x), psi, ups, lambda) {
            Ok(v) => {
                defined += 1;
                worst = worst.max(v.abs());
            }
            Err(LabError::UndefinedNabla) => {}
            Err(e) => return Err(e),
        }
    }
    let g = Marginal::Gaussian { mean: 0.0, sd: 1.0 };
    let spot = nabla(|x| g.pdf(x), 1.0, 1.0, 1.0)?;
    let ok = defined > 0 && worst <= 1.0 && (spot + 0.7616).abs() <= p.tolerances.nabla_spot;
    Ok(Outcome::new(
        ok,
        Vec::new(),
        format!("max |nabla| = {worst:.6} over {defined} defined tuples; Gaussian spot value {spot:.6}"),
    ))
}

fn local_score_witness(seed: u64, p: &SuiteParams) -> Result<Outcome> {
    let dist = BaseDistribution::standard_gaussian(2)?;
    let r = build_local_score_witness(&dist, &default_w_bar(2)?, 1.0, 1e-2, p.n, &stream(seed, 6000))?;
    let rate = r.measurement("delta_upsilon").copied().expect("reported");
    let bound = r.measurement("bound").expect("reported").mean;
    let zs = vec![rate.mean / rate.std_error, (rate.mean - bound) / rate.std_error];
    let delta = match r.construction {
        curriculum_lab::counterexamples::Construction::LocalScore { delta, .. } => delta,
        _ => f64::NAN,
    };
    Ok(Outcome::new(
        r.verdict,
        zs,
        format!("delta = {delta}; Delta = {:.3e} +- {:.1e}, bound {bound:.3e}", rate.mean, rate.std_error),
    ))
}

/// Second-order check under step-size halving. `residuals` are precise
/// estimates of the deterministic gap to the first-order formula at `etas`
/// and `eta / 2`; their ratio must lie in the configured range, and `C` is the
/// smallest constant with `|r_k| <= C eta_k^2` at both sizes. `gaps` are
/// independent replicates `(value, se)` that must then satisfy
/// `|gap_k| <= z se_k + C eta_k^2`.
struct Halving {
    ratio: f64,
    c: f64,
    ok: bool,
}

fn halving(etas: [f64; 2], residuals: [f64; 2], gaps: [(f64, f64); 2], p: &SuiteParams) -> Halving {
    let t = &p.tolerances;
    let ratio = residuals[0] / residuals[1];
    let c = (residuals[0].abs() / (etas[0] * etas[0])).max(residuals[1].abs() / (etas[1] * etas[1]));
    let within = gaps.iter().zip(etas).all(|(&(gap, se), eta)| gap.abs() <= t.z * se + c * eta * eta);
    Halving { ratio, c, ok: within && (t.halving_ratio_lo..=t.halving_ratio_hi).contains(&ratio) }
}

fn hinge_oracle(seed: u64, p: &SuiteParams) -> Result<Outcome> {
    let etas = [1e-3, 5e-4];
    let dist = BaseDistribution::standard_gaussian(2)?;
    let f2 = dist.axis_marginal(1)?;
    let (mut ok, mut zs, mut notes) = (true, Vec::new(), Vec::new());
    for (i, theta) in [FRAC_PI_3, FRAC_PI_2].into_iter().enumerate() {
        let frame = HingeFrame::from_angle(theta)?;
        for (j, psi) in [0.6, 1.4].into_iter().enumerate() {
            let tag = 7000 + 10 * i as u64 + 3 * j as u64;
            let res = hinge_first_order_residuals(&dist, &frame, psi, &etas, p.slope_n, &stream(seed, tag))?;
            let mut gaps = [(0.0, 0.0); 2];
            for (k, &eta) in etas.iter().enumerate() {
                let quad = quad_delta_hinge(&f2, &frame, psi, eta)?;
                let mc = mc_delta_hinge(&dist, &frame, psi, eta, p.n, &stream(seed, tag + 1 + k as u64))?;
                gaps[k] = (mc.mean - quad, mc.std_error);
                zs.push((mc.mean - quad) / mc.std_error);
            }
            let h = halving(etas, [res.points[0].mean, res.points[1].mean], gaps, p);
            ok &= h.ok;
            notes.push(format!("theta {theta:.3} psi {psi}: ratio {:.2}, C {:.3}", h.ratio, h.c));
        }
    }
    Ok(Outcome::new(ok, zs, notes.join("; ")))
}

fn hinge_global(seed: u64, p: &SuiteParams) -> Result<Outcome> {
    let eta = 1e-3;
    let dist = BaseDistribution::standard_gaussian(2)?;
    let f2 = dist.axis_marginal(1)?;
    let (mut ok, mut zs, mut notes) = (true, Vec::new(), Vec::new());
    for (i, theta) in [FRAC_PI_3, FRAC_PI_2, 2.0 * PI / 3.0].into_iter().enumerate() {
        let frame = HingeFrame::from_angle(theta)?;
        let lo = 1.0 - frame.cos_theta();
        let psis: Vec<f64> = (1..=5).map(|k| lo + (2.0 - lo) * k as f64 / 5.0).collect();
        let curve = mc_delta_hinge_curve(&dist, &frame, &psis, eta, p.n, &stream(seed, 8000 + i as u64))?;
        let report = monotonicity_probe_at(&curve, p.tolerances.z)?;
        let quad: Vec<f64> = psis.iter().map(|&s| quad_delta_hinge(&f2, &frame, s, eta)).collect::<Result<_>>()?;
        let quad_ok = quad.windows(2).all(|w| w[1] < w[0]);
        ok &= report.verdict == Verdict::Decreasing && quad_ok;
        zs.extend(report.intervals.iter().filter_map(|t| t.z));
        notes.push(format!("theta {theta:.3}: {:?}, quadrature decreasing {quad_ok}", report.verdict));
    }
    let frame = HingeFrame::from_angle(FRAC_PI_3)?;
    let r = build_hinge_low_psi(&frame, 0.1, 0.4, eta, p.n, &stream(seed, 8100))?;
    let mc2 = r.measurement("mc_delta_psi2").copied().expect("reported");
    zs.push(mc2.mean / mc2.std_error);
    ok &= r.verdict;
    notes.push(format!(
        "low-psi witness {}: Delta(0.1) = {}, Delta(0.4) = {:.3e} +- {:.1e}",
        r.verdict,
        r.measurement("quad_delta_psi1").expect("reported").mean,
        mc2.mean,
        mc2.std_error
    ));
    Ok(Outcome::new(ok, zs, notes.join("; ")))
}

fn hinge_local(seed: u64, p: &SuiteParams) -> Result<Outcome> {
    let etas = [1e-3, 5e-4];
    let psi = 0.5;
    let ups = [0.45, 0.55];
    let dist = BaseDistribution::standard_gaussian(3)?;
    let (mut ok, mut zs, mut notes) = (true, Vec::new(), Vec::new());
    for (i, theta) in [FRAC_PI_3, FRAC_PI_2].into_iter().enumerate() {
        let frame = HingeFrame::from_angle(theta)?;
        let fit = stream(seed, 9000 + 2 * i as u64);
        let replicate = stream(seed, 9001 + 2 * i as u64);
        let mut residuals = [0.0; 2];
        let mut gaps = [(0.0, 0.0); 2];
        for (k, &eta) in etas.iter().enumerate() {
            let slope = |s: &RngStream| -> Result<_> {
                let est = mc_delta_hinge_local_curve(&dist, &frame, psi, &ups, eta, p.slope_n, s)?.slope(0);
                Ok((est.mean - eta * frame.cos_theta(), est.std_error))
            };
            residuals[k] = slope(&fit)?.0;
            gaps[k] = slope(&replicate)?;
            zs.push(gaps[k].0 / gaps[k].1);
        }
        let h = halving(etas, residuals, gaps, p);
        ok &= h.ok;
        notes.push(format!("theta {theta:.3}: ratio {:.2}, C {:.3}", h.ratio, h.c));
    }
    let right = HingeFrame::from_angle(FRAC_PI_2)?;
    let flat = closed_delta_hinge_local(psi, ups[0], &right, etas[0])?
        == closed_delta_hinge_local(psi, ups[1], &right, etas[0])?;
    ok &= flat;
    notes.push(format!("closed-form slope exactly 0 at pi/2: {flat}"));
    Ok(Outcome::new(ok, zs, notes.join("; ")))
}

fn rescaling_invariance(seed: u64, p: &SuiteParams) -> Result<Outcome> {
    let a = 3.0;
    let eta = 0.05;
    let dist = BaseDistribution::standard_gaussian(3)?;
    let unit = |c: [f64; 4]| -> Result<ParamVector> {
        let v = ParamVector::new(c.to_vec())?;
        v.scale(1.0 / v.norm())
    };
    let w_bar = unit([1.0, 0.5, -0.5, 0.0])?.scale(a)?;
    let w0 = unit([-0.2, 1.0, 0.3, 0.0])?.scale(a)?;
    let big = ProblemKind::hinge(eta, a)?;
    let law = ScoreLaw::Uniform { lo: 0.0, hi: 1.5 };
    let pool = build_pool(&big, &dist, &w_bar, 500, &law, &mut stream(seed, 10_000).rng())?;
    let small = ProblemKind::hinge(eta / (a * a), 1.0)?;
    let scaled = pool.rescaled(a)?;
    let policy = SchedulePolicy::new(PolicyKind::Uniform);
    let run = |problem: &ProblemKind, pool, w0: &ParamVector| {
        run_training(problem, &policy, pool, w0, p.rescaling_steps, None, &mut stream(seed, 10_001).rng())
    };
    let t_big = run(&big, &pool, &w0)?;
    let t_small = run(&small, &scaled, &w0.scale(1.0 / a)?)?;
    let same_ids = t_big.records.iter().zip(&t_small.records).all(|(x, y)| x.example == y.example);
    let gap = t_big.records.iter().zip(&t_small.records).map(|(x, y)| (x.metric - y.metric).abs()).fold(0.0, f64::max);
    let moved = t_big.final_metric() != t_big.records[0].metric;
    Ok(Outcome::new(
        same_ids && moved && t_big.records.len() == p.rescaling_steps + 1 && gap <= p.tolerances.rescaling,
        Vec::new(),
        format!("max cosine gap {gap:.2e} over {} steps", p.rescaling_steps),
    ))
}

fn curriculum_race(seed: u64, p: &SuiteParams) -> Result<Outcome> {
    let problem = ProblemKind::regression(0.01)?;
    let dist = BaseDistribution::standard_gaussian(5)?;
    let w_bar = default_w_bar(5)?;
    let w0 = ParamVector::zeros(w_bar.len())?;
    let law = ScoreLaw::HalfGaussian { sd: 1.0 };
    let early = p.race_steps / 10;
    let pairs: Vec<(f64, f64)> = (0..p.race_seeds)
        .into_par_iter()
        .map(|s| {
            let pool = build_pool(&problem, &dist, &w_bar, p.race_pool, &law, &mut stream(seed, 11_000).substream(s).rng())?;
            let run = |kind| -> Result<f64> {
                let t = run_training(
                    &problem,
                    &SchedulePolicy::new(kind),
                    &pool,
                    &w0,
                    p.race_steps,
                    None,
                    &mut stream(seed, 11_001).substream(s).rng(),
                )?;
                Ok(t.metric_at(early).expect("early step within budget"))
            };
            Ok((run(PolicyKind::CurriculumGlobal)?, run(PolicyKind::AntiCurriculum)?))
        })
        .collect::<Result<_>>()?;
    let wins = pairs.iter().filter(|(c, a)| c < a).count() as u64;
    let pval = sign_test_p(wins, p.race_seeds);
    let mean = |f: fn(&(f64, f64)) -> f64| pairs.iter().map(f).sum::<f64>() / pairs.len() as f64;
    Ok(Outcome::new(
        pval < p.tolerances.alpha,
        Vec::new(),
        format!(
            "curriculum closer at step {early} in {wins}/{} seeds (p = {pval:.2e}); mean distance {:.4} vs {:.4}",
            p.race_seeds,
            mean(|x| x.0),
            mean(|x| x.1)
        ),
    ))
}

fn hygiene(seed: u64, p: &SuiteParams) -> Result<Outcome> {
    let mut rng = stream(seed, 12_000).rng();
    let dist = BaseDistribution::standard_gaussian(3)?;
    let regression = ProblemKind::regression(0.01)?;
    let hinge = ProblemKind::hinge(0.01, 1.0)?;
    let mut worst_grad = 0.0f64;
    for _ in 0..1000 {
        let x = dist.sample_base(&mut rng);
        let w = dist.sample_base(&mut rng);
        let ex = LabeledExample::new(x.clone(), rng.random_range(-2.0..2.0))?;
        worst_grad = worst_grad.max(grad_check(&regression, &ex, &w)?);
        let w = w.scale(1.0 / w.norm())?;
        let ex = LabeledExample::classification(x, if rng.random::<bool>() { 1.0 } else { -1.0 })?;
        if (1.0 - ex.x().dot(&w)? * ex.y()).abs() > 1e-3 {
            worst_grad = worst_grad.max(grad_check(&hinge, &ex, &w)?);
        }
    }
    let grad_ok = worst_grad < p.tolerances.gradient;

    let w_bar = default_w_bar(3)?;
    let w_t = offset(&w_bar, 1.0)?;
    let psis = [0.0, 0.5, 1.0];
    let estimate = |threads: usize| -> Result<String> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| LabError::InvalidParameter(e.to_string()))?;
        let curve = pool
            .install(|| mc_delta_regression_curve(&dist, &w_bar, &w_t, &psis, 0.01, 50_000, &stream(seed, 12_001)))?;
        Ok(serde_json::to_string(&curve).expect("curves serialize"))
    };
    let deterministic = estimate(1)? == estimate(4)? && estimate(2)? == estimate(2)?;

    let (_, dir) = zenith(&w_t, &w_bar)?;
    let (mut plus, mut minus) = (Vec::new(), Vec::new());
    let mut krng = stream(seed, 12_002).rng();
    for _ in 0..20_000 {
        let draw = draw_given_psi_regression(&dist, &w_bar, 0.7, &mut krng)?;
        let u = draw.ex.x().dot(&dir)?;
        match draw.branch {
            Some(curriculum_lab::geometry::Branch::Plus) => plus.push(u),
            _ => minus.push(u),
        }
    }
    let ks = ks_two_sample(&plus, &minus);
    let cross = curriculum_lab::estimators::branch_cross_term(&dist, &w_bar, &w_t, 0.7, p.n, &stream(seed, 12_003))?;
    let cross_z = cross.mean / cross.std_error;
    let ok = grad_ok && deterministic && !ks.reject && cross_z.abs() <= p.tolerances.z;
    Ok(Outcome::new(
        ok,
        vec![cross_z],
        format!(
            "max gradient error {worst_grad:.1e}; thread-count determinism {deterministic}; branch KS D = {:.4} \
             (critical {:.4}); cross term z = {cross_z:.2}",
            ks.statistic, ks.critical
        ),
    ))
}

type CheckFn = fn(u64, &SuiteParams) -> Result<Outcome>;

const NUMBERED: [(&str, &str, CheckFn); CRITERIA as usize] = [
    ("regression_oracle", "Regression rate matches its closed form", regression_oracle),
    ("regression_global", "Regression rate decreases with the global score", global_monotonicity),
    ("regression_lambda_clause", "Step-size condition on the distance clause is necessary", lambda_clause),
    ("regression_local", "Regression rate increases with the local score (flat density)", local_monotonicity),
    ("nabla_bounds", "Density contrast lies in [-1, 1]; Gaussian spot value", nabla_bounds),
    ("local_score_witness", "Local-score preference can slow convergence near the optimum", local_score_witness),
    ("hinge_oracle", "Hinge rate matches its first-order integral", hinge_oracle),
    ("hinge_global", "Hinge rate decreases with the global score above 1 - cos(theta)", hinge_global),
    ("hinge_local", "Hinge rate slope in the local score is eta cos(theta)", hinge_local),
    ("hinge_rescaling", "Norm-A hinge training equals unit-norm training on rescaled data", rescaling_invariance),
    ("curriculum_race", "Curriculum beats anti-curriculum early in training", curriculum_race),
    ("hygiene", "Gradients, determinism and label-branch symmetry", hygiene),
];

fn finish(id: &str, criterion: Option<u8>, title: &str, outcome: Result<Outcome>) -> CheckResult {
    let (status, z_scores, detail) = match outcome {
        Ok(o) => (if o.ok { CheckStatus::Pass } else { CheckStatus::Fail }, o.z_scores, o.detail),
        Err(e) => (CheckStatus::Fail, Vec::new(), format!("error: {e}")),
    };
    let z_scores = z_scores.into_iter().filter(|z| z.is_finite()).collect();
    CheckResult { id: id.to_string(), criterion, title: title.to_string(), status, z_scores, detail }
}

/// Runs numbered criterion `k` (1-based).
pub fn run_criterion(k: u8, seed: u64, params: &SuiteParams) -> CheckResult {
    assert!((1..=CRITERIA).contains(&k), "criteria are numbered 1..={CRITERIA}");
    let (id, title, f) = NUMBERED[k as usize - 1];
    finish(id, Some(k), title, f(seed, params))
}

/// The distance clause for the configured regression problem: the rate
/// should grow with `lambda` when `eta` is below the bound. Above it the
/// violation is expected and reported as such.
pub fn configured_lambda_clause(cfg: &ExperimentConfig) -> CheckResult {
    let title = "Distance clause at the configured step size";
    let outcome = (|| -> Result<Option<(CheckStatus, String)>> {
        let ProblemKind::Regression { eta } = cfg.problem else { return Ok(None) };
        let w_bar = cfg.w_bar().map_err(|e| LabError::InvalidParameter(e.to_string()))?;
        let w_t = cfg.w_t().map_err(|e| LabError::InvalidParameter(e.to_string()))?;
        let est = moment_oracle(&cfg.distribution, &w_bar, &w_t, 0.0, cfg.verify.n, &stream(cfg.seed, 13_000))?;
        let bound = eta_bound(&est.moments)?;
        let slopes: Vec<f64> = [0.5, 1.0, 2.0].iter().map(|&l| d_delta_d_lambda(&est.moments, l, eta)).collect();
        let nonnegative = slopes.iter().all(|s| *s >= 0.0);
        let status = match (eta <= bound, nonnegative) {
            (true, true) => CheckStatus::Pass,
            (true, false) => CheckStatus::Fail,
            (false, false) => CheckStatus::ExpectedViolation,
            (false, true) => CheckStatus::Pass,
        };
        Ok(Some((status, format!("eta = {eta}, eta_bound = {bound:.4}, dDelta/dlambda at lambda 0.5/1/2 = {slopes:?}"))))
    })();
    let (status, detail) = match outcome {
        Ok(Some(x)) => x,
        Ok(None) => (CheckStatus::Pass, "not a regression problem; skipped".to_string()),
        Err(e) => (CheckStatus::Fail, format!("error: {e}")),
    };
    CheckResult {
        id: "configured_lambda_clause".into(),
        criterion: None,
        title: title.into(),
        status,
        z_scores: Vec::new(),
        detail,
    }
}

/// Every numbered criterion followed by the configuration-dependent checks.
pub fn run_suite(cfg: &ExperimentConfig) -> SuiteReport {
    let mut checks: Vec<CheckResult> = (1..=CRITERIA).map(|k| run_criterion(k, cfg.seed, &cfg.verify)).collect();
    checks.push(configured_lambda_clause(cfg));
    SuiteReport {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        passed: checks.iter().all(|c| c.status.is_ok()),
        checks,
    }
}
