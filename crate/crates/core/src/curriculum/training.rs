use rand::Rng;
use serde::{Deserialize, Serialize};

use super::policy::{SchedulePolicy, Scheduler};
use super::pool::Pool;
use crate::error::{LabError, Result};
use crate::estimators::{regression_decrement, Curve, RateEstimate};
use crate::losses::{check_norm, loss, ProblemKind};
use crate::stats::MultiStats;
use crate::vecspace::{LabeledExample, ParamVector};

/// Number of global-score strata used by [`decile_decrements`].
pub const DECILES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    /// The example used to reach this step; absent for the initial record.
    pub example: Option<usize>,
    /// `||w_t - w_bar||` for regression, `cos(w_t, w_bar)` for hinge.
    pub metric: f64,
    /// Mean loss over the pool, when computed at this step.
    pub pool_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// One record per step, preceded by the initial state.
    pub records: Vec<StepRecord>,
}

impl Trajectory {
    pub fn metric_at(&self, step: usize) -> Option<f64> {
        self.records.get(step).map(|r| r.metric)
    }

    pub fn final_metric(&self) -> f64 {
        self.records.last().expect("trajectories hold the initial record").metric
    }
}

/// The convergence functional of the problem.
pub fn metric(problem: &ProblemKind, w: &ParamVector, w_bar: &ParamVector) -> Result<f64> {
    if problem.is_hinge() {
        w.cosine(w_bar)
    } else {
        w.distance(w_bar)
    }
}

fn pool_loss(problem: &ProblemKind, pool: &Pool, w: &ParamVector) -> Result<f64> {
    let total = pool.examples.iter().map(|p| loss(problem, &p.ex, w)).sum::<Result<f64>>()?;
    Ok(total / pool.len() as f64)
}

/// Runs `steps` single-example SGD updates from `w0`, choosing examples by
/// `policy` with the problem's step size. The pool loss is recorded every
/// `loss_every` steps when given.
pub fn run_training<R: Rng + ?Sized>(
    problem: &ProblemKind,
    policy: &SchedulePolicy,
    pool: &Pool,
    w0: &ParamVector,
    steps: usize,
    loss_every: Option<usize>,
    rng: &mut R,
) -> Result<Trajectory> {
    problem.validate()?;
    if w0.len() != pool.w_bar.len() {
        return Err(LabError::Dimension { expected: pool.w_bar.len(), found: w0.len() });
    }
    if let ProblemKind::HingeClassification { norm, .. } = *problem {
        check_norm(w0, norm)?;
        check_norm(&pool.w_bar, norm)?;
    }
    if loss_every == Some(0) {
        return Err(LabError::InvalidParameter("loss interval must be positive".into()));
    }
    let mut scheduler = Scheduler::new(*policy, pool, steps)?;
    let record = |step: usize, example: Option<usize>, w: &ParamVector| -> Result<StepRecord> {
        let m = metric(problem, w, &pool.w_bar)?;
        if !m.is_finite() {
            return Err(LabError::NonFinite(format!("metric at step {step}")));
        }
        let pool_loss = match loss_every {
            Some(k) if step.is_multiple_of(k) => Some(pool_loss(problem, pool, w)?),
            _ => None,
        };
        Ok(StepRecord { step, example, metric: m, pool_loss })
    };
    let mut w = w0.clone();
    let mut records = Vec::with_capacity(steps + 1);
    records.push(record(0, None, &w)?);
    for t in 0..steps {
        let id = scheduler.next_example(problem, pool, &w, t, rng)?;
        w = problem.step(&pool.examples[id].ex, &w)?;
        records.push(record(t + 1, Some(id), &w)?);
    }
    Ok(Trajectory { records })
}

/// One-step change of the convergence functional: the squared-distance
/// decrease for regression, the cosine increase for hinge.
fn step_gain(problem: &ProblemKind, ex: &LabeledExample, w: &ParamVector, w_bar: &ParamVector) -> Result<f64> {
    match *problem {
        ProblemKind::Regression { eta } => regression_decrement(ex, w, w_bar, eta),
        ProblemKind::HingeClassification { .. } => Ok(problem.step(ex, w)?.cosine(w_bar)? - w.cosine(w_bar)?),
    }
}

/// Mean one-step gain from `w_t` over the pool, stratified into global-score
/// deciles. Regression gains average both labels of each data vector, which
/// removes the label noise without changing the expectation.
pub fn decile_decrements(problem: &ProblemKind, pool: &Pool, w_t: &ParamVector) -> Result<Curve> {
    problem.validate()?;
    if pool.len() < 2 * DECILES {
        return Err(LabError::InvalidParameter(format!("need at least {} pool examples", 2 * DECILES)));
    }
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by(|&a, &b| pool.examples[a].psi.total_cmp(&pool.examples[b].psi).then(a.cmp(&b)));
    let mut points = Vec::with_capacity(DECILES);
    for k in 0..DECILES {
        let chunk = &order[k * pool.len() / DECILES..(k + 1) * pool.len() / DECILES];
        let mut stats = MultiStats::new(1);
        let mut psi_sum = 0.0;
        for &i in chunk {
            let p = &pool.examples[i];
            psi_sum += p.psi;
            let gain = step_gain(problem, &p.ex, w_t, &pool.w_bar)?;
            let gain = if problem.is_hinge() {
                gain
            } else {
                let mirror = LabeledExample::new(p.ex.x().clone(), 2.0 * p.ex.x().dot(&pool.w_bar)? - p.ex.y())?;
                0.5 * (gain + step_gain(problem, &mirror, w_t, &pool.w_bar)?)
            };
            stats.push(&[gain]);
        }
        points.push((psi_sum / chunk.len() as f64, RateEstimate::from_stats(&stats, 0)));
    }
    Ok(Curve::from_points(points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curriculum::policy::{Pacing, PolicyKind};
    use crate::curriculum::pool::{build_pool, ScoreLaw};
    use crate::estimators::{monotonicity_probe, Verdict};
    use crate::stats::sign_test_p;
    use crate::vecspace::{BaseDistribution, RngStream};

    fn regression_pool(law: ScoreLaw, size: usize, seed: u64) -> (ProblemKind, Pool) {
        let problem = ProblemKind::regression(0.01).unwrap();
        let dist = BaseDistribution::standard_gaussian(3).unwrap();
        let w_bar = ParamVector::new(vec![1.0, -1.0, 0.5, 0.2]).unwrap();
        let pool = build_pool(&problem, &dist, &w_bar, size, &law, &mut RngStream::new(seed, 0).rng()).unwrap();
        (problem, pool)
    }

    #[test]
    fn empty_run_and_determinism() {
        let (problem, pool) = regression_pool(ScoreLaw::HalfGaussian { sd: 1.0 }, 100, 1);
        let w0 = ParamVector::zeros(4).unwrap();
        let policy = SchedulePolicy::new(PolicyKind::Combined);
        let t = run_training(&problem, &policy, &pool, &w0, 0, None, &mut RngStream::new(1, 1).rng()).unwrap();
        assert_eq!(t.records.len(), 1);
        assert_eq!(t.final_metric(), w0.distance(&pool.w_bar).unwrap());
        let run = || run_training(&problem, &policy, &pool, &w0, 300, Some(50), &mut RngStream::new(7, 1).rng());
        let (a, b) = (run().unwrap(), run().unwrap());
        assert_eq!(a, b);
        assert_eq!(a.records.len(), 301);
        assert!(a.records[50].pool_loss.is_some() && a.records[51].pool_loss.is_none());
    }

    #[test]
    fn noiseless_training_converges() {
        let (problem, pool) = regression_pool(ScoreLaw::Zero, 200, 2);
        let w0 = ParamVector::zeros(4).unwrap();
        let policy = SchedulePolicy::new(PolicyKind::Uniform);
        let mut wins = 0;
        for seed in 0..100 {
            let t = run_training(&problem, &policy, &pool, &w0, 200, None, &mut RngStream::new(seed, 3).rng())
                .unwrap();
            wins += u64::from(t.final_metric() < t.metric_at(0).unwrap());
        }
        assert!(sign_test_p(wins, 100) < 0.01);
    }

    #[test]
    fn hinge_training_stays_on_sphere() {
        let problem = ProblemKind::hinge(0.05, 1.0).unwrap();
        let dist = BaseDistribution::standard_gaussian(2).unwrap();
        let w_bar = ParamVector::new(vec![0.6, 0.8, 0.0]).unwrap();
        let law = ScoreLaw::Uniform { lo: 0.0, hi: 1.0 };
        let pool = build_pool(&problem, &dist, &w_bar, 300, &law, &mut RngStream::new(4, 0).rng()).unwrap();
        let w0 = ParamVector::new(vec![0.0, -1.0, 0.0]).unwrap();
        let policy = SchedulePolicy::new(PolicyKind::SelfPacedLocal).with_refresh(1);
        let t = run_training(&problem, &policy, &pool, &w0, 500, Some(100), &mut RngStream::new(4, 1).rng()).unwrap();
        assert!(t.final_metric() > t.metric_at(0).unwrap());
        let unnormalized = ParamVector::new(vec![0.0, -2.0, 0.0]).unwrap();
        assert!(run_training(&problem, &policy, &pool, &unnormalized, 5, None, &mut RngStream::new(4, 1).rng())
            .is_err());
    }

    #[test]
    fn deciles_decrease_near_the_optimum() {
        let (problem, pool) = regression_pool(ScoreLaw::Uniform { lo: 0.0, hi: 3.0 }, 5000, 5);
        let w_t = pool.w_bar.add(&ParamVector::new(vec![0.01, 0.0, 0.0, 0.0]).unwrap()).unwrap();
        let curve = decile_decrements(&problem, &pool, &w_t).unwrap();
        assert_eq!(monotonicity_probe(&curve).unwrap().verdict, Verdict::Decreasing);
        let far = ParamVector::zeros(4).unwrap();
        let verdict = monotonicity_probe(&decile_decrements(&problem, &pool, &far).unwrap()).unwrap().verdict;
        assert!(matches!(verdict, Verdict::Decreasing | Verdict::Inconclusive));
    }

    #[test]
    fn full_pacing_curriculum_is_uniform() {
        let (problem, pool) = regression_pool(ScoreLaw::Uniform { lo: 0.0, hi: 2.0 }, 7, 6);
        let w = ParamVector::zeros(4).unwrap();
        let full = SchedulePolicy::new(PolicyKind::CurriculumGlobal).with_pacing(Pacing::Full);
        let mut s = Scheduler::new(full, &pool, 10).unwrap();
        let mut counts = [0u32; 7];
        let mut rng = RngStream::new(9, 0).rng();
        for t in 0..70_000 {
            counts[s.next_example(&problem, &pool, &w, t % 10, &mut rng).unwrap()] += 1;
        }
        assert!(counts.iter().all(|&c| (c as f64 - 10_000.0).abs() < 500.0), "{counts:?}");
    }
}
