use rand::Rng;
use serde::{Deserialize, Serialize};

use super::pool::Pool;
use crate::difficulty::local_score;
use crate::error::{LabError, Result};
use crate::losses::ProblemKind;
use crate::vecspace::ParamVector;

/// Guards `ceil(p N)` against rounding just above an integer.
const FRACTION_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Uniform,
    /// Smallest global scores first.
    CurriculumGlobal,
    /// Largest global scores first.
    AntiCurriculum,
    /// Smallest local scores.
    SelfPacedLocal,
    /// Largest local scores.
    HardMiningLocal,
    /// Largest local scores among the examples with the smallest global scores.
    Combined,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 6] = [
        PolicyKind::Uniform,
        PolicyKind::CurriculumGlobal,
        PolicyKind::AntiCurriculum,
        PolicyKind::SelfPacedLocal,
        PolicyKind::HardMiningLocal,
        PolicyKind::Combined,
    ];

    pub fn uses_local_scores(self) -> bool {
        matches!(self, PolicyKind::SelfPacedLocal | PolicyKind::HardMiningLocal | PolicyKind::Combined)
    }
}

/// Fraction `p(t)` of the pool a policy may draw from at step `t` of `T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Pacing {
    /// `p(t) = 1`.
    Full,
    /// `p(t) = p0 + (1 - p0) t / T`.
    Linear { p0: f64 },
}

impl Default for Pacing {
    fn default() -> Self {
        Pacing::Linear { p0: 0.1 }
    }
}

impl Pacing {
    pub fn validate(&self) -> Result<()> {
        if let Pacing::Linear { p0 } = *self {
            if !(p0 > 0.0 && p0 <= 1.0) {
                return Err(LabError::InvalidParameter(format!("initial pacing fraction must be in (0, 1], got {p0}")));
            }
        }
        Ok(())
    }

    pub fn fraction(&self, t: usize, total: usize) -> f64 {
        match *self {
            Pacing::Full => 1.0,
            Pacing::Linear { p0 } if total > 0 => (p0 + (1.0 - p0) * t as f64 / total as f64).min(1.0),
            Pacing::Linear { p0 } => p0,
        }
    }
}

/// Number of pool members a fraction `p` of `n` admits, at least one.
pub fn fraction_count(p: f64, n: usize) -> usize {
    ((p * n as f64 - FRACTION_SLACK).ceil().max(1.0) as usize).min(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchedulePolicy {
    pub kind: PolicyKind,
    #[serde(default)]
    pub pacing: Pacing,
    /// Steps between recomputations of the local scores.
    #[serde(default = "default_refresh")]
    pub refresh: usize,
}

fn default_refresh() -> usize {
    10
}

impl SchedulePolicy {
    pub fn new(kind: PolicyKind) -> Self {
        Self { kind, pacing: Pacing::default(), refresh: default_refresh() }
    }

    pub fn with_pacing(self, pacing: Pacing) -> Self {
        Self { pacing, ..self }
    }

    pub fn with_refresh(self, refresh: usize) -> Self {
        Self { refresh, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        self.pacing.validate()?;
        if self.refresh == 0 {
            return Err(LabError::InvalidParameter("local-score refresh period must be positive".into()));
        }
        Ok(())
    }
}

/// Per-run selection state: the global order is fixed, the local order is
/// rebuilt every `refresh` steps.
#[derive(Debug, Clone)]
pub struct Scheduler {
    policy: SchedulePolicy,
    total_steps: usize,
    ascending_psi: Vec<usize>,
    descending_psi: Vec<usize>,
    local: Vec<f64>,
    ascending_local: Vec<usize>,
    descending_local: Vec<usize>,
    refreshed_at: Option<usize>,
}

/// Sorts indices by `(key, id)`, or by `(-key, id)` when `descending`.
fn order_by(keys: &[f64], descending: bool) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    idx.sort_by(|&a, &b| {
        let ord = keys[a].total_cmp(&keys[b]);
        (if descending { ord.reverse() } else { ord }).then(a.cmp(&b))
    });
    idx
}

impl Scheduler {
    /// Pool indices are example ids; `build_pool` numbers them `0..N`.
    pub fn new(policy: SchedulePolicy, pool: &Pool, total_steps: usize) -> Result<Self> {
        policy.validate()?;
        if pool.is_empty() {
            return Err(LabError::InvalidParameter("pool is empty".into()));
        }
        if pool.examples.iter().enumerate().any(|(i, p)| p.id != i) {
            return Err(LabError::ContractViolation("pool ids must be 0..N in order".into()));
        }
        let psi: Vec<f64> = pool.examples.iter().map(|p| p.psi).collect();
        Ok(Self {
            policy,
            total_steps,
            ascending_psi: order_by(&psi, false),
            descending_psi: order_by(&psi, true),
            local: Vec::new(),
            ascending_local: Vec::new(),
            descending_local: Vec::new(),
            refreshed_at: None,
        })
    }

    fn refresh_local(&mut self, problem: &ProblemKind, pool: &Pool, w_t: &ParamVector, t: usize) -> Result<()> {
        let due = match self.refreshed_at {
            None => true,
            Some(last) => t >= last + self.policy.refresh,
        };
        if due {
            self.local = pool.examples.iter().map(|p| local_score(problem, &p.ex, w_t)).collect::<Result<_>>()?;
            self.ascending_local = order_by(&self.local, false);
            self.descending_local = order_by(&self.local, true);
            self.refreshed_at = Some(t);
        }
        Ok(())
    }

    /// Id of the example to train on at step `t`.
    ///
    /// Fraction policies draw uniformly from the first `ceil(p(t) N)` members
    /// of their order, with ties broken by id. `Combined` keeps every example
    /// whose global score is within the curriculum fraction (ties included),
    /// then draws uniformly from the `ceil(p(t) M)` of those `M` with the
    /// largest local scores.
    pub fn next_example<R: Rng + ?Sized>(
        &mut self,
        problem: &ProblemKind,
        pool: &Pool,
        w_t: &ParamVector,
        t: usize,
        rng: &mut R,
    ) -> Result<usize> {
        let n = pool.len();
        let p = self.policy.pacing.fraction(t, self.total_steps);
        let k = fraction_count(p, n);
        let pick = |order: &[usize], k: usize, rng: &mut R| order[rng.random_range(0..k)];
        if self.policy.kind.uses_local_scores() {
            self.refresh_local(problem, pool, w_t, t)?;
        }
        Ok(match self.policy.kind {
            PolicyKind::Uniform => rng.random_range(0..n),
            PolicyKind::CurriculumGlobal => pick(&self.ascending_psi, k, rng),
            PolicyKind::AntiCurriculum => pick(&self.descending_psi, k, rng),
            PolicyKind::SelfPacedLocal => pick(&self.ascending_local, k, rng),
            PolicyKind::HardMiningLocal => pick(&self.descending_local, k, rng),
            PolicyKind::Combined => {
                let cutoff = pool.examples[self.ascending_psi[k - 1]].psi;
                let order: Vec<usize> =
                    self.descending_local.iter().copied().filter(|&i| pool.examples[i].psi <= cutoff).collect();
                pick(&order, fraction_count(p, order.len()), rng)
            }
        })
    }
}
