//! Finite-pool SGD under example-ordering policies: uniform sampling,
//! curriculum and anti-curriculum by global score, self-paced learning and
//! hard-example mining by local score, and a combination of both scores.

mod policy;
mod pool;
mod training;

pub use policy::{fraction_count, Pacing, PolicyKind, SchedulePolicy, Scheduler};
pub use pool::{build_pool, Pool, PoolExample, ScoreLaw};
pub use training::{decile_decrements, metric, run_training, StepRecord, Trajectory, DECILES};
