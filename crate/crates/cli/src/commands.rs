//! The four subcommands. Each returns its exit status and writes its outputs
//! under the configured directory; every report carries the config hash and
//! seed.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use curriculum_lab::counterexamples::{build_hinge_low_psi, build_local_score_witness, CounterexampleReport};
use curriculum_lab::curriculum::{build_pool, run_training, PolicyKind, SchedulePolicy, Trajectory};
use curriculum_lab::estimators::{
    closed_delta_hinge_local, closed_delta_regression, first_order_delta_regression_local, mc_delta_hinge_curve,
    mc_delta_hinge_local_curve, mc_delta_regression_curve, mc_delta_regression_local_curve, moment_oracle, nabla,
    quad_delta_hinge, Curve,
};
use curriculum_lab::geometry::zenith;
use curriculum_lab::losses::ProblemKind;
use curriculum_lab::stats::sign_test_p;
use curriculum_lab::vecspace::{ParamVector, RngStream};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{CounterexampleMode, ExperimentConfig, Format};
use crate::error::{CliError, EXIT_FAILURE, EXIT_PASS};
use crate::suite::{run_suite, SuiteReport};

const SWEEP_GLOBAL_TAG: u64 = 20_000;
const SWEEP_LOCAL_TAG: u64 = 20_001;
const SWEEP_MOMENT_TAG: u64 = 20_002;
const RACE_POOL_TAG: u64 = 21_000;
const RACE_RUN_TAG: u64 = 21_001;
const COUNTEREXAMPLE_TAG: u64 = 22_000;

fn finite(what: &str, x: f64) -> Result<f64, CliError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(CliError::Failure(format!("{what} is not finite ({x}); nothing written")))
    }
}

fn output_path(cfg: &ExperimentConfig, name: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(&cfg.output.dir)?;
    Ok(cfg.output.dir.join(name))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Rows written by the sweep or race, with their provenance when written as JSON.
#[derive(Serialize)]
struct Table<'a, T> {
    config_hash: &'a str,
    seed: u64,
    rows: &'a [T],
}

fn write_rows<T: Serialize>(cfg: &ExperimentConfig, stem: &str, rows: &[T]) -> Result<PathBuf, CliError> {
    match cfg.output.format {
        Format::Csv => {
            let path = output_path(cfg, &format!("{stem}.csv"))?;
            write_csv(&path, rows)?;
            Ok(path)
        }
        Format::Json => {
            let path = output_path(cfg, &format!("{stem}.json"))?;
            write_json(&path, &Table { config_hash: &cfg.hash(), seed: cfg.seed, rows })?;
            Ok(path)
        }
    }
}

/// Runs the verification suite, prints one line per check and writes
/// `verify.json`.
pub fn cmd_verify(cfg: &ExperimentConfig) -> Result<i32, CliError> {
    let report: SuiteReport = run_suite(cfg);
    let mut out = std::io::stdout().lock();
    writeln!(out, "config {} seed {}", report.config_hash, report.seed)?;
    for c in &report.checks {
        let label = c.criterion.map_or_else(|| "  -".to_string(), |k| format!("{k:>3}"));
        let worst = c.z_scores.iter().map(|z| z.abs()).fold(None, |m: Option<f64>, z| Some(m.map_or(z, |m| m.max(z))));
        let z = worst.map_or_else(|| "      -".to_string(), |z| format!("{z:>7.2}"));
        writeln!(out, "{label} {:<18} max|z| {z}  {}", c.status.label(), c.title)?;
        writeln!(out, "      {}", c.detail)?;
    }
    let path = output_path(cfg, "verify.json")?;
    write_json(&path, &report)?;
    writeln!(out, "{} -> {}", if report.passed { "PASS" } else { "FAIL" }, path.display())?;
    Ok(if report.passed { EXIT_PASS } else { EXIT_FAILURE })
}

/// One row of a rate sweep. `upsilon` is empty on global-score rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub problem: String,
    pub psi: f64,
    pub upsilon: Option<f64>,
    pub lambda_or_theta: f64,
    pub eta: f64,
    pub n: usize,
    pub delta_mc: f64,
    pub delta_se: f64,
    pub delta_closed: f64,
    pub method: String,
}

impl SweepRow {
    fn checked(self) -> Result<Self, CliError> {
        finite("delta_mc", self.delta_mc)?;
        finite("delta_se", self.delta_se)?;
        finite("delta_closed", self.delta_closed)?;
        Ok(self)
    }
}

fn rows_from_curve(
    curve: &Curve,
    closed: &[f64],
    base: impl Fn(f64) -> SweepRow,
) -> Result<Vec<SweepRow>, CliError> {
    curve
        .scores
        .iter()
        .zip(&curve.points)
        .zip(closed)
        .map(|((&s, mc), &c)| {
            let mut row = base(s);
            row.delta_mc = mc.mean;
            row.delta_se = mc.std_error;
            row.delta_closed = c;
            row.checked()
        })
        .collect()
}

/// Monte Carlo rates next to their closed forms over the configured grids.
/// Global rows come first, then one local row per `(psi, upsilon)` pair.
pub fn sweep_rows(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>, CliError> {
    let eta = cfg.problem.eta();
    let n = cfg.n;
    let psis = &cfg.grid.psi;
    let ups = &cfg.grid.upsilon;
    let dist = &cfg.distribution;
    let mut rows = Vec::new();
    match cfg.problem {
        ProblemKind::Regression { .. } => {
            let w_bar = cfg.w_bar()?;
            let w_t = cfg.w_t()?;
            let (lambda, dir) = zenith(&w_t, &w_bar)?;
            let row = |psi: f64, upsilon: Option<f64>, method: &str| SweepRow {
                problem: "regression".into(),
                psi,
                upsilon,
                lambda_or_theta: lambda,
                eta,
                n,
                delta_mc: 0.0,
                delta_se: 0.0,
                delta_closed: 0.0,
                method: method.into(),
            };
            let est = moment_oracle(dist, &w_bar, &w_t, 0.0, n, &RngStream::new(cfg.seed, SWEEP_MOMENT_TAG))?;
            let curve =
                mc_delta_regression_curve(dist, &w_bar, &w_t, psis, eta, n, &RngStream::new(cfg.seed, SWEEP_GLOBAL_TAG))?;
            let closed: Vec<f64> = psis.iter().map(|&p| closed_delta_regression(&est.moments, p, lambda, eta)).collect();
            rows.extend(rows_from_curve(&curve, &closed, |p| row(p, None, "monte_carlo+closed_form"))?);
            if !ups.is_empty() {
                let marginal = dist.projection(&dir)?;
                let local = RngStream::new(cfg.seed, SWEEP_LOCAL_TAG);
                for (i, &psi) in psis.iter().enumerate() {
                    let curve = mc_delta_regression_local_curve(
                        dist,
                        &w_bar,
                        &w_t,
                        psi,
                        ups,
                        eta,
                        n,
                        &local.substream(i as u64),
                    )?;
                    let closed = ups
                        .iter()
                        .map(|&u| {
                            let nb = nabla(|x| marginal.pdf(x), psi, u, lambda)?;
                            first_order_delta_regression_local(psi, u, eta, nb)
                        })
                        .collect::<curriculum_lab::Result<Vec<f64>>>()?;
                    rows.extend(rows_from_curve(&curve, &closed, |u| row(psi, Some(u), "monte_carlo+first_order"))?);
                }
            }
        }
        ProblemKind::HingeClassification { norm, .. } => {
            if norm != 1.0 {
                return Err(CliError::Usage(format!(
                    "hinge sweeps use unit-norm hypotheses; rescale the data by {norm} and the step size by 1/{} instead",
                    norm * norm
                )));
            }
            let frame = cfg.frame()?;
            let theta = cfg.geometry.theta;
            let row = |psi: f64, upsilon: Option<f64>, method: &str| SweepRow {
                problem: "hinge".into(),
                psi,
                upsilon,
                lambda_or_theta: theta,
                eta,
                n,
                delta_mc: 0.0,
                delta_se: 0.0,
                delta_closed: 0.0,
                method: method.into(),
            };
            let f2 = dist.axis_marginal(1)?;
            let curve = mc_delta_hinge_curve(dist, &frame, psis, eta, n, &RngStream::new(cfg.seed, SWEEP_GLOBAL_TAG))?;
            let quad = psis.iter().map(|&p| quad_delta_hinge(&f2, &frame, p, eta)).collect::<curriculum_lab::Result<Vec<f64>>>()?;
            rows.extend(rows_from_curve(&curve, &quad, |p| row(p, None, "monte_carlo+quadrature"))?);
            let local = RngStream::new(cfg.seed, SWEEP_LOCAL_TAG);
            for (i, &psi) in psis.iter().enumerate().filter(|_| !ups.is_empty()) {
                let curve = mc_delta_hinge_local_curve(dist, &frame, psi, ups, eta, n, &local.substream(i as u64))?;
                let closed = ups
                    .iter()
                    .map(|&u| closed_delta_hinge_local(psi, u, &frame, eta))
                    .collect::<curriculum_lab::Result<Vec<f64>>>()?;
                rows.extend(rows_from_curve(&curve, &closed, |u| row(psi, Some(u), "monte_carlo+closed_form"))?);
            }
        }
    }
    Ok(rows)
}

pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<i32, CliError> {
    let rows = sweep_rows(cfg)?;
    let path = write_rows(cfg, "sweep", &rows)?;
    println!("{} rows -> {}", rows.len(), path.display());
    Ok(EXIT_PASS)
}

/// One recorded training step of one policy on one seed's pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub policy: PolicyKind,
    pub seed: u64,
    pub step: usize,
    pub example: Option<usize>,
    pub metric: f64,
    pub pool_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub policy: PolicyKind,
    pub mean_early_metric: f64,
    pub mean_final_metric: f64,
}

/// Paired sign test of `first` against `second` at the early step, over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub first: PolicyKind,
    pub second: PolicyKind,
    /// Seeds on which `first` is strictly closer to the optimum.
    pub wins: u64,
    pub losses: u64,
    pub ties: u64,
    /// One-sided sign-test p-value for `first` winning, over the untied seeds.
    pub p_value: f64,
    /// `first` wins a majority of untied seeds with `p_value < alpha`.
    pub early_advantage: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaceSummary {
    pub config_hash: String,
    pub seed: u64,
    pub problem: ProblemKind,
    pub seeds: u64,
    pub steps: usize,
    pub early_step: usize,
    /// Cosine for hinge problems (larger is closer), distance for regression.
    pub metric: String,
    pub alpha: f64,
    pub policies: Vec<PolicySummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub comparisons: Vec<Comparison>,
}

fn race_endpoints(cfg: &ExperimentConfig) -> Result<(ParamVector, ParamVector), CliError> {
    match cfg.problem {
        ProblemKind::Regression { .. } => Ok((cfg.w_bar()?, cfg.w_t()?)),
        ProblemKind::HingeClassification { norm, .. } => {
            let frame = cfg.frame()?;
            let d = cfg.distribution.dim();
            Ok((frame.optimum(d)?.scale(norm)?, frame.current(d)?.scale(norm)?))
        }
    }
}

/// Runs every configured policy on every seed's pool. Seed `s` shares one
/// pool and one scheduler stream across policies.
pub fn race(cfg: &ExperimentConfig) -> Result<(Vec<TrajectoryRow>, RaceSummary), CliError> {
    let r = &cfg.race;
    let (w_bar, w0) = race_endpoints(cfg)?;
    let runs: Vec<Vec<Trajectory>> = (0..r.seeds)
        .into_par_iter()
        .map(|s| {
            let mut pool_rng = RngStream::new(cfg.seed, RACE_POOL_TAG).substream(s).rng();
            let pool = build_pool(&cfg.problem, &cfg.distribution, &w_bar, r.pool_size, &r.score_law, &mut pool_rng)?;
            r.policies
                .iter()
                .map(|&kind| {
                    let policy = SchedulePolicy::new(kind).with_pacing(r.pacing).with_refresh(r.refresh);
                    let mut rng = RngStream::new(cfg.seed, RACE_RUN_TAG).substream(s).rng();
                    run_training(&cfg.problem, &policy, &pool, &w0, r.steps, r.loss_every, &mut rng)
                })
                .collect()
        })
        .collect::<curriculum_lab::Result<_>>()?;

    let mut rows = Vec::new();
    for (s, per_policy) in runs.iter().enumerate() {
        for (&policy, t) in r.policies.iter().zip(per_policy) {
            for rec in t.records.iter().filter(|x| x.step % r.record_every == 0 || x.step == r.steps) {
                rows.push(TrajectoryRow {
                    policy,
                    seed: s as u64,
                    step: rec.step,
                    example: rec.example,
                    metric: finite("metric", rec.metric)?,
                    pool_loss: rec.pool_loss.map(|l| finite("pool loss", l)).transpose()?,
                });
            }
        }
    }

    let early_step = ((r.early_fraction * r.steps as f64).ceil() as usize).clamp(1, r.steps);
    let early = |i: usize| -> Vec<f64> {
        runs.iter().map(|p| p[i].metric_at(early_step).expect("early step within budget")).collect()
    };
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let policies = r
        .policies
        .iter()
        .enumerate()
        .map(|(i, &policy)| {
            let finals: Vec<f64> = runs.iter().map(|p| p[i].final_metric()).collect();
            Ok(PolicySummary {
                policy,
                mean_early_metric: finite("mean early metric", mean(&early(i)))?,
                mean_final_metric: finite("mean final metric", mean(&finals))?,
            })
        })
        .collect::<Result<_, CliError>>()?;
    let closer = |a: f64, b: f64| if cfg.problem.is_hinge() { a > b } else { a < b };
    let alpha = cfg.verify.tolerances.alpha;
    let mut comparisons = Vec::new();
    for i in 0..r.policies.len() {
        for j in i + 1..r.policies.len() {
            let (a, b) = (early(i), early(j));
            let wins = a.iter().zip(&b).filter(|(x, y)| closer(**x, **y)).count() as u64;
            let losses = a.iter().zip(&b).filter(|(x, y)| closer(**y, **x)).count() as u64;
            let trials = wins + losses;
            let p_value = if trials == 0 { 1.0 } else { sign_test_p(wins, trials) };
            comparisons.push(Comparison {
                first: r.policies[i],
                second: r.policies[j],
                wins,
                losses,
                ties: r.seeds - trials,
                p_value,
                early_advantage: wins > losses && p_value < alpha,
            });
        }
    }
    let summary = RaceSummary {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        problem: cfg.problem,
        seeds: r.seeds,
        steps: r.steps,
        early_step,
        metric: if cfg.problem.is_hinge() { "cosine" } else { "distance" }.into(),
        alpha,
        policies,
        comparisons,
    };
    Ok((rows, summary))
}

pub fn cmd_race(cfg: &ExperimentConfig) -> Result<i32, CliError> {
    let (rows, summary) = race(cfg)?;
    let path = write_rows(cfg, "trajectories", &rows)?;
    let summary_path = output_path(cfg, "race_summary.json")?;
    write_json(&summary_path, &summary)?;
    for p in &summary.policies {
        println!(
            "{:<18} step {:>6}: {:.6}  final: {:.6}",
            format!("{:?}", p.policy),
            summary.early_step,
            p.mean_early_metric,
            p.mean_final_metric
        );
    }
    for c in &summary.comparisons {
        println!(
            "{:?} vs {:?}: {}-{}-{} (p = {:.3e}){}",
            c.first,
            c.second,
            c.wins,
            c.losses,
            c.ties,
            c.p_value,
            if c.early_advantage { ", early advantage" } else { "" }
        );
    }
    println!("{} rows -> {}; summary -> {}", rows.len(), path.display(), summary_path.display());
    Ok(EXIT_PASS)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleOutput {
    pub config_hash: String,
    pub seed: u64,
    #[serde(flatten)]
    pub report: CounterexampleReport,
}

pub fn counterexample(cfg: &ExperimentConfig) -> Result<CounterexampleOutput, CliError> {
    let c = &cfg.counterexample;
    let stream = RngStream::new(cfg.seed, COUNTEREXAMPLE_TAG);
    let eta = cfg.problem.eta();
    let report = match c.mode {
        CounterexampleMode::LocalScore => {
            if cfg.problem.is_hinge() {
                return Err(CliError::Usage("the local-score construction needs a regression problem".into()));
            }
            build_local_score_witness(&cfg.distribution, &cfg.w_bar()?, c.upsilon, eta, cfg.n, &stream)?
        }
        CounterexampleMode::HingeLowPsi => build_hinge_low_psi(&cfg.frame()?, c.psi1, c.psi2, eta, cfg.n, &stream)?,
    };
    for m in &report.measurements {
        finite(&m.name, m.estimate.mean)?;
        finite(&m.name, m.estimate.std_error)?;
    }
    Ok(CounterexampleOutput { config_hash: cfg.hash(), seed: cfg.seed, report })
}

pub fn cmd_counterexample(cfg: &ExperimentConfig) -> Result<i32, CliError> {
    let out = counterexample(cfg)?;
    let path = output_path(cfg, "counterexample.json")?;
    write_json(&path, &out)?;
    for m in &out.report.measurements {
        println!("{:<16} {:.6e} +- {:.1e}", m.name, m.estimate.mean, m.estimate.std_error);
    }
    println!("verdict {} -> {}", out.report.verdict, path.display());
    Ok(if out.report.verdict { EXIT_PASS } else { EXIT_FAILURE })
}
