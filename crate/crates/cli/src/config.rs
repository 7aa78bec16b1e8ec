//! Experiment configuration: one TOML file, every field defaulted, with
//! command-line overrides applied on top.

use std::f64::consts::FRAC_PI_3;
use std::path::{Path, PathBuf};

use curriculum_lab::curriculum::{Pacing, PolicyKind, ScoreLaw};
use curriculum_lab::geometry::HingeFrame;
use curriculum_lab::losses::ProblemKind;
use curriculum_lab::vecspace::{BaseDistribution, ParamVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Thresholds used by the verification suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Standard errors for every Monte Carlo comparison.
    pub z: f64,
    /// Accepted range of the residual ratio under step-size halving.
    pub halving_ratio_lo: f64,
    pub halving_ratio_hi: f64,
    /// Significance level of the sign and two-sample tests.
    pub alpha: f64,
    /// Absolute error allowed on the Gaussian density-contrast spot value.
    pub nabla_spot: f64,
    /// Largest cosine gap between rescaled hinge trajectories.
    pub rescaling: f64,
    /// Largest relative gradient-check error.
    pub gradient: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            z: 3.0,
            halving_ratio_lo: 2.5,
            halving_ratio_hi: 6.0,
            alpha: 0.01,
            nabla_spot: 1e-4,
            rescaling: 1e-10,
            gradient: 1e-6,
        }
    }
}

/// Sample sizes of the verification suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteParams {
    /// Draws per Monte Carlo estimate.
    pub n: usize,
    /// Draws per finite-difference slope or residual estimate.
    pub slope_n: usize,
    /// Random tuples for the density-contrast bound.
    pub nabla_tuples: usize,
    pub race_pool: usize,
    pub race_steps: usize,
    pub race_seeds: u64,
    pub rescaling_steps: usize,
    pub tolerances: Tolerances,
}

impl Default for SuiteParams {
    fn default() -> Self {
        Self {
            n: 100_000,
            slope_n: 1_000_000,
            nabla_tuples: 10_000,
            race_pool: 10_000,
            race_steps: 10_000,
            race_seeds: 100,
            rescaling_steps: 1000,
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Geometry {
    /// Regression: `||w_t - w_bar||`, with `w_t = w_bar - lambda e_axis`.
    pub lambda: f64,
    pub axis: usize,
    /// Regression optimum; defaults to [`default_w_bar`].
    pub w_bar: Option<Vec<f64>>,
    /// Hinge: angle between `w_t` and `w_bar`.
    pub theta: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self { lambda: 1.0, axis: 0, w_bar: None, theta: FRAC_PI_3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub psi: Vec<f64>,
    /// Local scores; an empty list skips the local rows of a sweep.
    pub upsilon: Vec<f64>,
}

impl Default for Grid {
    fn default() -> Self {
        Self { psi: (0..=8).map(|i| 0.25 * i as f64).collect(), upsilon: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RaceConfig {
    pub policies: Vec<PolicyKind>,
    pub pacing: Pacing,
    pub refresh: usize,
    pub pool_size: usize,
    pub score_law: ScoreLaw,
    pub steps: usize,
    pub seeds: u64,
    /// Fraction of the budget at which policies are compared.
    pub early_fraction: f64,
    /// Steps between trajectory rows written to the CSV.
    pub record_every: usize,
    /// Steps between pool-loss evaluations; none when absent.
    pub loss_every: Option<usize>,
}

impl Default for RaceConfig {
    fn default() -> Self {
        Self {
            policies: vec![PolicyKind::CurriculumGlobal, PolicyKind::AntiCurriculum],
            pacing: Pacing::default(),
            refresh: 10,
            pool_size: 10_000,
            score_law: ScoreLaw::HalfGaussian { sd: 1.0 },
            steps: 10_000,
            seeds: 100,
            early_fraction: 0.1,
            record_every: 100,
            loss_every: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CounterexampleMode {
    /// Local-score preference near the optimum.
    LocalScore,
    /// Hinge rate increasing in the global score below `1 - cos(theta)`.
    HingeLowPsi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CounterexampleConfig {
    pub mode: CounterexampleMode,
    pub upsilon: f64,
    pub psi1: f64,
    pub psi2: f64,
}

impl Default for CounterexampleConfig {
    fn default() -> Self {
        Self { mode: CounterexampleMode::LocalScore, upsilon: 1.0, psi1: 0.1, psi2: 0.4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub format: Format,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), format: Format::Csv }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Draws per Monte Carlo estimate in sweeps and counterexamples.
    pub n: usize,
    pub problem: ProblemKind,
    pub distribution: BaseDistribution,
    pub geometry: Geometry,
    pub grid: Grid,
    pub race: RaceConfig,
    pub counterexample: CounterexampleConfig,
    pub verify: SuiteParams,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            n: 100_000,
            problem: ProblemKind::Regression { eta: 0.01 },
            distribution: BaseDistribution::StandardGaussian { dim: 3 },
            geometry: Geometry::default(),
            grid: Grid::default(),
            race: RaceConfig::default(),
            counterexample: CounterexampleConfig::default(),
            verify: SuiteParams::default(),
            output: OutputConfig::default(),
        }
    }
}

/// Flag values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

/// `(-1)^i / (i + 1)` on the features and `0.5` in the bias slot.
pub fn default_w_bar(d: usize) -> curriculum_lab::Result<ParamVector> {
    let mut c: Vec<f64> = (0..d).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 } / (i + 1) as f64).collect();
    c.push(0.5);
    ParamVector::new(c)
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(s).map_err(|e| usage(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// The file at `path`, or the defaults, with `overrides` applied.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| usage(format!("cannot read config {}: {e}", p.display())))?;
                toml::from_str(&text).map_err(|e| usage(format!("invalid config {}: {e}", p.display())))?
            }
            None => Self::default(),
        };
        if let Some(seed) = overrides.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &overrides.out {
            cfg.output.dir = out.clone();
        }
        if let Some(format) = overrides.format {
            cfg.output.format = format;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Hex SHA-256 of the canonical JSON form, leaving out where and how
    /// outputs are written.
    pub fn hash(&self) -> String {
        let experiment = Self { output: OutputConfig::default(), ..self.clone() };
        let bytes = serde_json::to_vec(&experiment).expect("configs serialize");
        format!("{:x}", Sha256::digest(bytes))
    }

    pub fn w_bar(&self) -> Result<ParamVector, CliError> {
        let d = self.distribution.dim();
        let w = match &self.geometry.w_bar {
            Some(c) => ParamVector::new(c.clone())?,
            None => default_w_bar(d)?,
        };
        if w.feature_dim() != d {
            return Err(usage(format!("w_bar needs {} coordinates, got {}", d + 1, w.len())));
        }
        Ok(w)
    }

    /// `w_bar - lambda e_axis`.
    pub fn w_t(&self) -> Result<ParamVector, CliError> {
        let w_bar = self.w_bar()?;
        Ok(w_bar.add_scaled(-self.geometry.lambda, &ParamVector::basis(w_bar.len(), self.geometry.axis)?)?)
    }

    pub fn frame(&self) -> Result<HingeFrame, CliError> {
        let t = self.geometry.theta;
        if !(t > 0.0 && t < std::f64::consts::PI) {
            return Err(usage(format!("theta must lie in (0, pi), got {t}")));
        }
        Ok(HingeFrame::from_angle(t)?)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.problem.validate()?;
        self.distribution.validate()?;
        let d = self.distribution.dim();
        if self.n < 2 {
            return Err(usage("n must be at least 2"));
        }
        if self.problem.is_hinge() {
            if d < 2 {
                return Err(usage("hinge experiments need at least 2 features"));
            }
            self.frame()?;
        } else {
            if !(self.geometry.lambda.is_finite() && self.geometry.lambda > 0.0) {
                return Err(usage(format!("lambda must be positive, got {}", self.geometry.lambda)));
            }
            if self.geometry.axis >= d {
                return Err(usage(format!("axis {} out of range for {d} features", self.geometry.axis)));
            }
            self.w_bar()?;
        }
        if self.grid.psi.is_empty() {
            return Err(usage("the psi grid is empty"));
        }
        if let Some(p) = self.grid.psi.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(usage(format!("global scores must be nonnegative, got {p}")));
        }
        if let Some(u) = self.grid.upsilon.iter().find(|u| !(u.is_finite() && **u > 0.0)) {
            return Err(usage(format!("local scores must be positive, got {u}")));
        }
        let r = &self.race;
        if r.policies.is_empty() {
            return Err(usage("race needs at least one policy"));
        }
        r.pacing.validate()?;
        r.score_law.validate()?;
        if r.refresh == 0 || r.pool_size == 0 || r.steps == 0 || r.seeds == 0 || r.record_every == 0 {
            return Err(usage("race refresh, pool_size, steps, seeds and record_every must be positive"));
        }
        if r.loss_every == Some(0) {
            return Err(usage("race loss_every must be positive"));
        }
        if !(r.early_fraction > 0.0 && r.early_fraction <= 1.0) {
            return Err(usage(format!("early_fraction must lie in (0, 1], got {}", r.early_fraction)));
        }
        let c = &self.counterexample;
        if !(c.upsilon.is_finite() && c.upsilon > 0.0) {
            return Err(usage(format!("counterexample upsilon must be positive, got {}", c.upsilon)));
        }
        let v = &self.verify;
        if v.n < 2 || v.slope_n < 2 || v.nabla_tuples == 0 || v.race_pool == 0 || v.race_steps < 10 || v.race_seeds == 0
        {
            return Err(usage("verify sample sizes are too small"));
        }
        let t = &v.tolerances;
        let positive = [t.z, t.halving_ratio_lo, t.alpha, t.nabla_spot, t.rescaling, t.gradient];
        if positive.iter().any(|x| !(x.is_finite() && *x > 0.0)) || t.halving_ratio_hi <= t.halving_ratio_lo {
            return Err(usage("tolerances must be positive with halving_ratio_lo < halving_ratio_hi"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
        assert_eq!(ExperimentConfig::from_toml_str("").unwrap(), cfg);
    }

    #[test]
    fn partial_file_and_overrides() {
        let cfg = ExperimentConfig::from_toml_str(
            "seed = 9\n[problem]\nkind = \"hinge_classification\"\neta = 0.001\nnorm = 1.0\n[grid]\npsi = [0.5]\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 9);
        assert!(cfg.problem.is_hinge());
        assert_eq!(cfg.grid.psi, vec![0.5]);
        assert_ne!(cfg.hash(), ExperimentConfig::default().hash());
        let moved = ExperimentConfig { output: OutputConfig { dir: "elsewhere".into(), format: Format::Json }, ..cfg.clone() };
        assert_eq!(moved.hash(), cfg.hash());
    }

    #[test]
    fn rejects_bad_files() {
        for bad in [
            "seed = \"x\"",
            "unknown = 1",
            "[problem]\nkind = \"regression\"\neta = -1.0",
            "[grid]\npsi = []",
            "[geometry]\ntheta = 4.0\n[problem]\nkind = \"hinge_classification\"\neta = 0.1\nnorm = 1.0",
            "[race]\npolicies = []",
            "[distribution]\nkind = \"uniform_ball\"\ndim = 2\nradius = -1.0",
        ] {
            assert!(matches!(ExperimentConfig::from_toml_str(bad), Err(CliError::Usage(_))), "{bad}");
        }
    }

    #[test]
    fn default_optimum() {
        assert_eq!(default_w_bar(3).unwrap().coords(), &[1.0, -0.5, 1.0 / 3.0, 0.5]);
    }
}
