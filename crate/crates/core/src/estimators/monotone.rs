use serde::{Deserialize, Serialize};

use super::Curve;
use crate::error::{LabError, Result};

/// Default significance, in standard errors, for a conclusive interval.
pub const Z_THRESHOLD: f64 = 3.0;

/// Relative size below which a difference between exact values counts as zero.
const EXACT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Decreasing,
    Increasing,
    Mixed,
    Inconclusive,
}

/// The test on one pair of neighbouring grid points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalTest {
    pub from: f64,
    pub to: f64,
    pub difference: f64,
    pub std_error: f64,
    /// `difference / std_error`; absent when both ends are exact.
    pub z: Option<f64>,
    pub conclusive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub verdict: Verdict,
    pub intervals: Vec<IntervalTest>,
}

/// Classifies a curve at the default 3-standard-error threshold.
pub fn monotonicity_probe(curve: &Curve) -> Result<MonotonicityReport> {
    monotonicity_probe_at(curve, Z_THRESHOLD)
}

/// Tests every neighbouring difference at `z_threshold` standard errors.
/// Exact differences are conclusive unless they vanish to rounding. The
/// verdict uses conclusive intervals only and needs at least two of them.
pub fn monotonicity_probe_at(curve: &Curve, z_threshold: f64) -> Result<MonotonicityReport> {
    let k = curve.scores.len();
    if k < 3 || curve.points.len() != k {
        return Err(LabError::InvalidParameter(format!(
            "monotonicity probe needs at least 3 grid points, got {k}"
        )));
    }
    let scale = curve.points.iter().map(|p| p.mean.abs()).fold(0.0, f64::max);
    let intervals: Vec<IntervalTest> = (0..k - 1)
        .map(|i| {
            let d = curve.difference(i);
            let (z, conclusive) = if d.std_error > 0.0 {
                let z = d.mean / d.std_error;
                (Some(z), z.abs() >= z_threshold)
            } else {
                (None, d.mean.abs() > EXACT_TOLERANCE * scale.max(f64::MIN_POSITIVE))
            };
            IntervalTest {
                from: curve.scores[i],
                to: curve.scores[i + 1],
                difference: d.mean,
                std_error: d.std_error,
                z,
                conclusive,
            }
        })
        .collect();
    let conclusive: Vec<&IntervalTest> = intervals.iter().filter(|t| t.conclusive).collect();
    let verdict = if conclusive.len() < 2 {
        Verdict::Inconclusive
    } else if conclusive.iter().all(|t| t.difference < 0.0) {
        Verdict::Decreasing
    } else if conclusive.iter().all(|t| t.difference > 0.0) {
        Verdict::Increasing
    } else {
        Verdict::Mixed
    };
    Ok(MonotonicityReport { verdict, intervals })
}
