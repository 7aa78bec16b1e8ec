//! Streaming moment accumulation and the small hypothesis tests used by the
//! verification checks.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

/// Running mean and co-moment matrix of a `k`-vector observable.
///
/// Partial accumulators merge exactly (pairwise update), so a sum computed in
/// fixed-size blocks and merged in block order is independent of how the
/// blocks were scheduled across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiStats {
    n: u64,
    mean: Vec<f64>,
    comoment: Vec<f64>,
}

impl MultiStats {
    pub fn new(k: usize) -> Self {
        Self { n: 0, mean: vec![0.0; k], comoment: vec![0.0; k * k] }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn push(&mut self, obs: &[f64]) {
        debug_assert_eq!(obs.len(), self.dim());
        let k = self.dim();
        self.n += 1;
        let n = self.n as f64;
        let before: Vec<f64> = obs.iter().zip(&self.mean).map(|(x, m)| x - m).collect();
        for (m, d) in self.mean.iter_mut().zip(&before) {
            *m += d / n;
        }
        for (i, (x, m)) in obs.iter().zip(&self.mean).enumerate() {
            let after_i = x - m;
            for (c, b) in self.comoment[i * k..(i + 1) * k].iter_mut().zip(&before) {
                *c += after_i * b;
            }
        }
    }

    pub fn merge(&mut self, other: &MultiStats) {
        debug_assert_eq!(other.dim(), self.dim());
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = other.clone();
            return;
        }
        let k = self.dim();
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        let delta: Vec<f64> = other.mean.iter().zip(&self.mean).map(|(b, a)| b - a).collect();
        for i in 0..k {
            for j in 0..k {
                self.comoment[i * k + j] += other.comoment[i * k + j] + delta[i] * delta[j] * na * nb / n;
            }
        }
        for (m, d) in self.mean.iter_mut().zip(&delta) {
            *m += d * nb / n;
        }
        self.n += other.n;
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.mean[i]
    }

    pub fn means(&self) -> &[f64] {
        &self.mean
    }

    /// Unbiased sample covariance of components `i` and `j`.
    pub fn covariance(&self, i: usize, j: usize) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        self.comoment[i * self.dim() + j] / (self.n as f64 - 1.0)
    }

    /// Standard error of the mean of component `i`.
    pub fn std_error(&self, i: usize) -> f64 {
        self.linear_std_error(&unit(self.dim(), i))
    }

    /// Standard error of `sum_i c_i * mean_i`.
    pub fn linear_std_error(&self, coeffs: &[f64]) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let k = self.dim();
        let mut var = 0.0;
        for i in 0..k {
            for j in 0..k {
                var += coeffs[i] * coeffs[j] * self.covariance(i, j);
            }
        }
        (var.max(0.0) / self.n as f64).sqrt()
    }
}

fn unit(k: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; k];
    v[i] = 1.0;
    v
}

/// Asymptotic 1% critical coefficient of the two-sample Kolmogorov-Smirnov test.
pub const KS_COEFFICIENT_1PCT: f64 = 1.628;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsOutcome {
    pub statistic: f64,
    pub critical: f64,
    pub reject: bool,
}

/// Two-sample Kolmogorov-Smirnov test at the 1% level.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsOutcome {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let critical = KS_COEFFICIENT_1PCT * ((na + nb) / (na * nb)).sqrt();
    KsOutcome { statistic: d, critical, reject: d > critical }
}

/// One-sided sign test: probability of at least `wins` successes out of
/// `trials` fair coin flips. Ties are expected to be dropped by the caller.
pub fn sign_test_p(wins: u64, trials: u64) -> f64 {
    if wins == 0 {
        return 1.0;
    }
    let bin = Binomial::new(0.5, trials).expect("p = 0.5 is a valid binomial parameter");
    bin.sf(wins - 1)
}
