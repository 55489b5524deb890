//! Moment accumulation, sharded Monte Carlo estimation and three-valued
//! verdicts.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::rng::{Stream, StreamKey};

pub const DEFAULT_CONFIDENCE: f64 = 0.999;
pub const DEFAULT_SHARDS: u64 = 64;

/// Running mean and centered second moment (Welford).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Pairwise combination (Chan et al.).
    pub fn merge(&self, other: &Moments) -> Moments {
        if other.n == 0 {
            return *self;
        }
        if self.n == 0 {
            return *other;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let fb = other.n as f64 / n as f64;
        Moments {
            n,
            mean: self.mean + d * fb,
            m2: self.m2 + other.m2 + d * d * self.n as f64 * fb,
        }
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }

    pub fn to_estimate(&self, confidence: f64) -> McEstimate {
        let stderr = if self.n == 0 { f64::INFINITY } else { (self.variance() / self.n as f64).sqrt() };
        McEstimate { mean: self.mean, stderr, n: self.n, confidence, bias: 0.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        }
    }

    /// Conjunction: any fail fails, otherwise any inconclusive is inconclusive.
    pub fn and(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Fail, _) | (_, Fail) => Fail,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            _ => Pass,
        }
    }

    pub fn all<I: IntoIterator<Item = Verdict>>(it: I) -> Verdict {
        it.into_iter().fold(Verdict::Pass, Verdict::and)
    }

    pub fn from_bool(ok: bool) -> Verdict {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Two-sided normal quantile for a confidence level.
pub fn z_value(confidence: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    n.inverse_cdf(0.5 + confidence / 2.0)
}

/// Confidence level whose two-sided quantile is `sigmas`.
pub fn confidence_for_sigmas(sigmas: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    2.0 * n.cdf(sigmas) - 1.0
}

/// Result of every stochastic operation.
///
/// `bias` is a deterministic error bound (horizon truncation and similar)
/// that verdicts add to the absolute tolerance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
    pub confidence: f64,
    #[serde(default)]
    pub bias: f64,
}

impl McEstimate {
    pub fn exact(value: f64) -> Self {
        Self { mean: value, stderr: 0.0, n: 0, confidence: DEFAULT_CONFIDENCE, bias: 0.0 }
    }

    pub fn z(&self) -> f64 {
        z_value(self.confidence)
    }

    pub fn with_bias(mut self, bias: f64) -> Self {
        self.bias += bias;
        self
    }

    pub fn with_confidence(mut self, confidence: f64) -> Self {
        self.confidence = confidence;
        self
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { mean: c * self.mean, stderr: c.abs() * self.stderr, bias: c.abs() * self.bias, ..*self }
    }

    /// Sum of independent estimates.
    pub fn sum_independent(parts: &[McEstimate]) -> McEstimate {
        let mean = parts.iter().map(|p| p.mean).sum();
        let var: f64 = parts.iter().map(|p| p.stderr * p.stderr).sum();
        McEstimate {
            mean,
            stderr: var.sqrt(),
            n: parts.iter().map(|p| p.n).sum(),
            confidence: parts.first().map_or(DEFAULT_CONFIDENCE, |p| p.confidence),
            bias: parts.iter().map(|p| p.bias).sum(),
        }
    }

    /// `self - other` for independent estimates.
    pub fn minus_independent(&self, other: &McEstimate) -> McEstimate {
        McEstimate {
            mean: self.mean - other.mean,
            stderr: self.stderr.hypot(other.stderr),
            n: self.n.min(other.n),
            confidence: self.confidence,
            bias: self.bias + other.bias,
        }
    }

    fn band(&self, atol: f64) -> (f64, f64) {
        let z = self.z();
        let slack = atol + self.bias;
        (z * self.stderr + slack, 3.0 * z * self.stderr + slack)
    }

    /// Two-sided comparison against `target`.
    pub fn verdict(&self, target: f64, atol: f64) -> Verdict {
        if !self.mean.is_finite() {
            return Verdict::Fail;
        }
        let d = (self.mean - target).abs();
        let (pass, fail) = self.band(atol);
        if d <= pass {
            Verdict::Pass
        } else if d > fail {
            Verdict::Fail
        } else {
            Verdict::Inconclusive
        }
    }

    /// Claim `mean <= bound`.
    pub fn verdict_le(&self, bound: f64, atol: f64) -> Verdict {
        if !self.mean.is_finite() {
            return Verdict::Fail;
        }
        let excess = self.mean - bound;
        let (pass, fail) = self.band(atol);
        if excess <= pass {
            Verdict::Pass
        } else if excess > fail {
            Verdict::Fail
        } else {
            Verdict::Inconclusive
        }
    }

    /// Claim `mean >= bound`.
    pub fn verdict_ge(&self, bound: f64, atol: f64) -> Verdict {
        McEstimate { mean: -self.mean, ..*self }.verdict_le(-bound, atol)
    }
}

/// How many samples, drawn from which streams, at what confidence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McPlan {
    pub samples: u64,
    pub key: StreamKey,
    pub confidence: f64,
    pub shards: u64,
}

impl McPlan {
    pub fn new(samples: u64, key: StreamKey) -> Self {
        Self { samples, key, confidence: DEFAULT_CONFIDENCE, shards: DEFAULT_SHARDS }
    }

    pub fn with_confidence(self, confidence: f64) -> Self {
        Self { confidence, ..self }
    }

    pub fn with_samples(self, samples: u64) -> Self {
        Self { samples, ..self }
    }

    pub fn with_key(self, key: StreamKey) -> Self {
        Self { key, ..self }
    }

    pub fn labeled(self, label: &str) -> Self {
        Self { key: self.key.derive(crate::rng::fnv1a(label.as_bytes())), ..self }
    }

    pub fn derive(self, tag: u64) -> Self {
        Self { key: self.key.derive(tag), ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::arg("sample count must be positive"));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::arg(format!("confidence {} not in (0,1)", self.confidence)));
        }
        if self.shards == 0 {
            return Err(Error::arg("shard count must be positive"));
        }
        Ok(())
    }

    fn shard_sizes(&self) -> Vec<u64> {
        let s = self.shards.min(self.samples).max(1);
        let base = self.samples / s;
        let rem = self.samples % s;
        (0..s).map(|i| base + u64::from(i < rem)).collect()
    }
}

/// Per-shard moments for `k` simultaneously observed quantities.
///
/// `f` fills `out` (length `k`) with one sample of each quantity; all
/// quantities in one call share the same random numbers. Shards run in
/// parallel and are merged in shard order, so the result is independent
/// of the thread count.
pub fn shard_moments<F>(plan: &McPlan, k: usize, f: F) -> Result<Vec<Vec<Moments>>>
where
    F: Fn(&mut Stream, &mut [f64]) + Sync,
{
    plan.validate()?;
    let sizes = plan.shard_sizes();
    let shards: Vec<Vec<Moments>> = sizes
        .par_iter()
        .enumerate()
        .map(|(s, &m)| {
            let mut rng = plan.key.with_shard(s as u64).stream();
            let mut acc = vec![Moments::default(); k];
            let mut buf = vec![0.0; k];
            for _ in 0..m {
                f(&mut rng, &mut buf);
                for (a, &x) in acc.iter_mut().zip(&buf) {
                    a.push(x);
                }
            }
            acc
        })
        .collect();
    Ok(shards)
}

pub fn merge_shards(shards: &[Vec<Moments>], k: usize) -> Vec<Moments> {
    let mut total = vec![Moments::default(); k];
    for s in shards {
        for (t, m) in total.iter_mut().zip(s) {
            *t = t.merge(m);
        }
    }
    total
}

/// Estimates of `k` quantities sharing common random numbers.
pub fn estimate_many<F>(plan: &McPlan, k: usize, f: F) -> Result<Vec<McEstimate>>
where
    F: Fn(&mut Stream, &mut [f64]) + Sync,
{
    let shards = shard_moments(plan, k, f)?;
    Ok(merge_shards(&shards, k).iter().map(|m| m.to_estimate(plan.confidence)).collect())
}

pub fn estimate<F>(plan: &McPlan, f: F) -> Result<McEstimate>
where
    F: Fn(&mut Stream) -> f64 + Sync,
{
    Ok(estimate_many(plan, 1, |rng, out| out[0] = f(rng))?[0])
}

/// Estimate plus a check that the standard error shrinks with the sample
/// size. The first half of the shards is compared with the whole; for a
/// square-integrable sample the ratio is about `1/sqrt(2)`.
pub fn estimate_checked<F>(plan: &McPlan, f: F) -> Result<(McEstimate, f64)>
where
    F: Fn(&mut Stream) -> f64 + Sync,
{
    let shards = shard_moments(plan, 1, |rng, out| out[0] = f(rng))?;
    let full = merge_shards(&shards, 1)[0].to_estimate(plan.confidence);
    let half = merge_shards(&shards[..shards.len().div_ceil(2)], 1)[0].to_estimate(plan.confidence);
    let ratio = if half.stderr > 0.0 { full.stderr / half.stderr } else { 0.0 };
    Ok((full, ratio))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn welford_matches_two_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 101) as f64 * 0.37 - 3.0).collect();
        let mut m = Moments::default();
        xs.iter().for_each(|&x| m.push(x));
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((m.mean - mean).abs() < 1e-12);
        assert!((m.variance() - var).abs() < 1e-10);

        let (a, b) = xs.split_at(313);
        let mut ma = Moments::default();
        let mut mb = Moments::default();
        a.iter().for_each(|&x| ma.push(x));
        b.iter().for_each(|&x| mb.push(x));
        let mm = ma.merge(&mb);
        assert_eq!(mm.n, m.n);
        assert!((mm.mean - mean).abs() < 1e-12);
        assert!((mm.variance() - var).abs() < 1e-10);
    }

    #[test]
    fn z_of_default_confidence() {
        assert!((z_value(0.999) - 3.2905).abs() < 1e-3);
        assert!((confidence_for_sigmas(3.0) - 0.9973).abs() < 1e-4);
        assert!((z_value(confidence_for_sigmas(3.0)) - 3.0).abs() < 1e-9);
    }

    #[test]
    fn verdict_bands() {
        let e = McEstimate { mean: 1.0, stderr: 0.1, n: 100, confidence: 0.999, bias: 0.0 };
        assert_eq!(e.verdict(1.0, 0.0), Verdict::Pass);
        assert_eq!(e.verdict(2.0, 0.0), Verdict::Fail);
        assert_eq!(e.verdict(1.5, 0.0), Verdict::Inconclusive);
        assert_eq!(e.verdict_le(0.9, 0.0), Verdict::Pass);
        assert_eq!(e.verdict_le(0.0, 0.0), Verdict::Fail);
        assert_eq!(e.verdict_ge(2.0, 0.0), Verdict::Fail);
        assert_eq!(e.verdict_ge(0.0, 0.0), Verdict::Pass);
        assert_eq!(e.with_bias(1.0).verdict(2.0, 0.0), Verdict::Pass);
    }

    #[test]
    fn constant_estimate_is_exact() {
        let plan = McPlan::new(1000, StreamKey::new(1));
        let e = estimate(&plan, |_| 2.5).unwrap();
        assert_eq!(e.mean, 2.5);
        assert_eq!(e.stderr, 0.0);
        assert_eq!(e.n, 1000);
    }

    #[test]
    fn thread_count_does_not_matter() {
        let plan = McPlan::new(10_000, StreamKey::new(3));
        let f = |rng: &mut Stream| rng.random::<f64>().powi(2);
        let a = estimate(&plan, f).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| estimate(&plan, f).unwrap());
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
        assert_eq!(a.verdict(1.0 / 3.0, 0.0), Verdict::Pass);
    }

    #[test]
    fn fewer_samples_than_shards() {
        let plan = McPlan::new(5, StreamKey::new(3));
        let e = estimate(&plan, |_| 1.0).unwrap();
        assert_eq!(e.n, 5);
    }
}
