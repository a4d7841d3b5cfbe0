//! Summary statistics for experiment outputs.

use rand::Rng as _;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{self, tag};

pub const BOOTSTRAP_RESAMPLES: usize = 4000;

/// `P(high < low) + ½ P(high = low)` through mid-ranks.
pub fn prob_superiority(high: &[f64], low: &[f64]) -> Result<f64> {
    if high.is_empty() || low.is_empty() {
        return Err(Error::InvalidInput("both samples must be nonempty".into()));
    }
    if high.iter().chain(low).any(|x| x.is_nan()) {
        return Err(Error::InvalidInput("samples contain NaN".into()));
    }
    let mut pooled: Vec<(f64, bool)> =
        high.iter().map(|&x| (x, false)).chain(low.iter().map(|&x| (x, true))).collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum_low = 0.0;
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j + 1 < pooled.len() && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum_low += mid * pooled[i..=j].iter().filter(|p| p.1).count() as f64;
        i = j + 1;
    }
    let (nh, nl) = (high.len() as f64, low.len() as f64);
    let u_low = rank_sum_low - nl * (nl + 1.0) / 2.0;
    Ok(u_low / (nh * nl))
}

/// Bias-corrected Fisher–Pearson skewness; `None` for fewer than three
/// points or zero variance.
pub fn skewness(sample: &[f64]) -> Option<f64> {
    let n = sample.len();
    if n < 3 {
        return None;
    }
    let nf = n as f64;
    let mean = sample.iter().sum::<f64>() / nf;
    let m2 = sample.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / nf;
    let m3 = sample.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / nf;
    if m2 == 0.0 {
        return None;
    }
    let g1 = m3 / m2.powf(1.5);
    Some(g1 * (nf * (nf - 1.0)).sqrt() / (nf - 2.0))
}

pub fn mean(sample: &[f64]) -> f64 {
    sample.iter().sum::<f64>() / sample.len() as f64
}

/// Linear interpolation between order statistics (`(n−1)p` positions).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sorted(sample: &[f64]) -> Vec<f64> {
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Percentile bootstrap interval. Resamples where `statistic` is undefined
/// are dropped; `None` if all are.
pub fn bootstrap_ci<F>(sample: &[f64], statistic: F, resamples: usize, level: f64, seed: u64) -> Option<(f64, f64)>
where
    F: Fn(&[f64]) -> Option<f64>,
{
    assert!(sample.len() >= 2, "bootstrap needs at least two points");
    let mut rng = rng::stream(seed, &[tag::BOOTSTRAP]);
    let n = sample.len();
    let mut buf = vec![0.0; n];
    let mut stats = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        for b in buf.iter_mut() {
            *b = sample[rng.random_range(0..n)];
        }
        if let Some(s) = statistic(&buf) {
            stats.push(s);
        }
    }
    if stats.is_empty() {
        return None;
    }
    let stats = sorted(&stats);
    let alpha = (1.0 - level) / 2.0;
    Some((quantile(&stats, alpha), quantile(&stats, 1.0 - alpha)))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryStats {
    pub n: usize,
    pub mean: f64,
    pub mean_ci: Option<(f64, f64)>,
    pub min: f64,
    pub skew: Option<f64>,
    pub skew_ci: Option<(f64, f64)>,
    pub q95: f64,
    pub q50: f64,
    pub q25: f64,
}

impl SummaryStats {
    pub fn of(sample: &[f64], seed: u64) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::InvalidInput("cannot summarize an empty sample".into()));
        }
        let s = sorted(sample);
        let (mean_ci, skew_ci) = if sample.len() >= 2 {
            (
                bootstrap_ci(sample, |x| Some(mean(x)), BOOTSTRAP_RESAMPLES, 0.95, seed),
                bootstrap_ci(sample, skewness, BOOTSTRAP_RESAMPLES, 0.95, rng::derive(seed, &[1])),
            )
        } else {
            (None, None)
        };
        Ok(SummaryStats {
            n: sample.len(),
            mean: mean(sample),
            mean_ci,
            min: s[0],
            skew: skewness(sample),
            skew_ci,
            q95: quantile(&s, 0.95),
            q50: quantile(&s, 0.50),
            q25: quantile(&s, 0.25),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn superiority_by_hand() {
        assert_eq!(prob_superiority(&[1.0, 3.0], &[2.0, 4.0]).unwrap(), 0.75);
        assert_eq!(prob_superiority(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.5);
        assert_eq!(prob_superiority(&[0.0, 0.1], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert!(prob_superiority(&[], &[1.0]).is_err());
    }

    #[test]
    fn skewness_by_hand() {
        assert_eq!(skewness(&[-1.0, 0.0, 1.0]), Some(0.0));
        assert!(skewness(&[0.0, 0.0, 1.0]).unwrap() > 0.0);
        assert_eq!(skewness(&[2.0, 2.0, 2.0]), None);
        assert_eq!(skewness(&[1.0, 2.0]), None);
    }

    #[test]
    fn quantiles_interpolate() {
        let s = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&s, 0.5), 3.0);
        assert_eq!(quantile(&s, 0.25), 2.0);
        assert_eq!(quantile(&s, 0.95), 4.8);
    }

    #[test]
    fn bootstrap_is_deterministic_and_degenerates() {
        let sample: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let a = bootstrap_ci(&sample, |x| Some(mean(x)), 4000, 0.95, 3).unwrap();
        let b = bootstrap_ci(&sample, |x| Some(mean(x)), 4000, 0.95, 3).unwrap();
        assert_eq!(a.0.to_bits(), b.0.to_bits());
        assert_eq!(a.1.to_bits(), b.1.to_bits());
        assert!(a.0 <= mean(&sample) && mean(&sample) <= a.1);
        assert_eq!(bootstrap_ci(&[7.0; 10], |x| Some(mean(x)), 100, 0.95, 1), Some((7.0, 7.0)));
    }

    #[test]
    fn summary_fields_are_ordered() {
        let sample: Vec<f64> = (0..40).map(|i| ((i * 7) % 11) as f64 / 11.0).collect();
        let s = SummaryStats::of(&sample, 1).unwrap();
        let (lo, hi) = s.mean_ci.unwrap();
        assert!(lo <= s.mean && s.mean <= hi);
        assert!(s.q25 <= s.q50 && s.q50 <= s.q95);
        assert!(s.min <= s.q25);
    }
}
