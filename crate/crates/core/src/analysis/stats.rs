//! Ensemble statistics: trapping fractions, hitting times and frequency
//! histograms.

use serde::{Deserialize, Serialize};

use crate::engine::Trapping;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub count: usize,
    pub mean: f64,
    /// Unbiased sample variance (0 for a single sample).
    pub variance: f64,
    pub standard_error: f64,
}

/// Sample mean, variance and standard error; `None` for empty input.
pub fn mean_estimate(xs: &[f64]) -> Option<MeanEstimate> {
    let n = xs.len();
    if n == 0 {
        return None;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let variance = if n > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    Some(MeanEstimate {
        count: n,
        mean,
        variance,
        standard_error: (variance / n as f64).sqrt(),
    })
}

/// Standard deviation of a binomial fraction with success probability `p`.
pub fn binomial_sigma(p: f64, m: usize) -> f64 {
    if m == 0 {
        return f64::INFINITY;
    }
    (p * (1.0 - p) / m as f64).max(0.0).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryHistogram {
    pub labels: Vec<String>,
    /// Fraction of classified records per block, complement last.
    pub fractions: Vec<f64>,
    pub counts: Vec<usize>,
    pub undecided: usize,
    /// Number of classified records (the denominator of `fractions`).
    pub classified: usize,
}

impl StationaryHistogram {
    /// `|fraction - expected| / σ_binomial(expected)` per block; zero expected
    /// weight demands an exact zero count.
    pub fn z_scores(&self, expected: &[f64]) -> Vec<f64> {
        self.fractions
            .iter()
            .zip(expected)
            .map(|(&f, &p)| {
                let s = binomial_sigma(p, self.classified);
                if s > 0.0 {
                    (f - p).abs() / s
                } else if (f - p).abs() == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            })
            .collect()
    }
}

/// Empirical trapping law. `labels` names the blocks with the complement last.
pub fn stationary_histogram(trappings: &[Trapping], labels: &[String]) -> Result<StationaryHistogram> {
    if trappings.is_empty() {
        return Err(Error::InsufficientData("no trajectories to histogram".into()));
    }
    let nb = labels.len();
    if nb == 0 {
        return Err(Error::structural("at least the complement label is required"));
    }
    let mut counts = vec![0usize; nb];
    let mut undecided = 0;
    for t in trappings {
        match *t {
            Trapping::Dfs(k) if k + 1 < nb => counts[k] += 1,
            Trapping::Dfs(k) => {
                return Err(Error::structural(format!("trapping block {k} has no label")))
            }
            Trapping::Complement => counts[nb - 1] += 1,
            Trapping::Undecided => undecided += 1,
        }
    }
    if undecided > 0 {
        log::warn!(
            "{undecided} of {} trajectories undecided; fractions use classified records only",
            trappings.len()
        );
    }
    let classified = trappings.len() - undecided;
    let fractions = counts
        .iter()
        .map(|&c| if classified > 0 { c as f64 / classified as f64 } else { 0.0 })
        .collect();
    Ok(StationaryHistogram {
        labels: labels.to_vec(),
        fractions,
        counts,
        undecided,
        classified,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingTimeStats {
    /// `None` marks empty statistics (no DFS-trapped record).
    pub estimate: Option<MeanEstimate>,
    pub histogram: Vec<HistogramBin>,
}

/// Mean, variance and a `bins`-bin histogram of DFS hitting times.
pub fn hitting_time_stats(times: &[f64], bins: usize) -> HittingTimeStats {
    let estimate = mean_estimate(times);
    let histogram = match estimate {
        Some(_) if bins > 0 => {
            let lo = times.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = times.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
            let mut h: Vec<HistogramBin> = (0..bins)
                .map(|k| HistogramBin {
                    lo: lo + k as f64 * width,
                    hi: lo + (k + 1) as f64 * width,
                    count: 0,
                })
                .collect();
            for &t in times {
                let k = (((t - lo) / width) as usize).min(bins - 1);
                h[k].count += 1;
            }
            h
        }
        _ => Vec::new(),
    };
    HittingTimeStats { estimate, histogram }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyBin {
    /// Representative frequency (a reference frequency when matched).
    pub frequency: f64,
    pub count: usize,
    pub fraction: f64,
    /// Binomial standard deviation of `fraction`.
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyHistogram {
    pub bins: Vec<FrequencyBin>,
    pub unsynchronized: usize,
    pub total: usize,
}

impl FrequencyHistogram {
    pub fn fraction_at(&self, frequency: f64, rel_tol: f64) -> f64 {
        self.bins
            .iter()
            .filter(|b| (b.frequency - frequency).abs() <= rel_tol * frequency)
            .map(|b| b.fraction)
            .sum()
    }
}

/// Counts synchronized records per detected frequency. Detected values within
/// `rel_tol` of a reference frequency are reported at that reference; others
/// are clustered greedily at the same tolerance.
pub fn multiplexing_report(
    frequencies: &[Option<f64>],
    references: &[f64],
    rel_tol: f64,
) -> FrequencyHistogram {
    let total = frequencies.len();
    let mut bins: Vec<(f64, usize)> = Vec::new();
    let mut unsynchronized = 0;
    for f in frequencies {
        let Some(f) = *f else {
            unsynchronized += 1;
            continue;
        };
        let anchor = references
            .iter()
            .copied()
            .filter(|r| (f - r).abs() <= rel_tol * r)
            .min_by(|a, b| (f - a).abs().total_cmp(&(f - b).abs()))
            .unwrap_or(f);
        match bins
            .iter_mut()
            .find(|(c, _)| (anchor - *c).abs() <= rel_tol * c.abs().max(f64::MIN_POSITIVE))
        {
            Some(bin) => bin.1 += 1,
            None => bins.push((anchor, 1)),
        }
    }
    bins.sort_by(|a, b| a.0.total_cmp(&b.0));
    let bins = bins
        .into_iter()
        .map(|(frequency, count)| {
            let fraction = if total > 0 { count as f64 / total as f64 } else { 0.0 };
            FrequencyBin {
                frequency,
                count,
                fraction,
                sigma: binomial_sigma(fraction, total),
            }
        })
        .collect();
    FrequencyHistogram {
        bins,
        unsynchronized,
        total,
    }
}
