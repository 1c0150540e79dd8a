//! Dyadic hierarchy of merged histogram bins.
//!
//! Level `K` holds the `2^K` elementary bins, level `n` the `2^n` bins
//! obtained by pooling aligned groups of `2^(K-n)` elementary bins, and
//! level 0 a single bin over the whole domain. Every bin carries the
//! estimate of the integral of the sampled function over it and the
//! statistical error of that estimate.

use thiserror::Error;

use crate::gof::{acceptance_bound, LevelRecord};
use crate::histogram::Histogram;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HierarchyError {
    #[error("no usable hierarchy level: even the whole-domain bin holds too few samples")]
    NoUsableLevels,
}

/// Sample statistics of one bin: count, mean and scaled variance
/// (sum of squared deviations from the mean).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BinStats {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl BinStats {
    pub fn new(count: u64, mean: f64, m2: f64) -> Self {
        Self { count, mean, m2 }
    }

    /// Sum of squared sample values.
    pub fn sum_squares(&self) -> f64 {
        self.m2 + self.count as f64 * self.mean * self.mean
    }
}

/// Pools the statistics of two disjoint sample sets.
pub fn merge_bins(left: BinStats, right: BinStats) -> BinStats {
    let count = left.count + right.count;
    if count == 0 {
        return BinStats::default();
    }
    let (nl, nr, n) = (left.count as f64, right.count as f64, count as f64);
    let mean = (nl * left.mean + nr * right.mean) / n;
    let delta = left.mean - right.mean;
    let m2 = left.m2 + right.m2 + delta * delta * nl * nr / n;
    BinStats { count, mean, m2 }
}

/// Integral estimate of one bin and its error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinEstimate {
    pub integral: f64,
    /// Scaled variance of the integral estimator over all `N` samples.
    pub m2_integral: f64,
    pub error: f64,
}

/// Integral estimate and error of a bin given the total sample count.
///
/// With fewer than two samples in total the error is reported as zero, and
/// so is a variance at the rounding level of the bin's sum of squares (for
/// instance identical weights in a bin holding every sample).
pub fn bin_estimates(stats: BinStats, total: u64) -> BinEstimate {
    if stats.count == 0 || total == 0 {
        return BinEstimate {
            integral: 0.0,
            m2_integral: 0.0,
            error: 0.0,
        };
    }
    let (ni, n) = (stats.count as f64, total as f64);
    let integral = stats.mean * ni / n;
    let m2_integral = stats.m2 + stats.mean * stats.mean * ni * (n - ni) / n;
    let error = if total < 2 || m2_integral <= f64::EPSILON * stats.sum_squares() {
        0.0
    } else {
        (m2_integral / (n - 1.0) / n).max(0.0).sqrt()
    };
    BinEstimate {
        integral,
        m2_integral,
        error,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HierarchyBin {
    pub level: u32,
    pub index: usize,
    pub x_lo: f64,
    pub x_hi: f64,
    pub stats: BinStats,
    pub integral: f64,
    pub error: f64,
    pub usable: bool,
}

#[derive(Debug, Clone)]
pub struct BinHierarchy {
    power: u32,
    levels: Vec<Vec<HierarchyBin>>,
    finest_used: u32,
    total: u64,
}

impl BinHierarchy {
    /// `K`: index of the elementary level.
    pub fn power(&self) -> u32 {
        self.power
    }

    /// `K'`: finest level that takes part in fitting.
    pub fn finest_used_level(&self) -> u32 {
        self.finest_used
    }

    pub fn total_samples(&self) -> u64 {
        self.total
    }

    pub fn level(&self, n: u32) -> &[HierarchyBin] {
        &self.levels[n as usize]
    }

    pub fn domain(&self) -> (f64, f64) {
        let b = &self.levels[0][0];
        (b.x_lo, b.x_hi)
    }

    /// Levels `0..=K'`.
    pub fn used_levels(&self) -> impl Iterator<Item = u32> {
        0..=self.finest_used
    }

    /// Usable bins of all levels up to `K'`, coarse to fine.
    pub fn usable_bins(&self) -> impl Iterator<Item = &HierarchyBin> {
        self.levels[..=self.finest_used as usize]
            .iter()
            .flatten()
            .filter(|b| b.usable)
    }

    /// Bins of level `n` lying inside the level-`order` bin `number`.
    /// Empty when `n < order`.
    pub fn bins_within(&self, n: u32, order: u32, number: usize) -> &[HierarchyBin] {
        if n < order {
            return &[];
        }
        let width = 1usize << (n - order);
        &self.levels[n as usize][number * width..(number + 1) * width]
    }
}

/// Builds the hierarchy and selects the levels used for fitting.
///
/// A bin is usable when it holds at least `data_points_min` samples and its
/// integral error is positive. Levels are scanned from the whole-domain bin
/// towards finer levels; the first level with fewer than
/// `usable_fraction * 2^n` bins holding `data_points_min` samples is dropped
/// together with all finer levels. Zero-error bins count as populated here:
/// an exactly known integral, such as the whole-domain bin of a positive
/// function with nothing outside the range, is not a lack of data.
pub fn build_hierarchy(
    h: &Histogram,
    data_points_min: u64,
    usable_fraction: f64,
) -> Result<BinHierarchy, HierarchyError> {
    let power = h.power();
    let total = h.total_samples();
    let make = |level: u32, index: usize, x_lo: f64, x_hi: f64, stats: BinStats| {
        let est = bin_estimates(stats, total);
        HierarchyBin {
            level,
            index,
            x_lo,
            x_hi,
            stats,
            integral: est.integral,
            error: est.error,
            usable: stats.count >= data_points_min && est.error > 0.0,
        }
    };

    let finest: Vec<HierarchyBin> = h
        .bins()
        .iter()
        .enumerate()
        .map(|(i, b)| {
            make(
                power,
                i,
                b.x_min,
                h.bin_upper(i),
                BinStats::new(b.count, b.mean, b.m2),
            )
        })
        .collect();

    let mut levels = vec![finest];
    for level in (0..power).rev() {
        let child = levels.last().expect("at least one level");
        let parent: Vec<HierarchyBin> = child
            .chunks_exact(2)
            .enumerate()
            .map(|(j, pair)| {
                make(
                    level,
                    j,
                    pair[0].x_lo,
                    pair[1].x_hi,
                    merge_bins(pair[0].stats, pair[1].stats),
                )
            })
            .collect();
        levels.push(parent);
    }
    levels.reverse();

    for (n, bins) in levels.iter().enumerate() {
        let silent = bins
            .iter()
            .filter(|b| b.stats.count >= data_points_min && b.error <= 0.0)
            .count();
        if silent > 0 {
            log::warn!(
                "level {n}: {silent} bin(s) with enough samples but zero integral error marked unusable"
            );
        }
    }

    let mut finest_used = None;
    for (n, bins) in levels.iter().enumerate() {
        let populated = bins
            .iter()
            .filter(|b| b.stats.count >= data_points_min)
            .count();
        if populated == 0 || (populated as f64) < usable_fraction * bins.len() as f64 {
            break;
        }
        finest_used = Some(n as u32);
    }
    let finest_used = finest_used.ok_or(HierarchyError::NoUsableLevels)?;

    Ok(BinHierarchy {
        power,
        levels,
        finest_used,
        total,
    })
}

/// Per-level statistics of the hypothesis `f = 0`; levels without usable
/// bins are skipped.
pub fn zero_statistics(hier: &BinHierarchy, t: f64) -> Vec<LevelRecord> {
    hier.used_levels()
        .filter_map(|n| {
            let (used, chi2) = hier
                .level(n)
                .iter()
                .filter(|b| b.usable)
                .fold((0usize, 0.0), |(k, c), b| {
                    (k + 1, c + (b.integral / b.error).powi(2))
                });
            (used > 0).then(|| LevelRecord::new(n, used, chi2, t))
        })
        .collect()
}

/// Whether the data is statistically compatible with zero on every used
/// level at threshold `t`.
pub fn zero_compatibility(hier: &BinHierarchy, t: f64) -> bool {
    zero_statistics(hier, t).iter().all(|r| {
        debug_assert_eq!(r.bound, acceptance_bound(r.used, t));
        r.passes()
    })
}
