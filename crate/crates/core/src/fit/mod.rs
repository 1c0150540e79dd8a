//! Adaptive spline fit over the bin hierarchy.
//!
//! A spline is fitted on the current interval division and checked level by
//! level. When some level fails, every interval is checked on the bins
//! inside it and the failing intervals are halved. The loop ends with an
//! accepted spline, or gives up on the current threshold when an interval
//! can no longer be split and moves on to the next, larger threshold.

mod basis;
mod solve;

use std::fmt::Write as _;

use thiserror::Error;

use crate::gof::{push_rows, LevelRecord, LOG_TABLE_HEADER};
use crate::hierarchy::{zero_statistics, BinHierarchy, HierarchyBin};
use crate::spline::BhmSpline;

pub use solve::{fit_bins, FitBin};

use basis::SplineBasis;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("least-squares system is rank deficient")]
    SingularSystem,
    #[error("interval (order: {order}, number: {number}) holds too few usable bins to fit")]
    IntervalUnderdetermined { order: u32, number: usize },
    #[error("interval (order: {order}, number: {number}) is too small to be split")]
    IntervalTooSmall { order: u32, number: usize },
    #[error("no acceptable spline found for any threshold")]
    NoAcceptableFit,
    #[error("data is compatible with zero; fit not attempted")]
    ZeroCompatible,
    #[error("invalid fit parameter: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitParams {
    pub spline_order: usize,
    pub data_points_min: u64,
    pub min_level: u32,
    pub threshold: f64,
    pub threshold_max: f64,
    pub threshold_steps: u32,
    pub usable_bin_fraction: f64,
    pub jump_suppression: bool,
    pub abort_if_zero: bool,
}

impl Default for FitParams {
    fn default() -> Self {
        Self {
            spline_order: 3,
            data_points_min: 100,
            min_level: 2,
            threshold: 2.0,
            threshold_max: 4.0,
            threshold_steps: 4,
            usable_bin_fraction: 0.25,
            jump_suppression: false,
            abort_if_zero: false,
        }
    }
}

pub const MAX_SPLINE_ORDER: usize = 10;

impl FitParams {
    pub fn validate(&self) -> Result<(), FitError> {
        let bad = |s: String| Err(FitError::InvalidParams(s));
        if !(1..=MAX_SPLINE_ORDER).contains(&self.spline_order) {
            return bad(format!(
                "SplineOrder must be between 1 and {MAX_SPLINE_ORDER}, got {}",
                self.spline_order
            ));
        }
        if self.data_points_min < 10 {
            return bad(format!(
                "DataPointsMin must be at least 10, got {}",
                self.data_points_min
            ));
        }
        if self.min_level < 2 {
            return bad(format!("MinLevel must be at least 2, got {}", self.min_level));
        }
        if !(self.usable_bin_fraction > 0.0 && self.usable_bin_fraction <= 1.0) {
            return bad(format!(
                "UsableBinFraction must lie in (0, 1], got {}",
                self.usable_bin_fraction
            ));
        }
        if !(self.threshold.is_finite() && self.threshold >= 0.0) {
            return bad(format!("Threshold must be non-negative, got {}", self.threshold));
        }
        if !self.threshold_max.is_finite() {
            return bad(format!("ThresholdMax must be finite, got {}", self.threshold_max));
        }
        Ok(())
    }

    /// Thresholds tried in order: `Threshold`, then equidistant steps up to
    /// and including `ThresholdMax`.
    pub fn thresholds(&self) -> Vec<f64> {
        if self.threshold_max <= self.threshold || self.threshold_steps == 0 {
            return vec![self.threshold];
        }
        let steps = self.threshold_steps;
        let step = (self.threshold_max - self.threshold) / steps as f64;
        (0..=steps)
            .map(|i| {
                if i == steps {
                    self.threshold_max
                } else {
                    self.threshold + i as f64 * step
                }
            })
            .collect()
    }
}

/// A spline interval coinciding with hierarchy bin `number` of level `order`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub order: u32,
    pub number: usize,
    pub x_lo: f64,
    pub x_hi: f64,
}

impl Interval {
    pub fn from_bin(b: &HierarchyBin) -> Self {
        Self {
            order: b.level,
            number: b.index,
            x_lo: b.x_lo,
            x_hi: b.x_hi,
        }
    }

    pub fn whole(hier: &BinHierarchy) -> Self {
        Self::from_bin(&hier.level(0)[0])
    }

    /// Whether `[lo, hi]` lies inside this interval.
    pub fn contains(&self, lo: f64, hi: f64) -> bool {
        lo >= self.x_lo && hi <= self.x_hi
    }
}

/// Halves an interval at its middle bin boundary.
pub fn split_interval(
    interval: &Interval,
    hier: &BinHierarchy,
    min_level: u32,
) -> Result<(Interval, Interval), FitError> {
    let max_order = hier.power().saturating_sub(min_level);
    if interval.order >= max_order {
        return Err(FitError::IntervalTooSmall {
            order: interval.order,
            number: interval.number,
        });
    }
    let level = hier.level(interval.order + 1);
    Ok((
        Interval::from_bin(&level[2 * interval.number]),
        Interval::from_bin(&level[2 * interval.number + 1]),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalDivision {
    intervals: Vec<Interval>,
}

impl IntervalDivision {
    pub fn whole(hier: &BinHierarchy) -> Self {
        Self {
            intervals: vec![Interval::whole(hier)],
        }
    }

    /// Intervals must be contiguous and ordered.
    pub fn new(intervals: Vec<Interval>) -> Self {
        assert!(!intervals.is_empty());
        assert!(intervals.windows(2).all(|w| w[0].x_hi == w[1].x_lo));
        Self { intervals }
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn boundaries(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.intervals.iter().map(|i| i.x_lo).collect();
        b.push(self.intervals[self.intervals.len() - 1].x_hi);
        b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitDiagnostics {
    pub levels: Vec<LevelRecord>,
    pub accepted: bool,
    pub threshold: f64,
    pub division: IntervalDivision,
}

fn fit_bins_of(hier: &BinHierarchy) -> Vec<FitBin> {
    hier.usable_bins()
        .map(|b| FitBin {
            x_lo: b.x_lo,
            x_hi: b.x_hi,
            level: b.level,
            integral: b.integral,
            error: b.error,
        })
        .collect()
}

/// Least-squares spline on a fixed division, with error band.
///
/// Minimizes `sum_n chi_n^2 / 2^n` over all usable bins of the used
/// levels, plus `jump_penalty` times the summed squared jumps of the
/// highest derivative at the interior knots.
pub fn fit_on_division(
    hier: &BinHierarchy,
    division: &IntervalDivision,
    order: usize,
    jump_penalty: f64,
) -> Result<BhmSpline, FitError> {
    let bins = fit_bins_of(hier);
    let fit = solve::solve(
        SplineBasis::new(&division.boundaries(), order),
        &bins,
        jump_penalty,
    )?;
    let cov = solve::hierarchy_covariance(&fit, &bins, hier);
    Ok(solve::to_spline(&fit, &cov))
}

fn residual(sp: &BhmSpline, b: &HierarchyBin) -> f64 {
    let s = sp
        .integral(b.x_lo, b.x_hi)
        .expect("hierarchy bins lie inside the spline domain");
    (s - b.integral) / b.error
}

fn record_for<'a>(
    level: u32,
    bins: impl Iterator<Item = &'a HierarchyBin>,
    sp: &BhmSpline,
    t: f64,
) -> Option<LevelRecord> {
    let (used, chi2) = bins
        .filter(|b| b.usable)
        .fold((0usize, 0.0), |(k, c), b| (k + 1, c + residual(sp, b).powi(2)));
    (used > 0).then(|| LevelRecord::new(level, used, chi2, t))
}

/// Goodness of fit on every used level.
pub fn check_levels(
    sp: &BhmSpline,
    hier: &BinHierarchy,
    t: f64,
    division: &IntervalDivision,
) -> FitDiagnostics {
    let levels: Vec<LevelRecord> = hier
        .used_levels()
        .filter_map(|n| record_for(n, hier.level(n).iter(), sp, t))
        .collect();
    FitDiagnostics {
        accepted: levels.iter().all(LevelRecord::passes),
        levels,
        threshold: t,
        division: division.clone(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum IntervalCheck {
    Pass,
    Fail { level: u32 },
}

/// Goodness of fit restricted to the bins inside one interval, from the
/// interval's own level down to the finest used level. Stops at the first
/// failing level. Levels without usable bins inside the interval are
/// skipped.
pub fn check_interval(
    sp: &BhmSpline,
    hier: &BinHierarchy,
    interval: &Interval,
    t: f64,
) -> (IntervalCheck, Vec<LevelRecord>) {
    let mut records = Vec::new();
    for n in interval.order..=hier.finest_used_level() {
        let bins = hier.bins_within(n, interval.order, interval.number);
        if let Some(r) = record_for(n, bins.iter(), sp, t) {
            records.push(r);
            if !r.passes() {
                return (IntervalCheck::Fail { level: n }, records);
            }
        }
    }
    if records.is_empty() {
        log::warn!(
            "interval (order: {}, number: {}) has no usable bins; treated as passing",
            interval.order,
            interval.number
        );
    }
    (IntervalCheck::Pass, records)
}

/// Usable bins of the used levels lying inside `interval`.
pub fn usable_within(hier: &BinHierarchy, interval: &Interval) -> usize {
    (interval.order..=hier.finest_used_level())
        .map(|n| {
            hier.bins_within(n, interval.order, interval.number)
                .iter()
                .filter(|b| b.usable)
                .count()
        })
        .sum()
}

fn ensure_determined(hier: &BinHierarchy, iv: &Interval, order: usize) -> Result<(), FitError> {
    if usable_within(hier, iv) < order + 2 {
        return Err(FitError::IntervalUnderdetermined {
            order: iv.order,
            number: iv.number,
        });
    }
    Ok(())
}

/// Refits with a penalty on the jumps of the highest derivative, using the
/// largest weight `10^k`, `k = 6, 5, ..., -6`, that keeps the fit
/// acceptable at threshold `t`. Returns the unpenalized fit (weight 0) if
/// none does.
pub fn jump_suppression_refit(
    hier: &BinHierarchy,
    division: &IntervalDivision,
    order: usize,
    t: f64,
) -> Result<(BhmSpline, f64), FitError> {
    if division.len() > 1 {
        for k in (-6..=6).rev() {
            let weight = 10f64.powi(k);
            if let Ok(sp) = fit_on_division(hier, division, order, weight) {
                if check_levels(&sp, hier, t, division).accepted {
                    return Ok((sp, weight));
                }
            }
        }
    }
    Ok((fit_on_division(hier, division, order, 0.0)?, 0.0))
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub spline: BhmSpline,
    pub diagnostics: FitDiagnostics,
    /// Jump penalty weight of the returned spline (0 without suppression).
    pub jump_penalty: f64,
}

#[derive(Debug, Clone)]
pub struct FitRun {
    pub outcome: Result<FitResult, FitError>,
    /// Verbose fitting log.
    pub log: String,
}

enum Attempt {
    Accepted(FitResult),
    GaveUp(FitError),
}

struct Fitter<'a> {
    hier: &'a BinHierarchy,
    params: &'a FitParams,
    log: String,
}

impl Fitter<'_> {
    fn table(&mut self, records: &[LevelRecord]) {
        let _ = writeln!(self.log, "Checking separate chi_n^2/n in spline fit");
        let _ = writeln!(self.log, "{LOG_TABLE_HEADER}");
        push_rows(&mut self.log, records);
    }

    fn attempt(&mut self, t: f64) -> Attempt {
        let hier = self.hier;
        let order = self.params.spline_order;
        let _ = writeln!(self.log, "Begin BHM fitting with threshold T = {t}");
        let mut division = IntervalDivision::whole(hier);
        if let Err(e) = ensure_determined(hier, &division.intervals[0], order) {
            return Attempt::GaveUp(e);
        }
        loop {
            let spline = match fit_on_division(hier, &division, order, 0.0) {
                Ok(sp) => sp,
                Err(e) => return Attempt::GaveUp(e),
            };
            let diagnostics = check_levels(&spline, hier, t, &division);
            self.table(&diagnostics.levels);
            if diagnostics.accepted {
                let _ = writeln!(self.log, "Good spline found with threshold T = {t}");
                return Attempt::Accepted(FitResult {
                    spline,
                    diagnostics,
                    jump_penalty: 0.0,
                });
            }

            let mut next = Vec::with_capacity(2 * division.len());
            let mut any_failed = false;
            for (i, iv) in division.intervals.iter().enumerate() {
                let _ = writeln!(
                    self.log,
                    "Checking interval {i} (order: {}, number: {})",
                    iv.order, iv.number
                );
                let (verdict, records) = check_interval(&spline, hier, iv, t);
                push_rows(&mut self.log, &records);
                match verdict {
                    IntervalCheck::Pass => next.push(*iv),
                    IntervalCheck::Fail { .. } => {
                        let _ = writeln!(self.log, "This interval fit is not good");
                        any_failed = true;
                        match self.split(iv) {
                            Ok((a, b)) => next.extend([a, b]),
                            Err(e) => return Attempt::GaveUp(e),
                        }
                    }
                }
            }

            if !any_failed {
                let Some(worst) = worst_interval(&spline, hier, &division) else {
                    return Attempt::GaveUp(FitError::NoAcceptableFit);
                };
                let iv = division.intervals[worst];
                let _ = writeln!(
                    self.log,
                    "All intervals pass; splitting interval {worst} (order: {}, number: {}) holding the largest residual",
                    iv.order, iv.number
                );
                next.clear();
                for (i, iv) in division.intervals.iter().enumerate() {
                    if i == worst {
                        match self.split(iv) {
                            Ok((a, b)) => next.extend([a, b]),
                            Err(e) => return Attempt::GaveUp(e),
                        }
                    } else {
                        next.push(*iv);
                    }
                }
            }
            division = IntervalDivision::new(next);
        }
    }

    fn split(&self, iv: &Interval) -> Result<(Interval, Interval), FitError> {
        let (a, b) = split_interval(iv, self.hier, self.params.min_level)?;
        ensure_determined(self.hier, &a, self.params.spline_order)?;
        ensure_determined(self.hier, &b, self.params.spline_order)?;
        Ok((a, b))
    }

    fn run(&mut self) -> Result<FitResult, FitError> {
        self.params.validate()?;
        let ladder = self.params.thresholds();

        let t0 = ladder[0];
        let zero = zero_statistics(self.hier, t0);
        let _ = writeln!(self.log, "Checking compatibility with zero (T = {t0})");
        let _ = writeln!(self.log, "{LOG_TABLE_HEADER}");
        push_rows(&mut self.log, &zero);
        let is_zero = zero.iter().all(LevelRecord::passes);
        let _ = writeln!(
            self.log,
            "Data is {}compatible with zero",
            if is_zero { "" } else { "not " }
        );
        if is_zero && self.params.abort_if_zero {
            return Err(FitError::ZeroCompatible);
        }

        let _ = writeln!(self.log, "BHM fit:");
        for t in ladder {
            match self.attempt(t) {
                Attempt::Accepted(mut result) => {
                    if self.params.jump_suppression {
                        let (spline, weight) = jump_suppression_refit(
                            self.hier,
                            &result.diagnostics.division,
                            self.params.spline_order,
                            t,
                        )?;
                        let _ = writeln!(
                            self.log,
                            "Jump suppression refit with penalty weight {weight}"
                        );
                        result.diagnostics =
                            check_levels(&spline, self.hier, t, &result.diagnostics.division);
                        result.spline = spline;
                        result.jump_penalty = weight;
                        self.table(&result.diagnostics.levels);
                    }
                    return Ok(result);
                }
                Attempt::GaveUp(e) => {
                    let _ = writeln!(self.log, "{e}");
                    let _ = writeln!(self.log, "No acceptable spline found with threshold T = {t}");
                }
            }
        }
        Err(FitError::NoAcceptableFit)
    }
}

/// Index of the interval holding the bin with the largest normalized
/// residual among bins that lie inside a single interval.
fn worst_interval(
    sp: &BhmSpline,
    hier: &BinHierarchy,
    division: &IntervalDivision,
) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for (i, iv) in division.intervals.iter().enumerate() {
        for n in iv.order..=hier.finest_used_level() {
            for b in hier.bins_within(n, iv.order, iv.number) {
                if !b.usable {
                    continue;
                }
                let r = residual(sp, b).abs();
                if best.is_none_or(|(v, _)| r > v) {
                    best = Some((r, i));
                }
            }
        }
    }
    best.map(|(_, i)| i)
}

/// Runs the complete adaptive fit, including the threshold ladder, the zero
/// check and the optional jump-suppression refit.
pub fn bhm_fit(hier: &BinHierarchy, params: &FitParams) -> FitRun {
    let mut fitter = Fitter {
        hier,
        params,
        log: String::new(),
    };
    let outcome = fitter.run();
    FitRun {
        outcome,
        log: fitter.log,
    }
}
