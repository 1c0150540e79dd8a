//! Text histogram input: parsing, validation and normalization.
//!
//! The format is line oriented and blank separated:
//!
//! ```text
//! A N_exc
//! x_1 N_1 [mean_1 M2_1]
//! ...
//! x_max
//! ```
//!
//! Bin lines with only two fields describe plain counters (`mean = 1`,
//! `M2 = 0`). Blank lines and lines starting with `#` are skipped.

use std::fmt::Write as _;

use thiserror::Error;

use crate::format::fmt_f64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HistogramError {
    #[error("histogram input contains no samples")]
    EmptyInput,
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: bin boundary {value} does not exceed the previous boundary {previous}")]
    NonMonotonicBoundaries { line: usize, previous: f64, value: f64 },
    #[error("histogram has {count} bins; the bin count must be a power of two and at least 2")]
    BinCountNotPowerOfTwo { count: usize },
    #[error("line {line}: negative sample count")]
    NegativeCount { line: usize },
    #[error("line {line}: negative scaled variance {value}")]
    NegativeScaledVariance { line: usize, value: f64 },
}

/// One elementary input bin: left boundary and accumulated sample statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementaryBin {
    pub x_min: f64,
    pub count: u64,
    pub mean: f64,
    /// Sum of squared deviations of the samples from `mean`.
    pub m2: f64,
}

impl ElementaryBin {
    pub fn new(x_min: f64, count: u64, mean: f64, m2: f64) -> Self {
        if count == 0 {
            Self {
                x_min,
                count,
                mean: 0.0,
                m2: 0.0,
            }
        } else {
            Self {
                x_min,
                count,
                mean,
                m2,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    bins: Vec<ElementaryBin>,
    x_max: f64,
    normalization: f64,
    excluded: u64,
    total: u64,
}

impl Histogram {
    /// Builds a histogram from already validated parts.
    ///
    /// Performs the same checks as the parser, reporting line 0 for
    /// positional errors.
    pub fn new(
        bins: Vec<ElementaryBin>,
        x_max: f64,
        normalization: f64,
        excluded: u64,
    ) -> Result<Self, HistogramError> {
        let count = bins.len();
        if count < 2 || !count.is_power_of_two() {
            return Err(HistogramError::BinCountNotPowerOfTwo { count });
        }
        let mut previous = bins[0].x_min;
        for x in bins.iter().skip(1).map(|b| b.x_min).chain([x_max]) {
            if x.partial_cmp(&previous) != Some(std::cmp::Ordering::Greater) {
                return Err(HistogramError::NonMonotonicBoundaries {
                    line: 0,
                    previous,
                    value: x,
                });
            }
            previous = x;
        }
        if let Some(b) = bins.iter().find(|b| b.m2 < 0.0) {
            return Err(HistogramError::NegativeScaledVariance {
                line: 0,
                value: b.m2,
            });
        }
        let bins: Vec<_> = bins
            .into_iter()
            .map(|b| ElementaryBin::new(b.x_min, b.count, b.mean, b.m2))
            .collect();
        let total = excluded + bins.iter().map(|b| b.count).sum::<u64>();
        if total == 0 {
            return Err(HistogramError::EmptyInput);
        }
        Ok(Self {
            bins,
            x_max,
            normalization,
            excluded,
            total,
        })
    }

    pub fn bins(&self) -> &[ElementaryBin] {
        &self.bins
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn x_min(&self) -> f64 {
        self.bins[0].x_min
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn excluded(&self) -> u64 {
        self.excluded
    }

    /// Total number of samples, including those outside the histogram range.
    pub fn total_samples(&self) -> u64 {
        self.total
    }

    /// `K` such that the histogram holds `2^K` bins.
    pub fn power(&self) -> u32 {
        self.bins.len().trailing_zeros()
    }

    /// Right boundary of bin `i`.
    pub fn bin_upper(&self, i: usize) -> f64 {
        self.bins.get(i + 1).map_or(self.x_max, |b| b.x_min)
    }

    /// Divides means by `A` and scaled variances by `A^2`.
    ///
    /// `A = 0` and `A = 1` leave the data untouched. The returned histogram
    /// always carries `A = 1`.
    pub fn normalize(&self) -> Histogram {
        let a = self.normalization;
        let mut out = self.clone();
        out.normalization = 1.0;
        if a == 0.0 || a == 1.0 {
            return out;
        }
        for b in &mut out.bins {
            b.mean /= a;
            b.m2 /= a * a;
        }
        out
    }

    /// Writes the histogram in the line-oriented input format, always with
    /// four fields per bin line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {}", fmt_f64(self.normalization), self.excluded);
        for b in &self.bins {
            let _ = writeln!(
                s,
                "{} {} {} {}",
                fmt_f64(b.x_min),
                b.count,
                fmt_f64(b.mean),
                fmt_f64(b.m2)
            );
        }
        let _ = writeln!(s, "{}", fmt_f64(self.x_max));
        s
    }
}

fn parse_real(tok: &str, line: usize) -> Result<f64, HistogramError> {
    match tok.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(HistogramError::MalformedLine {
            line,
            reason: format!("`{tok}` is not a finite number"),
        }),
    }
}

fn parse_count(tok: &str, line: usize) -> Result<u64, HistogramError> {
    if let Ok(n) = tok.parse::<u64>() {
        return Ok(n);
    }
    if tok.parse::<i64>().is_ok() {
        return Err(HistogramError::NegativeCount { line });
    }
    let v = parse_real(tok, line)?;
    if v < 0.0 {
        return Err(HistogramError::NegativeCount { line });
    }
    if v.fract() != 0.0 || v > u64::MAX as f64 {
        return Err(HistogramError::MalformedLine {
            line,
            reason: format!("count `{tok}` is not an integer"),
        });
    }
    Ok(v as u64)
}

/// Parses and validates the histogram text format.
pub fn parse_histogram(text: &str) -> Result<Histogram, HistogramError> {
    let lines: Vec<(usize, Vec<&str>)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(i, l)| (i, l.split_whitespace().collect()))
        .collect();
    if lines.is_empty() {
        return Err(HistogramError::EmptyInput);
    }

    let (hline, header) = &lines[0];
    if header.len() != 2 {
        return Err(HistogramError::MalformedLine {
            line: *hline,
            reason: format!("header needs 2 fields (A N_exc), found {}", header.len()),
        });
    }
    let normalization = parse_real(header[0], *hline)?;
    let excluded = parse_count(header[1], *hline)?;

    if lines.len() < 2 {
        return Err(HistogramError::BinCountNotPowerOfTwo { count: 0 });
    }
    let (tline, trailer) = &lines[lines.len() - 1];
    if trailer.len() != 1 {
        return Err(HistogramError::MalformedLine {
            line: *tline,
            reason: format!(
                "last line must hold exactly one value (x_max), found {}",
                trailer.len()
            ),
        });
    }

    let mut bins = Vec::with_capacity(lines.len().saturating_sub(2));
    let mut previous: Option<f64> = None;
    for (line, fields) in &lines[1..lines.len() - 1] {
        let line = *line;
        let (mean, m2) = match fields.len() {
            2 => (1.0, 0.0),
            4 => (parse_real(fields[2], line)?, parse_real(fields[3], line)?),
            n => {
                return Err(HistogramError::MalformedLine {
                    line,
                    reason: format!("bin line needs 2 or 4 fields, found {n}"),
                })
            }
        };
        let x_min = parse_real(fields[0], line)?;
        let count = parse_count(fields[1], line)?;
        if m2 < 0.0 {
            return Err(HistogramError::NegativeScaledVariance { line, value: m2 });
        }
        if let Some(p) = previous {
            if x_min <= p {
                return Err(HistogramError::NonMonotonicBoundaries {
                    line,
                    previous: p,
                    value: x_min,
                });
            }
        }
        previous = Some(x_min);
        bins.push(ElementaryBin::new(x_min, count, mean, m2));
    }

    let x_max = parse_real(trailer[0], *tline)?;
    if let Some(p) = previous {
        if x_max <= p {
            return Err(HistogramError::NonMonotonicBoundaries {
                line: *tline,
                previous: p,
                value: x_max,
            });
        }
    }
    if bins.len() < 2 || !bins.len().is_power_of_two() {
        return Err(HistogramError::BinCountNotPowerOfTwo { count: bins.len() });
    }

    let total = excluded + bins.iter().map(|b| b.count).sum::<u64>();
    if total == 0 {
        return Err(HistogramError::EmptyInput);
    }
    Ok(Histogram {
        bins,
        x_max,
        normalization,
        excluded,
        total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_field_lines_are_plain_counters() {
        let h = parse_histogram("1 0\n0.0 10\n0.5 30\n1.0\n").unwrap();
        assert_eq!(h.normalization(), 1.0);
        assert_eq!(h.excluded(), 0);
        assert_eq!(h.x_max(), 1.0);
        assert_eq!(h.total_samples(), 40);
        assert_eq!(
            h.bins(),
            &[
                ElementaryBin::new(0.0, 10, 1.0, 0.0),
                ElementaryBin::new(0.5, 30, 1.0, 0.0)
            ]
        );
    }

    #[test]
    fn boundaries_must_increase() {
        let err = parse_histogram("1 0\n0.0 1\n0.5 1\n0.4 1\n0.6 1\n1.0\n").unwrap_err();
        assert!(matches!(
            err,
            HistogramError::NonMonotonicBoundaries { line: 4, .. }
        ));
        let err = parse_histogram("1 0\n0.0 1\n0.5 1\n0.5\n").unwrap_err();
        assert!(matches!(err, HistogramError::NonMonotonicBoundaries { .. }));
    }

    #[test]
    fn bin_count_power_of_two() {
        let err = parse_histogram("1 0\n0 1\n1 1\n2 1\n3\n").unwrap_err();
        assert_eq!(err, HistogramError::BinCountNotPowerOfTwo { count: 3 });
        let err = parse_histogram("1 0\n0 1\n3\n").unwrap_err();
        assert_eq!(err, HistogramError::BinCountNotPowerOfTwo { count: 1 });
    }

    #[test]
    fn malformed_lines() {
        for text in [
            "1\n0 1\n1 1\n2\n",
            "1 0\n0 1 1\n1 1\n2\n",
            "1 0\n0 1\n1 1\n2 3\n",
            "1 0\n0 1.5\n1 1\n2\n",
            "1 0\n0 x\n1 1\n2\n",
            "1 0\n0 1\n1 1\nnan\n",
        ] {
            assert!(
                matches!(
                    parse_histogram(text),
                    Err(HistogramError::MalformedLine { .. })
                ),
                "{text:?}"
            );
        }
    }

    #[test]
    fn negative_values() {
        assert_eq!(
            parse_histogram("1 0\n0 -3\n1 1\n2\n").unwrap_err(),
            HistogramError::NegativeCount { line: 2 }
        );
        assert_eq!(
            parse_histogram("1 -1\n0 3\n1 1\n2\n").unwrap_err(),
            HistogramError::NegativeCount { line: 1 }
        );
        assert!(matches!(
            parse_histogram("1 0\n0 3 1 -0.5\n1 1\n2\n").unwrap_err(),
            HistogramError::NegativeScaledVariance { line: 2, .. }
        ));
    }

    #[test]
    fn empty_input() {
        assert_eq!(parse_histogram("").unwrap_err(), HistogramError::EmptyInput);
        assert_eq!(
            parse_histogram("\n  \n").unwrap_err(),
            HistogramError::EmptyInput
        );
        assert_eq!(
            parse_histogram("1 0\n0 0\n1 0\n2\n").unwrap_err(),
            HistogramError::EmptyInput
        );
    }

    #[test]
    fn empty_bins_drop_their_statistics() {
        let h = parse_histogram("1 0\n0 0 5 7\n1 4 2 1\n2\n").unwrap();
        assert_eq!(h.bins()[0], ElementaryBin::new(0.0, 0, 0.0, 0.0));
        assert_eq!(h.bins()[0].mean, 0.0);
    }

    #[test]
    fn blank_and_comment_lines_are_skipped() {
        let h = parse_histogram("# made by hand\n2 5\n\n0 1e1 4 8\n   \n1 10 4 8\n2e0\n").unwrap();
        assert_eq!(h.total_samples(), 25);
        assert_eq!(h.normalization(), 2.0);
    }

    #[test]
    fn normalize_divides_by_a() {
        let h = parse_histogram("2 0\n0 10 4 8\n1 10 4 8\n2\n").unwrap();
        let n = h.normalize();
        assert_eq!(n.bins()[0].mean, 2.0);
        assert_eq!(n.bins()[0].m2, 2.0);
        assert_eq!(n.normalization(), 1.0);
        assert_eq!(n.normalize(), n);
    }

    #[test]
    fn normalize_identity_cases() {
        for a in ["1", "0"] {
            let h = parse_histogram(&format!("{a} 0\n0 10 4 8\n1 10 4 8\n2\n")).unwrap();
            assert_eq!(h.normalize().bins(), h.bins());
        }
    }
}
