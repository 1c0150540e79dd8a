//! Per-level goodness-of-fit bookkeeping shared by the zero check and the
//! spline fit.

use std::fmt::Write as _;

/// Largest accepted `chi_n^2 / n` for `n` used bins at threshold `t`:
/// one plus `t` standard deviations of the reduced chi-squared distribution.
pub fn acceptance_bound(used: usize, t: f64) -> f64 {
    1.0 + t * (2.0 / used as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelRecord {
    pub level: u32,
    /// Number of bins entering `chi2`.
    pub used: usize,
    pub chi2_per_bin: f64,
    pub bound: f64,
}

impl LevelRecord {
    pub fn new(level: u32, used: usize, chi2: f64, t: f64) -> Self {
        Self {
            level,
            used,
            chi2_per_bin: chi2 / used as f64,
            bound: acceptance_bound(used, t),
        }
    }

    pub fn passes(&self) -> bool {
        self.chi2_per_bin <= self.bound
    }

    /// Standard deviations by which `chi_n^2/n` exceeds one, zero when it
    /// does not.
    pub fn excess_sigmas(&self) -> f64 {
        let sd = (2.0 / self.used as f64).sqrt();
        ((self.chi2_per_bin - 1.0) / sd).max(0.0)
    }

    /// One row of the fit log table.
    pub fn log_row(&self) -> String {
        format!(
            "{:<8}{:<8}{:>9.4}{:7}{:<16.4}",
            self.level, self.used, self.chi2_per_bin, "", self.bound
        )
    }
}

pub const LOG_TABLE_HEADER: &str = "level   n       chi_n^2/n       max chi_n^2/n   ";

/// Final goodness-of-fit summary, every line prefixed with `# ` so that the
/// text can precede a spline file on the same stream.
pub fn fit_info_text(records: &[LevelRecord], t: f64) -> String {
    let mut s = format!("# Final fit, threshold T = {t}\n");
    s.push_str("# level   n       chi_n^2/n       sqrt(2/n)       excess sigmas\n");
    for r in records {
        let _ = writeln!(
            s,
            "# {:<8}{:<8}{:>9.4}{:7}{:<16.4}{:.4}",
            r.level,
            r.used,
            r.chi2_per_bin,
            "",
            (2.0 / r.used as f64).sqrt(),
            r.excess_sigmas()
        );
    }
    s
}

pub(crate) fn push_rows(out: &mut String, records: &[LevelRecord]) {
    for r in records {
        let _ = writeln!(out, "{}", r.log_row());
    }
}
