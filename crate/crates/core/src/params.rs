//! `key = value` parameter files.
//!
//! Keys are case-insensitive, string values may be wrapped in single or
//! double quotes, and `#` starts a comment that runs to the end of the line.

use std::fmt::Write as _;
use std::path::PathBuf;

use thiserror::Error;

use crate::fit::{FitParams, MAX_SPLINE_ORDER};
use crate::format::fmt_f64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("line {line}: unknown parameter `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: invalid value `{value}` for {key}: {reason}")]
    InvalidValue {
        line: usize,
        key: String,
        value: String,
        reason: String,
    },
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
}

/// One `key = value` assignment; `key` is lower-cased.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

impl Entry {
    fn invalid(&self, key: &str, reason: impl Into<String>) -> ParamError {
        ParamError::InvalidValue {
            line: self.line,
            key: key.to_string(),
            value: self.value.clone(),
            reason: reason.into(),
        }
    }

    pub fn parse_f64(&self, key: &str) -> Result<f64, ParamError> {
        self.value
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.invalid(key, "expected a number"))
    }

    pub fn parse_int<T: std::str::FromStr>(&self, key: &str) -> Result<T, ParamError> {
        self.value
            .parse::<T>()
            .map_err(|_| self.invalid(key, "expected a non-negative integer"))
    }

    pub fn parse_bool(&self, key: &str) -> Result<bool, ParamError> {
        match self.value.to_ascii_lowercase().as_str() {
            "true" | "yes" | "on" | "1" => Ok(true),
            "false" | "no" | "off" | "0" => Ok(false),
            _ => Err(self.invalid(key, "expected true or false")),
        }
    }

    /// Empty value maps to `None`.
    pub fn parse_path(&self) -> Option<PathBuf> {
        (!self.value.is_empty()).then(|| PathBuf::from(&self.value))
    }
}

fn parse_line(line: usize, raw: &str) -> Result<Option<Entry>, ParamError> {
    let malformed = |reason: &str| ParamError::MalformedLine {
        line,
        reason: reason.to_string(),
    };
    let trimmed = raw.trim();
    if trimmed.is_empty() || trimmed.starts_with('#') {
        return Ok(None);
    }
    let (key, rest) = trimmed
        .split_once('=')
        .ok_or_else(|| malformed("expected `key = value`"))?;
    let key = key.trim();
    if key.is_empty() || key.contains(char::is_whitespace) || key.contains('#') {
        return Err(malformed("missing or malformed key"));
    }
    let rest = rest.trim_start();
    let value = match rest.chars().next() {
        Some(q @ ('"' | '\'')) => {
            let body = &rest[1..];
            let end = body
                .find(q)
                .ok_or_else(|| malformed("unterminated quoted value"))?;
            let tail = body[end + 1..].trim();
            if !(tail.is_empty() || tail.starts_with('#')) {
                return Err(malformed("unexpected text after quoted value"));
            }
            body[..end].to_string()
        }
        _ => rest.split('#').next().unwrap_or("").trim().to_string(),
    };
    Ok(Some(Entry {
        line,
        key: key.to_ascii_lowercase(),
        value,
    }))
}

/// Splits a parameter file into its assignments, in file order.
pub fn parse_entries(text: &str) -> Result<Vec<Entry>, ParamError> {
    text.lines()
        .enumerate()
        .filter_map(|(i, l)| parse_line(i + 1, l).transpose())
        .collect()
}

/// Settings of one `bhm` run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// `None` reads the histogram from standard input.
    pub input: Option<PathBuf>,
    /// `None` writes the spline to standard output.
    pub output: Option<PathBuf>,
    /// `None` disables grid output.
    pub grid_output: Option<PathBuf>,
    pub grid_points: usize,
    pub print_fit_info: bool,
    pub fit: FitParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            output: None,
            grid_output: None,
            grid_points: 512,
            print_fit_info: true,
            fit: FitParams::default(),
        }
    }
}

fn path_text(p: &Option<PathBuf>) -> String {
    p.as_ref()
        .map(|p| p.display().to_string())
        .unwrap_or_default()
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ParamError> {
        let mut cfg = Self::default();
        for e in parse_entries(text)? {
            let fit = &mut cfg.fit;
            match e.key.as_str() {
                "inputfile" => cfg.input = e.parse_path(),
                "outputfile" => cfg.output = e.parse_path(),
                "gridoutput" => cfg.grid_output = e.parse_path(),
                "gridpoints" => {
                    cfg.grid_points = e.parse_int("GridPoints")?;
                    if cfg.grid_points < 2 {
                        return Err(e.invalid("GridPoints", "must be at least 2"));
                    }
                }
                "printfitinfo" => cfg.print_fit_info = e.parse_bool("PrintFitInfo")?,
                "splineorder" => {
                    fit.spline_order = e.parse_int("SplineOrder")?;
                    if !(1..=MAX_SPLINE_ORDER).contains(&fit.spline_order) {
                        return Err(e.invalid(
                            "SplineOrder",
                            format!("must be between 1 and {MAX_SPLINE_ORDER}"),
                        ));
                    }
                }
                "datapointsmin" => {
                    fit.data_points_min = e.parse_int("DataPointsMin")?;
                    if fit.data_points_min < 10 {
                        return Err(e.invalid("DataPointsMin", "must be at least 10"));
                    }
                }
                "minlevel" => {
                    fit.min_level = e.parse_int("MinLevel")?;
                    if fit.min_level < 2 {
                        return Err(e.invalid("MinLevel", "must be at least 2"));
                    }
                }
                "threshold" => {
                    fit.threshold = e.parse_f64("Threshold")?;
                    if fit.threshold < 0.0 {
                        return Err(e.invalid("Threshold", "must not be negative"));
                    }
                }
                "thresholdmax" => fit.threshold_max = e.parse_f64("ThresholdMax")?,
                "thresholdsteps" => fit.threshold_steps = e.parse_int("ThresholdSteps")?,
                "usablebinfraction" => {
                    fit.usable_bin_fraction = e.parse_f64("UsableBinFraction")?;
                    if !(fit.usable_bin_fraction > 0.0 && fit.usable_bin_fraction <= 1.0) {
                        return Err(e.invalid("UsableBinFraction", "must lie in (0, 1]"));
                    }
                }
                "jumpsuppression" => fit.jump_suppression = e.parse_bool("JumpSuppression")?,
                "abortifzero" => fit.abort_if_zero = e.parse_bool("AbortIfZero")?,
                _ => {
                    return Err(ParamError::UnknownKey {
                        line: e.line,
                        key: e.key,
                    })
                }
            }
        }
        debug_assert!(cfg.fit.validate().is_ok());
        Ok(cfg)
    }

    /// Canonical parameter file; parsing it gives back `self`.
    pub fn to_text(&self) -> String {
        let f = &self.fit;
        let yes_no = |b: bool| if b { "true" } else { "false" };
        let rows: [(&str, String, &str); 14] = [
            ("DataPointsMin", f.data_points_min.to_string(), "minimal number of samples in a usable bin"),
            ("SplineOrder", f.spline_order.to_string(), "polynomial order of the spline pieces"),
            ("MinLevel", f.min_level.to_string(), "smallest spline interval is a bin of level K - MinLevel"),
            ("Threshold", fmt_f64(f.threshold), "fit acceptance threshold"),
            ("ThresholdMax", fmt_f64(f.threshold_max), "largest threshold tried"),
            ("ThresholdSteps", f.threshold_steps.to_string(), "number of threshold increments"),
            ("UsableBinFraction", fmt_f64(f.usable_bin_fraction), "minimal fraction of usable bins per level"),
            ("JumpSuppression", yes_no(f.jump_suppression).into(), "refit minimizing highest-derivative jumps"),
            ("AbortIfZero", yes_no(f.abort_if_zero).into(), "skip the fit if data is compatible with zero"),
            ("PrintFitInfo", yes_no(self.print_fit_info).into(), "print final goodness of fit to standard output"),
            ("InputFile", format!("\"{}\"", path_text(&self.input)), "histogram input, empty for standard input"),
            ("OutputFile", format!("\"{}\"", path_text(&self.output)), "spline output, empty for standard output"),
            ("GridOutput", format!("\"{}\"", path_text(&self.grid_output)), "spline values on a grid, empty to disable"),
            ("GridPoints", self.grid_points.to_string(), "number of grid points"),
        ];
        let mut s = String::new();
        for (key, value, comment) in rows {
            let _ = writeln!(s, "{:<18}= {:<18}# {comment}", key, value);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_case() {
        let c = RunConfig::parse("threshold = 2.5  # fit threshold\nDATAPOINTSMIN = 150\n").unwrap();
        assert_eq!(c.fit.threshold, 2.5);
        assert_eq!(c.fit.data_points_min, 150);
    }

    #[test]
    fn quoted_strings() {
        let c = RunConfig::parse(
            "InputFile = \"my data.dat\" # with a space\nGridOutput = 'grid#1.dat'\nOutputFile = \"\"\n",
        )
        .unwrap();
        assert_eq!(c.input, Some(PathBuf::from("my data.dat")));
        assert_eq!(c.grid_output, Some(PathBuf::from("grid#1.dat")));
        assert_eq!(c.output, None);
    }

    #[test]
    fn validation_errors() {
        assert!(matches!(
            RunConfig::parse("DataPointsMin = 5").unwrap_err(),
            ParamError::InvalidValue { line: 1, .. }
        ));
        assert!(matches!(
            RunConfig::parse("MinLevel = 1").unwrap_err(),
            ParamError::InvalidValue { .. }
        ));
        assert!(matches!(
            RunConfig::parse("\n\nFoo = 1").unwrap_err(),
            ParamError::UnknownKey { line: 3, .. }
        ));
        assert!(matches!(
            RunConfig::parse("Threshold 2").unwrap_err(),
            ParamError::MalformedLine { line: 1, .. }
        ));
        assert!(matches!(
            RunConfig::parse("InputFile = \"abc").unwrap_err(),
            ParamError::MalformedLine { .. }
        ));
        assert!(matches!(
            RunConfig::parse("Threshold = two").unwrap_err(),
            ParamError::InvalidValue { .. }
        ));
        assert!(matches!(
            RunConfig::parse("SplineOrder = 0").unwrap_err(),
            ParamError::InvalidValue { .. }
        ));
        assert!(matches!(
            RunConfig::parse("UsableBinFraction = 0").unwrap_err(),
            ParamError::InvalidValue { .. }
        ));
    }

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
        assert_eq!(RunConfig::parse("# nothing\n\n").unwrap(), RunConfig::default());
    }

    #[test]
    fn canonical_text_round_trips() {
        let mut c = RunConfig::default();
        c.input = Some("h.dat".into());
        c.fit.threshold = 0.5;
        c.fit.jump_suppression = true;
        let text = c.to_text();
        let back = RunConfig::parse(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_text(), text);
    }
}
