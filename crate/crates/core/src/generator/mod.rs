//! Samples test functions into histogram files.
//!
//! Points are drawn from `p(x) = |f(x)| / Z` on the function's support and
//! carry the weight `f(x) / p(x) = sign(f(x)) Z`, so each bin estimates the
//! integral of `f` over it. `Z = 1` for every function whose `|f|` is
//! normalized on its support.

mod accumulate;
mod functions;
mod sampler;

use std::fmt::Write as _;
use std::path::PathBuf;

use rand::SeedableRng;
use rand_pcg::Pcg64;
use thiserror::Error;

pub use accumulate::{geometric_ratio, nonuniform_edges, HistogramAccumulator};
pub use functions::{functions, lookup, TestFunction};
pub use sampler::RejectionSampler;

use crate::format::fmt_f64;
use crate::histogram::{Histogram, HistogramError};
use crate::params::{parse_entries, ParamError};

/// File name of the additional non-uniform histogram.
pub const NONUNIFORM_FILE: &str = "nonuniform_histogram.dat";

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("function name `{0}` is ambiguous")]
    AmbiguousFunction(String),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Histogram(#[from] HistogramError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub function: String,
    pub sample_size: u64,
    pub power_bins: u32,
    pub seed: u64,
    pub histogram_output: PathBuf,
    /// `None` disables the function grid.
    pub grid_output: Option<PathBuf>,
    pub grid_points: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            function: "quartic_polynomial".into(),
            sample_size: 100_000,
            power_bins: 12,
            seed: 1,
            histogram_output: "histogram.dat".into(),
            grid_output: None,
            grid_points: 512,
        }
    }
}

impl GeneratorConfig {
    pub fn parse(text: &str) -> Result<Self, GeneratorError> {
        let mut cfg = Self::default();
        for e in parse_entries(text)? {
            match e.key.as_str() {
                "function" => cfg.function = e.value.clone(),
                "samplesize" => cfg.sample_size = e.parse_int("SampleSize")?,
                "powerbins" => cfg.power_bins = e.parse_int("PowerBins")?,
                "seed" => cfg.seed = e.parse_int("Seed")?,
                "histogramoutput" => {
                    cfg.histogram_output = e.parse_path().ok_or_else(|| {
                        GeneratorError::InvalidConfig("HistogramOutput must not be empty".into())
                    })?
                }
                "gridoutput" => cfg.grid_output = e.parse_path(),
                "gridpoints" => cfg.grid_points = e.parse_int("GridPoints")?,
                _ => {
                    return Err(ParamError::UnknownKey {
                        line: e.line,
                        key: e.key,
                    }
                    .into())
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), GeneratorError> {
        if self.sample_size < 1 {
            return Err(GeneratorError::InvalidConfig("SampleSize must be at least 1".into()));
        }
        if !(1..=20).contains(&self.power_bins) {
            return Err(GeneratorError::InvalidConfig(
                "PowerBins must be between 1 and 20".into(),
            ));
        }
        if self.grid_points < 2 {
            return Err(GeneratorError::InvalidConfig("GridPoints must be at least 2".into()));
        }
        lookup(&self.function).map(|_| ())
    }

    /// Canonical parameter file; parsing it gives back `self`.
    pub fn to_text(&self) -> String {
        let grid = self
            .grid_output
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_default();
        let rows = [
            ("Function", self.function.clone(), "test function, possibly abbreviated"),
            ("SampleSize", self.sample_size.to_string(), "number of sampled points"),
            ("PowerBins", self.power_bins.to_string(), "histogram has 2^PowerBins bins"),
            ("Seed", self.seed.to_string(), "random seed"),
            (
                "HistogramOutput",
                format!("\"{}\"", self.histogram_output.display()),
                "histogram file",
            ),
            ("GridOutput", format!("\"{grid}\""), "function values on a grid, empty to disable"),
            ("GridPoints", self.grid_points.to_string(), "number of grid points"),
        ];
        let mut s = String::new();
        for (key, value, comment) in rows {
            let _ = writeln!(s, "{:<18}= {:<18}# {comment}", key, value);
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub function: TestFunction,
    pub histogram: Histogram,
    /// Same samples on the non-uniform grid, for `triple_gaussian` only.
    pub nonuniform: Option<Histogram>,
}

pub fn generate(cfg: &GeneratorConfig) -> Result<Generated, GeneratorError> {
    cfg.validate()?;
    let func = lookup(&cfg.function)?;
    let sampler = RejectionSampler::new(func);
    let mut rng = Pcg64::seed_from_u64(cfg.seed);
    let (lo, hi) = func.range;
    let mut uniform = HistogramAccumulator::uniform(lo, hi, cfg.power_bins);
    let mut nonuniform =
        (func.name == "triple_gaussian").then(|| HistogramAccumulator::with_edges(nonuniform_edges(lo, hi)));
    for _ in 0..cfg.sample_size {
        let (x, fx) = sampler.sample(&mut rng);
        let w = func.support_mass.copysign(fx);
        uniform.push(x, w);
        if let Some(acc) = nonuniform.as_mut() {
            acc.push(x, w);
        }
    }
    Ok(Generated {
        function: func,
        histogram: uniform.into_histogram()?,
        nonuniform: nonuniform.map(|a| a.into_histogram()).transpose()?,
    })
}

/// Two columns `x f(x)` on `points` equidistant abscissas over the
/// histogram range.
pub fn function_grid(func: &TestFunction, points: usize) -> String {
    let (lo, hi) = func.range;
    let mut s = String::from("# x f(x)\n");
    for i in 0..points {
        let x = if i + 1 == points {
            hi
        } else {
            lo + (hi - lo) * i as f64 / (points - 1) as f64
        };
        let _ = writeln!(s, "{} {}", fmt_f64(x), fmt_f64(func.eval(x)));
    }
    s
}
