//! `bhm PARAMFILE`: fits a BHM spline to a sampled histogram.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bhm::fit::{bhm_fit, FitError};
use bhm::gof::fit_info_text;
use bhm::hierarchy::{build_hierarchy, HierarchyError};
use bhm::histogram::{parse_histogram, Histogram, HistogramError};
use bhm::params::{ParamError, RunConfig};
use log::info;
use thiserror::Error;

const HELP: &str = "\
Usage: bhm PARAMFILE

Fits a smooth spline with error band to a sampled histogram using the bin
hierarchy method. PARAMFILE is a `key = value` parameter file; an empty
string (bhm \"\") selects the default parameters, reads the histogram from
standard input and writes the spline to standard output.

Progress and the fitting log go to standard error (filter with RUST_LOG).

Exit status:
  0  spline written
  1  usage error
  2  malformed parameter file or histogram
  3  file could not be read or written
  4  no acceptable spline for any threshold
  5  data is compatible with zero (AbortIfZero = true)
  6  other fit failure
";

#[derive(Debug, Error)]
enum RunError {
    #[error("{0}")]
    Params(#[from] ParamError),
    #[error("histogram: {0}")]
    Histogram(#[from] HistogramError),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
    #[error(transparent)]
    Fit(#[from] FitError),
}

impl RunError {
    fn io(path: Option<&Path>, source: io::Error) -> Self {
        let path = path.map_or_else(|| "standard stream".into(), |p| p.display().to_string());
        RunError::Io { path, source }
    }

    fn exit_code(&self) -> u8 {
        match self {
            RunError::Params(_) | RunError::Histogram(_) => 2,
            RunError::Io { .. } => 3,
            RunError::Fit(FitError::NoAcceptableFit) => 4,
            RunError::Fit(FitError::ZeroCompatible) => 5,
            RunError::Hierarchy(_) | RunError::Fit(_) => 6,
        }
    }
}

fn read_input(path: Option<&PathBuf>) -> Result<String, RunError> {
    match path {
        Some(p) => fs::read_to_string(p).map_err(|e| RunError::io(Some(p), e)),
        None => {
            let mut s = String::new();
            io::stdin()
                .read_to_string(&mut s)
                .map_err(|e| RunError::io(None, e))?;
            Ok(s)
        }
    }
}

fn write_output(path: Option<&PathBuf>, text: &str) -> Result<(), RunError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| RunError::io(Some(p), e)),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| RunError::io(None, e))
        }
    }
}

fn describe(h: &Histogram) {
    info!(
        "Histogram: {} bins on [{}, {}], {} samples ({} outside), normalization A = {}",
        h.bins().len(),
        h.x_min(),
        h.x_max(),
        h.total_samples(),
        h.excluded(),
        h.normalization()
    );
}

fn run(param_file: &str) -> Result<(), RunError> {
    let cfg = if param_file.is_empty() {
        RunConfig::default()
    } else {
        let text = fs::read_to_string(param_file)
            .map_err(|e| RunError::io(Some(Path::new(param_file)), e))?;
        RunConfig::parse(&text)?
    };
    let params_text = cfg.to_text();
    info!("Parameters:");
    for line in params_text.lines() {
        info!("  {line}");
    }

    let hist = parse_histogram(&read_input(cfg.input.as_ref())?)?;
    describe(&hist);
    let hist = hist.normalize();
    let hier = build_hierarchy(&hist, cfg.fit.data_points_min, cfg.fit.usable_bin_fraction)?;
    info!(
        "Hierarchy levels 0..={} used, {} elementary bins",
        hier.finest_used_level(),
        hist.bins().len()
    );

    let fit_run = bhm_fit(&hier, &cfg.fit);
    for line in fit_run.log.lines() {
        info!("{line}");
    }
    let result = fit_run.outcome?;
    let t = result.diagnostics.threshold;

    if cfg.print_fit_info {
        // Leading `#` lines keep a spline sharing standard output readable.
        let info_text = fit_info_text(&result.diagnostics.levels, t);
        let mut out = io::stdout().lock();
        out.write_all(info_text.as_bytes())
            .map_err(|e| RunError::io(None, e))?;
    }

    let comments = format!(
        "BHM spline, order {}, {} pieces, threshold T = {t}\nParameters:\n{params_text}",
        result.spline.order(),
        result.spline.pieces().len()
    );
    write_output(cfg.output.as_ref(), &result.spline.to_text(&comments))?;
    if let Some(grid) = &cfg.grid_output {
        fs::write(grid, result.spline.grid_text(cfg.grid_points))
            .map_err(|e| RunError::io(Some(grid), e))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format(|buf, record| writeln!(buf, "{}", record.args()))
        .init();

    let args: Vec<String> = std::env::args().skip(1).collect();
    match args.as_slice() {
        [flag] if flag == "-h" || flag == "--help" => {
            print!("{HELP}");
            ExitCode::SUCCESS
        }
        [param_file] => match run(param_file) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("bhm: {e}");
                ExitCode::from(e.exit_code())
            }
        },
        _ => {
            eprint!("{HELP}");
            ExitCode::from(1)
        }
    }
}
