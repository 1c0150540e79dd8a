//! `generator PARAMFILE`: samples a test function into histogram files.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use bhm::generator::{functions, function_grid, generate, GeneratorConfig, NONUNIFORM_FILE};
use log::info;

fn help() -> String {
    let mut s = String::from(
        "\
Usage: generator PARAMFILE
       generator --list

Samples |f(x)| of a test function by rejection sampling and writes a
histogram of the weights sign(f(x)). PARAMFILE is a `key = value` file with
the keys Function, SampleSize, PowerBins, Seed, HistogramOutput, GridOutput
and GridPoints. Function names may be abbreviated to a unique prefix.
triple_gaussian additionally writes a non-uniform histogram to
",
    );
    s.push_str(NONUNIFORM_FILE);
    s.push_str(" next to HistogramOutput.\n\nFunctions:\n");
    for f in functions() {
        s.push_str(&format!(
            "  {:<20}sampled on [{}, {}], histogram on [{}, {}]\n",
            f.name, f.support.0, f.support.1, f.range.0, f.range.1
        ));
    }
    s.push_str("\nExit status: 0 success, 1 usage error, 2 invalid parameters, 3 I/O error\n");
    s
}

fn write(path: &Path, text: &str) -> Result<(), ExitCode> {
    fs::write(path, text).map_err(|e| {
        eprintln!("generator: {}: {e}", path.display());
        ExitCode::from(3)
    })?;
    info!("Wrote {}", path.display());
    Ok(())
}

fn run(param_file: &str) -> Result<(), ExitCode> {
    let text = fs::read_to_string(param_file).map_err(|e| {
        eprintln!("generator: {param_file}: {e}");
        ExitCode::from(3)
    })?;
    let invalid = |e: bhm::generator::GeneratorError| {
        eprintln!("generator: {e}");
        ExitCode::from(2)
    };
    let cfg = GeneratorConfig::parse(&text).map_err(invalid)?;
    for line in cfg.to_text().lines() {
        info!("  {line}");
    }
    let out = generate(&cfg).map_err(invalid)?;
    info!(
        "Sampled {} points of {}, {} outside the histogram range",
        cfg.sample_size,
        out.function.name,
        out.histogram.excluded()
    );

    write(&cfg.histogram_output, &out.histogram.to_text())?;
    if let Some(h) = &out.nonuniform {
        let dir = cfg.histogram_output.parent().unwrap_or(Path::new(""));
        write(&dir.join(NONUNIFORM_FILE), &h.to_text())?;
    }
    if let Some(grid) = &cfg.grid_output {
        write(grid, &function_grid(&out.function, cfg.grid_points))?;
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
            print!("{}", help());
            ExitCode::SUCCESS
        }
        [flag] if flag == "--list" => {
            for f in functions() {
                println!("{}", f.name);
            }
            ExitCode::SUCCESS
        }
        [param_file] => match run(param_file) {
            Ok(()) => ExitCode::SUCCESS,
            Err(code) => code,
        },
        _ => {
            eprint!("{}", help());
            ExitCode::from(1)
        }
    }
}
