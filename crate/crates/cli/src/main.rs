use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use plate_sim::{resolve, run_experiment, AppError, Overrides};

/// Runs a plate experiment described by a TOML config file.
#[derive(Parser, Debug)]
#[command(name = "simulate", version)]
struct Cli {
    /// Config file; `-` reads an empty document so a preset alone suffices.
    config: PathBuf,
    /// Base preset, overriding any `preset` key in the file.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long = "out")]
    out: Option<PathBuf>,
    #[arg(long)]
    record_every: Option<usize>,
    /// `key=value`; bare keys address `[flags]`, dotted keys any field.
    #[arg(long = "flag", value_parser = parse_kv)]
    flags: Vec<(String, String)>,
}

fn parse_kv(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| format!("expected key=value, got '{s}'"))
}

#[cfg(feature = "parallel")]
fn init_threads() -> Result<(), AppError> {
    if let Ok(v) = std::env::var("PLATE_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| AppError::Config(format!("PLATE_THREADS = '{v}' is not a count")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| AppError::Config(e.to_string()))?;
    }
    Ok(())
}

#[cfg(not(feature = "parallel"))]
fn init_threads() -> Result<(), AppError> {
    Ok(())
}

fn main_inner(cli: Cli) -> Result<i32, AppError> {
    init_threads()?;
    let text = if cli.config.as_os_str() == "-" { String::new() } else { std::fs::read_to_string(&cli.config)? };
    let ov = Overrides { preset: cli.preset, output_dir: cli.out, record_every: cli.record_every, flags: cli.flags };
    let cfg = resolve(&text, &ov)?;
    for w in cfg.warnings() {
        eprintln!("warning: {w}");
    }
    let report = run_experiment(&cfg)?;
    print!("{}", report.summary);
    Ok(report.exit_code)
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
