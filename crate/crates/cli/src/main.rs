use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ballsaddle::certificate::{read_certificate, Certificate};
use ballsaddle::config::{parse_config, Command};
use ballsaddle::runner::{run, verify};
use ballsaddle::{Error, Result};
use clap::Parser;

const THREADS_VAR: &str = "BALLSADDLE_THREADS";

/// Saddle points, variational inequalities and best approximation on small balls.
///
/// Commands: constants, saddle, vi, vi-shifted, best-approx, prox-pair,
/// small-radius, verify. `verify` takes a certificate as its `--config`.
#[derive(Parser, Debug)]
#[command(name = "ballsaddle", version)]
struct Cli {
    command: String,
    #[arg(long)]
    config: PathBuf,
    /// Ball radius; defaults to the admissible radius.
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Certificate path; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Accept sampled constants and radii beyond the certified bound.
    #[arg(long)]
    heuristic: bool,
}

fn init_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidInput(format!("{THREADS_VAR} must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidInput(e.to_string()))
}

/// Write via a temporary file in the target directory so readers never see a
/// partial document.
fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(text.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, text),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn summarize(cert: &Certificate) {
    let verdict = if cert.passed { "PASS" } else { "FAIL" };
    eprintln!(
        "{} [{:?}] {verdict}: r_max = {:e}, {} checks",
        cert.command.name(),
        cert.mode,
        cert.constants.r_max,
        cert.checks.len()
    );
    if let Some(sol) = &cert.solution {
        eprintln!("  r = {:e}, x* = {:?}", sol.r, sol.x_star);
    }
    if let Some(c) = cert.first_failure() {
        eprintln!("  failed {}: worst {:e} > {:e}", c.name, c.worst, c.threshold);
    }
}

fn execute(cli: &Cli) -> Result<i32> {
    init_threads()?;
    let command = Command::parse(&cli.command)?;
    if command == Command::Verify {
        let mut cert = read_certificate(&cli.config)?;
        if let Some(seed) = cli.seed {
            cert.config.seed = seed;
        }
        let v = verify(&cert)?;
        let verdict = if v.passed { "PASS" } else { "FAIL" };
        eprintln!("verify {}: {verdict}, {} checks", v.source_command.name(), v.checks.len());
        if let Some(c) = v.checks.iter().find(|c| !c.passed) {
            eprintln!("  failed {}: worst {:e} > {:e}", c.name, c.worst, c.threshold);
        }
        emit(cli.out.as_deref(), &v.to_json()?)?;
        return Ok(v.exit_code());
    }

    let text = std::fs::read_to_string(&cli.config)?;
    let mut cfg = parse_config(&text)?;
    match cfg.command {
        Some(c) if c != command => {
            return Err(Error::Config {
                path: "command".into(),
                message: format!("config is for `{}`, invoked as `{}`", c.name(), command.name()),
            });
        }
        _ => cfg.command = Some(command),
    }
    if cli.r.is_some() {
        cfg.r = cli.r;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.heuristic |= cli.heuristic;
    let out = cli.out.clone().or_else(|| cfg.output_path.as_ref().map(PathBuf::from));

    let cert = run(&cfg)?;
    summarize(&cert);
    emit(out.as_deref(), &cert.to_json()?)?;
    Ok(cert.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
