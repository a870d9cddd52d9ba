use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use steklov_cli::{parse_config_at, run, Format};

/// Weighted Steklov eigenvalues and isoperimetric checks.
#[derive(Debug, Parser)]
#[command(name = "steklov", version)]
struct Args {
    /// Run configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `[output] dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    jobs: Option<usize>,
    /// Seed recorded in the reports (overrides `seed`).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn real_main() -> anyhow::Result<u8> {
    let args = Args::parse();
    let text = std::fs::read_to_string(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
    let base = args.config.parent().map(PathBuf::from).unwrap_or_default();
    let mut cfg = parse_config_at(&text, &base).with_context(|| format!("config {}", args.config.display()))?;
    if let Some(out) = args.out {
        cfg.output.dir = out;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(f) = args.format {
        cfg.output.format = f;
    }

    let outcome = run(&cfg, args.jobs)?;
    for line in &outcome.lines {
        println!("{line}");
    }
    for e in &outcome.errors {
        eprintln!("error: {e}");
    }
    for f in &outcome.files {
        eprintln!("wrote {}", f.display());
    }
    Ok(outcome.verdict.code() as u8)
}
