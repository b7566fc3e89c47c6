use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chemostokes::diagnostics::write_csv;
use chemostokes::harness::snapshot::{read_snapshot_raw, write_snapshot};
use chemostokes::harness::study::{epsilon_study, refinement_study, ConvergenceTable};
use chemostokes::timestepper::{progress_line, run_with};
use chemostokes::{Error, Result, SimConfig};

#[derive(Parser)]
#[command(name = "chemostokes", version, about = "Chemotaxis-Stokes finite-volume simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML run configuration.
    config: PathBuf,
    /// Override a config key, e.g. `--set physics.m=1.5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation, printing a progress line per diagnostics record.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Suppress progress lines.
        #[arg(long)]
        quiet: bool,
    },
    /// Repeat the run for a decreasing list of eps and tabulate L1 distances.
    EpsStudy {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        /// Write the table as CSV here as well as to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeat the run on nested meshes, e.g. `--resolutions 32x32,64x64,128x128`.
    Refine {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        resolutions: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the header and field ranges of a snapshot.
    Inspect { snapshot: PathBuf },
}

fn parse_resolution(s: &str) -> Result<Vec<usize>> {
    s.split('x')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidArgument(format!("bad resolution `{s}`, expected e.g. 32x32")))
        })
        .collect()
}

fn emit_table(table: &ConvergenceTable, out: Option<&Path>) -> Result<()> {
    let csv = table.to_csv();
    print!("{csv}");
    if let Some(path) = out {
        std::fs::write(path, &csv).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

fn snapshot_path(dir: &Path, k: usize) -> PathBuf {
    dir.join(format!("snapshot_{k:04}.csfd"))
}

fn cmd_run(cfg: &ConfigArgs, quiet: bool) -> Result<()> {
    let config = SimConfig::load(&cfg.config, &cfg.overrides)?;
    let result = run_with(&config, |p| {
        if !quiet {
            println!("{}", progress_line(p));
        }
    });
    let out = match result {
        Ok(out) => out,
        Err(e) => {
            if let (Error::BlowUp { state, .. } | Error::Postcondition { state, .. }, Some(dir)) =
                (&e, &config.output.snapshot_dir)
            {
                let path = dir.join("abort.csfd");
                if write_snapshot(state, &path).is_ok() {
                    eprintln!("last good state written to {}", path.display());
                }
            }
            return Err(e);
        }
    };
    if let Some(path) = &config.output.csv {
        write_csv(&out.records, &config.echo(), path)?;
    }
    if let Some(dir) = &config.output.snapshot_dir {
        for (k, s) in out.snapshots.iter().enumerate() {
            write_snapshot(s, &snapshot_path(dir, k))?;
        }
    }
    Ok(())
}

fn cmd_inspect(path: &Path) -> Result<()> {
    let raw = read_snapshot_raw(path)?;
    println!("version {}", raw.version);
    println!("dim {}", raw.resolution.len());
    println!(
        "resolution {}",
        raw.resolution.iter().map(|n| n.to_string()).collect::<Vec<_>>().join("x")
    );
    println!("t {}", raw.t);
    let mut fields = vec![("n".to_string(), &raw.n), ("c".to_string(), &raw.c)];
    for (a, comp) in raw.u.iter().enumerate() {
        fields.push((format!("u{a}"), comp));
    }
    fields.push(("P".to_string(), &raw.p));
    for (name, v) in fields {
        let min = v.iter().copied().fold(f64::INFINITY, f64::min);
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = v.iter().sum();
        println!("{name}: len={} min={min} max={max} sum={sum}", v.len());
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { cfg, quiet } => cmd_run(&cfg, quiet),
        Command::EpsStudy { cfg, eps, out } => {
            let config = SimConfig::load(&cfg.config, &cfg.overrides)?;
            emit_table(&epsilon_study(&config, &eps)?, out.as_deref())
        }
        Command::Refine { cfg, resolutions, out } => {
            let config = SimConfig::load(&cfg.config, &cfg.overrides)?;
            let res = resolutions.iter().map(|s| parse_resolution(s)).collect::<Result<Vec<_>>>()?;
            emit_table(&refinement_study(&config, &res)?, out.as_deref())
        }
        Command::Inspect { snapshot } => cmd_inspect(&snapshot),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
