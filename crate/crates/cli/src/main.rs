use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use micromacro::exec::{with_jobs, Execution};
use micromacro_cli::config::{describe, RunConfig};
use micromacro_cli::{run, write_output, Command};

#[derive(Parser)]
#[command(name = "micromacro", version, about = "Light-matter micro-macro entanglement model runner")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Configuration file (`section.key = value` lines)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides run.out)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed (overrides run.seed)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Also write SVG plots
    #[arg(long, global = true)]
    svg: bool,
    /// Worker threads; 1 runs sequentially (overrides run.jobs)
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Witness curves (S, PPT, concurrence) with bands
    Curves,
    /// Macroscopicity: guessing probability, sigma_max, effective size
    Size,
    /// HOM visibility and window dependence
    Hom,
    /// Detailed SPDC model against the Monte-Carlo oracle
    Detailed,
    /// Simulated tomography and maximum-likelihood reconstruction
    Tomo,
    /// Run the invariant suite; exit 1 on any failure
    Validate,
    /// Print the configuration schema with defaults
    Schema,
}

fn configure(cli: &Cli) -> Result<RunConfig, micromacro_cli::config::ConfigError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &cli.out {
        cfg.set("run.out", &o.display().to_string())?;
    }
    if let Some(s) = cli.seed {
        cfg.set("run.seed", &s.to_string())?;
    }
    if cli.svg {
        cfg.set("run.svg", "true")?;
    }
    if let Some(j) = cli.jobs {
        cfg.set("run.jobs", &j.to_string())?;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cmd = match cli.command {
        Cmd::Curves => Command::Curves,
        Cmd::Size => Command::Size,
        Cmd::Hom => Command::Hom,
        Cmd::Detailed => Command::Detailed,
        Cmd::Tomo => Command::Tomo,
        Cmd::Validate => Command::Validate,
        Cmd::Schema => {
            print!("{}", describe());
            return ExitCode::SUCCESS;
        }
    };
    let cfg = match configure(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let jobs = cfg.usize("run.jobs");
    let exec = if jobs == 1 { Execution::Sequential } else { Execution::Parallel };
    let result = with_jobs((jobs > 1).then_some(jobs), || run(cmd, &cfg, exec));
    let out = match result {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    for m in &out.messages {
        println!("{m}");
    }
    match write_output(cmd, &cfg, &out) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {p}");
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    }
    if out.failed {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}
