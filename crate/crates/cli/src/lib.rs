//! Batch front-end for the micromacro model: configuration, figure presets,
//! CSV/SVG output and the validation suite.

pub mod commands;
pub mod config;
pub mod svg;
pub mod table;
pub mod validate;

use std::fs;
use std::path::Path;

use commands::{CliError, Output};
use config::RunConfig;
use micromacro::exec::Execution;
use table::Provenance;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Curves,
    Size,
    Hom,
    Detailed,
    Tomo,
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Curves => "curves",
            Command::Size => "size",
            Command::Hom => "hom",
            Command::Detailed => "detailed",
            Command::Tomo => "tomo",
            Command::Validate => "validate",
        }
    }
}

pub fn run(cmd: Command, cfg: &RunConfig, exec: Execution) -> Result<Output, CliError> {
    match cmd {
        Command::Curves => commands::run_curves(cfg, exec),
        Command::Size => commands::run_size(cfg),
        Command::Hom => commands::run_hom(cfg),
        Command::Detailed => commands::run_detailed(cfg, exec),
        Command::Tomo => commands::run_tomo(cfg, exec),
        Command::Validate => validate::run_validate(cfg, exec),
    }
}

/// Writes every table as `<name>.csv`, optional plots, and the resolved
/// config as `<command>.config`. Returns the written paths in order.
pub fn write_output(cmd: Command, cfg: &RunConfig, out: &Output) -> Result<Vec<String>, CliError> {
    let dir = Path::new(cfg.str("run.out"));
    fs::create_dir_all(dir)?;
    let prov = Provenance {
        command: cmd.name().into(),
        config_hash: cfg.hash(),
        seed: cfg.u64("run.seed"),
    };
    let mut written = Vec::new();
    let mut put = |name: String, body: &str| -> Result<(), CliError> {
        let path = dir.join(name);
        fs::write(&path, body)?;
        written.push(path.display().to_string());
        Ok(())
    };
    put(format!("{}.config", cmd.name()), &cfg.to_text())?;
    for t in &out.tables {
        put(format!("{}.csv", t.name), &t.to_csv(&prov))?;
    }
    if cfg.bool("run.svg") {
        for (name, svg) in &out.plots {
            put(format!("{name}.svg"), svg)?;
        }
    }
    Ok(written)
}
