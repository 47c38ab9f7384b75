//! Command-line front end.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use crate::config::{Format, ScanConfig};
use crate::error::ScanError;
use crate::output::emit_outputs;
use crate::pipelines::run;
use crate::presets::preset;

#[derive(Debug, Parser)]
#[command(
    name = "nanosqueeze",
    version,
    about = "Squeezed fluorescence near a metal nanosphere"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the sweep described by a config file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run a shipped figure preset.
    Preset {
        name: String,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Parse and check a config without running it.
    Validate { config: PathBuf },
}

#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Output directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Output format; repeat for several.
    #[arg(long, value_enum)]
    pub format: Vec<FormatArg>,
    /// Worker threads; defaults to the available cores.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Series and quadrature tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
    Svg,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
            FormatArg::Svg => Format::Svg,
        }
    }
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ScanConfig) -> Result<(), ScanError> {
        if let Some(dir) = &self.out_dir {
            cfg.output.dir = dir.to_string_lossy().into_owned();
        }
        if !self.format.is_empty() {
            cfg.output.formats = self.format.iter().map(|f| Format::from(*f)).collect();
        }
        if let Some(tol) = self.tol {
            cfg.numerics.series_tol = tol;
            cfg.numerics.quadrature_rel_tol = tol;
        }
        if self.threads == Some(0) {
            return Err(ScanError::Config("--threads must be at least 1".into()));
        }
        cfg.validate()
    }
}

/// Runs `cfg` on a pool of `threads` workers and writes its outputs.
pub fn execute(cfg: &ScanConfig, threads: Option<usize>) -> Result<Vec<PathBuf>, ScanError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| ScanError::Config(format!("thread pool: {e}")))?;
    info!(
        "running {} ({:?}) on {} threads",
        cfg.name,
        cfg.pipeline,
        pool.current_num_threads()
    );
    let grid = pool.install(|| run(cfg))?;
    let written = emit_outputs(
        &grid,
        std::path::Path::new(&cfg.output.dir),
        &cfg.stem(),
        &cfg.output.formats,
    )?;
    for p in &written {
        info!("wrote {}", p.display());
    }
    let failures: Vec<_> = grid.failures().collect();
    if !failures.is_empty() {
        for (i, e) in failures.iter().take(10) {
            warn!("point {i} at {:?}: {}", grid.coordinates(*i), e.as_str());
        }
        return Err(ScanError::Numerical(format!(
            "{} of {} points failed; see the error_code column",
            failures.len(),
            grid.len()
        )));
    }
    Ok(written)
}

/// Entry point returning the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Validate { config } => ScanConfig::from_path(&config).map(|cfg| {
            println!(
                "{}: ok ({:?}, config hash {})",
                config.display(),
                cfg.pipeline,
                cfg.hash()
            );
        }),
        Command::Run { config, overrides } => ScanConfig::from_path(&config).and_then(|mut cfg| {
            overrides.apply(&mut cfg)?;
            execute(&cfg, overrides.threads).map(|_| ())
        }),
        Command::Preset { name, overrides } => preset(&name).and_then(|mut cfg| {
            overrides.apply(&mut cfg)?;
            execute(&cfg, overrides.threads).map(|_| ())
        }),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("nanosqueeze: {e}");
            e.exit_code()
        }
    }
}
