//! `garden` command-line entry points.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use garden_core::agents::AgentError;
use garden_core::assets::{AssetError, AssetLibrary};
use garden_core::export::{export_scene, layout_svg, load_scene, write_atomic, ExportError};
use garden_core::metrics::{compute_metrics, PathScoreConfig};
use garden_core::pipeline::{generate, PipelineError};
use thiserror::Error;

use crate::api::{router, AppState};
use crate::config::{BackendChoice, ConfigError, ServiceConfig};
use crate::store::WorkspaceStore;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_GENERATION: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "garden", version, about = "Procedural classical garden generator")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a garden and write the full export set.
    Generate {
        #[arg(long)]
        prompt: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Grid size as WIDTHxHEIGHT in cells.
        #[arg(long, value_parser = parse_grid)]
        grid: Option<(usize, usize)>,
        /// Cell edge length in metres.
        #[arg(long)]
        cell_size: Option<f64>,
        #[arg(long, default_value = "rule")]
        backend: BackendChoice,
        /// Asset library file; overrides the config.
        #[arg(long)]
        lib: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the metrics of a scene file as JSON.
    Metrics {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        lib: Option<PathBuf>,
    },
    /// Render a scene file to SVG.
    Render {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Asset library tools.
    Assets {
        #[command(subcommand)]
        command: AssetsCommand,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        workspace: PathBuf,
        #[arg(long)]
        lib: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum AssetsCommand {
    /// Check a library file and print its statistics.
    Validate { file: PathBuf },
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected WIDTHxHEIGHT, e.g. 20x15")?;
    let n = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
    Ok((n(w)?, n(h)?))
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Generation(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Generation(_) => EXIT_GENERATION,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } | ConfigError::Library(AssetError::Io { .. }) => CliError::Io(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<AssetError> for CliError {
    fn from(e: AssetError) -> Self {
        ConfigError::from(e).into()
    }
}

impl From<ExportError> for CliError {
    fn from(e: ExportError) -> Self {
        match e {
            ExportError::Io { .. } => CliError::Io(e.to_string()),
            ExportError::Parse { .. } => CliError::Validation(e.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Agent(AgentError::EmptyPrompt | AgentError::EmptyLibrary) | PipelineError::InvalidConfig(_) => {
                CliError::Validation(e.to_string())
            }
            other => CliError::Generation(other.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = if code == 0 { write!(out, "{e}") } else { write!(err, "{e}") };
            return code;
        }
    };
    match execute(cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<ServiceConfig, CliError> {
    Ok(match path {
        Some(p) => ServiceConfig::load(p)?,
        None => ServiceConfig::default(),
    })
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Generate { prompt, seed, grid, cell_size, backend, lib, out: dir } => {
            if let Some((w, h)) = grid {
                cfg.pipeline.grid.width = w;
                cfg.pipeline.grid.height = h;
            }
            if let Some(cs) = cell_size {
                cfg.pipeline.grid.cell_size = cs;
            }
            if lib.is_some() {
                cfg.library = lib;
            }
            let library = cfg.library()?;
            let agent = cfg.backend(backend);
            let scene = generate(&prompt, seed, agent.as_ref(), &library, &cfg.pipeline)?;
            for w in &scene.provenance.warnings {
                log::warn!("{w}");
            }
            for path in export_scene(&scene, &dir)? {
                writeln!(out, "{}", path.display()).map_err(|e| io_err(&dir, e))?;
            }
        }
        Command::Metrics { scene, lib } => {
            if lib.is_some() {
                cfg.library = lib;
            }
            let library = cfg.library()?;
            let s = load_scene(&scene)?;
            let report = compute_metrics(&s, library.len(), &PathScoreConfig::default());
            let text = serde_json::to_string_pretty(&report).expect("metrics serialize");
            writeln!(out, "{text}").map_err(|e| io_err(&scene, e))?;
        }
        Command::Render { scene, out: file } => {
            let s = load_scene(&scene)?;
            write_atomic(&file, layout_svg(&s).as_bytes())?;
        }
        Command::Assets { command: AssetsCommand::Validate { file } } => {
            let library = AssetLibrary::load(&file)?;
            let text = serde_json::to_string_pretty(&library.stats()).expect("stats serialize");
            writeln!(out, "{text}").map_err(|e| io_err(&file, e))?;
        }
        Command::Serve { port, host, workspace, lib } => {
            if lib.is_some() {
                cfg.library = lib;
            }
            let library = cfg.library()?;
            let store = WorkspaceStore::open(&workspace).map_err(|e| CliError::Io(e.to_string()))?;
            let state = AppState::new(store, library, cfg);
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Io(e.to_string()))?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind((host.as_str(), port))
                    .await
                    .map_err(|e| CliError::Io(format!("cannot bind {host}:{port}: {e}")))?;
                log::info!("listening on {}", listener.local_addr().map_err(|e| CliError::Io(e.to_string()))?);
                axum::serve(listener, router(state))
                    .with_graceful_shutdown(async {
                        let _ = tokio::signal::ctrl_c().await;
                    })
                    .await
                    .map_err(|e| CliError::Io(e.to_string()))
            })?;
        }
    }
    Ok(())
}
