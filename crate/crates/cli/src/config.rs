//! Run configuration: command-line flags over an optional JSON config file
//! over built-in defaults.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use pinch_core::catalog::ModelSpec;
use pinch_core::frameopt::FrameSettings;
use pinch_core::pinch::EQUALITY_TOL;
use serde::{Deserialize, Serialize};

pub const DEFAULT_POINTS: usize = 100;
pub const DEFAULT_SEED: u64 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Table,
    Json,
    Csv,
}

/// Options shared by every subcommand. All are optional so that a config
/// file can supply them.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON config file; flags take precedence over its entries.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Catalog model: inline JSON (`{"id": ..., "params": ...}`) or a path to a JSON file.
    #[arg(long, global = true, value_name = "SPEC")]
    pub model: Option<String>,
    /// Jet file with user-supplied 2-jets.
    #[arg(long, global = true, value_name = "PATH")]
    pub jets: Option<PathBuf>,
    /// Number of seeded random sample points.
    #[arg(long, global = true)]
    pub points: Option<usize>,
    /// Regular grid with this many points per parameter (replaces random points).
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Seed for sample points and optimiser restarts (default 7).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Optimiser restarts.
    #[arg(long, global = true)]
    pub restarts: Option<usize>,
    /// Optimiser convergence tolerance.
    #[arg(long = "opt-tol", global = true)]
    pub opt_tol: Option<f64>,
    /// Cap on Givens sweeps per optimiser run.
    #[arg(long = "max-sweeps", global = true)]
    pub max_sweeps: Option<usize>,
    /// Equality band for pinching verdicts.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Shorthand for `--format json`.
    #[arg(long, global = true, conflicts_with = "format")]
    pub json: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelInput {
    Spec(ModelSpec),
    Path(PathBuf),
}

/// Contents of a `--config` file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub model: Option<ModelInput>,
    pub jets: Option<PathBuf>,
    pub points: Option<usize>,
    pub grid: Option<usize>,
    pub seed: Option<u64>,
    pub restarts: Option<usize>,
    pub opt_tol: Option<f64>,
    pub max_sweeps: Option<usize>,
    pub tol: Option<f64>,
    pub format: Option<Format>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    Random { count: usize },
    Grid { per_dim: usize },
    JetFile,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Input {
    Model(ModelSpec),
    Jets(PathBuf),
    None,
}

/// Fully resolved configuration, echoed in every report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub input: Input,
    pub sampling: Sampling,
    pub seed: u64,
    pub seed_defaulted: bool,
    pub frame: FrameSettings,
    pub tol: f64,
    pub format: Format,
    pub params: serde_json::Value,
}

pub fn parse_model(text: &str) -> Result<ModelSpec, String> {
    let trimmed = text.trim_start();
    let json = if trimmed.starts_with('{') {
        text.to_string()
    } else {
        std::fs::read_to_string(text).map_err(|e| format!("cannot read model file {text}: {e}"))?
    };
    serde_json::from_str(&json).map_err(|e| format!("invalid model spec: {e}"))
}

impl RunConfig {
    pub fn resolve(command: &str, args: &CommonArgs, needs_input: bool, params: serde_json::Value) -> Result<Self, String> {
        let file = match &args.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
                serde_json::from_str::<FileConfig>(&text).map_err(|e| format!("invalid config {}: {e}", path.display()))?
            }
            None => FileConfig::default(),
        };
        // A source given by flag replaces any source from the file.
        let flag_source = args.model.is_some() || args.jets.is_some();
        let model = match (&args.model, flag_source) {
            (Some(text), _) => Some(parse_model(text)?),
            (None, true) => None,
            (None, false) => match &file.model {
                Some(ModelInput::Spec(s)) => Some(s.clone()),
                Some(ModelInput::Path(p)) => Some(parse_model(&p.to_string_lossy())?),
                None => None,
            },
        };
        let jets = if flag_source { args.jets.clone() } else { file.jets.clone() };
        let input = match (model, jets) {
            (Some(_), Some(_)) => return Err("give exactly one of --model and --jets".into()),
            (Some(m), None) => Input::Model(m),
            (None, Some(j)) => Input::Jets(j),
            (None, None) if needs_input => return Err("an input is required: --model or --jets".into()),
            (None, None) => Input::None,
        };
        let grid = args.grid.or(file.grid);
        let points = args.points.or(file.points);
        let sampling = match (&input, grid) {
            (Input::Jets(_), _) => Sampling::JetFile,
            (_, Some(per_dim)) if args.points.is_none() => Sampling::Grid { per_dim },
            _ => Sampling::Random { count: points.unwrap_or(DEFAULT_POINTS) },
        };
        let seed = args.seed.or(file.seed);
        let defaults = FrameSettings::default();
        let frame = FrameSettings {
            restarts: args.restarts.or(file.restarts).unwrap_or(defaults.restarts),
            seed: seed.unwrap_or(DEFAULT_SEED),
            tol: args.opt_tol.or(file.opt_tol).unwrap_or(defaults.tol),
            max_sweeps: args.max_sweeps.or(file.max_sweeps).unwrap_or(defaults.max_sweeps),
            exec: defaults.exec,
        };
        if frame.restarts == 0 {
            return Err("--restarts must be at least 1".into());
        }
        Ok(RunConfig {
            command: command.to_string(),
            input,
            sampling,
            seed: seed.unwrap_or(DEFAULT_SEED),
            seed_defaulted: seed.is_none(),
            frame,
            tol: args.tol.or(file.tol).unwrap_or(EQUALITY_TOL),
            format: args.format.or(args.json.then_some(Format::Json)).or(file.format).unwrap_or(Format::Table),
            params,
        })
    }
}
