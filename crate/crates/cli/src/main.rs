//! `pinch`: curvature invariants and pinching checks for catalog models and
//! user-supplied jets.

mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::CommonArgs;

#[derive(Debug, Parser)]
#[command(name = "pinch", version, about = "Curvature invariants and pinching checks for submanifolds of space forms")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Per-point S, H, |traceless part|^2 and nullity.
    Invariants,
    /// Pinching bound and verdict at each point.
    Pinch {
        #[arg(long)]
        k: usize,
    },
    /// Run a named verification suite.
    Verify {
        /// Suite name, e.g. equality-cases, propu, all.
        suite: String,
        /// Sample count for the randomized criteria.
        #[arg(long)]
        count: Option<usize>,
    },
    /// Bochner-Weitzenboeck matrix on 2-vectors and, for n = 4, its self-dual split.
    Bw,
    /// Minimum of isotropic curvature over orthonormal four-frames.
    IsotropicMin {
        /// Random frames before refinement.
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Worst basis for the Lawson-Simons quantity.
    LsMin {
        #[arg(long, default_value_t = 2)]
        p: usize,
    },
    /// Adapted frame of an equality-case point (n = 4).
    AdaptFrame,
    /// Dupin principal normals and eigendistributions.
    Dupin,
    /// Ovaloid margin of a Euclidean hypersurface.
    Ovaloid {
        #[arg(long)]
        k: usize,
    },
    /// Strict pinching check for a rotational hypersurface profile.
    Rotational {
        #[arg(long)]
        profile: String,
        #[arg(long)]
        n: usize,
        /// Evaluation points; otherwise sampled from [lo, hi].
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Vec<f64>,
        #[arg(long, allow_negative_numbers = true)]
        lo: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        hi: Option<f64>,
    },
    /// Product of a closed curve with a pinched Euclidean immersion.
    ProductWithCurve {
        /// Curve as JSON: {"components": [...], "lo": .., "hi": ..}.
        #[arg(long)]
        curve: String,
        /// Second factor: model JSON or path.
        #[arg(long)]
        g: String,
        #[arg(long)]
        ell: usize,
    },
    /// Catalog of model immersions.
    Catalog {
        #[command(subcommand)]
        action: CatalogAction,
    },
}

#[derive(Debug, Clone, Subcommand)]
pub enum CatalogAction {
    /// Model ids, parameters and ranges.
    List,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli, &mut std::io::stdout().lock()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
