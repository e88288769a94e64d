//! `pidreg`: PID gain synthesis, region checks, closed-loop simulation and the
//! stability / instability demonstrations, with JSON or CSV output.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::FileConfig;
use crate::report::Failure;

#[derive(Parser, Debug)]
#[command(name = "pidreg", version, about = "PID regulation of uncertain nonlinear second-order systems")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Seed for every random draw in the run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Write the report (or CSV table) here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    pub format: Option<Format>,
    /// JSON file whose keys mirror the long flag names; flags given on the command line win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Corollary,
    Search,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Rk4,
    Rk45,
}

#[derive(Args, Debug, Clone, Default)]
pub struct GainArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub kp: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub ki: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub kd: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct IntegratorArgs {
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// Fixed step (rk4) or initial step (rk45).
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub rel_tol: Option<f64>,
    #[arg(long)]
    pub abs_tol: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub blowup_norm: Option<f64>,
    #[arg(long)]
    pub converge_norm: Option<f64>,
    #[arg(long)]
    pub converge_window: Option<f64>,
    #[arg(long)]
    pub record_stride: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Design gains for a Lipschitz bound and report the certificate quantities.
    Synthesize {
        #[arg(long = "L", alias = "lipschitz", allow_negative_numbers = true)]
        l: Option<f64>,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        a: Option<f64>,
    },
    /// Test whether gains lie in the stabilizing region for a Lipschitz bound.
    Check {
        #[command(flatten)]
        gains: GainArgs,
        #[arg(long = "L", alias = "lipschitz", allow_negative_numbers = true)]
        l: Option<f64>,
    },
    /// Simulate the PID loop on a catalog plant.
    Simulate {
        /// One of zero, linear, sine_mix, pendulum, damped_spring.
        #[arg(long)]
        plant: Option<String>,
        /// Plant parameter as key=value (repeatable), e.g. --param alpha=0.6.
        #[arg(long = "param", value_name = "KEY=VALUE", allow_hyphen_values = true)]
        params: Vec<String>,
        #[command(flatten)]
        gains: GainArgs,
        /// Setpoint, comma separated for vector plants.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        setpoint: Option<Vec<f64>>,
        /// Initial position, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x1: Option<Vec<f64>>,
        /// Initial velocity, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x2: Option<Vec<f64>>,
        #[command(flatten)]
        integrator: IntegratorArgs,
    },
    /// Regulate randomly drawn Lipschitz plants and monitor the Lyapunov function.
    VerifyTheorem1 {
        #[arg(long = "L", alias = "lipschitz", allow_negative_numbers = true)]
        l: Option<f64>,
        #[arg(long)]
        trials: Option<usize>,
        /// Plant dimension.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        a: Option<f64>,
        /// Test these gains instead of designing them.
        #[command(flatten)]
        gains: GainArgs,
        #[command(flatten)]
        integrator: IntegratorArgs,
    },
    /// Finite escape of the superlinear loop from the invariant cone.
    DemoEscape {
        #[arg(long, allow_negative_numbers = true)]
        epsilon: Option<f64>,
        #[command(flatten)]
        gains: GainArgs,
        #[arg(long, allow_negative_numbers = true)]
        setpoint: Option<f64>,
    },
    /// Divergence of PID control on a third-order plant.
    DemoThirdOrder {
        #[command(flatten)]
        gains: GainArgs,
        #[arg(long = "L", alias = "lipschitz", allow_negative_numbers = true)]
        l: Option<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = FileConfig::load(cli.common.config.as_deref()).and_then(|cfg| commands::run(&cli, &cfg));
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(Failure { code, message }) => {
            eprintln!("pidreg: {message}");
            ExitCode::from(code as u8)
        }
    }
}
