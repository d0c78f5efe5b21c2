use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use levent_core::sweep::SweptParameter;
use levent_core::{Config, ModelVariant, Preset, Truncation};

#[derive(Debug, Parser)]
#[command(
    name = "levent",
    version,
    about = "Steady-state entanglement of two levitated nanoparticles"
)]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one parameter point and print its entanglement report.
    #[command(allow_negative_numbers = true)]
    Point(PointArgs),
    /// Sweep one parameter over a grid and write CSV rows.
    #[command(allow_negative_numbers = true)]
    Sweep(SweepArgs),
    /// Reproduce a figure: fig2ad, fig2eh, fig3, fig4ac, fig4df or fig5.
    Preset(PresetArgs),
    /// Thermal occupancy, phase-noise heating and tweezer intensity.
    Feasibility(FeasibilityArgs),
    /// Compare the solvers with the ODE and Monte Carlo oracles at one point.
    #[command(allow_negative_numbers = true)]
    OracleCheck(OracleArgs),
    /// Draw an SVG from a sweep CSV.
    Plot(PlotArgs),
}

/// Model selection: a TOML file plus per-key overrides. Rates are `ω/2π` in kHz.
#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// TOML configuration file.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub variant: Option<ModelVariant>,
    /// Floquet truncation: `auto` or an integer K.
    #[arg(long)]
    pub truncation: Option<Truncation>,
    #[arg(long)]
    pub lambda1_khz: Option<f64>,
    #[arg(long)]
    pub lambda2_khz: Option<f64>,
    #[arg(long)]
    pub g1_khz: Option<f64>,
    #[arg(long)]
    pub g2_khz: Option<f64>,
    #[arg(long)]
    pub kappa1_khz: Option<f64>,
    #[arg(long)]
    pub kappa2_khz: Option<f64>,
    #[arg(long)]
    pub omega1_khz: Option<f64>,
    #[arg(long)]
    pub omega2_khz: Option<f64>,
    #[arg(long)]
    pub delta12_khz: Option<f64>,
    #[arg(long)]
    pub q1: Option<f64>,
    #[arg(long)]
    pub q2: Option<f64>,
    #[arg(long)]
    pub n1: Option<f64>,
    #[arg(long)]
    pub n2: Option<f64>,
}

impl ModelArgs {
    /// The file configuration with the command-line keys applied on top.
    pub fn config(&self) -> levent_core::Result<Config> {
        let base = match &self.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        Ok(base.merge(&Config {
            variant: self.variant,
            truncation: self.truncation,
            lambda1_khz: self.lambda1_khz,
            lambda2_khz: self.lambda2_khz,
            g1_khz: self.g1_khz,
            g2_khz: self.g2_khz,
            kappa1_khz: self.kappa1_khz,
            kappa2_khz: self.kappa2_khz,
            omega1_khz: self.omega1_khz,
            omega2_khz: self.omega2_khz,
            delta12_khz: self.delta12_khz,
            q1: self.q1,
            q2: self.q2,
            n1: self.n1,
            n2: self.n2,
        }))
    }
}

#[derive(Debug, Args)]
pub struct PointArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Also write the result as a one-row CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Print the mechanical covariance matrix.
    #[arg(long)]
    pub covariance: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// lambda_ratio, g_ratio, delta12_khz, q or n.
    #[arg(short, long)]
    pub parameter: SweptParameter,
    /// First grid value.
    #[arg(long, requires = "to", conflicts_with = "values")]
    pub from: Option<f64>,
    /// Last grid value.
    #[arg(long, requires = "from")]
    pub to: Option<f64>,
    #[arg(long, default_value_t = 101)]
    pub points: usize,
    /// Logarithmic spacing between `--from` and `--to`.
    #[arg(long)]
    pub geometric: bool,
    /// Explicit comma-separated grid.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub values: Option<Vec<f64>>,
    /// Series label; defaults to the variant name.
    #[arg(long)]
    pub series: Option<String>,
    /// CSV output; standard output when absent.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// SVG output.
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PresetArgs {
    pub preset: Preset,
    #[arg(long, default_value_t = Truncation::Auto)]
    pub truncation: Truncation,
    /// CSV output; standard output when absent.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// SVG output.
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FeasibilityArgs {
    /// K
    #[arg(long, default_value_t = 15.0)]
    pub temperature: f64,
    /// Mechanical frequency `Ω/2π` in kHz.
    #[arg(long, default_value_t = 305.0)]
    pub omega_khz: f64,
    /// Single-photon coupling `g/2π` in Hz.
    #[arg(long, default_value_t = 0.3)]
    pub g_hz: f64,
    #[arg(long, default_value_t = 1e10)]
    pub n_phot: f64,
    /// Cavity decay `κ/2π` in kHz.
    #[arg(long, default_value_t = 120.0)]
    pub kappa_khz: f64,
    /// Frequency-noise spectral density in Hz²/Hz.
    #[arg(long, default_value_t = 0.1)]
    pub s_phidot: f64,
    /// Beam power in W.
    #[arg(long, default_value_t = 0.4)]
    pub power: f64,
    /// Beam waist in µm.
    #[arg(long, default_value_t = 0.7)]
    pub waist_um: f64,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Monte Carlo trajectories; 0 skips the Monte Carlo check.
    #[arg(long, default_value_t = 2000)]
    pub trajectories: usize,
    /// Integration time in s; defaults to 12 relaxation times.
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Largest step in s; defaults to `0.01/‖A‖`.
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Truncations of the Floquet convergence scan.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,6,8,10")]
    pub k_list: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Sweep CSV.
    pub csv: PathBuf,
    /// SVG output.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Columns to plot, one panel each.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "log_negativity,epr_variance,nrf,purity"
    )]
    pub panels: Vec<String>,
}
