use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pairsource_cli::{
    cmd_bell, cmd_chsh, cmd_hom, cmd_qpm, cmd_rates, cmd_spectrum, CliError, ExperimentConfig, RunOptions,
};

#[derive(Parser)]
#[command(name = "pairsource", version, about = "Polarization-entangled pair source simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Poling periods and temperature tuning curve.
    Qpm(Common),
    /// Emission spectrum before and after the filter.
    Spectrum(Common),
    /// HOM dip scans for both users.
    Hom(Common),
    /// Polarization fringes and the CHSH parameter.
    Bell(Common),
    /// CHSH parameter from measured fringe scans.
    Chsh {
        #[command(flatten)]
        common: Common,
        /// Fringe CSVs, one per Alice setting, in config order.
        #[arg(long, num_args = 1.., required = true)]
        scans: Vec<PathBuf>,
    },
    /// Singles, coincidences and accidentals.
    Rates(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use expected counts instead of Monte-Carlo sampling.
    #[arg(long)]
    no_mc: bool,
    /// Subtract accidentals from written or ingested scans.
    #[arg(long)]
    net: bool,
    /// Points per scan.
    #[arg(long)]
    points: Option<usize>,
    /// Integration time per point, s.
    #[arg(long)]
    integration_s: Option<f64>,
    /// Omit the wall-clock timestamp from reports.
    #[arg(long)]
    no_timestamp: bool,
}

impl Common {
    fn load(&self) -> Result<(ExperimentConfig, RunOptions), CliError> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_path(p)?,
            None => ExperimentConfig::default(),
        };
        let opts = RunOptions {
            seed: self.seed,
            out_dir: self.out.clone(),
            no_mc: self.no_mc,
            net: self.net,
            points: self.points,
            integration_s: self.integration_s,
            no_timestamp: self.no_timestamp,
        };
        opts.apply(&mut cfg)?;
        Ok((cfg, opts))
    }
}

fn run(cli: Cli) -> Result<String, CliError> {
    let report = match &cli.command {
        Command::Qpm(c) => cmd_qpm(&c.load()?.0)?,
        Command::Spectrum(c) => cmd_spectrum(&c.load()?.0)?,
        Command::Hom(c) => {
            let (cfg, opts) = c.load()?;
            cmd_hom(&cfg, &opts)?
        }
        Command::Bell(c) => {
            let (cfg, opts) = c.load()?;
            cmd_bell(&cfg, &opts)?
        }
        Command::Chsh { common, scans } => {
            let (cfg, opts) = common.load()?;
            cmd_chsh(&cfg, &opts, scans)?
        }
        Command::Rates(c) => cmd_rates(&c.load()?.0)?,
    };
    Ok(report.to_json_string())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(json) => {
            print!("{json}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
