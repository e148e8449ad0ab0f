//! `bolt` — desk-scale BOLT experiments: property verification,
//! plug-in Bayes-error estimation, adversarial training, and λ/seed sweeps.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bolt_cli::{cmd_estimate_bayes, cmd_sweep, cmd_train, cmd_verify, FlatConfig};

#[derive(Parser)]
#[command(name = "bolt", version, about = "BOLT loss and BOLT-GAN experiment harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Flat JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config's `seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides the config's `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Metric logging interval in generator steps.
    #[arg(long)]
    log_interval: Option<usize>,
    /// Additional overrides of the form --key=value.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn into_config(self) -> anyhow::Result<FlatConfig> {
        let mut overrides = self.overrides;
        if let Some(seed) = self.seed {
            overrides.push(format!("seed={seed}"));
        }
        if let Some(out) = self.out {
            overrides.push(format!("out={}", out.display()));
        }
        if let Some(li) = self.log_interval {
            overrides.push(format!("log_interval={li}"));
        }
        FlatConfig::load(self.config.as_deref(), &overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the property suites (bounds, TV/W1 identities, Lipschitz checks).
    Verify {
        /// Only run suites whose name contains this substring.
        #[arg(long)]
        suite: Option<String>,
    },
    /// Plug-in Bayes-error estimation with bias/variance across sample sizes.
    EstimateBayes(ConfigArgs),
    /// Train a BOLT-GAN (or WGAN baseline) on a 1-D target.
    Train(ConfigArgs),
    /// Train across a λ grid and seed list; aggregate final metrics.
    Sweep(ConfigArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Verify { suite } => match cmd_verify(suite.as_deref()) {
            Ok(code) => return ExitCode::from(code as u8),
            Err(e) => Err(e),
        },
        Command::EstimateBayes(args) => args
            .into_config()
            .and_then(cmd_estimate_bayes)
            .map(|_| ()),
        Command::Train(args) => args.into_config().and_then(cmd_train).map(|_| ()),
        Command::Sweep(args) => args.into_config().and_then(cmd_sweep).map(|_| ()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
