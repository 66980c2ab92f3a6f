use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use sgdiff::config::{parse_flag_overrides, read_kv_file, KeyValues};
use sgdiff::pipeline::{compare_presets, run_experiment, write_fixtures, ExperimentConfig, Preset};
use sgdiff::Error;

/// Structure-guided SDE inpainting experiments on synthetic images.
#[derive(Parser)]
#[command(name = "sgdiff", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its artifacts to the output directory.
    Run(ConfigArgs),
    /// Run several presets on a shared configuration and write comparison.csv.
    Compare {
        /// Comma-separated preset names.
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "gray2edge,gray2gray,edge2edge,edge2gray"
        )]
        presets: Vec<String>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Write the ground truth, mask and masked image for a configuration.
    GenFixtures(ConfigArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `--key value` overrides of config keys; these win over the file.
    #[arg(
        trailing_var_arg = true,
        allow_hyphen_values = true,
        value_name = "--KEY VALUE"
    )]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> sgdiff::Result<ExperimentConfig> {
        let mut kv = match &self.config {
            Some(path) => read_kv_file(path)?,
            None => KeyValues::new(),
        };
        kv.extend(parse_flag_overrides(&self.overrides)?);
        ExperimentConfig::from_kv(&kv)
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_) | Error::InvalidPreset(_) | Error::InvalidArgument(_)) => 2,
        Some(Error::Output { .. }) => 3,
        Some(Error::ScheduleMismatch(_)) => 4,
        _ => 1,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.load()?;
            let summary = run_experiment(&cfg)
                .with_context(|| format!("run into {}", cfg.output.display()))?;
            println!("{}", summary.line());
        }
        Command::Compare { presets, config } => {
            let base = config.load()?;
            let cfgs = presets
                .iter()
                .map(|p| {
                    Ok(ExperimentConfig {
                        preset: p.trim().parse::<Preset>()?,
                        ..base.clone()
                    })
                })
                .collect::<sgdiff::Result<Vec<_>>>()?;
            for c in &cfgs {
                c.validate()?;
            }
            let rows = compare_presets(&cfgs, &base.output)
                .with_context(|| format!("compare into {}", base.output.display()))?;
            for r in rows {
                println!("{}", r.line());
            }
        }
        Command::GenFixtures(args) => {
            let cfg = args.load()?;
            write_fixtures(&cfg, &cfg.output)?;
            println!("fixtures written to {}", cfg.output.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
