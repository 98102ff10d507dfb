use std::path::PathBuf;
use std::process::ExitCode;

use bbm_ep::cli::{parse_config_with_overrides, run};
use bbm_ep::Error;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bbm-ep", version, about = "Energy-preserving moving-mesh solver for the periodic BBM equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Replace a config value, e.g. `--override M=400`.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Only report errors.
        #[arg(long)]
        quiet: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Run { config, overrides, quiet } = cli.command;
    let level = if quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let text = match std::fs::read_to_string(&config) {
        Ok(t) => t,
        Err(e) => {
            log::error!("cannot read {}: {e}", config.display());
            return ExitCode::from(1);
        }
    };
    let cfg = match parse_config_with_overrides(&text, &overrides) {
        Ok(c) => c,
        Err(e) => {
            log::error!("{}: {e}", config.display());
            return ExitCode::from(1);
        }
    };
    match run(&cfg) {
        Ok(out) => {
            if let Some(last) = out.series.last() {
                log::info!(
                    "done at t = {}: H1 = {:.16e}, H2 = {:.16e}; output in {}",
                    last.t,
                    last.h1,
                    last.h2,
                    cfg.output_dir.display()
                );
            }
            ExitCode::SUCCESS
        }
        Err(e @ (Error::Parameter(_) | Error::Config { .. })) => {
            log::error!("{e}");
            ExitCode::from(1)
        }
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(2)
        }
    }
}
