use std::path::PathBuf;

use clap::{Parser, Subcommand};
use contact_service::bench::BenchCommand;
use contact_service::Config;
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(version, about = "Language-guided contact planning: session service and benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP session service.
    Serve {
        /// TOML configuration; `CONTACT_*` variables override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        bind: Option<String>,
    },
    /// Dataset evaluation.
    Bench {
        #[command(subcommand)]
        command: Box<BenchCommand>,
    },
}

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Serve { config, bind } => {
            let mut config = Config::load(config.as_deref())?;
            if let Some(bind) = bind {
                config.bind = bind;
            }
            tokio::runtime::Runtime::new()?.block_on(contact_service::serve(config))
        }
        Command::Bench { command } => {
            print!("{}", contact_service::bench::run(*command)?);
            Ok(())
        }
    }
}
