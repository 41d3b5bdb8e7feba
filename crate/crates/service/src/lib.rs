//! HTTP session service and benchmark commands on top of `contact-core`.

pub mod api;
pub mod backends;
pub mod bench;
pub mod config;

use std::sync::Arc;

use anyhow::Context;
use contact_core::prompts::PromptSet;
use contact_core::session::Pipeline;

pub use api::{router, AppState};
pub use config::Config;

/// Builds the shared pipeline from configuration.
pub fn pipeline_from_config(config: &Config) -> anyhow::Result<Pipeline> {
    let prompts = match &config.prompts {
        Some(path) => PromptSet::from_file(path).with_context(|| format!("prompts {}", path.display()))?,
        None => PromptSet::default(),
    };
    Ok(Pipeline::new(
        backends::build_llm(&config.llm)?,
        backends::build_vision(&config.vision)?,
        &prompts,
        config.contact,
        backends::build_sink(&config.sink)?,
    )?)
}

async fn shutdown_signal() {
    let interrupt = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let terminate = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending().await,
        }
    };
    #[cfg(not(unix))]
    let terminate = std::future::pending::<()>();
    tokio::select! {
        _ = interrupt => {},
        _ = terminate => {},
    }
    tracing::info!("shutting down");
}

/// Serves until ctrl-c or SIGTERM.
pub async fn serve(config: Config) -> anyhow::Result<()> {
    let state = AppState::new(pipeline_from_config(&config)?);
    let app = router(Arc::clone(&state), config.static_dir.as_deref());
    let listener = tokio::net::TcpListener::bind(&config.bind)
        .await
        .with_context(|| format!("bind {}", config.bind))?;
    tracing::info!(addr = %listener.local_addr()?, llm = %config.llm.spec, sink = %config.sink.spec, "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(shutdown_signal())
        .await?;
    Ok(())
}
