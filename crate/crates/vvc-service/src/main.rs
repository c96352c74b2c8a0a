use std::path::PathBuf;

use clap::Parser;
use vvc_service::AppState;

#[derive(Parser)]
#[command(name = "vvc-service", about = "Volt/var control HTTP service")]
struct Args {
    /// Address to bind.
    #[arg(long, default_value = "127.0.0.1:7071")]
    addr: String,

    /// Base directory for relative paths in requests.
    #[arg(long, default_value = ".")]
    data_dir: PathBuf,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| "info".into()),
        )
        .init();

    let args = Args::parse();
    let state = AppState::new(args.data_dir);
    let listener = tokio::net::TcpListener::bind(&args.addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    vvc_service::serve(listener, state).await?;
    Ok(())
}
