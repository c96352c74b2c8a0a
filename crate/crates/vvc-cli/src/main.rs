//! `vvc` — validate configurations, run one-shot inferences, execute
//! closed-loop scenarios and compare runs.
//!
//! Every subcommand except `serve` talks HTTP to a service instance. With
//! `--server` that is a remote one (paths in arguments then refer to the
//! server's filesystem); without it an in-process server is started on a
//! loopback port for the duration of the command.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use indexmap::IndexMap;

use vvc_client::{Client, ClientError};
use vvc_core::api::{CompareRequest, InferRequest, RunRequest, ValidateRequest};

#[derive(Parser)]
#[command(name = "vvc", about = "Fuzzy volt/var control toolkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ServerOpt {
    /// Service to talk to, e.g. http://127.0.0.1:7071. Without it an
    /// in-process service is used and paths resolve locally.
    #[arg(long, global = false)]
    server: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Start the HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:7071")]
        addr: String,
        /// Base directory for relative paths in requests.
        #[arg(long, default_value = ".")]
        data_dir: PathBuf,
    },
    /// Check a scenario or a rulebase pair and report every problem.
    Validate {
        #[command(flatten)]
        server: ServerOpt,
        /// Scenario file to validate.
        #[arg(long, conflicts_with_all = ["variables", "rules"])]
        scenario: Option<String>,
        /// Variable declaration file (with --rules).
        #[arg(long, requires = "rules")]
        variables: Option<String>,
        /// Rule file (with --variables).
        #[arg(long, requires = "variables")]
        rules: Option<String>,
    },
    /// Run one inference and print all intermediates.
    Infer {
        #[command(flatten)]
        server: ServerOpt,
        #[arg(long)]
        variables: String,
        #[arg(long)]
        rules: String,
        /// Retarget the rulebase's voltage reference first.
        #[arg(long)]
        ref_kv: Option<f64>,
        /// Crisp input, NAME=VALUE; repeat per input variable.
        #[arg(short, long = "input", value_name = "NAME=VALUE")]
        inputs: Vec<String>,
    },
    /// Execute a scenario and write the run artifacts.
    Run {
        #[command(flatten)]
        server: ServerOpt,
        #[arg(long)]
        scenario: String,
        /// Output directory for the run artifacts.
        #[arg(long)]
        out: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Override the voltage reference (retargets the rulebase).
        #[arg(long)]
        ref_kv: Option<f64>,
        /// Override the controller: fis, deadband or opf_proxy.
        #[arg(long)]
        controller: Option<String>,
    },
    /// Compare two or more runs against a baseline.
    Compare {
        #[command(flatten)]
        server: ServerOpt,
        /// Run output directories.
        #[arg(required = true, num_args = 2..)]
        runs: Vec<String>,
        /// Index of the baseline run (default: the first).
        #[arg(long, default_value_t = 0)]
        baseline: usize,
        /// Also write the report as JSON to this path.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Write pairwise loss-ratio profile CSVs into this directory.
        #[arg(long)]
        plots: Option<String>,
    },
}

const EXIT_GENERAL: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;
const EXIT_IO: u8 = 4;

fn exit_for(err: &ClientError) -> u8 {
    match err.kind() {
        "config" => EXIT_CONFIG,
        "runtime" => EXIT_RUNTIME,
        "io" | "not_found" => EXIT_IO,
        _ => EXIT_GENERAL,
    }
}

async fn connect(opt: &ServerOpt) -> anyhow::Result<Client> {
    match &opt.server {
        Some(base) => Ok(Client::new(base.clone())),
        None => {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
            let addr = listener.local_addr()?;
            let state = vvc_service::AppState::new(std::env::current_dir()?);
            tokio::spawn(vvc_service::serve(listener, state));
            Ok(Client::new(format!("http://{addr}")))
        }
    }
}

fn parse_inputs(pairs: &[String]) -> anyhow::Result<IndexMap<String, f64>> {
    let mut map = IndexMap::new();
    for pair in pairs {
        let (name, value) = pair
            .split_once('=')
            .ok_or_else(|| anyhow::anyhow!("expected NAME=VALUE, got '{pair}'"))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|e| anyhow::anyhow!("input '{name}': {e}"))?;
        map.insert(name.trim().to_string(), value);
    }
    Ok(map)
}

async fn cmd_validate(
    client: &Client,
    scenario: Option<String>,
    variables: Option<String>,
    rules: Option<String>,
) -> Result<u8, ClientError> {
    let response = client
        .validate(&ValidateRequest {
            scenario,
            variables,
            rules,
        })
        .await?;
    for diagnostic in &response.diagnostics {
        eprintln!("error: {diagnostic}");
    }
    if let Some(s) = &response.summary {
        println!("{} rules, {} inputs, {} outputs", s.rules, s.inputs, s.outputs);
    }
    if response.ok {
        println!("ok");
        Ok(0)
    } else {
        eprintln!("{} problem(s) found", response.diagnostics.len());
        Ok(EXIT_CONFIG)
    }
}

async fn cmd_infer(
    client: &Client,
    variables: String,
    rules: String,
    ref_kv: Option<f64>,
    inputs: IndexMap<String, f64>,
) -> Result<u8, ClientError> {
    let response = client
        .infer(&InferRequest {
            variables,
            rules,
            voltage_ref_kv: ref_kv,
            inputs,
        })
        .await?;
    println!("fuzzified:");
    for (variable, degrees) in &response.fuzzified {
        let sets: Vec<String> = degrees
            .iter()
            .map(|(set, degree)| format!("{set}={degree:.4}"))
            .collect();
        println!("  {variable}: {}", sets.join(" "));
    }
    println!("activations:");
    for (i, activation) in response.activations.iter().enumerate() {
        println!(
            "  [{:>2}] {:>6.4}  {}",
            i + 1,
            activation.activation,
            activation.rule
        );
    }
    println!("outputs:");
    for (variable, value) in &response.outputs {
        println!("  {variable} = {value:.6}");
    }
    Ok(0)
}

async fn cmd_run(
    client: &Client,
    scenario: String,
    out: String,
    seed: Option<u64>,
    ref_kv: Option<f64>,
    controller: Option<String>,
) -> Result<u8, ClientError> {
    let response = client
        .run(&RunRequest {
            scenario,
            out,
            seed,
            voltage_ref_kv: ref_kv,
            controller,
        })
        .await?;
    let m = &response.metrics;
    println!("run {} -> {}", response.id, response.out_dir);
    println!(
        "  {} samples over {}..{} ({}s step), controller {}",
        m.samples, m.start, m.end, m.step_seconds, m.controller
    );
    println!(
        "  U_mean {:.4} kV, D_M {:.4}, D_m {:.4} (ref {:.3} kV)",
        m.voltage.mean_kv, m.voltage.max_deviation_kv, m.voltage.mean_deviation_kv, m.voltage_ref_kv
    );
    println!(
        "  P_mean {:.4} MW, Q_mean {:+.4} MVAr, pf>=0.98 {:.2}%, pf>=0.99 {:.2}%",
        m.p_mean_mw,
        m.q_mean_mvar,
        m.pf_at_least_098 * 100.0,
        m.pf_at_least_099 * 100.0
    );
    println!(
        "  {} tap ops, {} capacitor ops, {} limit violations",
        m.tap_operations, m.capacitor_operations, m.limit_violations
    );
    Ok(0)
}

async fn cmd_compare(
    client: &Client,
    runs: Vec<String>,
    baseline: usize,
    json: Option<PathBuf>,
    plots: Option<String>,
) -> Result<u8, ClientError> {
    let response = client
        .compare(&CompareRequest {
            runs,
            baseline,
            plots_out: plots,
        })
        .await?;
    print!("{}", response.text);
    for plot in &response.plots {
        println!("loss-ratio profile written to {plot}");
    }
    if let Some(path) = json {
        let body = serde_json::to_string_pretty(&response.report).expect("report serializes");
        if let Err(e) = std::fs::write(&path, body + "\n") {
            eprintln!("error: {}: {e}", path.display());
            return Ok(EXIT_IO);
        }
        println!("\nreport written to {}", path.display());
    }
    Ok(0)
}

async fn dispatch(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Serve { addr, data_dir } => {
            tracing_subscriber::fmt()
                .with_env_filter(
                    tracing_subscriber::EnvFilter::try_from_default_env()
                        .unwrap_or_else(|_| "info".into()),
                )
                .init();
            let listener = tokio::net::TcpListener::bind(&addr).await?;
            println!("listening on {}", listener.local_addr()?);
            vvc_service::serve(listener, vvc_service::AppState::new(data_dir)).await?;
            Ok(0)
        }
        Command::Validate {
            server,
            scenario,
            variables,
            rules,
        } => {
            if scenario.is_none() && variables.is_none() {
                anyhow::bail!("provide --scenario or --variables/--rules");
            }
            let client = connect(&server).await?;
            run_client(cmd_validate(&client, scenario, variables, rules).await)
        }
        Command::Infer {
            server,
            variables,
            rules,
            ref_kv,
            inputs,
        } => {
            let inputs = parse_inputs(&inputs)?;
            let client = connect(&server).await?;
            run_client(cmd_infer(&client, variables, rules, ref_kv, inputs).await)
        }
        Command::Run {
            server,
            scenario,
            out,
            seed,
            ref_kv,
            controller,
        } => {
            let client = connect(&server).await?;
            run_client(cmd_run(&client, scenario, out, seed, ref_kv, controller).await)
        }
        Command::Compare {
            server,
            runs,
            baseline,
            json,
            plots,
        } => {
            let client = connect(&server).await?;
            run_client(cmd_compare(&client, runs, baseline, json, plots).await)
        }
    }
}

fn run_client(result: Result<u8, ClientError>) -> anyhow::Result<u8> {
    match result {
        Ok(code) => Ok(code),
        Err(err) => {
            eprintln!("error: {err}");
            Ok(exit_for(&err))
        }
    }
}

#[tokio::main]
async fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli).await {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(EXIT_GENERAL)
        }
    }
}
