//! `telavatar`: run the edge, a simulated avatar, scripted demos, or the
//! planner offline.

mod plan;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use telavatar_core::avatar::SpeakerScript;
use telavatar_core::config::{ConfigError, SystemConfig};
use telavatar_core::scenario::{write_trace, Scenario};
use telavatar_server::{resolve, AvatarRuntime, EdgeServer, ServerError};

#[derive(Parser)]
#[command(name = "telavatar", version, about = "Edge-centric telepresence avatar")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Serve the HTTP API and the avatar protocol endpoint.
    Edge {
        #[arg(long)]
        config: PathBuf,
        /// HTTP listen address (overrides the config).
        #[arg(long)]
        http: Option<String>,
        /// UDP protocol listen address (overrides the config).
        #[arg(long)]
        proto: Option<String>,
    },
    /// Run a simulated avatar against an edge.
    Avatar {
        #[arg(long)]
        config: PathBuf,
        /// Edge protocol address (overrides the config).
        #[arg(long)]
        edge: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a scenario file with edge and avatar in one process.
    Demo {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the JSON-lines trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Plan a route on a map file and print it.
    Plan {
        map: PathBuf,
        #[arg(allow_negative_numbers = true)]
        start_x: f64,
        #[arg(allow_negative_numbers = true)]
        start_y: f64,
        /// Start heading, radians.
        #[arg(allow_negative_numbers = true)]
        start_theta: f64,
        #[arg(allow_negative_numbers = true)]
        goal_x: f64,
        #[arg(allow_negative_numbers = true)]
        goal_y: f64,
        /// Take nav parameters from this config file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Replay the commands kinematically and check they reach the goal.
        #[arg(long)]
        verify: bool,
        #[arg(long)]
        json: bool,
    },
}

/// An error with its exit code.
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn config(e: impl ToString) -> Self {
        Self { code: 2, message: e.to_string() }
    }

    pub fn run(e: impl ToString) -> Self {
        Self { code: 1, message: e.to_string() }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::config(e)
    }
}

impl From<ServerError> for Failure {
    fn from(e: ServerError) -> Self {
        // everything the server refuses at startup is a configuration problem
        Failure::config(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let default_level = match cli.command {
        Cmd::Edge { .. } | Cmd::Avatar { .. } => "info",
        _ => "error",
    };
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TELAVATAR_LOG", default_level)).init();

    let result = match cli.command {
        Cmd::Edge { config, http, proto } => run_edge(config, http, proto),
        Cmd::Avatar { config, edge, seed } => run_avatar(config, edge, seed),
        Cmd::Demo { scenario, seed, trace } => run_demo(scenario, seed, trace),
        Cmd::Plan { map, start_x, start_y, start_theta, goal_x, goal_y, config, verify, json } => {
            let start = telavatar_core::Pose::new(start_x, start_y, start_theta);
            plan::run(&map, start, (goal_x, goal_y), config.as_deref(), verify, json)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message.replace('\n', " "));
            ExitCode::from(f.code)
        }
    }
}

fn runtime() -> Result<tokio::runtime::Runtime, Failure> {
    tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(Failure::run)
}

async fn ctrl_c() {
    if let Err(e) = tokio::signal::ctrl_c().await {
        log::error!("cannot listen for ctrl-c: {e}");
        std::future::pending::<()>().await;
    }
}

fn run_edge(config: PathBuf, http: Option<String>, proto: Option<String>) -> Result<(), Failure> {
    let config = SystemConfig::load(&config)?;
    let map_text = config.read_map()?;
    let http = http.unwrap_or_else(|| config.listen.http.clone());
    let proto = proto.unwrap_or_else(|| config.listen.proto.clone());
    runtime()?.block_on(async {
        let server = EdgeServer::start(config.edge_config(), map_text, &http, &proto).await?;
        println!("edge: http://{} protocol udp {}", server.http_addr(), server.proto_addr());
        server.run_until(ctrl_c()).await;
        Ok(())
    })
}

fn load_script(config: &SystemConfig) -> Result<SpeakerScript, Failure> {
    let Some(path) = config.speaker_script_path() else { return Ok(SpeakerScript::default()) };
    let text = std::fs::read_to_string(&path).map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
    SpeakerScript::from_json(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))
}

fn run_avatar(config: PathBuf, edge: Option<String>, seed: Option<u64>) -> Result<(), Failure> {
    let config = SystemConfig::load(&config)?;
    let script = load_script(&config)?;
    let edge = edge.or_else(|| config.avatar.edge.clone()).unwrap_or_else(|| config.listen.proto.clone());
    let edge_at = resolve(&edge)?;
    let bind = if edge_at.ip().is_loopback() { "127.0.0.1:0" } else { "0.0.0.0:0" };
    let seed = seed.unwrap_or(config.seed);
    runtime()?.block_on(async {
        let avatar = AvatarRuntime::start(config.avatar_config(), script, edge_at, bind, seed).await?;
        println!("avatar: udp {} -> edge {edge_at}", avatar.local_addr());
        ctrl_c().await;
        let pose = avatar.shutdown().await;
        println!("avatar: stopped at x={:.3} y={:.3} theta={:.3}", pose.x, pose.y, pose.theta);
        Ok(())
    })
}

fn run_demo(path: PathBuf, seed: Option<u64>, trace: Option<PathBuf>) -> Result<(), Failure> {
    let scenario = Scenario::load(&path)?;
    let outcome = scenario.run(seed)?;
    if let Some(trace_path) = &trace {
        write_trace(trace_path, &outcome.trace)
            .map_err(|e| Failure::run(format!("cannot write trace {}: {e}", trace_path.display())))?;
    }
    let p = outcome.final_pose;
    println!(
        "demo: {} steps, {} ms virtual, final pose x={:.4} y={:.4} theta={:.2}deg",
        scenario.steps.len(),
        outcome.virtual_ms,
        p.x,
        p.y,
        p.theta.to_degrees()
    );
    if outcome.passed() {
        println!("demo: all assertions passed");
        return Ok(());
    }
    for f in &outcome.failures[..outcome.failures.len() - 1] {
        eprintln!("error: {}", f.replace('\n', " "));
    }
    Err(Failure::run(outcome.failures.last().expect("failures is non-empty")))
}
