use std::path::PathBuf;
use std::process::ExitCode;

use agentkit::tictactoe::PlayerKind;
use agentkit::ProviderKind;
use agentkit_scenarios::{run, RunConfig, Scenario};
use clap::Parser;
use serde_json::Value as Json;

/// Run the travel planner, tic-tac-toe or towerworld scenario.
///
/// Exit codes: 0 success, 1 scenario failure (goal checks only with
/// --strict), 2 configuration error, 3 provider error.
#[derive(Parser, Debug)]
#[command(name = "agentkit", version)]
struct Cli {
    /// travel | ttt | tower
    #[arg(long)]
    scenario: Scenario,

    /// mock | openai | gemini
    #[arg(long, default_value = "mock")]
    provider: ProviderKind,

    #[arg(long)]
    model: Option<String>,

    /// Backend parameter as name=value, e.g. temperature=0.2 (repeatable)
    #[arg(long = "param", value_name = "NAME=VALUE")]
    params: Vec<String>,

    /// API key file (default: $AGENTKIT_KEY_FILE, then ../api.key)
    #[arg(long)]
    key_file: Option<PathBuf>,

    /// Override the provider endpoint
    #[arg(long)]
    base_url: Option<String>,

    #[arg(long)]
    mock_script: Option<PathBuf>,

    /// Record every chat exchange to this JSONL file
    #[arg(long)]
    record: Option<PathBuf>,

    /// Answer prompts from a previous recording instead of a provider
    #[arg(long)]
    replay: Option<PathBuf>,

    /// Directory for transcript.json and events.jsonl
    #[arg(long)]
    out: Option<PathBuf>,

    /// Exit 1 when the scenario's goal is not met
    #[arg(long)]
    strict: bool,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// JSON file with [{name, description, system_message}, ...]
    #[arg(long)]
    roles: Option<PathBuf>,

    /// Travel task text
    #[arg(long)]
    task: Option<String>,

    /// Player types for X and O, e.g. linear,llm-basic
    #[arg(long, value_delimiter = ',', default_value = "linear,linear")]
    players: Vec<PlayerKind>,

    #[arg(long, default_value_t = 1)]
    matches: u32,

    /// Initial blocks: a,b,c (all on the table), inline JSON or a .json file
    #[arg(long)]
    state: Option<String>,

    /// Tower to build, bottom first, e.g. a,b,c
    #[arg(long, value_delimiter = ',')]
    goal: Option<Vec<String>>,

    /// Seconds to wait on any single step
    #[arg(long, default_value_t = 120)]
    timeout: u64,
}

fn parse_param(raw: &str) -> Result<(String, Json), String> {
    let (name, value) = raw.split_once('=').ok_or_else(|| format!("--param {raw}: expected NAME=VALUE"))?;
    let value = serde_json::from_str(value).unwrap_or_else(|_| Json::String(value.to_string()));
    Ok((name.trim().to_string(), value))
}

fn config(cli: Cli) -> Result<RunConfig, String> {
    if cli.players.len() != 2 {
        return Err(format!("--players needs exactly two types, got {}", cli.players.len()));
    }
    let mut cfg = RunConfig::new(cli.scenario);
    for raw in &cli.params {
        let (name, value) = parse_param(raw)?;
        cfg.params.insert(name, value);
    }
    if cli.scenario == Scenario::Tower {
        cfg.params.entry("temperature".into()).or_insert(Json::from(0.0));
    }
    cfg.provider = cli.provider;
    cfg.model = cli.model;
    cfg.key_file = cli.key_file;
    cfg.base_url = cli.base_url;
    cfg.mock_script = cli.mock_script;
    cfg.record = cli.record;
    cfg.replay = cli.replay;
    cfg.out = cli.out;
    cfg.strict = cli.strict;
    cfg.seed = cli.seed;
    cfg.roles = cli.roles;
    cfg.task = cli.task;
    cfg.players = [cli.players[0], cli.players[1]];
    cfg.matches = cli.matches;
    cfg.state = cli.state;
    cfg.goal = cli.goal;
    cfg.timeout_secs = cli.timeout;
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cfg = match config(Cli::parse()) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&cfg) {
        Ok(report) => {
            print!("{}", report.summary);
            if let Some(dir) = &cfg.out {
                println!("transcript: {}", dir.join("transcript.json").display());
            }
            ExitCode::from(report.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
