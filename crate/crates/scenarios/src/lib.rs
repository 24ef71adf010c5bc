//! Runners for the travel planner, tic-tac-toe and towerworld scenarios.
//!
//! Each run writes a [`Transcript`]: the config echo and its hash, an outcome
//! summary and the runtime event log. Mock and replay runs are reproducible,
//! so two runs with the same config produce the same [`Transcript::body`].

pub mod config;
pub mod transcript;

use std::fmt::Write as _;
use std::sync::Arc;

use agentkit::blocks::{run_tower_scenario, ScenarioResult};
use agentkit::llm::{
    initialize, load_api_key_from_file, resolve_key_path, LlmError, MockScript, ProviderConfig, ProviderKind,
    Recorder, ReplayProvider, SharedProvider,
};
use agentkit::runtime::roundrobin::{run_round_robin, Role, RoundRobinOutcome, RunStatus};
use agentkit::runtime::{EventLog, System};
use agentkit::tictactoe::{play_match, MatchEnd, MatchResult, MatchRules, Token};
use serde::Serialize;
use serde_json::{json, Value as Json};
use thiserror::Error;

pub use config::{RunConfig, Scenario};
pub use transcript::Transcript;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("provider error: {0}")]
    Provider(LlmError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Io(_) => 2,
            RunError::Provider(_) => 3,
        }
    }
}

pub const DEFAULT_TASK: &str = "Plan a 3 day trip to Nepal.";

pub fn default_roles() -> Vec<Role> {
    vec![
        Role::new(
            "planner",
            "A helpful assistant that can plan trips.",
            "You are a helpful assistant that can suggest a travel plan for a user based on their request.",
        ),
        Role::new(
            "local",
            "A local assistant that can suggest local activities or places to visit.",
            "You are a helpful assistant that can suggest authentic and interesting local activities or \
             places to visit for a user and can utilize any context information provided.",
        ),
        Role::new(
            "language",
            "A helpful assistant that can provide language tips for a given destination.",
            "You are a helpful assistant that can review travel plans, providing feedback on \
             important/critical tips about how best to address language or communication challenges for \
             the given destination. If the plan already includes language tips, you can mention that the \
             plan is satisfactory, with rationale.",
        ),
        Role::new(
            "summary",
            "A helpful assistant that can summarize the travel plan.",
            "You are a helpful assistant that can take in all of the suggestions and advice from the other \
             agents and provide a detailed final travel plan. You must ensure that the final plan is \
             integrated and complete. YOUR FINAL RESPONSE MUST BE THE COMPLETE PLAN. When the plan is \
             complete and all perspectives are integrated, you can respond with TERMINATE.",
        ),
    ]
}

fn default_model(kind: ProviderKind) -> &'static str {
    match kind {
        ProviderKind::Mock => "mock",
        ProviderKind::OpenAi => "gpt-4o",
        ProviderKind::Gemini => "gemini-2.0-flash",
    }
}

/// Builds the chat provider, or `None` when the scenario needs no LLM.
pub fn build_provider(cfg: &RunConfig) -> Result<Option<SharedProvider>, RunError> {
    if !cfg.needs_provider() {
        return Ok(None);
    }
    let config_err = |e: LlmError| RunError::Config(e.to_string());
    if let Some(path) = &cfg.replay {
        return Ok(Some(Arc::new(ReplayProvider::from_file(path).map_err(config_err)?)));
    }
    let mut pc = match cfg.provider {
        ProviderKind::Mock => {
            let path = cfg.mock_script.as_ref().ok_or_else(|| RunError::Config("missing --mock-script".into()))?;
            ProviderConfig::mock(MockScript::from_file(path).map_err(config_err)?)
        }
        kind => {
            let key = load_api_key_from_file(resolve_key_path(cfg.key_file.as_deref())).map_err(config_err)?;
            let model = cfg.model.clone().unwrap_or_else(|| default_model(kind).to_string());
            let mut pc = ProviderConfig::new(kind, model);
            pc.api_key = Some(key);
            pc.base_url = cfg.base_url.clone();
            pc.timeout = cfg.timeout();
            pc
        }
    };
    pc.params = cfg.params.clone();
    initialize(pc).map(Some).map_err(config_err)
}

pub struct RunReport {
    pub transcript: Transcript,
    /// Human-readable summary for the console.
    pub summary: String,
    pub exit_code: i32,
}

struct Outcome {
    json: Json,
    summary: String,
    failed: bool,
}

/// Validates `cfg`, runs its scenario and writes outputs under `cfg.out`.
pub fn run(cfg: &RunConfig) -> Result<RunReport, RunError> {
    cfg.validate()?;
    let started = chrono::Utc::now().to_rfc3339();
    if let Some(dir) = &cfg.out {
        std::fs::create_dir_all(dir)?;
    }
    let log = Arc::new(match &cfg.out {
        Some(dir) => EventLog::streaming_to(dir.join("events.jsonl"))?,
        None => EventLog::default(),
    });
    let recorder = Arc::new(match &cfg.record {
        Some(path) => Recorder::to_file(path).map_err(|e| RunError::Config(e.to_string()))?,
        None => Recorder::in_memory(),
    });
    let provider = build_provider(cfg)?;
    let system = || System::builder().event_log(log.clone()).recorder(recorder.clone()).build();
    let outcome = match cfg.scenario {
        Scenario::Travel => run_travel(cfg, &system(), provider.expect("travel needs a provider"))?,
        Scenario::Ttt => run_ttt(cfg, system, provider),
        Scenario::Tower => run_tower(cfg, &system(), provider.expect("tower needs a provider"))?,
    };
    let events = log.canonical();
    let provider_failed = events.iter().any(|e| e["kind"] == "chat-error");
    let exit_code = if provider_failed {
        3
    } else if outcome.failed {
        1
    } else {
        0
    };
    let transcript = Transcript::new(cfg, started, outcome.json, events);
    if let Some(dir) = &cfg.out {
        transcript.write(&dir.join("transcript.json"))?;
    }
    Ok(RunReport { transcript, summary: outcome.summary, exit_code })
}

fn to_json<T: Serialize>(value: &T) -> Json {
    serde_json::to_value(value).expect("outcomes serialize")
}

fn run_travel(cfg: &RunConfig, system: &System, provider: SharedProvider) -> Result<Outcome, RunError> {
    let roles = match &cfg.roles {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| RunError::Config(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<Vec<Role>>(&text).map_err(|e| RunError::Config(format!("bad roles file: {e}")))?
        }
        None => default_roles(),
    };
    let task = cfg.task.as_deref().unwrap_or(DEFAULT_TASK);
    let outcome = run_round_robin(system, "main", &roles, task, provider).unwrap_or_else(|e| RoundRobinOutcome {
        status: RunStatus::Failed,
        sections: Vec::new(),
        error: Some(e.to_string()),
    });
    let mut summary = String::new();
    for section in &outcome.sections {
        let _ = writeln!(summary, "-----{}-----\n{}", section.role, section.result);
    }
    let _ = writeln!(summary, "status: {}", to_json(&outcome.status).as_str().unwrap_or_default());
    if let Some(e) = &outcome.error {
        let _ = writeln!(summary, "error: {e}");
    }
    Ok(Outcome { failed: outcome.status == RunStatus::Failed, json: to_json(&outcome), summary })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Tally {
    pub wins: u32,
    pub draws: u32,
    pub losses: u32,
    pub illegal: u32,
    pub unreadable: u32,
    pub fallbacks: u32,
}

pub fn aggregate(results: &[MatchResult]) -> [(Token, Tally); 2] {
    [Token::X, Token::O].map(|token| {
        let mut t = Tally::default();
        for r in results {
            match (r.end, r.winner) {
                (MatchEnd::Draw, _) => t.draws += 1,
                (_, Some(w)) if w == token => t.wins += 1,
                (_, Some(_)) => t.losses += 1,
                _ => {}
            }
            if let Some(s) = r.stats.get(&token) {
                t.illegal += s.illegal;
                t.unreadable += s.unreadable;
                t.fallbacks += s.fallbacks;
            }
        }
        (token, t)
    })
}

fn run_ttt(cfg: &RunConfig, system: impl Fn() -> System, provider: Option<SharedProvider>) -> Outcome {
    let mut results = Vec::new();
    let mut errors = Vec::new();
    let mut summary = String::new();
    for i in 0..cfg.matches {
        let rules = MatchRules { seed: cfg.seed.wrapping_add(u64::from(i)), timeout: cfg.timeout(), ..MatchRules::default() };
        match play_match(&system(), cfg.players[0], cfg.players[1], provider.clone(), &rules) {
            Ok(r) => {
                let verdict = match (r.end, r.winner) {
                    (MatchEnd::Draw, _) => "draw".to_string(),
                    (MatchEnd::Forfeit, Some(w)) => format!("{w} wins by forfeit"),
                    (_, Some(w)) => format!("{w} wins"),
                    (_, None) => format!("no result ({})", r.error.as_deref().unwrap_or("unknown error")),
                };
                let _ = writeln!(summary, "match {}: {verdict} after {} moves", i + 1, r.moves.len());
                results.push(r);
            }
            Err(e) => {
                let _ = writeln!(summary, "match {}: failed: {e}", i + 1);
                errors.push(e.to_string());
            }
        }
    }
    let table = aggregate(&results);
    let _ = writeln!(summary, "player  type            wins  draws  losses  illegal  unreadable  fallbacks");
    for (token, t) in &table {
        let kind = cfg.players[if *token == Token::X { 0 } else { 1 }].as_str();
        let _ = writeln!(
            summary,
            "{:<7} {:<15} {:>4}  {:>5}  {:>6}  {:>7}  {:>10}  {:>9}",
            token.as_str(),
            kind,
            t.wins,
            t.draws,
            t.losses,
            t.illegal,
            t.unreadable,
            t.fallbacks
        );
    }
    let failed = !errors.is_empty() || results.iter().any(|r| r.end == MatchEnd::Error);
    let json = json!({
        "matches": results,
        "aggregate": table.iter().map(|(t, tally)| (t.as_str(), tally)).collect::<std::collections::BTreeMap<_, _>>(),
        "errors": errors,
    });
    Outcome { json, summary, failed }
}

fn run_tower(cfg: &RunConfig, system: &System, provider: SharedProvider) -> Result<Outcome, RunError> {
    let initial = cfg.initial_state()?;
    let goal = cfg.tower_goal()?;
    let result: ScenarioResult = run_tower_scenario(system, provider, &initial, &goal, cfg.timeout());
    let mut summary = String::new();
    let _ = writeln!(summary, "plan:");
    for (i, action) in result.plan.iter().enumerate() {
        let _ = writeln!(summary, "  {}. {action}", i + 1);
    }
    for o in &result.outcomes {
        let verdict = o.error.as_deref().unwrap_or("ok");
        let _ = writeln!(summary, "step {}: {} -> {verdict}", o.step + 1, o.action);
    }
    if let Some(e) = &result.error {
        let _ = writeln!(summary, "error: {e}");
    }
    let verdict = if result.goal_satisfied { "satisfied" } else { "not satisfied" };
    let _ = writeln!(summary, "goal {goal}: {verdict}");
    Ok(Outcome { failed: cfg.strict && !result.goal_satisfied, json: to_json(&result), summary })
}
