//! Request/agree/inform orchestration of role-playing assistants.
//!
//! An orchestrator hands a task to each role in turn. Every assistant agrees,
//! prompts its LLM with its description, system message and the task so far,
//! then informs the orchestrator of the result. The orchestrator appends each
//! result to the running task before asking the next role.

use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{AgentContext, AgentId, AgentSpec, Behavior, Performative, RuntimeError, System};
use crate::belief::{Predicate, Term};
use crate::llm::SharedProvider;
use crate::template::{Bindable, PromptTemplate};

pub const ASSISTANT: &str = "assistant";
pub const ROUND_ROBIN: &str = "round_robin";
/// Between accumulated sections of the task text.
pub const SEPARATOR: &str = "\n\n";
pub const TERMINATE: &str = "TERMINATE";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Role {
    pub name: String,
    pub description: String,
    pub system_message: String,
}

impl Role {
    pub fn new(name: &str, description: &str, system_message: &str) -> Self {
        Role {
            name: name.to_string(),
            description: description.to_string(),
            system_message: system_message.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Completed,
    Terminated,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub role: String,
    /// Task text sent to the role.
    pub request: String,
    pub result: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRobinOutcome {
    pub status: RunStatus,
    pub sections: Vec<Section>,
    pub error: Option<String>,
}

fn p(src: &str) -> Predicate {
    Predicate::parse(src).expect("static pattern parses")
}

fn text_pred(functor: &str, values: &[&str]) -> Predicate {
    Predicate::ground(functor, values.iter().copied()).expect("nonempty functor")
}

/// Assistant: agrees to `task(T)`, asks the LLM, informs `result(reply)`.
/// Startup arguments are `[description, system message]`.
pub fn assistant_behavior(provider: SharedProvider) -> Behavior {
    Behavior::new()
        .on_start(|ctx, args| {
            let [desc, sm] = args else {
                return Err(RuntimeError::Plan("assistant expects [description, systemMessage]".into()));
            };
            ctx.add_belief(text_pred("description", &[desc]))?;
            ctx.add_belief(text_pred("systemMessage", &[sm]))
        })
        .on_message(Performative::Request, p("task(string T)"), move |ctx, msg, s| {
            let task = s.text("T").unwrap_or_default().to_string();
            ctx.send(Performative::Agree, &msg.sender, text_pred("task", &[&task]))?;

            let desc = ctx.beliefs().first(&p("description(string D)"));
            let sm = ctx.beliefs().first(&p("systemMessage(string S)"));
            let (Some(desc), Some(sm)) = (desc, sm) else {
                return Err(RuntimeError::Plan("assistant was not initialised".into()));
            };
            let mut template = PromptTemplate::new("${description}${systemMessage}${task}")
                .expect("static template parses");
            template.add_binding("description", desc.text("D").unwrap_or_default()).ok();
            template.add_binding("systemMessage", sm.text("S").unwrap_or_default()).ok();
            template.add_binding("task", &task).ok();
            let prompt = template.render_text().expect("all parameters bound");

            let reply = match ctx.chat(provider.as_ref(), &prompt) {
                Ok(r) => r,
                Err(e) => {
                    log::warn!("assistant {}: chat failed: {e}", ctx.name());
                    format!("error: {e}")
                }
            };
            ctx.send(Performative::Inform, &msg.sender, text_pred("result", &[&reply]))
        })
}

/// Orchestrator. Startup arguments: `[task, role name, role name, ...]`;
/// `role(name, description, systemMessage)` beliefs say whom to create.
fn orchestrator_behavior(outcome: Arc<Mutex<Option<RoundRobinOutcome>>>) -> Behavior {
    Behavior::new()
        .on_start(move |ctx, args| {
            let result = orchestrate(ctx, args).unwrap_or_else(|e| RoundRobinOutcome {
                status: RunStatus::Failed,
                sections: Vec::new(),
                error: Some(e.to_string()),
            });
            *outcome.lock().expect("outcome poisoned") = Some(result);
            ctx.stop();
            Ok(())
        })
        .on_message(Performative::Agree, p("task(string T)"), |ctx, msg, _| {
            ctx.add_belief(text_pred("agreed", &[msg.sender.as_str()]))
        })
        .on_message(Performative::Inform, p("result(string R)"), |ctx, msg, s| {
            let result = s.text("R").unwrap_or_default();
            ctx.add_belief(text_pred("responded", &[msg.sender.as_str(), result]))
        })
}

fn orchestrate(ctx: &mut AgentContext, args: &[String]) -> Result<RoundRobinOutcome, RuntimeError> {
    let Some((task, order)) = args.split_first() else {
        return Err(RuntimeError::Plan("orchestrator expects [task, roles...]".into()));
    };
    // setup: one assistant per role belief
    for role in ctx.beliefs().query(&p("role(string N, string D, string S)")) {
        let spec = AgentSpec::new(ASSISTANT).args([
            role.text("D").unwrap_or_default(),
            role.text("S").unwrap_or_default(),
        ]);
        ctx.spawn(spec, role.text("N").unwrap_or_default())?;
    }

    let mut sections = Vec::new();
    let mut status = RunStatus::Completed;
    let mut error = None;
    let mut mess = task.clone();
    for name in order {
        let to = AgentId::new(name.as_str());
        let step = ctx.send(Performative::Request, &to, text_pred("task", &[&mess])).and_then(|_| {
            let pattern = Predicate::new("responded", vec![Term::text(name.as_str()), Term::text_var("R")])
                .expect("nonempty functor");
            ctx.wait_for(pattern, None)
        });
        let result = match step {
            Ok(s) => s.text("R").unwrap_or_default().to_string(),
            Err(e) => {
                status = RunStatus::Failed;
                error = Some(e.to_string());
                break;
            }
        };
        ctx.note("print", json!({"text": format!("-----{name}-----")}));
        ctx.note("print", json!({"text": result}));
        let terminated = result.contains(TERMINATE);
        sections.push(Section { role: name.clone(), request: mess.clone(), result: result.clone() });
        if terminated {
            status = RunStatus::Terminated;
            break;
        }
        mess = format!("{mess}{SEPARATOR}{result}");
    }
    Ok(RoundRobinOutcome { status, sections, error })
}

/// Spawns one assistant per role plus an orchestrator named `orchestrator`,
/// runs the task through the roles in order and shuts the system down.
pub fn run_round_robin(
    system: &System,
    orchestrator: &str,
    roles: &[Role],
    task: &str,
    provider: SharedProvider,
) -> Result<RoundRobinOutcome, RuntimeError> {
    if roles.is_empty() {
        return Err(RuntimeError::Plan("round robin needs at least one role".into()));
    }
    let outcome = Arc::new(Mutex::new(None));
    system.register(ASSISTANT, assistant_behavior(provider));
    system.register(ROUND_ROBIN, orchestrator_behavior(outcome.clone()));

    let mut spec = AgentSpec::new(ROUND_ROBIN);
    for r in roles {
        spec = spec.belief(text_pred("role", &[&r.name, &r.description, &r.system_message]));
    }
    let mut args = vec![task.to_string()];
    args.extend(roles.iter().map(|r| r.name.clone()));
    let id = system.spawn(spec.args(args), orchestrator)?;
    system.join(&id);
    system.shutdown();

    let result = outcome.lock().expect("outcome poisoned").take();
    result.ok_or_else(|| RuntimeError::Plan("orchestrator exited without an outcome".into()))
}
