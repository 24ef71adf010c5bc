//! Blocks world: a table, named blocks and one gripper.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::belief::{BeliefBase, Predicate, Term};
use crate::llm::SharedProvider;
use crate::runtime::{AgentContext, AgentId, AgentSpec, Behavior, Performative, RuntimeError, System};
use crate::template::{Bindable, CompositeTemplate, PromptTemplate, RagTemplate, Render, ResponseTemplate, TemplateError};

pub const TABLE: &str = "table";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BlocksError {
    #[error("the gripper is already holding a block")]
    GripperFull,
    #[error("the gripper is empty")]
    GripperEmpty,
    #[error("the gripper is not holding {0}")]
    NotHolding(String),
    #[error("block {0} is not clear")]
    BlockNotClear(String),
    #[error("unknown block {0}")]
    UnknownBlock(String),
    #[error("cannot put a block down on {0}")]
    InvalidDestination(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
}

/// Serialized as `{"action": "pickup", "args": ["a"]}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawAction", into = "RawAction")]
pub enum BlockAction {
    Pickup(String),
    Putdown(String, String),
}

#[derive(Serialize, Deserialize)]
struct RawAction {
    action: String,
    args: Vec<String>,
}

impl From<BlockAction> for RawAction {
    fn from(a: BlockAction) -> Self {
        match a {
            BlockAction::Pickup(x) => RawAction { action: "pickup".into(), args: vec![x] },
            BlockAction::Putdown(x, y) => RawAction { action: "putdown".into(), args: vec![x, y] },
        }
    }
}

impl TryFrom<RawAction> for BlockAction {
    type Error = String;

    fn try_from(raw: RawAction) -> Result<Self, Self::Error> {
        let mut args = raw.args.into_iter();
        match (raw.action.as_str(), args.next(), args.next(), args.next()) {
            ("pickup", Some(x), None, None) => Ok(BlockAction::Pickup(x)),
            ("putdown", Some(x), Some(y), None) => Ok(BlockAction::Putdown(x, y)),
            (other, ..) => Err(format!("bad action {other:?} or argument count")),
        }
    }
}

impl fmt::Display for BlockAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlockAction::Pickup(b) => write!(f, "pickup {b}"),
            BlockAction::Putdown(a, b) => write!(f, "putdown {a} {b}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlocksState {
    /// Block to its support: another block or `table`.
    on: BTreeMap<String, String>,
    holding: Option<String>,
}

impl BlocksState {
    pub fn new<A, B>(on: impl IntoIterator<Item = (A, B)>, holding: Option<&str>) -> Result<Self, BlocksError>
    where
        A: Into<String>,
        B: Into<String>,
    {
        let state = BlocksState {
            on: on.into_iter().map(|(a, b)| (a.into(), b.into())).collect(),
            holding: holding.map(str::to_string),
        };
        state.check()?;
        Ok(state)
    }

    pub fn all_on_table<S: AsRef<str>>(blocks: &[S]) -> Self {
        BlocksState {
            on: blocks.iter().map(|b| (b.as_ref().to_string(), TABLE.to_string())).collect(),
            holding: None,
        }
    }

    pub fn on(&self) -> &BTreeMap<String, String> {
        &self.on
    }

    pub fn holding(&self) -> Option<&str> {
        self.holding.as_deref()
    }

    pub fn support(&self, block: &str) -> Option<&str> {
        self.on.get(block).map(String::as_str)
    }

    pub fn blocks(&self) -> BTreeSet<&str> {
        self.on.keys().map(String::as_str).chain(self.holding.as_deref()).collect()
    }

    pub fn has_block(&self, block: &str) -> bool {
        self.on.contains_key(block) || self.holding.as_deref() == Some(block)
    }

    /// Verifies the structural invariants.
    pub fn check(&self) -> Result<(), BlocksError> {
        let invalid = |m: String| Err(BlocksError::InvalidState(m));
        if let Some(h) = &self.holding {
            if self.on.contains_key(h) {
                return invalid(format!("held block {h} also sits on something"));
            }
        }
        for (block, support) in &self.on {
            if block == TABLE || block.is_empty() {
                return invalid(format!("bad block name {block:?}"));
            }
            if support != TABLE && !self.on.contains_key(support) {
                return invalid(format!("{block} sits on {support}, which is not on anything"));
            }
            let mut seen = BTreeSet::from([block.as_str()]);
            let mut cur = support.as_str();
            while cur != TABLE {
                if !seen.insert(cur) {
                    return invalid(format!("support cycle through {block}"));
                }
                cur = &self.on[cur];
            }
        }
        let mut supports = BTreeSet::new();
        for support in self.on.values().filter(|s| *s != TABLE) {
            if !supports.insert(support) {
                return invalid(format!("two blocks sit on {support}"));
            }
        }
        Ok(())
    }

    pub fn is_clear(&self, block: &str) -> Result<bool, BlocksError> {
        if !self.has_block(block) {
            return Err(BlocksError::UnknownBlock(block.to_string()));
        }
        Ok(self.holding.as_deref() != Some(block) && !self.on.values().any(|s| s == block))
    }

    /// Returns the successor state; `self` is never modified.
    pub fn exec_action(&self, action: &BlockAction) -> Result<BlocksState, BlocksError> {
        let mut next = self.clone();
        match action {
            BlockAction::Pickup(x) => {
                if !self.has_block(x) {
                    return Err(BlocksError::UnknownBlock(x.clone()));
                }
                if self.holding.is_some() {
                    return Err(BlocksError::GripperFull);
                }
                if !self.is_clear(x)? {
                    return Err(BlocksError::BlockNotClear(x.clone()));
                }
                next.on.remove(x);
                next.holding = Some(x.clone());
            }
            BlockAction::Putdown(a, b) => {
                let held = self.holding.as_deref().ok_or(BlocksError::GripperEmpty)?;
                if !self.has_block(a) {
                    return Err(BlocksError::UnknownBlock(a.clone()));
                }
                if held != a {
                    return Err(BlocksError::NotHolding(a.clone()));
                }
                if b == a {
                    return Err(BlocksError::InvalidDestination(b.clone()));
                }
                if b != TABLE && !self.is_clear(b)? {
                    return Err(BlocksError::BlockNotClear(b.clone()));
                }
                next.holding = None;
                next.on.insert(a.clone(), b.clone());
            }
        }
        Ok(next)
    }

    /// `on(A, B)` and `holding(C)` facts, blocks in name order.
    pub fn to_beliefs(&self) -> Vec<Predicate> {
        let mut out: Vec<Predicate> = self
            .on
            .iter()
            .map(|(a, b)| Predicate::ground("on", [a.as_str(), b.as_str()]).expect("nonempty functor"))
            .collect();
        if let Some(h) = &self.holding {
            out.push(Predicate::ground("holding", [h.as_str()]).expect("nonempty functor"));
        }
        out
    }
}

/// Blocks bottom first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TowerGoal(Vec<String>);

impl TowerGoal {
    pub fn new<S: Into<String>>(blocks: impl IntoIterator<Item = S>) -> Result<Self, BlocksError> {
        let blocks: Vec<String> = blocks.into_iter().map(Into::into).collect();
        if blocks.is_empty() {
            return Err(BlocksError::InvalidState("empty tower goal".into()));
        }
        let distinct: BTreeSet<&String> = blocks.iter().collect();
        if distinct.len() != blocks.len() {
            return Err(BlocksError::InvalidState("tower goal repeats a block".into()));
        }
        Ok(TowerGoal(blocks))
    }

    pub fn blocks(&self) -> &[String] {
        &self.0
    }

    /// Text form used in prompts: `["a", "b", "c"]`.
    pub fn to_text(&self) -> String {
        let quoted: Vec<String> = self.0.iter().map(|b| format!("\"{b}\"")).collect();
        format!("[{}]", quoted.join(", "))
    }
}

impl fmt::Display for TowerGoal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

pub fn goal_satisfied(state: &BlocksState, goal: &TowerGoal) -> bool {
    if state.holding.is_some() {
        return false;
    }
    let mut below = TABLE;
    for block in goal.blocks() {
        if state.support(block) != Some(below) {
            return false;
        }
        below = block;
    }
    state.is_clear(below).unwrap_or(false)
}

pub const INSTRUCTIONS: &str = r#"I am an agent that can build block towers.  A block tower is
formed by placing blocks so they sit on top of each other.
The bottom block of the tower sits on the table. Towers are
defined as a list of blocks where blocks have names like
"a", "b" or "c". The first block in the list sits on
the table.

In the situation where I want to build the tower
["a", "b"] then the desired state of the table would be:

block "a" is on the table and block "b" is on "a".
Block names should be lowercase."#;

pub const STATE_INTRO: &str = "The following sentences define the current state of the
blocks.";

pub const ACTIONS: &str = r#"I can perform two actions:
- if I am not holding anything, I can pick up a block
  using the json "{ 'action':'pickup', 'args':[X] }".
- if I am holding a block A, then I can put A down on
  either another block or the table using the json
  "{ 'action':'putdown', 'args':[A, B] }"
  where B is either the name of a block or the 'table'.

Given the current state of the blocks, what sequence of
actions should be performed next to build the tower
${tower}?

Answer with only the list of actions defined using JSON."#;

pub const PLAN_RESPONSE: &str = "```json${json}```";

/// Instructions, the current state mined from `on`/`holding` beliefs, then
/// the action menu and the `${tower}` question.
pub fn tower_template() -> CompositeTemplate {
    let mut rag = RagTemplate::new(STATE_INTRO);
    rag.add_input(Predicate::parse("on(string A, string B)").expect("static"), "block ${A} is on top of ${B}.")
        .expect("static");
    rag.add_input(Predicate::parse("holding(string C)").expect("static"), "the gripper is holding ${C}.")
        .expect("static");
    let mut composite = CompositeTemplate::new();
    composite.add_template(PromptTemplate::new(INSTRUCTIONS).expect("static"));
    composite.add_template(rag);
    composite.add_template(PromptTemplate::new(ACTIONS).expect("static"));
    composite
}

pub fn build_tower_prompt(
    template: &mut CompositeTemplate,
    goal: &TowerGoal,
    beliefs: &BeliefBase,
) -> Result<String, TemplateError> {
    template.reset();
    template.add_binding("tower", &goal.to_text())?;
    template.render(Some(beliefs))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("no ```json block in the reply")]
    NoMatch,
    #[error("malformed plan: {0}")]
    MalformedPlan(String),
}

/// Rewrites single-quoted strings as double-quoted ones, leaving text
/// inside double quotes alone.
pub fn normalize_quotes(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut in_double = false;
    let mut in_single = false;
    let mut escaped = false;
    for c in text.chars() {
        if escaped {
            out.push(c);
            escaped = false;
            continue;
        }
        match c {
            '\\' if in_double || in_single => {
                out.push(c);
                escaped = true;
            }
            '"' if in_single => out.push_str("\\\""),
            '"' => {
                in_double = !in_double;
                out.push(c);
            }
            '\'' if !in_double => {
                in_single = !in_single;
                out.push('"');
            }
            _ => out.push(c),
        }
    }
    out
}

fn block_name(arg: &serde_json::Value) -> Result<String, PlanError> {
    let name = arg.as_str().ok_or_else(|| PlanError::MalformedPlan(format!("argument {arg} is not a string")))?;
    let name = name.trim().to_lowercase();
    if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || c == '_') {
        return Err(PlanError::MalformedPlan(format!("bad block name {name:?}")));
    }
    Ok(name)
}

/// Extracts the first fenced json block and reads it as a list of actions.
pub fn parse_plan(reply: &str) -> Result<Vec<BlockAction>, PlanError> {
    let mut response = ResponseTemplate::new(PLAN_RESPONSE).expect("static template");
    response.infer_bindings(reply).map_err(|_| PlanError::NoMatch)?;
    let body = normalize_quotes(response.get_binding("json").unwrap_or_default());
    let value: serde_json::Value =
        serde_json::from_str(&body).map_err(|e| PlanError::MalformedPlan(e.to_string()))?;
    let steps = value.as_array().ok_or_else(|| PlanError::MalformedPlan("plan is not a JSON array".into()))?;
    steps
        .iter()
        .enumerate()
        .map(|(i, step)| {
            let bad = |m: &str| PlanError::MalformedPlan(format!("step {i}: {m}"));
            let action = step.get("action").and_then(|a| a.as_str()).ok_or_else(|| bad("missing action"))?;
            let args = step.get("args").and_then(|a| a.as_array()).ok_or_else(|| bad("missing args"))?;
            match (action.trim().to_lowercase().as_str(), args.as_slice()) {
                ("pickup", [x]) => Ok(BlockAction::Pickup(block_name(x)?)),
                ("putdown", [a, b]) => Ok(BlockAction::Putdown(block_name(a)?, block_name(b)?)),
                ("pickup" | "putdown", _) => Err(bad("wrong number of args")),
                (other, _) => Err(bad(&format!("unknown action {other:?}"))),
            }
        })
        .collect()
}

pub fn plan_to_fenced_json(plan: &[BlockAction]) -> String {
    format!("```json\n{}\n```", serde_json::to_string(plan).expect("actions serialize"))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionOutcome {
    pub step: usize,
    pub action: BlockAction,
    /// `None` when the action succeeded.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub goal: TowerGoal,
    pub initial: BlocksState,
    pub plan: Vec<BlockAction>,
    pub outcomes: Vec<ActionOutcome>,
    pub final_state: BlocksState,
    pub goal_satisfied: bool,
    pub error: Option<String>,
}

const ENV: &str = "blocks";
const PLANNER: &str = "tower";

fn p(src: &str) -> Predicate {
    Predicate::parse(src).expect("static pattern")
}

fn pred(functor: &str, args: Vec<Term>) -> Predicate {
    Predicate::new(functor, args).expect("nonempty functor")
}

/// Sends the full state to the planner: a `snapshot` marker, then one
/// inform per fact.
fn send_snapshot(ctx: &AgentContext, state: &BlocksState) -> Result<(), RuntimeError> {
    let planner = AgentId::new(PLANNER);
    ctx.send(Performative::Inform, &planner, pred("snapshot", vec![]))?;
    for fact in state.to_beliefs() {
        ctx.send(Performative::Inform, &planner, fact)?;
    }
    Ok(())
}

fn environment_behavior(state: Arc<Mutex<BlocksState>>) -> Behavior {
    let start_state = state.clone();
    let exec = move |ctx: &mut AgentContext, step: i64, action: BlockAction| -> Result<(), RuntimeError> {
        let mut st = state.lock().expect("blocks state");
        let verdict = match st.exec_action(&action) {
            Ok(next) => {
                *st = next;
                send_snapshot(ctx, &st)?;
                "ok".to_string()
            }
            Err(e) => e.to_string(),
        };
        ctx.note("action", json!({"step": step, "action": action.to_string(), "result": verdict}));
        ctx.send(
            Performative::Inform,
            &AgentId::new(PLANNER),
            pred("action_result", vec![Term::int(step), Term::text(verdict)]),
        )
    };
    let exec = Arc::new(exec);
    let exec_pickup = exec.clone();
    Behavior::new()
        .on_start(move |ctx, _| {
            let st = start_state.lock().expect("blocks state").clone();
            send_snapshot(ctx, &st)?;
            ctx.send(Performative::Inform, &AgentId::new(PLANNER), pred("ready", vec![]))
        })
        .on_message(Performative::Request, p("pickup(int I, string X)"), move |ctx, _, s| {
            let action = BlockAction::Pickup(s.text("X").unwrap_or_default().to_string());
            exec_pickup(ctx, s.int("I").unwrap_or_default(), action)
        })
        .on_message(Performative::Request, p("putdown(int I, string X, string Y)"), move |ctx, _, s| {
            let action = BlockAction::Putdown(
                s.text("X").unwrap_or_default().to_string(),
                s.text("Y").unwrap_or_default().to_string(),
            );
            exec(ctx, s.int("I").unwrap_or_default(), action)
        })
        .on_message(Performative::Request, p("done"), |ctx, _, _| {
            ctx.stop();
            Ok(())
        })
}

#[derive(Default)]
struct PlannerReport {
    plan: Vec<BlockAction>,
    outcomes: Vec<ActionOutcome>,
    error: Option<String>,
}

fn run_plan(
    ctx: &mut AgentContext,
    provider: &SharedProvider,
    goal: &TowerGoal,
    timeout: Duration,
    report: &Mutex<PlannerReport>,
) -> Result<(), String> {
    ctx.wait_for(p("ready"), Some(timeout)).map_err(|e| e.to_string())?;
    let mut template = tower_template();
    let prompt = build_tower_prompt(&mut template, goal, ctx.beliefs()).map_err(|e| e.to_string())?;
    let reply = ctx.chat(provider.as_ref(), &prompt).map_err(|e| e.to_string())?;
    let plan = parse_plan(&reply).map_err(|e| e.to_string())?;
    report.lock().expect("planner report").plan = plan.clone();
    let env = AgentId::new(ENV);
    for (step, action) in plan.into_iter().enumerate() {
        let i = step as i64;
        let (request, effect) = match &action {
            BlockAction::Pickup(x) => (
                pred("pickup", vec![Term::int(i), Term::text(x.as_str())]),
                pred("holding", vec![Term::text(x.as_str())]),
            ),
            BlockAction::Putdown(x, y) => (
                pred("putdown", vec![Term::int(i), Term::text(x.as_str()), Term::text(y.as_str())]),
                pred("on", vec![Term::text(x.as_str()), Term::text(y.as_str())]),
            ),
        };
        ctx.send(Performative::Request, &env, request).map_err(|e| e.to_string())?;
        let result = pred("action_result", vec![Term::int(i), Term::text_var("R")]);
        let s = ctx.wait_for(result, Some(timeout)).map_err(|e| e.to_string())?;
        let verdict = s.text("R").unwrap_or_default().to_string();
        let failed = verdict != "ok";
        report.lock().expect("planner report").outcomes.push(ActionOutcome {
            step,
            action,
            error: failed.then(|| verdict.clone()),
        });
        if failed {
            return Err(format!("step {step} failed: {verdict}"));
        }
        ctx.wait_for(effect, Some(timeout)).map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn planner_behavior(
    provider: SharedProvider,
    goal: TowerGoal,
    timeout: Duration,
    report: Arc<Mutex<PlannerReport>>,
) -> Behavior {
    Behavior::new()
        .on_start(move |ctx, _| {
            if let Err(e) = run_plan(ctx, &provider, &goal, timeout, &report) {
                ctx.note("plan-failed", json!({"error": e}));
                report.lock().expect("planner report").error = Some(e);
            }
            let _ = ctx.send(Performative::Request, &AgentId::new(ENV), pred("done", vec![]));
            ctx.stop();
            Ok(())
        })
        .on_message(Performative::Inform, p("snapshot"), |ctx, _, _| {
            ctx.retract(&p("on(string A, string B)"));
            ctx.retract(&p("holding(string C)"));
            Ok(())
        })
        .on_message(Performative::Inform, p("on(string A, string B)"), |ctx, msg, _| {
            ctx.add_belief(msg.content.clone())
        })
        .on_message(Performative::Inform, p("holding(string C)"), |ctx, msg, _| {
            ctx.add_belief(msg.content.clone())
        })
        .on_message(Performative::Inform, p("ready"), |ctx, msg, _| ctx.add_belief(msg.content.clone()))
        .on_message(Performative::Inform, p("action_result(int I, string R)"), |ctx, msg, _| {
            ctx.add_belief(msg.content.clone())
        })
}

/// Asks the LLM for a whole plan and executes it against an environment
/// agent, stopping at the first failed action. Errors end up in the result.
/// The system is shut down afterwards.
pub fn run_tower_scenario(
    system: &System,
    provider: SharedProvider,
    initial: &BlocksState,
    goal: &TowerGoal,
    timeout: Duration,
) -> ScenarioResult {
    let state = Arc::new(Mutex::new(initial.clone()));
    let report = Arc::new(Mutex::new(PlannerReport::default()));
    system.register("blocks-env", environment_behavior(state.clone()));
    system.register("tower-planner", planner_behavior(provider, goal.clone(), timeout, report.clone()));
    let spawned = system
        .spawn(AgentSpec::new("tower-planner"), PLANNER)
        .and_then(|planner| system.spawn(AgentSpec::new("blocks-env"), ENV).map(|env| (planner, env)));
    let mut spawn_error = None;
    match spawned {
        Ok((planner, env)) => {
            system.join(&planner);
            system.join(&env);
        }
        Err(e) => spawn_error = Some(e.to_string()),
    }
    system.shutdown();
    let report = std::mem::take(&mut *report.lock().expect("planner report"));
    let final_state = state.lock().expect("blocks state").clone();
    ScenarioResult {
        goal: goal.clone(),
        initial: initial.clone(),
        plan: report.plan,
        outcomes: report.outcomes,
        goal_satisfied: goal_satisfied(&final_state, goal),
        final_state,
        error: spawn_error.or(report.error),
    }
}
