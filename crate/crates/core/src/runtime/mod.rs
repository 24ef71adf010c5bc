//! Minimal multi-agent executor.
//!
//! Every agent runs on its own thread with a private [`BeliefBase`] and a
//! mailbox. Agents only interact through [`AgentContext::send`]; a message
//! from A to B is always handled in send order. A [`Behavior`] bundles a
//! start plan and message handlers keyed by performative and content
//! pattern. [`AgentContext::wait`] blocks the calling plan until a belief
//! matching a pattern exists, dispatching incoming messages meanwhile, so
//! handlers keep making progress while a plan waits on their effects.

mod events;
pub mod roundrobin;

use std::collections::HashMap;
use std::fmt;
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex, RwLock};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use serde_json::json;
use thiserror::Error;

use crate::belief::{BeliefBase, BeliefError, Predicate, Substitution};
use crate::llm::{ChatExchange, ChatProvider, LlmError, Recorder};

pub use events::{Event, EventLog};

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error("agent name `{0}` is already in use")]
    DuplicateName(String),
    #[error("agent name must be nonempty")]
    EmptyName,
    #[error("no behavior registered as `{0}`")]
    UnknownBehavior(String),
    #[error("no live agent named `{0}`")]
    UnknownReceiver(String),
    #[error("message content is not ground: {0}")]
    NonGroundContent(String),
    #[error("timed out waiting for {0}")]
    WaitTimeout(String),
    #[error("agent stopped while waiting for {0}")]
    Stopped(String),
    #[error("{0}")]
    Plan(String),
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error(transparent)]
    Llm(#[from] LlmError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AgentId(String);

impl AgentId {
    pub fn new(name: impl Into<String>) -> Self {
        AgentId(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AgentId {
    fn from(s: &str) -> Self {
        AgentId(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Performative {
    Request,
    Agree,
    Inform,
    Other(String),
}

impl Performative {
    pub fn as_str(&self) -> &str {
        match self {
            Performative::Request => "request",
            Performative::Agree => "agree",
            Performative::Inform => "inform",
            Performative::Other(s) => s,
        }
    }
}

impl fmt::Display for Performative {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl From<&str> for Performative {
    fn from(s: &str) -> Self {
        match s {
            "request" => Performative::Request,
            "agree" => Performative::Agree,
            "inform" => Performative::Inform,
            other => Performative::Other(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub performative: Performative,
    pub sender: AgentId,
    pub receiver: AgentId,
    pub content: Predicate,
}

#[derive(Debug, Clone, Default)]
pub struct AgentSpec {
    pub behavior: String,
    pub beliefs: Vec<Predicate>,
    pub args: Vec<String>,
}

impl AgentSpec {
    pub fn new(behavior: impl Into<String>) -> Self {
        AgentSpec { behavior: behavior.into(), ..Default::default() }
    }

    pub fn belief(mut self, p: Predicate) -> Self {
        self.beliefs.push(p);
        self
    }

    pub fn args<S: Into<String>>(mut self, args: impl IntoIterator<Item = S>) -> Self {
        self.args = args.into_iter().map(Into::into).collect();
        self
    }
}

#[derive(Debug, Clone)]
pub struct WaitCondition {
    pub pattern: Predicate,
    pub timeout: Option<Duration>,
}

impl WaitCondition {
    pub fn new(pattern: Predicate) -> Self {
        WaitCondition { pattern, timeout: None }
    }

    pub fn timeout(mut self, timeout: Duration) -> Self {
        self.timeout = Some(timeout);
        self
    }
}

type StartFn = dyn Fn(&mut AgentContext, &[String]) -> Result<(), RuntimeError> + Send + Sync;
type HandlerFn = dyn Fn(&mut AgentContext, &Message, &Substitution) -> Result<(), RuntimeError> + Send + Sync;

#[derive(Clone)]
struct MessageHandler {
    performative: Performative,
    pattern: Predicate,
    run: Arc<HandlerFn>,
}

/// Start plan plus message handlers. Handlers are tried in registration
/// order; the first whose performative and content pattern match runs.
#[derive(Clone, Default)]
pub struct Behavior {
    on_start: Option<Arc<StartFn>>,
    handlers: Vec<MessageHandler>,
}

impl Behavior {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn on_start<F>(mut self, f: F) -> Self
    where
        F: Fn(&mut AgentContext, &[String]) -> Result<(), RuntimeError> + Send + Sync + 'static,
    {
        self.on_start = Some(Arc::new(f));
        self
    }

    pub fn on_message<F>(mut self, performative: Performative, pattern: Predicate, f: F) -> Self
    where
        F: Fn(&mut AgentContext, &Message, &Substitution) -> Result<(), RuntimeError>
            + Send
            + Sync
            + 'static,
    {
        self.handlers.push(MessageHandler { performative, pattern, run: Arc::new(f) });
        self
    }
}

enum Envelope {
    Msg(Message),
    Stop,
}

struct SystemInner {
    behaviors: RwLock<HashMap<String, Behavior>>,
    mailboxes: Mutex<HashMap<AgentId, Sender<Envelope>>>,
    threads: Mutex<Vec<(AgentId, JoinHandle<()>)>>,
    final_beliefs: Mutex<HashMap<AgentId, BeliefBase>>,
    log: Arc<EventLog>,
    recorder: Option<Arc<Recorder>>,
    default_wait: Option<Duration>,
}

/// Handle to a running agent system. Cheap to clone.
#[derive(Clone)]
pub struct System {
    inner: Arc<SystemInner>,
}

#[derive(Default)]
pub struct SystemBuilder {
    log: Option<Arc<EventLog>>,
    recorder: Option<Arc<Recorder>>,
    default_wait: Option<Duration>,
}

impl SystemBuilder {
    pub fn event_log(mut self, log: Arc<EventLog>) -> Self {
        self.log = Some(log);
        self
    }

    pub fn recorder(mut self, recorder: Arc<Recorder>) -> Self {
        self.recorder = Some(recorder);
        self
    }

    /// Timeout for waits that do not set their own.
    pub fn default_wait(mut self, timeout: Duration) -> Self {
        self.default_wait = Some(timeout);
        self
    }

    pub fn build(self) -> System {
        System {
            inner: Arc::new(SystemInner {
                behaviors: RwLock::new(HashMap::new()),
                mailboxes: Mutex::new(HashMap::new()),
                threads: Mutex::new(Vec::new()),
                final_beliefs: Mutex::new(HashMap::new()),
                log: self.log.unwrap_or_default(),
                recorder: self.recorder,
                default_wait: self.default_wait,
            }),
        }
    }
}

impl Default for System {
    fn default() -> Self {
        System::builder().build()
    }
}

impl System {
    pub fn builder() -> SystemBuilder {
        SystemBuilder::default()
    }

    pub fn log(&self) -> &Arc<EventLog> {
        &self.inner.log
    }

    pub fn recorder(&self) -> Option<&Arc<Recorder>> {
        self.inner.recorder.as_ref()
    }

    pub fn register(&self, id: impl Into<String>, behavior: Behavior) {
        self.inner.behaviors.write().expect("behavior registry poisoned").insert(id.into(), behavior);
    }

    pub fn spawn(&self, spec: AgentSpec, name: &str) -> Result<AgentId, RuntimeError> {
        spawn_agent(&self.inner, spec, name)
    }

    /// Sends a message on behalf of `from`, which need not be a live agent
    /// (harnesses use this to kick off a run).
    pub fn send(
        &self,
        from: &AgentId,
        performative: Performative,
        to: &AgentId,
        content: Predicate,
    ) -> Result<(), RuntimeError> {
        deliver(&self.inner, from, performative, to, content)
    }

    pub fn is_alive(&self, name: &AgentId) -> bool {
        self.inner.mailboxes.lock().expect("mailboxes poisoned").contains_key(name)
    }

    /// Blocks until the named agent's thread has exited.
    pub fn join(&self, name: &AgentId) {
        let handle = {
            let mut threads = self.inner.threads.lock().expect("threads poisoned");
            threads.iter().position(|(n, _)| n == name).map(|i| threads.remove(i).1)
        };
        if let Some(h) = handle {
            if h.join().is_err() {
                log::error!("agent {name} panicked");
            }
        }
    }

    /// Belief base an agent held when its thread exited.
    pub fn final_beliefs(&self, name: &AgentId) -> Option<BeliefBase> {
        self.inner.final_beliefs.lock().expect("final beliefs poisoned").get(name).cloned()
    }

    /// Stops every agent and waits for their threads.
    pub fn shutdown(&self) {
        let senders: Vec<Sender<Envelope>> =
            self.inner.mailboxes.lock().expect("mailboxes poisoned").values().cloned().collect();
        for s in senders {
            let _ = s.send(Envelope::Stop);
        }
        let threads: Vec<(AgentId, JoinHandle<()>)> =
            std::mem::take(&mut *self.inner.threads.lock().expect("threads poisoned"));
        for (name, h) in threads {
            if h.join().is_err() {
                log::error!("agent {name} panicked");
            }
        }
    }
}

fn spawn_agent(inner: &Arc<SystemInner>, spec: AgentSpec, name: &str) -> Result<AgentId, RuntimeError> {
    if name.is_empty() {
        return Err(RuntimeError::EmptyName);
    }
    let behavior = inner
        .behaviors
        .read()
        .expect("behavior registry poisoned")
        .get(&spec.behavior)
        .cloned()
        .ok_or_else(|| RuntimeError::UnknownBehavior(spec.behavior.clone()))?;
    let mut beliefs = BeliefBase::new();
    for b in spec.beliefs {
        beliefs.add(b)?;
    }
    let id = AgentId::new(name);
    let (tx, rx) = mpsc::channel();
    {
        let mut mailboxes = inner.mailboxes.lock().expect("mailboxes poisoned");
        if mailboxes.contains_key(&id) {
            return Err(RuntimeError::DuplicateName(name.to_string()));
        }
        mailboxes.insert(id.clone(), tx);
    }
    inner.log.emit(
        name,
        "spawn",
        json!({"behavior": spec.behavior, "args": spec.args, "beliefs": beliefs.len()}),
    );
    let mut ctx = AgentContext {
        id: id.clone(),
        beliefs,
        mailbox: rx,
        system: inner.clone(),
        handlers: Arc::new(behavior.handlers),
        stopping: false,
    };
    let args = spec.args;
    let start = behavior.on_start;
    let handle = std::thread::Builder::new()
        .name(format!("agent-{name}"))
        .spawn(move || {
            if let Some(start) = start {
                if let Err(e) = start(&mut ctx, &args) {
                    ctx.report_error("start", &e);
                }
            }
            ctx.run_loop();
            ctx.retire();
        })
        .expect("failed to spawn agent thread");
    inner.threads.lock().expect("threads poisoned").push((id.clone(), handle));
    Ok(id)
}

fn deliver(
    inner: &SystemInner,
    from: &AgentId,
    performative: Performative,
    to: &AgentId,
    content: Predicate,
) -> Result<(), RuntimeError> {
    if !content.is_ground() {
        return Err(RuntimeError::NonGroundContent(content.to_string()));
    }
    let mailboxes = inner.mailboxes.lock().expect("mailboxes poisoned");
    let mailbox = mailboxes.get(to).ok_or_else(|| RuntimeError::UnknownReceiver(to.to_string()))?;
    // logged under the mailbox lock so send events follow delivery order
    inner.log.emit(
        from.as_str(),
        "send",
        json!({"performative": performative.as_str(), "to": to.as_str(), "content": content.to_string()}),
    );
    let msg = Message { performative, sender: from.clone(), receiver: to.clone(), content };
    mailbox.send(Envelope::Msg(msg)).map_err(|_| RuntimeError::UnknownReceiver(to.to_string()))
}

/// An agent's view of the world while one of its plans or handlers runs.
pub struct AgentContext {
    id: AgentId,
    beliefs: BeliefBase,
    mailbox: Receiver<Envelope>,
    system: Arc<SystemInner>,
    handlers: Arc<Vec<MessageHandler>>,
    stopping: bool,
}

impl AgentContext {
    pub fn id(&self) -> &AgentId {
        &self.id
    }

    pub fn name(&self) -> &str {
        self.id.as_str()
    }

    pub fn beliefs(&self) -> &BeliefBase {
        &self.beliefs
    }

    pub fn add_belief(&mut self, p: Predicate) -> Result<(), RuntimeError> {
        if self.beliefs.add(p.clone())? {
            self.emit("belief+", json!({"belief": p.to_string()}));
        }
        Ok(())
    }

    pub fn remove_belief(&mut self, p: &Predicate) -> Result<(), RuntimeError> {
        if self.beliefs.remove(p)? {
            self.emit("belief-", json!({"belief": p.to_string()}));
        }
        Ok(())
    }

    /// Drops every belief matching `pattern`.
    pub fn retract(&mut self, pattern: &Predicate) {
        let gone: Vec<Predicate> =
            self.beliefs.iter().filter(|b| pattern.unify(b).is_some()).cloned().collect();
        for p in gone {
            let _ = self.remove_belief(&p);
        }
    }

    pub fn send(
        &self,
        performative: Performative,
        to: &AgentId,
        content: Predicate,
    ) -> Result<(), RuntimeError> {
        deliver(&self.system, &self.id, performative, to, content)
    }

    pub fn spawn(&self, spec: AgentSpec, name: &str) -> Result<AgentId, RuntimeError> {
        spawn_agent(&self.system, spec, name)
    }

    /// Appends a free-form event (e.g. console output) to the transcript.
    pub fn note(&self, kind: &str, detail: serde_json::Value) {
        self.emit(kind, detail);
    }

    /// Ends the agent after the current plan or handler returns.
    pub fn stop(&mut self) {
        self.stopping = true;
    }

    /// Chats through `provider`, recording the exchange and logging a
    /// reference to it.
    pub fn chat(&self, provider: &dyn ChatProvider, prompt: &str) -> Result<String, LlmError> {
        self.chat_indexed(provider, prompt).map(|(reply, _)| reply)
    }

    /// Like `chat`, also returning the exchange's index in the recording.
    pub fn chat_indexed(
        &self,
        provider: &dyn ChatProvider,
        prompt: &str,
    ) -> Result<(String, Option<usize>), LlmError> {
        match provider.chat(prompt) {
            Ok(reply) => {
                let index = match &self.system.recorder {
                    Some(rec) => Some(rec.record(ChatExchange::now(provider, prompt, &reply))?),
                    None => None,
                };
                self.emit("chat", json!({"exchange": index, "prompt": prompt, "reply": reply}));
                Ok((reply, index))
            }
            Err(e) => {
                self.emit("chat-error", json!({"error": e.to_string()}));
                Err(e)
            }
        }
    }

    /// Suspends until a belief matches, handling messages in the meantime.
    pub fn wait(&mut self, cond: WaitCondition) -> Result<Substitution, RuntimeError> {
        let pattern = cond.pattern;
        let timeout = cond.timeout.or(self.system.default_wait);
        let deadline = timeout.map(|t| Instant::now() + t);
        self.emit("wait-begin", json!({"pattern": pattern.to_string()}));
        loop {
            if let Some(s) = self.beliefs.first(&pattern) {
                self.emit("wait-end", json!({"pattern": pattern.to_string(), "outcome": "matched"}));
                return Ok(s);
            }
            if self.stopping {
                return Err(RuntimeError::Stopped(pattern.to_string()));
            }
            let envelope = match deadline {
                Some(d) => match self.mailbox.recv_timeout(d.saturating_duration_since(Instant::now())) {
                    Ok(e) => e,
                    Err(RecvTimeoutError::Timeout) => {
                        self.emit("wait-end", json!({"pattern": pattern.to_string(), "outcome": "timeout"}));
                        return Err(RuntimeError::WaitTimeout(pattern.to_string()));
                    }
                    Err(RecvTimeoutError::Disconnected) => Envelope::Stop,
                },
                None => self.mailbox.recv().unwrap_or(Envelope::Stop),
            };
            match envelope {
                Envelope::Msg(m) => self.dispatch(m),
                Envelope::Stop => self.stopping = true,
            }
        }
    }

    /// `wait` with a pattern and explicit timeout.
    pub fn wait_for(&mut self, pattern: Predicate, timeout: Option<Duration>) -> Result<Substitution, RuntimeError> {
        self.wait(WaitCondition { pattern, timeout })
    }

    fn emit(&self, kind: &str, detail: serde_json::Value) {
        self.system.log.emit(self.id.as_str(), kind, detail);
    }

    fn report_error(&self, phase: &str, e: &RuntimeError) {
        log::warn!("agent {}: {phase} failed: {e}", self.id);
        self.emit("error", json!({"phase": phase, "error": e.to_string()}));
    }

    fn dispatch(&mut self, msg: Message) {
        let handlers = self.handlers.clone();
        let found = handlers.iter().find_map(|h| {
            (h.performative == msg.performative)
                .then(|| h.pattern.unify(&msg.content).map(|s| (h, s)))
                .flatten()
        });
        match found {
            Some((handler, subst)) => {
                self.emit(
                    "handle",
                    json!({
                        "performative": msg.performative.as_str(),
                        "from": msg.sender.as_str(),
                        "content": msg.content.to_string(),
                    }),
                );
                if let Err(e) = (handler.run)(self, &msg, &subst) {
                    self.report_error("handler", &e);
                }
            }
            None => {
                log::warn!(
                    "agent {}: dropping unhandled {} from {}: {}",
                    self.id,
                    msg.performative,
                    msg.sender,
                    msg.content
                );
                self.emit(
                    "drop",
                    json!({
                        "performative": msg.performative.as_str(),
                        "from": msg.sender.as_str(),
                        "content": msg.content.to_string(),
                    }),
                );
            }
        }
    }

    fn run_loop(&mut self) {
        while !self.stopping {
            match self.mailbox.recv() {
                Ok(Envelope::Msg(m)) => self.dispatch(m),
                Ok(Envelope::Stop) | Err(_) => break,
            }
        }
    }

    fn retire(self) {
        self.system.mailboxes.lock().expect("mailboxes poisoned").remove(&self.id);
        self.emit("exit", json!({}));
        self.system
            .final_beliefs
            .lock()
            .expect("final beliefs poisoned")
            .insert(self.id.clone(), self.beliefs);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Predicate {
        Predicate::parse(s).unwrap()
    }

    fn echo_behavior() -> Behavior {
        Behavior::new().on_message(Performative::Request, p("ping(int N)"), |ctx, msg, s| {
            let n = s.int("N").unwrap();
            ctx.send(Performative::Inform, &msg.sender, Predicate::ground("pong", [n]).unwrap())
        })
    }

    #[test]
    fn spawn_errors() {
        let sys = System::default();
        sys.register("echo", echo_behavior());
        sys.spawn(AgentSpec::new("echo"), "a").unwrap();
        assert!(matches!(
            sys.spawn(AgentSpec::new("echo"), "a"),
            Err(RuntimeError::DuplicateName(_))
        ));
        assert!(matches!(
            sys.spawn(AgentSpec::new("nope"), "b"),
            Err(RuntimeError::UnknownBehavior(_))
        ));
        assert!(matches!(sys.spawn(AgentSpec::new("echo"), ""), Err(RuntimeError::EmptyName)));
        sys.shutdown();
    }

    #[test]
    fn send_errors() {
        let sys = System::default();
        let ghost = AgentId::from("ghost");
        assert!(matches!(
            sys.send(&ghost, Performative::Inform, &ghost, p("x(1)")),
            Err(RuntimeError::UnknownReceiver(_))
        ));
        sys.register("echo", echo_behavior());
        let a = sys.spawn(AgentSpec::new("echo"), "a").unwrap();
        assert!(matches!(
            sys.send(&ghost, Performative::Inform, &a, p("x(int N)")),
            Err(RuntimeError::NonGroundContent(_))
        ));
        sys.shutdown();
        assert!(matches!(
            sys.send(&ghost, Performative::Request, &a, p("ping(1)")),
            Err(RuntimeError::UnknownReceiver(_))
        ));
    }

    #[test]
    fn wait_sees_handler_effects_and_fifo_order() {
        let sys = System::default();
        sys.register("echo", echo_behavior());
        let got = Arc::new(Mutex::new(Vec::new()));
        let sink = got.clone();
        sys.register(
            "client",
            Behavior::new()
                .on_start(move |ctx, _| {
                    let echo = AgentId::from("echo");
                    for n in 0..20 {
                        ctx.send(Performative::Request, &echo, Predicate::ground("ping", [n]).unwrap())?;
                    }
                    ctx.wait_for(p("pong(19)"), Some(Duration::from_secs(5)))?;
                    let seen: Vec<i64> = ctx
                        .beliefs()
                        .query(&p("got(int N)"))
                        .iter()
                        .map(|s| s.int("N").unwrap())
                        .collect();
                    *sink.lock().unwrap() = seen;
                    ctx.stop();
                    Ok(())
                })
                .on_message(Performative::Inform, p("pong(int N)"), |ctx, _, s| {
                    let n = s.int("N").unwrap();
                    ctx.add_belief(Predicate::ground("got", [n]).unwrap())?;
                    ctx.add_belief(Predicate::ground("pong", [n]).unwrap())
                }),
        );
        sys.spawn(AgentSpec::new("echo"), "echo").unwrap();
        let client = sys.spawn(AgentSpec::new("client"), "client").unwrap();
        sys.join(&client);
        assert_eq!(*got.lock().unwrap(), (0..20).collect::<Vec<i64>>());
        sys.shutdown();
    }

    #[test]
    fn wait_on_present_belief_returns_immediately() {
        let sys = System::default();
        let out = Arc::new(Mutex::new(None));
        let sink = out.clone();
        sys.register(
            "w",
            Behavior::new().on_start(move |ctx, _| {
                let s = ctx.wait_for(p("holding(string X)"), Some(Duration::from_millis(1)))?;
                *sink.lock().unwrap() = s.text("X").map(str::to_string);
                ctx.stop();
                Ok(())
            }),
        );
        let id = sys.spawn(AgentSpec::new("w").belief(p("holding(\"a\")")), "w").unwrap();
        sys.join(&id);
        assert_eq!(out.lock().unwrap().as_deref(), Some("a"));
    }

    #[test]
    fn wait_times_out() {
        let sys = System::default();
        let out = Arc::new(Mutex::new(None));
        let sink = out.clone();
        sys.register(
            "w",
            Behavior::new().on_start(move |ctx, _| {
                let r = ctx.wait_for(p("holding(\"a\")"), Some(Duration::from_millis(50)));
                *sink.lock().unwrap() = Some(matches!(r, Err(RuntimeError::WaitTimeout(_))));
                ctx.stop();
                Ok(())
            }),
        );
        let id = sys.spawn(AgentSpec::new("w"), "w").unwrap();
        sys.join(&id);
        assert_eq!(*out.lock().unwrap(), Some(true));
    }

    #[test]
    fn unhandled_messages_are_dropped() {
        let log = Arc::new(EventLog::default());
        let sys = System::builder().event_log(log.clone()).build();
        sys.register("echo", echo_behavior());
        let a = sys.spawn(AgentSpec::new("echo"), "a").unwrap();
        let me = AgentId::from("me");
        sys.send(&me, Performative::Agree, &a, p("task(\"x\")")).unwrap();
        sys.shutdown();
        let drops: Vec<Event> = log.events().into_iter().filter(|e| e.kind == "drop").collect();
        assert_eq!(drops.len(), 1);
        assert_eq!(drops[0].agent, "a");
    }

    #[test]
    fn per_agent_sequence_numbers_increase() {
        let log = Arc::new(EventLog::default());
        let sys = System::builder().event_log(log.clone()).build();
        sys.register("echo", echo_behavior());
        let a = sys.spawn(AgentSpec::new("echo"), "a").unwrap();
        let me = AgentId::from("me");
        for n in 0..5 {
            sys.send(&me, Performative::Request, &a, Predicate::ground("ping", [n]).unwrap()).ok();
        }
        sys.shutdown();
        let mut last: HashMap<String, u64> = HashMap::new();
        for e in log.events() {
            if let Some(prev) = last.get(&e.agent) {
                assert!(e.seq > *prev);
            }
            last.insert(e.agent.clone(), e.seq);
        }
    }
}
