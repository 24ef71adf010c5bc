//! Chat providers: scripted mock, record/replay, and HTTP backends.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::belief::BeliefBase;
use crate::template::{Render, TemplateError};

/// Environment variable that overrides the default key file path.
pub const KEY_FILE_ENV: &str = "AGENTKIT_KEY_FILE";
pub const DEFAULT_KEY_FILE: &str = "../api.key";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("key file not found: {0}")]
    KeyFileMissing(PathBuf),
    #[error("key file is empty: {0}")]
    KeyFileEmpty(PathBuf),
    #[error("invalid provider config: {0}")]
    InvalidConfig(String),
    #[error("mock provider has no script")]
    ScriptMissing,
    #[error("invalid mock script: {0}")]
    InvalidScript(String),
    #[error("no mock rule matches prompt starting {0:?}")]
    NoScriptMatch(String),
    #[error("recording has no unused exchange for prompt starting {0:?}")]
    ReplayMismatch(String),
    #[error("invalid recording line {line}: {message}")]
    InvalidRecording { line: usize, message: String },
    #[error("provider unavailable{}: {message}", status.map(|s| format!(" (HTTP {s})")).unwrap_or_default())]
    ProviderUnavailable { status: Option<u16>, message: String },
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

fn prompt_head(prompt: &str) -> String {
    prompt.chars().take(60).collect()
}

/// API key that never prints.
#[derive(Clone, PartialEq, Eq)]
pub struct ApiKey(String);

impl ApiKey {
    pub fn new(key: impl Into<String>) -> Self {
        ApiKey(key.into())
    }

    pub fn expose(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for ApiKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ApiKey(***)")
    }
}

/// Reads a key file, dropping the trailing newline.
pub fn load_api_key_from_file(path: impl AsRef<Path>) -> Result<ApiKey, LlmError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => LlmError::KeyFileMissing(path.to_path_buf()),
        _ => LlmError::Io(e),
    })?;
    let key = text.trim_end_matches(['\n', '\r']);
    if key.trim().is_empty() {
        return Err(LlmError::KeyFileEmpty(path.to_path_buf()));
    }
    Ok(ApiKey(key.to_string()))
}

/// Key file location: explicit path, else `$AGENTKIT_KEY_FILE`, else `../api.key`.
pub fn resolve_key_path(explicit: Option<&Path>) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    match std::env::var_os(KEY_FILE_ENV) {
        Some(p) if !p.is_empty() => PathBuf::from(p),
        _ => PathBuf::from(DEFAULT_KEY_FILE),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Mock,
    #[serde(rename = "openai")]
    OpenAi,
    Gemini,
}

impl ProviderKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProviderKind::Mock => "mock",
            ProviderKind::OpenAi => "openai",
            ProviderKind::Gemini => "gemini",
        }
    }
}

impl fmt::Display for ProviderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ProviderKind {
    type Err = LlmError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mock" => Ok(ProviderKind::Mock),
            "openai" | "openai-compatible" => Ok(ProviderKind::OpenAi),
            "gemini" | "gemini-compatible" => Ok(ProviderKind::Gemini),
            other => Err(LlmError::InvalidConfig(format!("unknown provider kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    pub model: String,
    /// Backend parameters such as `temperature` and `topK`.
    pub params: BTreeMap<String, Json>,
    pub api_key: Option<ApiKey>,
    pub timeout: Duration,
    /// Endpoint override for HTTP providers.
    pub base_url: Option<String>,
    pub script: Option<MockScript>,
}

impl ProviderConfig {
    pub fn new(kind: ProviderKind, model: impl Into<String>) -> Self {
        ProviderConfig {
            kind,
            model: model.into(),
            params: BTreeMap::new(),
            api_key: None,
            timeout: DEFAULT_TIMEOUT,
            base_url: None,
            script: None,
        }
    }

    pub fn mock(script: MockScript) -> Self {
        let mut cfg = ProviderConfig::new(ProviderKind::Mock, "mock");
        cfg.script = Some(script);
        cfg
    }

    pub fn param(mut self, name: &str, value: impl Into<Json>) -> Self {
        self.params.insert(name.to_string(), value.into());
        self
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if let Some(t) = self.params.get("temperature") {
            match t.as_f64() {
                Some(t) if (0.0..=2.0).contains(&t) => {}
                _ => {
                    return Err(LlmError::InvalidConfig(format!(
                        "temperature must be a number in [0, 2], got {t}"
                    )))
                }
            }
        }
        if let Some(k) = self.params.get("topK") {
            match k.as_u64() {
                Some(k) if k > 0 => {}
                _ => {
                    return Err(LlmError::InvalidConfig(format!(
                        "topK must be a positive integer, got {k}"
                    )))
                }
            }
        }
        if self.kind != ProviderKind::Mock {
            if self.model.trim().is_empty() {
                return Err(LlmError::InvalidConfig("model id is empty".into()));
            }
            if self.api_key.is_none() {
                return Err(LlmError::InvalidConfig(format!("{} provider needs an API key", self.kind)));
            }
        }
        Ok(())
    }
}

/// A single-turn, stateless chat backend.
pub trait ChatProvider {
    fn kind(&self) -> ProviderKind;
    fn model(&self) -> &str;
    fn chat(&self, prompt: &str) -> Result<String, LlmError>;
}

pub type SharedProvider = Arc<dyn ChatProvider + Send + Sync>;

impl<P: ChatProvider + ?Sized> ChatProvider for Arc<P> {
    fn kind(&self) -> ProviderKind {
        (**self).kind()
    }

    fn model(&self) -> &str {
        (**self).model()
    }

    fn chat(&self, prompt: &str) -> Result<String, LlmError> {
        (**self).chat(prompt)
    }
}

/// Renders `template` (RAG parts against `beliefs`) and sends it as one prompt.
pub fn chat_templated<T: Render + ?Sized>(
    provider: &dyn ChatProvider,
    template: &T,
    beliefs: Option<&BeliefBase>,
) -> Result<String, LlmError> {
    let prompt = template.render(beliefs)?;
    provider.chat(&prompt)
}

pub fn initialize(cfg: ProviderConfig) -> Result<SharedProvider, LlmError> {
    cfg.validate()?;
    match cfg.kind {
        ProviderKind::Mock => {
            let script = cfg.script.ok_or(LlmError::ScriptMissing)?;
            Ok(Arc::new(MockProvider::new(script)))
        }
        ProviderKind::OpenAi | ProviderKind::Gemini => Ok(Arc::new(HttpProvider::new(cfg)?)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchKind {
    Exact,
    Substring,
    Default,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleMatch {
    pub kind: MatchKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockRule {
    #[serde(rename = "match")]
    pub matcher: RuleMatch,
    pub replies: Vec<String>,
}

impl MockRule {
    pub fn exact(prompt: &str, replies: &[&str]) -> Self {
        Self::build(MatchKind::Exact, Some(prompt), replies)
    }

    pub fn substring(needle: &str, replies: &[&str]) -> Self {
        Self::build(MatchKind::Substring, Some(needle), replies)
    }

    pub fn fallback(replies: &[&str]) -> Self {
        Self::build(MatchKind::Default, None, replies)
    }

    fn build(kind: MatchKind, value: Option<&str>, replies: &[&str]) -> Self {
        MockRule {
            matcher: RuleMatch { kind, value: value.map(str::to_string) },
            replies: replies.iter().map(|r| r.to_string()).collect(),
        }
    }

    fn matches(&self, prompt: &str) -> bool {
        match (self.matcher.kind, self.matcher.value.as_deref()) {
            (MatchKind::Exact, Some(v)) => prompt == v,
            (MatchKind::Substring, Some(v)) => prompt.contains(v),
            (MatchKind::Default, _) => true,
            _ => false,
        }
    }
}

/// Ordered mock rules. Exact and substring rules are tried in file order;
/// the default rule, if any, answers whatever none of them matched.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MockScript {
    pub rules: Vec<MockRule>,
}

impl MockScript {
    pub fn new(rules: Vec<MockRule>) -> Result<Self, LlmError> {
        let script = MockScript { rules };
        script.validate()?;
        Ok(script)
    }

    pub fn from_json(text: &str) -> Result<Self, LlmError> {
        let script: MockScript =
            serde_json::from_str(text).map_err(|e| LlmError::InvalidScript(e.to_string()))?;
        script.validate()?;
        Ok(script)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, LlmError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("mock script serializes")
    }

    fn validate(&self) -> Result<(), LlmError> {
        let defaults = self.rules.iter().filter(|r| r.matcher.kind == MatchKind::Default).count();
        if defaults > 1 {
            return Err(LlmError::InvalidScript("more than one default rule".into()));
        }
        for (i, rule) in self.rules.iter().enumerate() {
            if rule.replies.is_empty() {
                return Err(LlmError::InvalidScript(format!("rule {i} has no replies")));
            }
            if rule.matcher.kind != MatchKind::Default && rule.matcher.value.is_none() {
                return Err(LlmError::InvalidScript(format!("rule {i} needs a match value")));
            }
        }
        Ok(())
    }
}

/// Deterministic scripted provider.
#[derive(Debug)]
pub struct MockProvider {
    script: MockScript,
    consumed: Mutex<Vec<usize>>,
}

impl MockProvider {
    pub fn new(script: MockScript) -> Self {
        let consumed = Mutex::new(vec![0; script.rules.len()]);
        MockProvider { script, consumed }
    }

    fn pick(&self, prompt: &str) -> Option<usize> {
        let rules = &self.script.rules;
        rules
            .iter()
            .position(|r| r.matcher.kind != MatchKind::Default && r.matches(prompt))
            .or_else(|| rules.iter().position(|r| r.matcher.kind == MatchKind::Default))
    }
}

impl ChatProvider for MockProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Mock
    }

    fn model(&self) -> &str {
        "mock"
    }

    fn chat(&self, prompt: &str) -> Result<String, LlmError> {
        let i = self.pick(prompt).ok_or_else(|| LlmError::NoScriptMatch(prompt_head(prompt)))?;
        let mut consumed = self.consumed.lock().expect("mock counters poisoned");
        let replies = &self.script.rules[i].replies;
        let reply = replies[consumed[i].min(replies.len() - 1)].clone();
        consumed[i] += 1;
        Ok(reply)
    }
}

/// One prompt/reply pair as stored in a recording file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatExchange {
    pub prompt: String,
    pub reply: String,
    pub provider: ProviderKind,
    pub model: String,
    pub ts: String,
}

impl ChatExchange {
    pub fn now(provider: &dyn ChatProvider, prompt: &str, reply: &str) -> Self {
        ChatExchange {
            prompt: prompt.to_string(),
            reply: reply.to_string(),
            provider: provider.kind(),
            model: provider.model().to_string(),
            ts: chrono::Utc::now().to_rfc3339(),
        }
    }
}

/// Parses a JSONL recording.
pub fn parse_recording(text: &str) -> Result<Vec<ChatExchange>, LlmError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| LlmError::InvalidRecording { line: i + 1, message: e.to_string() })
        })
        .collect()
}

pub fn read_recording(path: impl AsRef<Path>) -> Result<Vec<ChatExchange>, LlmError> {
    parse_recording(&std::fs::read_to_string(path)?)
}

/// Session recording; optionally streams each exchange to a JSONL file.
#[derive(Debug, Default)]
pub struct Recorder {
    exchanges: Mutex<Vec<ChatExchange>>,
    sink: Option<Mutex<BufWriter<File>>>,
}

impl Recorder {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn to_file(path: impl AsRef<Path>) -> Result<Self, LlmError> {
        let file = OpenOptions::new().create(true).write(true).truncate(true).open(path)?;
        Ok(Recorder { exchanges: Mutex::new(Vec::new()), sink: Some(Mutex::new(BufWriter::new(file))) })
    }

    /// Appends one exchange and returns its index.
    pub fn record(&self, exchange: ChatExchange) -> Result<usize, LlmError> {
        let mut exchanges = self.exchanges.lock().expect("recorder poisoned");
        if let Some(sink) = &self.sink {
            let mut sink = sink.lock().expect("recorder sink poisoned");
            let line = serde_json::to_string(&exchange).expect("exchange serializes");
            writeln!(sink, "{line}")?;
            sink.flush()?;
        }
        exchanges.push(exchange);
        Ok(exchanges.len() - 1)
    }

    pub fn exchanges(&self) -> Vec<ChatExchange> {
        self.exchanges.lock().expect("recorder poisoned").clone()
    }

    pub fn len(&self) -> usize {
        self.exchanges.lock().expect("recorder poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Wraps a provider and records every successful exchange.
pub struct RecordingProvider<P> {
    inner: P,
    recorder: Arc<Recorder>,
}

impl<P: ChatProvider> RecordingProvider<P> {
    pub fn new(inner: P, recorder: Arc<Recorder>) -> Self {
        RecordingProvider { inner, recorder }
    }
}

impl<P: ChatProvider> ChatProvider for RecordingProvider<P> {
    fn kind(&self) -> ProviderKind {
        self.inner.kind()
    }

    fn model(&self) -> &str {
        self.inner.model()
    }

    fn chat(&self, prompt: &str) -> Result<String, LlmError> {
        let reply = self.inner.chat(prompt)?;
        self.recorder.record(ChatExchange::now(&self.inner, prompt, &reply))?;
        Ok(reply)
    }
}

/// Answers from a recording: each prompt takes the first unused exchange
/// with an identical prompt.
#[derive(Debug)]
pub struct ReplayProvider {
    exchanges: Vec<ChatExchange>,
    used: Mutex<Vec<bool>>,
    kind: ProviderKind,
    model: String,
}

impl ReplayProvider {
    pub fn new(exchanges: Vec<ChatExchange>) -> Self {
        let (kind, model) = exchanges
            .first()
            .map(|e| (e.provider, e.model.clone()))
            .unwrap_or((ProviderKind::Mock, "mock".to_string()));
        let used = Mutex::new(vec![false; exchanges.len()]);
        ReplayProvider { exchanges, used, kind, model }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, LlmError> {
        Ok(Self::new(read_recording(path)?))
    }
}

impl ChatProvider for ReplayProvider {
    fn kind(&self) -> ProviderKind {
        self.kind
    }

    fn model(&self) -> &str {
        &self.model
    }

    fn chat(&self, prompt: &str) -> Result<String, LlmError> {
        let mut used = self.used.lock().expect("replay state poisoned");
        let i = (0..self.exchanges.len())
            .find(|&i| !used[i] && self.exchanges[i].prompt == prompt)
            .ok_or_else(|| LlmError::ReplayMismatch(prompt_head(prompt)))?;
        used[i] = true;
        Ok(self.exchanges[i].reply.clone())
    }
}

/// OpenAI- or Gemini-compatible chat endpoint.
pub struct HttpProvider {
    cfg: ProviderConfig,
    client: reqwest::blocking::Client,
}

impl HttpProvider {
    pub fn new(cfg: ProviderConfig) -> Result<Self, LlmError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(cfg.timeout)
            .build()
            .map_err(|e| LlmError::InvalidConfig(e.to_string()))?;
        Ok(HttpProvider { cfg, client })
    }

    fn endpoint(&self) -> String {
        match self.cfg.kind {
            ProviderKind::Gemini => {
                let base = self
                    .cfg
                    .base_url
                    .as_deref()
                    .unwrap_or("https://generativelanguage.googleapis.com/v1beta");
                format!("{}/models/{}:generateContent", base.trim_end_matches('/'), self.cfg.model)
            }
            _ => {
                let base = self.cfg.base_url.as_deref().unwrap_or("https://api.openai.com/v1");
                format!("{}/chat/completions", base.trim_end_matches('/'))
            }
        }
    }

    fn send(&self, body: &Json) -> Result<reqwest::blocking::Response, reqwest::Error> {
        let key = self.cfg.api_key.as_ref().map(ApiKey::expose).unwrap_or_default();
        let req = self.client.post(self.endpoint()).json(body);
        let req = match self.cfg.kind {
            ProviderKind::Gemini => req.header("x-goog-api-key", key),
            _ => req.bearer_auth(key),
        };
        req.send()
    }
}

impl ChatProvider for HttpProvider {
    fn kind(&self) -> ProviderKind {
        self.cfg.kind
    }

    fn model(&self) -> &str {
        &self.cfg.model
    }

    fn chat(&self, prompt: &str) -> Result<String, LlmError> {
        let body = match self.cfg.kind {
            ProviderKind::Gemini => gemini_request(&self.cfg, prompt),
            _ => openai_request(&self.cfg, prompt),
        };
        // one retry on transport failure
        let response = match self.send(&body) {
            Ok(r) => r,
            Err(first) => {
                log::warn!("{} request failed, retrying once: {}", self.cfg.kind, first.without_url());
                self.send(&body).map_err(|e| LlmError::ProviderUnavailable {
                    status: e.status().map(|s| s.as_u16()),
                    message: e.without_url().to_string(),
                })?
            }
        };
        let status = response.status();
        let text = response.text().map_err(|e| LlmError::ProviderUnavailable {
            status: Some(status.as_u16()),
            message: e.without_url().to_string(),
        })?;
        if !status.is_success() {
            return Err(LlmError::ProviderUnavailable {
                status: Some(status.as_u16()),
                message: text.chars().take(500).collect(),
            });
        }
        match self.cfg.kind {
            ProviderKind::Gemini => parse_gemini_response(&text),
            _ => parse_openai_response(&text),
        }
    }
}

/// Chat-completions body. `topK` has no OpenAI counterpart and is dropped;
/// unrecognised parameters pass through untouched.
pub fn openai_request(cfg: &ProviderConfig, prompt: &str) -> Json {
    let mut body = json!({
        "model": cfg.model,
        "messages": [{"role": "user", "content": prompt}],
    });
    let obj = body.as_object_mut().expect("object literal");
    for (name, value) in &cfg.params {
        let key = match name.as_str() {
            "topK" => {
                log::warn!("topK is not supported by openai-compatible backends; ignored");
                continue;
            }
            "topP" => "top_p",
            "maxTokens" => "max_tokens",
            other => other,
        };
        obj.insert(key.to_string(), value.clone());
    }
    body
}

pub fn gemini_request(cfg: &ProviderConfig, prompt: &str) -> Json {
    let mut generation = serde_json::Map::new();
    for (name, value) in &cfg.params {
        let key = match name.as_str() {
            "maxTokens" => "maxOutputTokens",
            other => other,
        };
        generation.insert(key.to_string(), value.clone());
    }
    let mut body = json!({
        "contents": [{"role": "user", "parts": [{"text": prompt}]}],
    });
    if !generation.is_empty() {
        body["generationConfig"] = Json::Object(generation);
    }
    body
}

fn bad_response(what: &str) -> LlmError {
    LlmError::ProviderUnavailable { status: None, message: format!("unexpected response: {what}") }
}

pub fn parse_openai_response(text: &str) -> Result<String, LlmError> {
    let v: Json = serde_json::from_str(text).map_err(|e| bad_response(&e.to_string()))?;
    v.pointer("/choices/0/message/content")
        .and_then(Json::as_str)
        .map(str::to_string)
        .ok_or_else(|| bad_response("missing choices[0].message.content"))
}

pub fn parse_gemini_response(text: &str) -> Result<String, LlmError> {
    let v: Json = serde_json::from_str(text).map_err(|e| bad_response(&e.to_string()))?;
    let parts = v
        .pointer("/candidates/0/content/parts")
        .and_then(Json::as_array)
        .ok_or_else(|| bad_response("missing candidates[0].content.parts"))?;
    Ok(parts.iter().filter_map(|p| p.get("text").and_then(Json::as_str)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::template::{Bindable, PromptTemplate};
    use std::io::Read;
    use std::net::TcpListener;

    #[test]
    fn key_file_loading() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("api.key");
        std::fs::write(&path, "sk-abc\n").unwrap();
        assert_eq!(load_api_key_from_file(&path).unwrap().expose(), "sk-abc");

        assert!(matches!(
            load_api_key_from_file(dir.path().join("nope")),
            Err(LlmError::KeyFileMissing(_))
        ));
        std::fs::write(&path, "").unwrap();
        assert!(matches!(load_api_key_from_file(&path), Err(LlmError::KeyFileEmpty(_))));
        std::fs::write(&path, "\n").unwrap();
        assert!(matches!(load_api_key_from_file(&path), Err(LlmError::KeyFileEmpty(_))));
    }

    #[test]
    fn key_never_prints() {
        let key = ApiKey::new("sk-secret");
        let mut cfg = ProviderConfig::new(ProviderKind::OpenAi, "gpt-4o");
        cfg.api_key = Some(key);
        assert!(!format!("{cfg:?}").contains("sk-secret"));
    }

    #[test]
    fn config_validation() {
        let script = MockScript::new(vec![MockRule::fallback(&["OK"])]).unwrap();
        assert!(ProviderConfig::mock(script.clone()).param("temperature", 0.0).validate().is_ok());
        assert!(matches!(
            ProviderConfig::mock(script.clone()).param("temperature", 5.0).validate(),
            Err(LlmError::InvalidConfig(_))
        ));
        assert!(matches!(
            ProviderConfig::mock(script.clone()).param("topK", 0).validate(),
            Err(LlmError::InvalidConfig(_))
        ));
        assert!(ProviderConfig::mock(script).param("topK", 40).param("seed", "x").validate().is_ok());
        assert!(matches!(
            initialize(ProviderConfig::new(ProviderKind::Mock, "mock")),
            Err(LlmError::ScriptMissing)
        ));
        let mut cfg = ProviderConfig::new(ProviderKind::OpenAi, "");
        cfg.api_key = Some(ApiKey::new("k"));
        assert!(matches!(initialize(cfg), Err(LlmError::InvalidConfig(_))));
        assert!(matches!(
            initialize(ProviderConfig::new(ProviderKind::Gemini, "gemini-1.5-flash")),
            Err(LlmError::InvalidConfig(_))
        ));
    }

    #[test]
    fn mock_rules() {
        let script = MockScript::from_json(
            r#"[
                {"match": {"kind": "default"}, "replies": ["OK"]},
                {"match": {"kind": "exact", "value": "ping"}, "replies": ["pong"]},
                {"match": {"kind": "substring", "value": "tic-tac-toe"},
                 "replies": ["**Play X at 0, 0**", "**Play X at 1, 1**"]}
            ]"#,
        )
        .unwrap();
        let p = MockProvider::new(script);
        assert_eq!(p.chat("ping").unwrap(), "pong");
        assert_eq!(p.chat("anything").unwrap(), "OK");
        assert_eq!(p.chat("a tic-tac-toe board").unwrap(), "**Play X at 0, 0**");
        assert_eq!(p.chat("a tic-tac-toe board").unwrap(), "**Play X at 1, 1**");
        assert_eq!(p.chat("a tic-tac-toe board").unwrap(), "**Play X at 1, 1**");
    }

    #[test]
    fn mock_without_default_errors() {
        let p = MockProvider::new(MockScript::new(vec![MockRule::exact("a", &["b"])]).unwrap());
        assert!(matches!(p.chat("zzz"), Err(LlmError::NoScriptMatch(_))));
    }

    #[test]
    fn script_validation() {
        assert!(MockScript::from_json("{}").is_err());
        assert!(MockScript::from_json(r#"[{"match":{"kind":"exact"},"replies":["x"]}]"#).is_err());
        assert!(MockScript::from_json(r#"[{"match":{"kind":"default"},"replies":[]}]"#).is_err());
        assert!(MockScript::from_json(
            r#"[{"match":{"kind":"default"},"replies":["a"]},{"match":{"kind":"default"},"replies":["b"]}]"#
        )
        .is_err());
        let s = MockScript::new(vec![MockRule::substring("x", &["y"])]).unwrap();
        assert_eq!(MockScript::from_json(&s.to_json()).unwrap(), s);
    }

    #[test]
    fn chat_templated_matches_chat() {
        let script = MockScript::new(vec![
            MockRule::substring("hedgehog", &["to get to the other side"]),
            MockRule::fallback(&["?"]),
        ])
        .unwrap();
        let p = MockProvider::new(script);
        let mut t = PromptTemplate::new("why did the ${animal} cross the road?").unwrap();
        assert!(matches!(chat_templated(&p, &t, None), Err(LlmError::Template(_))));
        t.add_binding("animal", "hedgehog").unwrap();
        assert_eq!(chat_templated(&p, &t, None).unwrap(), "to get to the other side");
    }

    #[test]
    fn record_then_replay() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rec.jsonl");
        let recorder = Arc::new(Recorder::to_file(&path).unwrap());
        let script = MockScript::new(vec![MockRule::fallback(&["one", "two", "three"])]).unwrap();
        let p = RecordingProvider::new(MockProvider::new(script), recorder.clone());
        let live: Vec<String> = ["a", "b", "a"].iter().map(|q| p.chat(q).unwrap()).collect();
        assert_eq!(recorder.len(), 3);

        let replay = ReplayProvider::from_file(&path).unwrap();
        let again: Vec<String> = ["a", "b", "a"].iter().map(|q| replay.chat(q).unwrap()).collect();
        assert_eq!(live, again);
        assert!(matches!(replay.chat("a"), Err(LlmError::ReplayMismatch(_))));
    }

    #[test]
    fn recording_parse_errors() {
        assert!(matches!(
            parse_recording("{\"prompt\":1}\n"),
            Err(LlmError::InvalidRecording { line: 1, .. })
        ));
        assert!(parse_recording("\n\n").unwrap().is_empty());
    }

    #[test]
    fn request_bodies() {
        let cfg = ProviderConfig::new(ProviderKind::OpenAi, "gpt-4o")
            .param("temperature", 0.0)
            .param("topK", 3)
            .param("seed", 7);
        let body = openai_request(&cfg, "hi");
        assert_eq!(body["model"], "gpt-4o");
        assert_eq!(body["messages"][0]["content"], "hi");
        assert_eq!(body["temperature"], 0.0);
        assert_eq!(body["seed"], 7);
        assert!(body.get("topK").is_none());

        let cfg = ProviderConfig::new(ProviderKind::Gemini, "gemini-1.5-flash")
            .param("temperature", 0.5)
            .param("topK", 3);
        let body = gemini_request(&cfg, "hi");
        assert_eq!(body["contents"][0]["parts"][0]["text"], "hi");
        assert_eq!(body["generationConfig"]["topK"], 3);
    }

    #[test]
    fn response_parsing() {
        let ok = r#"{"choices":[{"message":{"role":"assistant","content":"Result **YES**"}}]}"#;
        assert_eq!(parse_openai_response(ok).unwrap(), "Result **YES**");
        assert!(parse_openai_response("{}").is_err());
        let g = r#"{"candidates":[{"content":{"parts":[{"text":"a"},{"text":"b"}]}}]}"#;
        assert_eq!(parse_gemini_response(g).unwrap(), "ab");
        assert!(parse_gemini_response("not json").is_err());
    }

    /// Serves `responses` in order, one connection each, and returns the raw requests.
    fn serve(responses: Vec<String>) -> (String, std::thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let handle = std::thread::spawn(move || {
            let mut seen = Vec::new();
            for response in responses {
                let (mut stream, _) = listener.accept().unwrap();
                let mut buf = Vec::new();
                let mut chunk = [0u8; 4096];
                loop {
                    let n = stream.read(&mut chunk).unwrap();
                    buf.extend_from_slice(&chunk[..n]);
                    let text = String::from_utf8_lossy(&buf);
                    if let Some(head_end) = text.find("\r\n\r\n") {
                        let len = text[..head_end]
                            .lines()
                            .find_map(|l| {
                                l.to_ascii_lowercase()
                                    .strip_prefix("content-length:")
                                    .map(|v| v.trim().parse::<usize>().unwrap())
                            })
                            .unwrap_or(0);
                        if buf.len() >= head_end + 4 + len {
                            break;
                        }
                    }
                    if n == 0 {
                        break;
                    }
                }
                seen.push(String::from_utf8_lossy(&buf).to_string());
                stream.write_all(response.as_bytes()).unwrap();
            }
            seen
        });
        (url, handle)
    }

    fn http(status: &str, body: &str) -> String {
        format!(
            "HTTP/1.1 {status}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
            body.len()
        )
    }

    #[test]
    fn openai_over_http() {
        let (url, server) = serve(vec![http(
            "200 OK",
            r#"{"choices":[{"message":{"content":"**Play X at 1, 1**"}}]}"#,
        )]);
        let mut cfg = ProviderConfig::new(ProviderKind::OpenAi, "gpt-4o").param("temperature", 0.0);
        cfg.api_key = Some(ApiKey::new("sk-test-123"));
        cfg.base_url = Some(url);
        let p = initialize(cfg).unwrap();
        assert_eq!(p.chat("move?").unwrap(), "**Play X at 1, 1**");
        let requests = server.join().unwrap();
        assert!(requests[0].starts_with("POST /chat/completions"));
        assert!(requests[0].to_ascii_lowercase().contains("authorization: bearer sk-test-123"));
        assert!(requests[0].contains("\"temperature\":0.0"));
    }

    #[test]
    fn http_error_status_is_unavailable_and_keyless() {
        let (url, server) = serve(vec![http("500 Internal Server Error", r#"{"error":"boom"}"#)]);
        let mut cfg = ProviderConfig::new(ProviderKind::Gemini, "gemini-1.5-flash");
        cfg.api_key = Some(ApiKey::new("g-secret-key"));
        cfg.base_url = Some(url);
        let err = initialize(cfg).unwrap().chat("hi").unwrap_err();
        assert!(matches!(err, LlmError::ProviderUnavailable { status: Some(500), .. }));
        assert!(!err.to_string().contains("g-secret-key"));
        let requests = server.join().unwrap();
        assert!(requests[0].starts_with("POST /models/gemini-1.5-flash:generateContent"));
    }

    #[test]
    fn transport_failure_retries_once() {
        // nothing listens on this port once the listener is dropped
        let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
        let mut cfg = ProviderConfig::new(ProviderKind::OpenAi, "gpt-4o");
        cfg.api_key = Some(ApiKey::new("sk-x"));
        cfg.base_url = Some(format!("http://127.0.0.1:{port}"));
        cfg.timeout = Duration::from_secs(2);
        let err = initialize(cfg).unwrap().chat("hi").unwrap_err();
        assert!(matches!(err, LlmError::ProviderUnavailable { status: None, .. }));
    }
}
