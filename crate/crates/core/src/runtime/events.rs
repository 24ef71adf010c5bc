use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

/// One transcript entry. `seq` increases strictly per agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub agent: String,
    pub seq: u64,
    pub kind: String,
    pub detail: serde_json::Value,
    pub ts: String,
}

#[derive(Default)]
struct LogState {
    events: Vec<Event>,
    next_seq: HashMap<String, u64>,
}

/// Shared, append-only event log with an optional streaming JSONL sink.
#[derive(Default)]
pub struct EventLog {
    state: Mutex<LogState>,
    sink: Option<Mutex<BufWriter<File>>>,
}

impl EventLog {
    pub fn streaming_to(path: impl AsRef<Path>) -> std::io::Result<Self> {
        Ok(EventLog {
            state: Mutex::default(),
            sink: Some(Mutex::new(BufWriter::new(File::create(path)?))),
        })
    }

    pub fn emit(&self, agent: &str, kind: &str, detail: serde_json::Value) {
        let mut state = self.state.lock().expect("event log poisoned");
        let seq = state.next_seq.entry(agent.to_string()).or_insert(0);
        let event = Event {
            agent: agent.to_string(),
            seq: *seq,
            kind: kind.to_string(),
            detail,
            ts: chrono::Utc::now().to_rfc3339(),
        };
        *seq += 1;
        if let Some(sink) = &self.sink {
            let mut sink = sink.lock().expect("event sink poisoned");
            let line = serde_json::to_string(&event).expect("event serializes");
            if let Err(e) = writeln!(sink, "{line}").and_then(|_| sink.flush()) {
                log::warn!("failed to stream event: {e}");
            }
        }
        state.events.push(event);
    }

    /// Events in emission order.
    pub fn events(&self) -> Vec<Event> {
        self.state.lock().expect("event log poisoned").events.clone()
    }

    /// Events ordered by agent name then sequence number, without timestamps.
    ///
    /// Agents run concurrently, so emission order across agents can vary
    /// between runs; this form is stable for identical inputs.
    pub fn canonical(&self) -> Vec<serde_json::Value> {
        let mut events = self.events();
        events.sort_by(|a, b| a.agent.cmp(&b.agent).then(a.seq.cmp(&b.seq)));
        events
            .into_iter()
            .map(|e| {
                serde_json::json!({
                    "agent": e.agent,
                    "seq": e.seq,
                    "kind": e.kind,
                    "detail": e.detail,
                })
            })
            .collect()
    }
}
