use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};
use sha2::{Digest, Sha256};

use crate::config::{RunConfig, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub scenario: Scenario,
    pub config: Json,
    pub config_hash: String,
    pub started: String,
    pub finished: String,
    pub outcome: Json,
    /// Runtime events ordered by agent, then per-agent sequence.
    pub events: Vec<Json>,
}

/// Fields that only say where output goes; they do not change a run.
const UNHASHED: &[&str] = &["out", "record"];

pub fn config_hash(config: &Json) -> String {
    let mut config = config.clone();
    if let Some(map) = config.as_object_mut() {
        for key in UNHASHED {
            map.remove(*key);
        }
    }
    let canonical = serde_json::to_string(&config).expect("json values serialize");
    Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

impl Transcript {
    pub fn new(cfg: &RunConfig, started: String, outcome: Json, events: Vec<Json>) -> Self {
        let config = serde_json::to_value(cfg).expect("config serializes");
        Transcript {
            scenario: cfg.scenario,
            config_hash: config_hash(&config),
            config,
            started,
            finished: chrono::Utc::now().to_rfc3339(),
            outcome,
            events,
        }
    }

    /// Everything except wall-clock timestamps.
    pub fn body(&self) -> Json {
        json!({
            "scenario": self.scenario,
            "config_hash": self.config_hash,
            "outcome": self.outcome,
            "events": self.events,
        })
    }

    pub fn hash_matches_config(&self) -> bool {
        config_hash(&self.config) == self.config_hash
    }

    /// Chat exchange indexes referenced by `chat` events, in event order.
    pub fn exchange_refs(&self) -> Vec<u64> {
        self.events
            .iter()
            .filter(|e| e["kind"] == "chat")
            .filter_map(|e| e["detail"]["exchange"].as_u64())
            .collect()
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).expect("transcript serializes");
        std::fs::write(path, text + "\n")
    }

    pub fn read(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_paths_do_not_change_the_hash() {
        let mut a = RunConfig::new(Scenario::Ttt);
        let mut b = a.clone();
        a.out = Some("one".into());
        b.out = Some("two".into());
        b.record = Some("rec.jsonl".into());
        let hash = |c: &RunConfig| config_hash(&serde_json::to_value(c).unwrap());
        assert_eq!(hash(&a), hash(&b));
        b.seed = 1;
        assert_ne!(hash(&a), hash(&b));
    }
}
