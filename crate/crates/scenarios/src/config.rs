use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Duration;

use agentkit::blocks::{BlocksState, TowerGoal, TABLE};
use agentkit::tictactoe::PlayerKind;
use agentkit::ProviderKind;
use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use crate::RunError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Travel,
    Ttt,
    Tower,
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "travel" => Ok(Scenario::Travel),
            "ttt" | "tictactoe" => Ok(Scenario::Ttt),
            "tower" => Ok(Scenario::Tower),
            other => Err(format!("unknown scenario `{other}` (expected travel, ttt or tower)")),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Travel => "travel",
            Scenario::Ttt => "ttt",
            Scenario::Tower => "tower",
        })
    }
}

/// Everything a run depends on. Serialized into the transcript and hashed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub provider: ProviderKind,
    pub model: Option<String>,
    pub params: BTreeMap<String, Json>,
    pub key_file: Option<PathBuf>,
    pub base_url: Option<String>,
    pub mock_script: Option<PathBuf>,
    pub record: Option<PathBuf>,
    pub replay: Option<PathBuf>,
    /// JSON array of `{name, description, system_message}`.
    pub roles: Option<PathBuf>,
    pub task: Option<String>,
    pub players: [PlayerKind; 2],
    pub matches: u32,
    pub seed: u64,
    /// Comma-separated blocks all on the table, inline JSON, or a JSON file.
    pub state: Option<String>,
    pub goal: Option<Vec<String>>,
    pub out: Option<PathBuf>,
    pub strict: bool,
    pub timeout_secs: u64,
}

impl RunConfig {
    pub fn new(scenario: Scenario) -> Self {
        RunConfig {
            scenario,
            provider: ProviderKind::Mock,
            model: None,
            params: BTreeMap::new(),
            key_file: None,
            base_url: None,
            mock_script: None,
            record: None,
            replay: None,
            roles: None,
            task: None,
            players: [PlayerKind::Linear, PlayerKind::Linear],
            matches: 1,
            seed: 0,
            state: None,
            goal: None,
            out: None,
            strict: false,
            timeout_secs: 120,
        }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_secs)
    }

    pub fn needs_provider(&self) -> bool {
        match self.scenario {
            Scenario::Ttt => self.players.iter().any(|p| p.uses_llm()),
            _ => true,
        }
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let bad = |m: String| Err(RunError::Config(m));
        if self.record.is_some() && self.replay.is_some() {
            return bad("--record and --replay cannot be combined".into());
        }
        if let Some(path) = &self.replay {
            if !path.is_file() {
                return bad(format!("recording {} does not exist", path.display()));
            }
        }
        if self.needs_provider() && self.replay.is_none() && self.provider == ProviderKind::Mock && self.mock_script.is_none() {
            return bad("the mock provider needs --mock-script (or use --replay)".into());
        }
        if self.matches == 0 {
            return bad("--matches must be at least 1".into());
        }
        if self.timeout_secs == 0 {
            return bad("the timeout must be positive".into());
        }
        if self.scenario == Scenario::Tower {
            let state = self.initial_state()?;
            for block in self.tower_goal()?.blocks() {
                if !state.has_block(block) {
                    return bad(format!("goal block {block} is not in the initial state"));
                }
            }
        }
        Ok(())
    }

    pub fn tower_goal(&self) -> Result<TowerGoal, RunError> {
        let blocks = self.goal.clone().unwrap_or_else(|| vec!["a".into(), "b".into(), "c".into()]);
        TowerGoal::new(blocks).map_err(|e| RunError::Config(e.to_string()))
    }

    pub fn initial_state(&self) -> Result<BlocksState, RunError> {
        let spec = self.state.as_deref().unwrap_or("a,b,c").trim();
        let json = if spec.starts_with('{') {
            spec.to_string()
        } else if spec.ends_with(".json") {
            std::fs::read_to_string(spec).map_err(|e| RunError::Config(format!("cannot read {spec}: {e}")))?
        } else {
            let blocks: Vec<&str> = spec.split(',').map(str::trim).filter(|b| !b.is_empty()).collect();
            if blocks.is_empty() || blocks.contains(&TABLE) {
                return Err(RunError::Config(format!("bad block list `{spec}`")));
            }
            return Ok(BlocksState::all_on_table(&blocks));
        };
        let state: BlocksState =
            serde_json::from_str(&json).map_err(|e| RunError::Config(format!("bad blocks state: {e}")))?;
        state.check().map_err(|e| RunError::Config(e.to_string()))?;
        Ok(state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_forms() {
        let mut cfg = RunConfig::new(Scenario::Tower);
        assert_eq!(cfg.initial_state().unwrap(), BlocksState::all_on_table(&["a", "b", "c"]));
        cfg.state = Some("a, b ,c,d".into());
        assert_eq!(cfg.initial_state().unwrap().blocks().len(), 4);
        cfg.state = Some(r#"{"on": {"a": "table", "b": "a"}, "holding": null}"#.into());
        assert_eq!(cfg.initial_state().unwrap().support("b"), Some("a"));
        cfg.state = Some(r#"{"on": {"a": "b", "b": "a"}, "holding": null}"#.into());
        assert!(cfg.initial_state().is_err());
    }

    #[test]
    fn validation() {
        let mut cfg = RunConfig::new(Scenario::Travel);
        assert!(matches!(cfg.validate(), Err(RunError::Config(_))));
        cfg.mock_script = Some("script.json".into());
        assert!(cfg.validate().is_ok());
        cfg.replay = Some("/definitely/missing.jsonl".into());
        assert!(cfg.validate().is_err());

        let ttt = RunConfig::new(Scenario::Ttt);
        assert!(ttt.validate().is_ok());

        let mut tower = RunConfig::new(Scenario::Tower);
        tower.mock_script = Some("script.json".into());
        tower.goal = Some(vec!["b".into(), "a".into(), "d".into()]);
        assert!(tower.validate().is_err());
        tower.state = Some("a,b,c,d".into());
        assert!(tower.validate().is_ok());
    }
}
