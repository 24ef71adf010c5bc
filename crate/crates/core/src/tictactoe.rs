//! Tic-tac-toe environment, player strategies and an agent-based match harness.
//!
//! Coordinates are zero-based `(row, column)`. In prompts `<X>` is the row
//! and `<Y>` the column.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::belief::{Predicate, Term};
use crate::llm::{ChatProvider, LlmError, ProviderKind, SharedProvider};
use crate::runtime::{AgentContext, AgentId, AgentSpec, Behavior, Performative, RuntimeError, System};
use crate::template::{Bindable, PromptTemplate, ResponseTemplate, TemplateError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Token {
    X,
    O,
}

impl Token {
    pub fn opponent(self) -> Token {
        match self {
            Token::X => Token::O,
            Token::O => Token::X,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Token::X => "X",
            Token::O => "O",
        }
    }

    pub fn parse(s: &str) -> Option<Token> {
        match s {
            "X" => Some(Token::X),
            "O" => Some(Token::O),
            _ => None,
        }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GameError {
    #[error("cell ({row}, {col}) is already occupied")]
    CellOccupied { row: usize, col: usize },
    #[error("it is {expected}'s turn, not {got}'s")]
    OutOfTurn { expected: Token, got: Token },
    #[error("the game is over")]
    GameOver,
    #[error("({row}, {col}) is off the board")]
    OutOfRange { row: i64, col: i64 },
    #[error("the board is full")]
    BoardFull,
    #[error("invalid board json: {0}")]
    InvalidBoard(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "winner", rename_all = "kebab-case")]
pub enum GameStatus {
    InProgress,
    Win(Token),
    Draw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveDecision {
    pub row: usize,
    pub col: usize,
}

impl MoveDecision {
    pub fn new(row: usize, col: usize) -> Self {
        MoveDecision { row, col }
    }
}

/// A 3x3 grid of cells without history.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct Grid(pub [[Option<Token>; 3]; 3]);

/// All eight winning lines as cell coordinates.
pub const LINES: [[(usize, usize); 3]; 8] = [
    [(0, 0), (0, 1), (0, 2)],
    [(1, 0), (1, 1), (1, 2)],
    [(2, 0), (2, 1), (2, 2)],
    [(0, 0), (1, 0), (2, 0)],
    [(0, 1), (1, 1), (2, 1)],
    [(0, 2), (1, 2), (2, 2)],
    [(0, 0), (1, 1), (2, 2)],
    [(0, 2), (1, 1), (2, 0)],
];

impl Grid {
    pub fn get(&self, row: usize, col: usize) -> Option<Token> {
        self.0[row][col]
    }

    pub fn count(&self, token: Token) -> usize {
        self.0.iter().flatten().filter(|c| **c == Some(token)).count()
    }

    /// Empty cells in row-major order.
    pub fn empty_cells(&self) -> Vec<MoveDecision> {
        (0..3)
            .flat_map(|r| (0..3).map(move |c| (r, c)))
            .filter(|&(r, c)| self.0[r][c].is_none())
            .map(|(r, c)| MoveDecision::new(r, c))
            .collect()
    }

    pub fn is_full(&self) -> bool {
        self.0.iter().flatten().all(Option::is_some)
    }

    /// X moves first, so X is next whenever the counts are equal.
    pub fn next_token(&self) -> Token {
        if self.count(Token::X) > self.count(Token::O) {
            Token::O
        } else {
            Token::X
        }
    }

    pub fn status(&self) -> GameStatus {
        for line in LINES {
            let [a, b, c] = line.map(|(r, col)| self.0[r][col]);
            if let Some(t) = a {
                if b == Some(t) && c == Some(t) {
                    return GameStatus::Win(t);
                }
            }
        }
        if self.is_full() {
            GameStatus::Draw
        } else {
            GameStatus::InProgress
        }
    }

    /// Canonical form: `{"cells": [["X","",""],["","O",""],["","",""]]}`.
    pub fn to_json(&self) -> String {
        let rows: Vec<String> = self
            .0
            .iter()
            .map(|row| {
                let cells: Vec<String> =
                    row.iter().map(|c| format!("\"{}\"", c.map(Token::as_str).unwrap_or(""))).collect();
                format!("[{}]", cells.join(","))
            })
            .collect();
        format!("{{\"cells\": [{}]}}", rows.join(","))
    }

    pub fn from_json(text: &str) -> Result<Grid, GameError> {
        #[derive(Deserialize)]
        struct Raw {
            cells: Vec<Vec<String>>,
        }
        let raw: Raw = serde_json::from_str(text).map_err(|e| GameError::InvalidBoard(e.to_string()))?;
        if raw.cells.len() != 3 || raw.cells.iter().any(|r| r.len() != 3) {
            return Err(GameError::InvalidBoard("cells must be 3x3".into()));
        }
        let mut grid = Grid::default();
        for (r, row) in raw.cells.iter().enumerate() {
            for (c, cell) in row.iter().enumerate() {
                grid.0[r][c] = match cell.as_str() {
                    "" => None,
                    other => Some(
                        Token::parse(other)
                            .ok_or_else(|| GameError::InvalidBoard(format!("bad cell value {other:?}")))?,
                    ),
                };
            }
        }
        if grid.count(Token::X).abs_diff(grid.count(Token::O)) > 1 {
            return Err(GameError::InvalidBoard("token counts differ by more than one".into()));
        }
        Ok(grid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Move {
    pub token: Token,
    pub row: usize,
    pub col: usize,
}

/// The environment's board: grid plus the moves that produced it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Board {
    grid: Grid,
    history: Vec<Move>,
}

impl Board {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn history(&self) -> &[Move] {
        &self.history
    }

    pub fn status(&self) -> GameStatus {
        self.grid.status()
    }

    pub fn to_json(&self) -> String {
        self.grid.to_json()
    }

    /// Applies a move if legal; the board is untouched on error.
    pub fn apply_move(&mut self, token: Token, row: i64, col: i64) -> Result<GameStatus, GameError> {
        if !(0..3).contains(&row) || !(0..3).contains(&col) {
            return Err(GameError::OutOfRange { row, col });
        }
        let (row, col) = (row as usize, col as usize);
        if self.status() != GameStatus::InProgress {
            return Err(GameError::GameOver);
        }
        let expected = self.grid.next_token();
        if token != expected {
            return Err(GameError::OutOfTurn { expected, got: token });
        }
        if self.grid.0[row][col].is_some() {
            return Err(GameError::CellOccupied { row, col });
        }
        self.grid.0[row][col] = Some(token);
        self.history.push(Move { token, row, col });
        Ok(self.status())
    }
}

pub fn board_to_json(board: &Board) -> String {
    board.to_json()
}

#[derive(Debug, Error)]
pub enum DecideError {
    #[error("no empty cell left")]
    BoardFull,
    #[error("could not read a move from the reply: {0}")]
    NoMatch(TemplateError),
    #[error("coordinate {0:?} is not an integer")]
    NonInteger(String),
    #[error("proposed move ({row}, {col}) is illegal: {reason}")]
    IllegalMoveProposed { row: i64, col: i64, reason: String },
    #[error("expected YES or NO, got {0:?}")]
    UnexpectedAnswer(String),
    #[error(transparent)]
    Llm(#[from] LlmError),
}

pub const BASIC_PROMPT: &str = "if the following json is a representation of a tic-tac-toe
board ${board}, what is the best move player '${player}'
can make?
Answer in the form '**Play ${player} at <X>, <Y>**'";

pub const LOOSABLE_PROMPT: &str = "I am a tic-tac-toe playing agent. if the following json
is a representation of a tic-tac-toe board ${board},
and I am player ${player}. Can I lose the game? Answer
YES or NO only using the template '**Result <answer>**'";

pub const NOT_LOSE_PROMPT: &str = "I am a tic-tac-toe playing agent.
if the following json is a representation of a
tic-tac-toe board ${board}, what location should
player '${player}' select to not loose the game?
Answer in the form '**Play ${player} at <X>, <Y>**'";

pub const NEUTRAL_PROMPT: &str = "I am a tic-tac-toe playing agent.
if the following json is a representation of a
tic-tac-toe board ${board},what location should
player '${player}' select?
Answer in the form '**Play ${player} at <X>, <Y>**'";

pub const EVALUATE_PROMPT: &str = "Is playing ${player} at ${x}, ${y} on board ${board} a good move? \
Answer YES or NO only using the template '**Result <answer>**'";

pub const REJECTED_SUFFIX: &str = "
The following moves have already been rejected as bad moves, do not pick any of them again: ${rejected}";

pub const PLAY_RESPONSE: &str = "**Play ${player} at ${x}, ${y}**";
pub const RESULT_RESPONSE: &str = "**Result ${answer}**";

/// First empty cell scanning rows, then columns.
pub fn linear_player_decide(grid: &Grid) -> Result<MoveDecision, DecideError> {
    grid.empty_cells().first().copied().ok_or(DecideError::BoardFull)
}

pub fn random_player_decide(rng: &mut ChaCha8Rng, grid: &Grid) -> Result<MoveDecision, DecideError> {
    grid.empty_cells().choose(rng).copied().ok_or(DecideError::BoardFull)
}

fn board_prompt(source: &str, grid: &Grid, token: Token) -> String {
    PromptTemplate::new(source)
        .and_then(|t| t.with("board", &grid.to_json()))
        .and_then(|t| t.with("player", token.as_str()))
        .and_then(|t| t.render_text())
        .expect("board prompts bind board and player")
}

/// Reads `**Play <token> at <x>, <y>**` from a reply and checks it against the grid.
pub fn extract_move(reply: &str, grid: &Grid, token: Token) -> Result<MoveDecision, DecideError> {
    let mut response = ResponseTemplate::new(PLAY_RESPONSE).expect("static template");
    response.add_binding("player", token.as_str()).expect("player is a parameter");
    response.infer_bindings(reply).map_err(DecideError::NoMatch)?;
    let coord = |name: &str| -> Result<i64, DecideError> {
        let text = response.get_binding(name).expect("bound by inference").trim();
        text.parse().map_err(|_| DecideError::NonInteger(text.to_string()))
    };
    let (row, col) = (coord("x")?, coord("y")?);
    if !(0..3).contains(&row) || !(0..3).contains(&col) {
        return Err(DecideError::IllegalMoveProposed { row, col, reason: "off the board".into() });
    }
    if grid.get(row as usize, col as usize).is_some() {
        return Err(DecideError::IllegalMoveProposed { row, col, reason: "cell already played".into() });
    }
    Ok(MoveDecision::new(row as usize, col as usize))
}

/// Reads `**Result YES|NO**`; returns true for YES.
pub fn extract_yes_no(reply: &str) -> Result<bool, DecideError> {
    let mut response = ResponseTemplate::new(RESULT_RESPONSE).expect("static template");
    response.infer_bindings(reply).map_err(DecideError::NoMatch)?;
    let answer = response.get_binding("answer").expect("bound by inference").trim();
    if answer.eq_ignore_ascii_case("YES") {
        Ok(true)
    } else if answer.eq_ignore_ascii_case("NO") {
        Ok(false)
    } else {
        Err(DecideError::UnexpectedAnswer(answer.to_string()))
    }
}

pub fn llm_player_decide(provider: &dyn ChatProvider, grid: &Grid, token: Token) -> Result<MoveDecision, DecideError> {
    let reply = provider.chat(&board_prompt(BASIC_PROMPT, grid, token))?;
    extract_move(&reply, grid, token)
}

/// Asks whether the position can be lost first, then picks the defensive
/// or the neutral move prompt.
pub fn defensive_player_decide(
    provider: &dyn ChatProvider,
    grid: &Grid,
    token: Token,
) -> Result<MoveDecision, DecideError> {
    let loosable = extract_yes_no(&provider.chat(&board_prompt(LOOSABLE_PROMPT, grid, token))?)?;
    let source = if loosable { NOT_LOSE_PROMPT } else { NEUTRAL_PROMPT };
    let reply = provider.chat(&board_prompt(source, grid, token))?;
    extract_move(&reply, grid, token)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reflection {
    pub decision: MoveDecision,
    pub rounds: u32,
    /// Every proposal was judged bad; `decision` is the last one.
    pub exhausted: bool,
}

/// Propose, let the LLM judge the proposal, and re-propose with the
/// rejected moves listed, for at most `max_rounds` rounds.
pub fn reflective_player_decide(
    provider: &dyn ChatProvider,
    grid: &Grid,
    token: Token,
    max_rounds: u32,
) -> Result<Reflection, DecideError> {
    let max_rounds = max_rounds.max(1);
    let mut rejected: Vec<MoveDecision> = Vec::new();
    let mut last = None;
    for round in 1..=max_rounds {
        let prompt = if rejected.is_empty() {
            board_prompt(BASIC_PROMPT, grid, token)
        } else {
            let list: Vec<String> = rejected.iter().map(|m| format!("({}, {})", m.row, m.col)).collect();
            let source = format!("{BASIC_PROMPT}{REJECTED_SUFFIX}");
            let t = PromptTemplate::new(&source)
                .and_then(|t| t.with("board", &grid.to_json()))
                .and_then(|t| t.with("player", token.as_str()))
                .and_then(|t| t.with("rejected", &list.join("; ")))
                .expect("static template");
            t.render_text().expect("all parameters bound")
        };
        let proposal = extract_move(&provider.chat(&prompt)?, grid, token)?;
        let evaluate = PromptTemplate::new(EVALUATE_PROMPT)
            .and_then(|t| t.with("player", token.as_str()))
            .and_then(|t| t.with("x", &proposal.row.to_string()))
            .and_then(|t| t.with("y", &proposal.col.to_string()))
            .and_then(|t| t.with("board", &grid.to_json()))
            .and_then(|t| t.render_text())
            .expect("static template");
        if extract_yes_no(&provider.chat(&evaluate)?)? {
            return Ok(Reflection { decision: proposal, rounds: round, exhausted: false });
        }
        rejected.push(proposal);
        last = Some(proposal);
    }
    log::warn!("reflective player {token}: all {max_rounds} proposals rejected, playing the last one");
    Ok(Reflection { decision: last.expect("at least one round ran"), rounds: max_rounds, exhausted: true })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlayerKind {
    Linear,
    LlmBasic,
    LlmDefensive,
    LlmReflective,
    Random,
}

impl PlayerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PlayerKind::Linear => "linear",
            PlayerKind::LlmBasic => "llm-basic",
            PlayerKind::LlmDefensive => "llm-defensive",
            PlayerKind::LlmReflective => "llm-reflective",
            PlayerKind::Random => "random",
        }
    }

    pub fn uses_llm(self) -> bool {
        matches!(self, PlayerKind::LlmBasic | PlayerKind::LlmDefensive | PlayerKind::LlmReflective)
    }
}

impl std::str::FromStr for PlayerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear" => Ok(PlayerKind::Linear),
            "llm-basic" => Ok(PlayerKind::LlmBasic),
            "llm-defensive" => Ok(PlayerKind::LlmDefensive),
            "llm-reflective" => Ok(PlayerKind::LlmReflective),
            "random" => Ok(PlayerKind::Random),
            other => Err(format!("unknown player type `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Exhaustion {
    Forfeit,
    FallbackToLinear,
}

/// What a player does after bad proposals (illegal or unreadable moves).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IllegalPolicy {
    /// Bad proposals tolerated in one turn before `then` applies.
    pub max_illegal: u32,
    pub then: Exhaustion,
}

impl IllegalPolicy {
    pub fn forfeit() -> Self {
        IllegalPolicy { max_illegal: 1, then: Exhaustion::Forfeit }
    }

    pub fn retry_up_to(n: u32) -> Self {
        IllegalPolicy { max_illegal: n.max(1), then: Exhaustion::Forfeit }
    }

    pub fn fallback_to_linear() -> Self {
        IllegalPolicy { max_illegal: 1, then: Exhaustion::FallbackToLinear }
    }
}

impl Default for IllegalPolicy {
    fn default() -> Self {
        IllegalPolicy { max_illegal: 3, then: Exhaustion::FallbackToLinear }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchRules {
    pub illegal_policy: IllegalPolicy,
    pub reflective_rounds: u32,
    pub seed: u64,
    /// Longest the environment waits for the game to finish.
    pub timeout: Duration,
}

impl Default for MatchRules {
    fn default() -> Self {
        MatchRules {
            illegal_policy: IllegalPolicy::default(),
            reflective_rounds: 3,
            seed: 0,
            timeout: Duration::from_secs(120),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlayerStats {
    pub proposals: u32,
    /// Proposals the environment rejected (occupied, off board, out of turn).
    pub illegal: u32,
    /// Replies no move could be read from.
    pub unreadable: u32,
    pub retries: u32,
    pub fallbacks: u32,
    pub reflections_exhausted: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveRecord {
    pub token: Token,
    pub row: usize,
    pub col: usize,
    /// Indexes into the chat recording for the exchanges behind this move.
    pub exchanges: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchEnd {
    Win,
    Draw,
    Forfeit,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchResult {
    pub players: BTreeMap<Token, PlayerKind>,
    pub end: MatchEnd,
    pub winner: Option<Token>,
    pub moves: Vec<MoveRecord>,
    pub stats: BTreeMap<Token, PlayerStats>,
    pub error: Option<String>,
}

impl MatchResult {
    pub fn final_grid(&self) -> Grid {
        let mut grid = Grid::default();
        for m in &self.moves {
            grid.0[m.row][m.col] = Some(m.token);
        }
        grid
    }
}

const ENV: &str = "board";

fn pred(functor: &str, args: Vec<Term>) -> Predicate {
    Predicate::new(functor, args).expect("nonempty functor")
}

fn p(src: &str) -> Predicate {
    Predicate::parse(src).expect("static pattern")
}

struct EnvState {
    board: Board,
    stats: BTreeMap<Token, PlayerStats>,
    moves: Vec<MoveRecord>,
    end: Option<(MatchEnd, Option<Token>)>,
}

fn environment_behavior(
    state: Arc<Mutex<EnvState>>,
    result: Arc<Mutex<Option<MatchResult>>>,
    players: BTreeMap<Token, PlayerKind>,
    timeout: Duration,
) -> Behavior {
    let broadcast = |ctx: &AgentContext, grid: &Grid| -> Result<(), RuntimeError> {
        for t in [Token::X, Token::O] {
            ctx.send(Performative::Inform, &AgentId::new(t.as_str()), pred("board", vec![Term::text(grid.to_json())]))?;
        }
        Ok(())
    };
    let finish = |ctx: &mut AgentContext, state: &mut EnvState, end: MatchEnd, winner: Option<Token>| {
        state.end = Some((end, winner));
        let label = match winner {
            Some(t) => t.as_str().to_string(),
            None => "none".to_string(),
        };
        for t in [Token::X, Token::O] {
            let over = pred("game_over", vec![Term::text(format!("{end:?}").to_lowercase()), Term::text(label.clone())]);
            let _ = ctx.send(Performative::Inform, &AgentId::new(t.as_str()), over);
        }
        let _ = ctx.add_belief(pred("finished", vec![Term::text(label)]));
    };

    let start_state = state.clone();
    let move_state = state.clone();
    let no_move_state = state.clone();
    let forfeit_state = state.clone();
    let tally_state = state;
    Behavior::new()
        .on_start(move |ctx, _| {
            let grid = *start_state.lock().expect("env state").board.grid();
            broadcast(ctx, &grid)?;
            ctx.send(Performative::Request, &AgentId::new("X"), pred("turn", vec![Term::text("X")]))?;
            let waited = ctx.wait_for(p("finished(string W)"), Some(timeout));
            let st = start_state.lock().expect("env state");
            let error = waited.err().map(|e| e.to_string());
            let (end, winner) = st.end.unwrap_or((MatchEnd::Error, None));
            *result.lock().expect("match result") = Some(MatchResult {
                players: players.clone(),
                end,
                winner,
                moves: st.moves.clone(),
                stats: st.stats.clone(),
                error,
            });
            drop(st);
            ctx.stop();
            Ok(())
        })
        .on_message(
            Performative::Request,
            p("move(int Id, string T, int R, int C, string Refs)"),
            move |ctx, msg, s| {
                let id = s.int("Id").unwrap_or_default();
                let token = Token::parse(s.text("T").unwrap_or_default());
                let (row, col) = (s.int("R").unwrap_or(-1), s.int("C").unwrap_or(-1));
                let mut st = move_state.lock().expect("env state");
                let outcome = match token {
                    Some(t) if msg.sender.as_str() == t.as_str() => {
                        st.stats.entry(t).or_default().proposals += 1;
                        st.board.apply_move(t, row, col)
                    }
                    _ => Err(GameError::InvalidBoard(format!("{} cannot move for {:?}", msg.sender, s.text("T")))),
                };
                let reply = match outcome {
                    Ok(status) => {
                        let t = token.expect("checked above");
                        let exchanges = s
                            .text("Refs")
                            .unwrap_or_default()
                            .split(',')
                            .filter_map(|r| r.trim().parse().ok())
                            .collect();
                        st.moves.push(MoveRecord { token: t, row: row as usize, col: col as usize, exchanges });
                        let grid = *st.board.grid();
                        broadcast(ctx, &grid)?;
                        match status {
                            GameStatus::Win(w) => finish(ctx, &mut st, MatchEnd::Win, Some(w)),
                            GameStatus::Draw => finish(ctx, &mut st, MatchEnd::Draw, None),
                            GameStatus::InProgress => {}
                        }
                        "ok".to_string()
                    }
                    Err(e) => {
                        if let Some(t) = token {
                            st.stats.entry(t).or_default().illegal += 1;
                        }
                        ctx.note("illegal", json!({"from": msg.sender.as_str(), "row": row, "col": col, "reason": e.to_string()}));
                        format!("illegal: {e}")
                    }
                };
                drop(st);
                ctx.send(Performative::Inform, &msg.sender, pred("move_result", vec![Term::int(id), Term::text(reply)]))
            },
        )
        .on_message(Performative::Request, p("no_move(int Id, string T, string Why)"), move |ctx, msg, s| {
            let id = s.int("Id").unwrap_or_default();
            if let Some(t) = Token::parse(s.text("T").unwrap_or_default()) {
                let mut st = no_move_state.lock().expect("env state");
                let stats = st.stats.entry(t).or_default();
                stats.proposals += 1;
                stats.unreadable += 1;
            }
            ctx.note("unreadable", json!({"from": msg.sender.as_str(), "reason": s.text("Why")}));
            ctx.send(Performative::Inform, &msg.sender, pred("move_result", vec![Term::int(id), Term::text("invalid")]))
        })
        .on_message(Performative::Request, p("forfeit(string T)"), move |ctx, _, s| {
            if let Some(t) = Token::parse(s.text("T").unwrap_or_default()) {
                let mut st = forfeit_state.lock().expect("env state");
                if st.end.is_none() {
                    finish(ctx, &mut st, MatchEnd::Forfeit, Some(t.opponent()));
                }
            }
            Ok(())
        })
        .on_message(Performative::Request, p("tally(string T, string Field)"), move |_, _, s| {
            if let Some(t) = Token::parse(s.text("T").unwrap_or_default()) {
                let mut st = tally_state.lock().expect("env state");
                let stats = st.stats.entry(t).or_default();
                match s.text("Field").unwrap_or_default() {
                    "retry" => stats.retries += 1,
                    "fallback" => stats.fallbacks += 1,
                    "exhausted" => stats.reflections_exhausted += 1,
                    other => log::warn!("unknown tally field {other}"),
                }
            }
            Ok(())
        })
}

/// Routes a decide function's chats through the agent so they are recorded.
struct ContextChat<'a> {
    ctx: &'a AgentContext,
    inner: &'a dyn ChatProvider,
    refs: RefCell<Vec<usize>>,
}

impl ChatProvider for ContextChat<'_> {
    fn kind(&self) -> ProviderKind {
        self.inner.kind()
    }

    fn model(&self) -> &str {
        self.inner.model()
    }

    fn chat(&self, prompt: &str) -> Result<String, LlmError> {
        let (reply, index) = self.ctx.chat_indexed(self.inner, prompt)?;
        self.refs.borrow_mut().extend(index);
        Ok(reply)
    }
}

struct PlayerSetup {
    token: Token,
    kind: PlayerKind,
    provider: Option<SharedProvider>,
    rules: MatchRules,
    rng: Mutex<ChaCha8Rng>,
    next_id: Mutex<i64>,
}

impl PlayerSetup {
    fn tally(&self, ctx: &AgentContext, field: &str) -> Result<(), RuntimeError> {
        let content = pred("tally", vec![Term::text(self.token.as_str()), Term::text(field)]);
        ctx.send(Performative::Request, &AgentId::new(ENV), content)
    }

    /// One decision; returns the outcome plus the chat exchanges behind it.
    fn decide(&self, ctx: &AgentContext, grid: &Grid, fallback: bool) -> (Result<MoveDecision, DecideError>, Vec<usize>) {
        if fallback {
            return (linear_player_decide(grid), Vec::new());
        }
        let provider = match (&self.provider, self.kind.uses_llm()) {
            (Some(p), true) => p.as_ref() as &dyn ChatProvider,
            (None, true) => unreachable!("checked before the match starts"),
            _ => {
                let decision = match self.kind {
                    PlayerKind::Random => random_player_decide(&mut self.rng.lock().expect("player rng"), grid),
                    _ => linear_player_decide(grid),
                };
                return (decision, Vec::new());
            }
        };
        let chat = ContextChat { ctx, inner: provider, refs: RefCell::new(Vec::new()) };
        let decision = match self.kind {
            PlayerKind::LlmBasic => llm_player_decide(&chat, grid, self.token),
            PlayerKind::LlmDefensive => defensive_player_decide(&chat, grid, self.token),
            _ => reflective_player_decide(&chat, grid, self.token, self.rules.reflective_rounds).and_then(|r| {
                if r.exhausted {
                    ctx.note("reflection-exhausted", json!({"rounds": r.rounds}));
                    self.tally(ctx, "exhausted").map_err(|e| DecideError::UnexpectedAnswer(e.to_string()))?;
                }
                Ok(r.decision)
            }),
        };
        (decision, chat.refs.into_inner())
    }

    fn play_turn(&self, ctx: &mut AgentContext) -> Result<(), RuntimeError> {
        if ctx.beliefs().holds(&p("game_over(string E, string W)")) {
            return Ok(());
        }
        let env = AgentId::new(ENV);
        let token = self.token.as_str();
        let mut bad = 0;
        let mut fallback = false;
        loop {
            let board = ctx.beliefs().first(&p("board(string J)")).and_then(|s| s.text("J").map(str::to_string));
            let grid = Grid::from_json(board.as_deref().unwrap_or_default())
                .map_err(|e| RuntimeError::Plan(format!("player {token} has no usable board: {e}")))?;
            if !fallback && bad >= self.rules.illegal_policy.max_illegal {
                match self.rules.illegal_policy.then {
                    Exhaustion::Forfeit => {
                        ctx.note("forfeit", json!({"bad_proposals": bad}));
                        return ctx.send(Performative::Request, &env, pred("forfeit", vec![Term::text(token)]));
                    }
                    Exhaustion::FallbackToLinear => {
                        fallback = true;
                        self.tally(ctx, "fallback")?;
                    }
                }
            } else if bad > 0 {
                self.tally(ctx, "retry")?;
            }
            let (decision, refs) = self.decide(ctx, &grid, fallback);
            let refs: Vec<String> = refs.iter().map(usize::to_string).collect();
            let id = {
                let mut next = self.next_id.lock().expect("move ids");
                *next += 1;
                *next
            };
            let content = match decision {
                Ok(MoveDecision { row, col }) => Some((row as i64, col as i64)),
                Err(DecideError::IllegalMoveProposed { row, col, .. }) => Some((row, col)),
                Err(e) => {
                    let why = e.to_string();
                    ctx.send(
                        Performative::Request,
                        &env,
                        pred("no_move", vec![Term::int(id), Term::text(token), Term::text(why)]),
                    )?;
                    None
                }
            };
            if let Some((row, col)) = content {
                let args = vec![Term::int(id), Term::text(token), Term::int(row), Term::int(col), Term::text(refs.join(","))];
                ctx.send(Performative::Request, &env, pred("move", args))?;
            }
            let reply = pred("move_result", vec![Term::int(id), Term::text_var("R")]);
            let s = ctx.wait_for(reply, Some(self.rules.timeout))?;
            if s.text("R") == Some("ok") {
                if !ctx.beliefs().holds(&p("game_over(string E, string W)")) {
                    let next = self.token.opponent();
                    ctx.send(Performative::Request, &AgentId::new(next.as_str()), pred("turn", vec![Term::text(next.as_str())]))?;
                }
                return Ok(());
            }
            bad += 1;
        }
    }
}

fn player_behavior(setup: Arc<PlayerSetup>) -> Behavior {
    Behavior::new()
        .on_message(Performative::Inform, p("board(string J)"), |ctx, _, s| {
            ctx.retract(&p("board(string Old)"));
            ctx.add_belief(pred("board", vec![Term::text(s.text("J").unwrap_or_default())]))
        })
        .on_message(Performative::Inform, p("game_over(string E, string W)"), |ctx, msg, _| {
            ctx.add_belief(msg.content.clone())
        })
        .on_message(Performative::Inform, p("move_result(int Id, string R)"), |ctx, msg, _| {
            ctx.add_belief(msg.content.clone())
        })
        .on_message(Performative::Request, p("turn(string T)"), move |ctx, _, _| setup.play_turn(ctx))
}

/// Plays one match between two player agents refereed by an environment
/// agent. The system is shut down afterwards, so give each match a fresh
/// `System` (sharing the event log and recorder if desired).
pub fn play_match(
    system: &System,
    x: PlayerKind,
    o: PlayerKind,
    provider: Option<SharedProvider>,
    rules: &MatchRules,
) -> Result<MatchResult, RuntimeError> {
    if (x.uses_llm() || o.uses_llm()) && provider.is_none() {
        return Err(RuntimeError::Plan("LLM players need a provider".into()));
    }
    let players: BTreeMap<Token, PlayerKind> = [(Token::X, x), (Token::O, o)].into();
    let state = Arc::new(Mutex::new(EnvState {
        board: Board::new(),
        stats: players.keys().map(|t| (*t, PlayerStats::default())).collect(),
        moves: Vec::new(),
        end: None,
    }));
    let result = Arc::new(Mutex::new(None));
    system.register("ttt-board", environment_behavior(state, result.clone(), players.clone(), rules.timeout));
    for (token, kind) in &players {
        let offset = match token {
            Token::X => 0,
            Token::O => 1,
        };
        let setup = PlayerSetup {
            token: *token,
            kind: *kind,
            provider: provider.clone(),
            rules: *rules,
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(rules.seed.wrapping_mul(2).wrapping_add(offset))),
            next_id: Mutex::new(0),
        };
        let behavior = format!("ttt-player-{token}");
        system.register(behavior.clone(), player_behavior(Arc::new(setup)));
        system.spawn(AgentSpec::new(behavior), token.as_str())?;
    }
    let env = system.spawn(AgentSpec::new("ttt-board"), ENV)?;
    system.join(&env);
    system.shutdown();
    let outcome = result.lock().expect("match result").take();
    outcome.ok_or_else(|| RuntimeError::Plan("environment ended without a result".into()))
}
