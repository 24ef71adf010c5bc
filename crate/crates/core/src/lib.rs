//! Agent programming toolkit with LLM integration.
//!
//! Agents keep private [`belief::BeliefBase`]s, talk through performative
//! messages ([`runtime`]), and reach language models through
//! [`llm::ChatProvider`] using the prompt/response/RAG templates in
//! [`template`]. Two environments ([`tictactoe`], [`blocks`]) host the example
//! systems.

pub mod belief;
pub mod llm;
pub mod runtime;
pub mod template;
pub mod blocks;
pub mod tictactoe;

pub use belief::{BeliefBase, BeliefError, Predicate, Substitution, Term, Value, VarType};
pub use llm::{ChatProvider, LlmError, MockProvider, MockRule, MockScript, ProviderConfig, ProviderKind};
pub use template::{
    Bindable, CompositeTemplate, PromptTemplate, RagTemplate, Render, ResponseTemplate, TemplateError,
};
