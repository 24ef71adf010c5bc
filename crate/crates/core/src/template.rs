//! Prompt, response, belief-RAG and composite templates.
//!
//! Template text marks parameters with `${name}`. Prompt templates render
//! bound parameters into text; response templates run the other way and
//! infer parameter values from an LLM reply by anchoring on the literal text
//! around each parameter. RAG templates mine an agent's beliefs at render
//! time, and composite templates glue prompts and RAG parts together.

use std::collections::BTreeMap;

use regex::Regex;
use thiserror::Error;

use crate::belief::{BeliefBase, BeliefError, Predicate};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("malformed template at byte {offset}: {reason}")]
    Malformed { offset: usize, reason: String },
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("unbound parameter(s): {}", .0.join(", "))]
    UnboundParameter(Vec<String>),
    #[error("reply does not match the response template")]
    NoMatch,
    #[error("parameters `{0}` and `{1}` are adjacent with no literal text between them")]
    AmbiguousPattern(String, String),
    #[error("parameter `{0}` captured different text at its occurrences")]
    InconsistentCapture(String),
    #[error("composite template has no parts")]
    EmptyComposite,
    #[error("RAG template rendered without a belief base")]
    MissingBeliefs,
    #[error(transparent)]
    Belief(#[from] BeliefError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Segment {
    Literal(String),
    Param(String),
}

/// Parsed template text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateBody {
    source: String,
    segments: Vec<Segment>,
}

impl TemplateBody {
    pub fn parse(source: &str) -> Result<Self, TemplateError> {
        let mut segments = Vec::new();
        let mut rest = source;
        let mut offset = 0;
        while let Some(start) = rest.find("${") {
            if start > 0 {
                segments.push(Segment::Literal(rest[..start].to_string()));
            }
            let after = &rest[start + 2..];
            let Some(end) = after.find('}') else {
                return Err(TemplateError::Malformed {
                    offset: offset + start,
                    reason: "unclosed `${`".into(),
                });
            };
            if end == 0 {
                return Err(TemplateError::Malformed {
                    offset: offset + start,
                    reason: "empty parameter name".into(),
                });
            }
            segments.push(Segment::Param(after[..end].to_string()));
            let consumed = start + 2 + end + 1;
            offset += consumed;
            rest = &rest[consumed..];
        }
        if !rest.is_empty() {
            segments.push(Segment::Literal(rest.to_string()));
        }
        Ok(TemplateBody { source: source.to_string(), segments })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Parameter names in first-occurrence order, deduplicated.
    pub fn params(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for seg in &self.segments {
            if let Segment::Param(name) = seg {
                if !out.contains(&name.as_str()) {
                    out.push(name);
                }
            }
        }
        out
    }

    pub fn has_param(&self, name: &str) -> bool {
        self.segments
            .iter()
            .any(|s| matches!(s, Segment::Param(p) if p == name))
    }

    /// Rebuilds the source text from segments.
    pub fn reconstruct(&self) -> String {
        let mut out = String::with_capacity(self.source.len());
        for seg in &self.segments {
            match seg {
                Segment::Literal(l) => out.push_str(l),
                Segment::Param(p) => {
                    out.push_str("${");
                    out.push_str(p);
                    out.push('}');
                }
            }
        }
        out
    }

    pub fn render_with(&self, bindings: &BTreeMap<String, String>) -> Result<String, TemplateError> {
        let missing: Vec<String> = self
            .params()
            .into_iter()
            .filter(|p| !bindings.contains_key(*p))
            .map(str::to_string)
            .collect();
        if !missing.is_empty() {
            return Err(TemplateError::UnboundParameter(missing));
        }
        let mut out = String::with_capacity(self.source.len());
        for seg in &self.segments {
            match seg {
                Segment::Literal(l) => out.push_str(l),
                Segment::Param(p) => out.push_str(&bindings[p]),
            }
        }
        Ok(out)
    }
}

/// Shared binding operations for the prompt, response and composite kinds.
pub trait Bindable {
    fn add_binding(&mut self, name: &str, value: &str) -> Result<(), TemplateError>;
    fn get_binding(&self, name: &str) -> Result<&str, TemplateError>;
    fn reset(&mut self);
}

/// Anything that turns into a single prompt string.
pub trait Render {
    fn render(&self, beliefs: Option<&BeliefBase>) -> Result<String, TemplateError>;
}

impl Render for str {
    fn render(&self, _: Option<&BeliefBase>) -> Result<String, TemplateError> {
        Ok(self.to_string())
    }
}

impl Render for String {
    fn render(&self, _: Option<&BeliefBase>) -> Result<String, TemplateError> {
        Ok(self.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    body: TemplateBody,
    bindings: BTreeMap<String, String>,
}

impl PromptTemplate {
    pub fn new(source: &str) -> Result<Self, TemplateError> {
        Ok(PromptTemplate { body: TemplateBody::parse(source)?, bindings: BTreeMap::new() })
    }

    pub fn body(&self) -> &TemplateBody {
        &self.body
    }

    pub fn params(&self) -> Vec<&str> {
        self.body.params()
    }

    pub fn bindings(&self) -> &BTreeMap<String, String> {
        &self.bindings
    }

    /// Chaining form of [`Bindable::add_binding`].
    pub fn with(mut self, name: &str, value: &str) -> Result<Self, TemplateError> {
        self.add_binding(name, value)?;
        Ok(self)
    }

    pub fn render_text(&self) -> Result<String, TemplateError> {
        self.body.render_with(&self.bindings)
    }
}

impl Bindable for PromptTemplate {
    fn add_binding(&mut self, name: &str, value: &str) -> Result<(), TemplateError> {
        bind(&self.body, &mut self.bindings, name, value)
    }

    fn get_binding(&self, name: &str) -> Result<&str, TemplateError> {
        lookup(&self.bindings, name)
    }

    fn reset(&mut self) {
        self.bindings.clear();
    }
}

impl Render for PromptTemplate {
    fn render(&self, _: Option<&BeliefBase>) -> Result<String, TemplateError> {
        self.render_text()
    }
}

fn bind(
    body: &TemplateBody,
    bindings: &mut BTreeMap<String, String>,
    name: &str,
    value: &str,
) -> Result<(), TemplateError> {
    if !body.has_param(name) {
        return Err(TemplateError::UnknownParameter(name.to_string()));
    }
    bindings.insert(name.to_string(), value.to_string());
    Ok(())
}

fn lookup<'a>(bindings: &'a BTreeMap<String, String>, name: &str) -> Result<&'a str, TemplateError> {
    bindings
        .get(name)
        .map(String::as_str)
        .ok_or_else(|| TemplateError::UnboundParameter(vec![name.to_string()]))
}

/// Pattern for pulling values out of a reply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseTemplate {
    body: TemplateBody,
    bindings: BTreeMap<String, String>,
}

enum Piece {
    Lit(String),
    Cap(String),
}

impl ResponseTemplate {
    pub fn new(source: &str) -> Result<Self, TemplateError> {
        Ok(ResponseTemplate { body: TemplateBody::parse(source)?, bindings: BTreeMap::new() })
    }

    pub fn body(&self) -> &TemplateBody {
        &self.body
    }

    pub fn bindings(&self) -> &BTreeMap<String, String> {
        &self.bindings
    }

    pub fn render_text(&self) -> Result<String, TemplateError> {
        self.body.render_with(&self.bindings)
    }

    /// Binds every unbound parameter from the first place `reply` matches.
    ///
    /// Literal text and already-bound parameters act as anchors; runs of
    /// whitespace in anchors match any run of whitespace in the reply. Each
    /// unbound parameter takes the shortest text that lets the rest match.
    pub fn infer_bindings(&mut self, reply: &str) -> Result<(), TemplateError> {
        let pieces = self.pieces();
        let regex = anchored_regex(&pieces)?;
        let caps = regex.captures(reply).ok_or(TemplateError::NoMatch)?;

        let mut inferred: BTreeMap<String, String> = BTreeMap::new();
        let names = pieces.iter().filter_map(|p| match p {
            Piece::Cap(n) => Some(n),
            Piece::Lit(_) => None,
        });
        for (i, name) in names.enumerate() {
            let text = caps.get(i + 1).map(|m| m.as_str()).unwrap_or_default();
            match inferred.get(name) {
                Some(prev) if prev != text => {
                    return Err(TemplateError::InconsistentCapture(name.clone()));
                }
                Some(_) => {}
                None => {
                    inferred.insert(name.clone(), text.to_string());
                }
            }
        }
        self.bindings.extend(inferred);
        Ok(())
    }

    fn pieces(&self) -> Vec<Piece> {
        let mut pieces: Vec<Piece> = Vec::new();
        for seg in &self.body.segments {
            let lit = match seg {
                Segment::Literal(l) => l.as_str(),
                Segment::Param(p) => match self.bindings.get(p) {
                    Some(v) => v.as_str(),
                    None => {
                        pieces.push(Piece::Cap(p.clone()));
                        continue;
                    }
                },
            };
            if lit.is_empty() {
                continue;
            }
            match pieces.last_mut() {
                Some(Piece::Lit(prev)) => prev.push_str(lit),
                _ => pieces.push(Piece::Lit(lit.to_string())),
            }
        }
        // Leading and trailing whitespace of the whole template is not an anchor.
        if let Some(Piece::Lit(first)) = pieces.first_mut() {
            *first = first.trim_start().to_string();
        }
        if let Some(Piece::Lit(last)) = pieces.last_mut() {
            *last = last.trim_end().to_string();
        }
        pieces.retain(|p| !matches!(p, Piece::Lit(l) if l.is_empty()));
        pieces
    }
}

fn anchored_regex(pieces: &[Piece]) -> Result<Regex, TemplateError> {
    let mut pattern = String::from("(?s)");
    let last = pieces.len().saturating_sub(1);
    for (i, piece) in pieces.iter().enumerate() {
        match piece {
            Piece::Cap(name) => {
                if let Some(Piece::Cap(prev)) = i.checked_sub(1).map(|j| &pieces[j]) {
                    return Err(TemplateError::AmbiguousPattern(prev.clone(), name.clone()));
                }
                if i == 0 {
                    pattern.push_str(r"\A\s*");
                }
                pattern.push_str("(.*?)");
                if i == last {
                    pattern.push_str(r"\s*\z");
                }
            }
            Piece::Lit(text) => push_literal(&mut pattern, text),
        }
    }
    // Pieces come from escaped text and fixed fragments; the pattern always compiles
    // unless it exceeds the regex size limit.
    Regex::new(&pattern).map_err(|_| TemplateError::NoMatch)
}

fn push_literal(pattern: &mut String, text: &str) {
    let mut chunk = String::new();
    let mut in_ws = false;
    for c in text.chars() {
        if c.is_whitespace() {
            if !in_ws {
                pattern.push_str(&regex::escape(&chunk));
                chunk.clear();
                pattern.push_str(r"\s+");
                in_ws = true;
            }
        } else {
            in_ws = false;
            chunk.push(c);
        }
    }
    pattern.push_str(&regex::escape(&chunk));
}

impl Bindable for ResponseTemplate {
    fn add_binding(&mut self, name: &str, value: &str) -> Result<(), TemplateError> {
        bind(&self.body, &mut self.bindings, name, value)
    }

    fn get_binding(&self, name: &str) -> Result<&str, TemplateError> {
        lookup(&self.bindings, name)
    }

    fn reset(&mut self) {
        self.bindings.clear();
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RagInput {
    pub pattern: Predicate,
    pub line: TemplateBody,
}

/// Intro text followed by one line per belief matching each input pattern.
///
/// The intro is literal; `${...}` inside it is not a parameter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RagTemplate {
    intro: String,
    inputs: Vec<RagInput>,
}

impl RagTemplate {
    pub fn new(intro: &str) -> Self {
        RagTemplate { intro: intro.to_string(), inputs: Vec::new() }
    }

    pub fn intro(&self) -> &str {
        &self.intro
    }

    pub fn inputs(&self) -> &[RagInput] {
        &self.inputs
    }

    pub fn add_input(&mut self, pattern: Predicate, line: &str) -> Result<(), TemplateError> {
        let line = TemplateBody::parse(line)?;
        let vars = pattern.variables();
        if let Some(unknown) = line.params().into_iter().find(|p| !vars.contains(p)) {
            return Err(TemplateError::UnknownParameter(unknown.to_string()));
        }
        self.inputs.push(RagInput { pattern, line });
        Ok(())
    }

    pub fn render_beliefs(&self, beliefs: &BeliefBase) -> String {
        let mut lines: Vec<String> = Vec::new();
        if !self.intro.is_empty() {
            lines.push(self.intro.clone());
        }
        for input in &self.inputs {
            for subst in beliefs.query(&input.pattern) {
                let bindings: BTreeMap<String, String> =
                    subst.iter().map(|(k, v)| (k.clone(), v.to_plain())).collect();
                // add_input guarantees every line parameter is a pattern variable.
                let line = input
                    .line
                    .render_with(&bindings)
                    .expect("RAG line parameters are pattern variables");
                lines.push(line);
            }
        }
        lines.join("\n")
    }
}

impl Render for RagTemplate {
    fn render(&self, beliefs: Option<&BeliefBase>) -> Result<String, TemplateError> {
        beliefs
            .map(|bb| self.render_beliefs(bb))
            .ok_or(TemplateError::MissingBeliefs)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Part {
    Prompt(PromptTemplate),
    Rag(RagTemplate),
}

impl From<PromptTemplate> for Part {
    fn from(p: PromptTemplate) -> Self {
        Part::Prompt(p)
    }
}

impl From<RagTemplate> for Part {
    fn from(r: RagTemplate) -> Self {
        Part::Rag(r)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CompositeTemplate {
    parts: Vec<Part>,
}

impl CompositeTemplate {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_template(&mut self, part: impl Into<Part>) {
        self.parts.push(part.into());
    }

    pub fn parts(&self) -> &[Part] {
        &self.parts
    }
}

impl Bindable for CompositeTemplate {
    /// Routes the binding to every prompt part that has the parameter.
    fn add_binding(&mut self, name: &str, value: &str) -> Result<(), TemplateError> {
        let mut routed = false;
        for part in &mut self.parts {
            if let Part::Prompt(p) = part {
                if p.body.has_param(name) {
                    p.add_binding(name, value)?;
                    routed = true;
                }
            }
        }
        if routed {
            Ok(())
        } else {
            Err(TemplateError::UnknownParameter(name.to_string()))
        }
    }

    fn get_binding(&self, name: &str) -> Result<&str, TemplateError> {
        self.parts
            .iter()
            .find_map(|part| match part {
                Part::Prompt(p) => p.bindings.get(name).map(String::as_str),
                Part::Rag(_) => None,
            })
            .ok_or_else(|| TemplateError::UnboundParameter(vec![name.to_string()]))
    }

    fn reset(&mut self) {
        for part in &mut self.parts {
            if let Part::Prompt(p) = part {
                p.reset();
            }
        }
    }
}

impl Render for CompositeTemplate {
    fn render(&self, beliefs: Option<&BeliefBase>) -> Result<String, TemplateError> {
        if self.parts.is_empty() {
            return Err(TemplateError::EmptyComposite);
        }
        let mut missing: Vec<String> = Vec::new();
        let mut rendered = Vec::with_capacity(self.parts.len());
        for part in &self.parts {
            let text = match part {
                Part::Prompt(p) => p.render_text(),
                Part::Rag(r) => r.render(beliefs),
            };
            match text {
                Ok(t) => rendered.push(t),
                Err(TemplateError::UnboundParameter(names)) => {
                    for n in names {
                        if !missing.contains(&n) {
                            missing.push(n);
                        }
                    }
                }
                Err(e) => return Err(e),
            }
        }
        if !missing.is_empty() {
            return Err(TemplateError::UnboundParameter(missing));
        }
        Ok(rendered.join("\n"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pred(s: &str) -> Predicate {
        Predicate::parse(s).unwrap()
    }

    #[test]
    fn parse_params() {
        let t = PromptTemplate::new("why did the ${animal} cross the road?").unwrap();
        assert_eq!(t.params(), ["animal"]);
        assert!(PromptTemplate::new("no params here").unwrap().params().is_empty());
        let adj = TemplateBody::parse("${a}${b}").unwrap();
        assert_eq!(
            adj.segments(),
            [Segment::Param("a".into()), Segment::Param("b".into())]
        );
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            TemplateBody::parse("x ${open"),
            Err(TemplateError::Malformed { offset: 2, .. })
        ));
        assert!(matches!(
            TemplateBody::parse("${}"),
            Err(TemplateError::Malformed { .. })
        ));
    }

    #[test]
    fn reconstruct_is_lossless() {
        for src in ["", "plain $ {x} }", "a${b}c${d}${e}f", "$${x}}"] {
            assert_eq!(TemplateBody::parse(src).unwrap().reconstruct(), src);
        }
    }

    #[test]
    fn joker() {
        let mut t = PromptTemplate::new("why did the ${animal} cross the road?").unwrap();
        t.add_binding("animal", "hedgehog").unwrap();
        assert_eq!(t.render_text().unwrap(), "why did the hedgehog cross the road?");
        assert_eq!(t.get_binding("animal").unwrap(), "hedgehog");
        assert_eq!(
            t.add_binding("colour", "red"),
            Err(TemplateError::UnknownParameter("colour".into()))
        );
    }

    #[test]
    fn render_unbound() {
        let mut t = PromptTemplate::new("${a} and ${b}").unwrap();
        t.add_binding("a", "1").unwrap();
        assert_eq!(t.render_text(), Err(TemplateError::UnboundParameter(vec!["b".into()])));
        assert_eq!(PromptTemplate::new("verbatim").unwrap().render_text().unwrap(), "verbatim");
    }

    #[test]
    fn reset_clears() {
        let mut t = PromptTemplate::new("${a}").unwrap();
        t.reset();
        t.add_binding("a", "x").unwrap();
        let before = t.render_text().unwrap();
        t.reset();
        assert!(matches!(t.render_text(), Err(TemplateError::UnboundParameter(_))));
        assert!(matches!(t.get_binding("a"), Err(TemplateError::UnboundParameter(_))));
        t.add_binding("a", "x").unwrap();
        assert_eq!(t.render_text().unwrap(), before);
    }

    #[test]
    fn happy_inference() {
        let mut r = ResponseTemplate::new("Result **${answer}**").unwrap();
        r.infer_bindings("Result **YES**").unwrap();
        assert_eq!(r.get_binding("answer").unwrap(), "YES");
    }

    #[test]
    fn play_inference_with_prebound_player() {
        let mut r = ResponseTemplate::new("**Play ${player} at ${x}, ${y}**").unwrap();
        r.add_binding("player", "X").unwrap();
        r.infer_bindings("**Play X at 1, 2**").unwrap();
        assert_eq!(r.get_binding("x").unwrap(), "1");
        assert_eq!(r.get_binding("y").unwrap(), "2");

        let mut r = ResponseTemplate::new("**Play ${player} at ${x}, ${y}**").unwrap();
        r.add_binding("player", "O").unwrap();
        r.infer_bindings("I suggest **Play O at 2, 0** because it blocks.").unwrap();
        assert_eq!((r.get_binding("x").unwrap(), r.get_binding("y").unwrap()), ("2", "0"));
    }

    #[test]
    fn prebound_mismatch_is_no_match() {
        let mut r = ResponseTemplate::new("**Play ${player} at ${x}, ${y}**").unwrap();
        r.add_binding("player", "X").unwrap();
        assert_eq!(r.infer_bindings("**Play O at 1, 2**"), Err(TemplateError::NoMatch));
        assert_eq!(
            ResponseTemplate::new("Result **${answer}**").unwrap().infer_bindings("no idea"),
            Err(TemplateError::NoMatch)
        );
    }

    #[test]
    fn fenced_json() {
        let mut r = ResponseTemplate::new("```json${json}```").unwrap();
        let reply = "Here is the plan:\n```json\n[{\"action\":\"pickup\",\"args\":[\"b\"]}]\n```\nDone.";
        r.infer_bindings(reply).unwrap();
        assert_eq!(
            r.get_binding("json").unwrap(),
            "\n[{\"action\":\"pickup\",\"args\":[\"b\"]}]\n"
        );
    }

    #[test]
    fn whitespace_is_normalized_in_anchors() {
        let mut r = ResponseTemplate::new("the answer\n    is: ${v}.").unwrap();
        r.infer_bindings("so   the answer is:\t42.").unwrap();
        assert_eq!(r.get_binding("v").unwrap(), "42");
    }

    #[test]
    fn adjacent_params_are_ambiguous() {
        let mut r = ResponseTemplate::new("${a}${b}").unwrap();
        assert_eq!(
            r.infer_bindings("xy"),
            Err(TemplateError::AmbiguousPattern("a".into(), "b".into()))
        );
        // a bound parameter in between counts as an anchor
        let mut r = ResponseTemplate::new("${a}${sep}${b}").unwrap();
        r.add_binding("sep", "-").unwrap();
        r.infer_bindings("x-y").unwrap();
        assert_eq!(r.get_binding("b").unwrap(), "y");
    }

    #[test]
    fn repeated_param_must_agree() {
        let mut r = ResponseTemplate::new("<${p}> and <${p}>").unwrap();
        r.infer_bindings("<a> and <a>").unwrap();
        assert_eq!(r.get_binding("p").unwrap(), "a");
        let mut r = ResponseTemplate::new("<${p}> and <${p}>").unwrap();
        assert_eq!(
            r.infer_bindings("<a> and <b>"),
            Err(TemplateError::InconsistentCapture("p".into()))
        );
    }

    #[test]
    fn edge_params_capture_to_text_bounds() {
        let mut r = ResponseTemplate::new("${head}: ${tail}").unwrap();
        r.infer_bindings("  key: some value \n").unwrap();
        assert_eq!(r.get_binding("head").unwrap(), "key");
        assert_eq!(r.get_binding("tail").unwrap(), "some value");
    }

    fn foodie_rag() -> (RagTemplate, BeliefBase) {
        let mut rag = RagTemplate::new("Which of the following are fruits?");
        rag.add_input(pred("food(string A)"), "${A}").unwrap();
        let mut bb = BeliefBase::new();
        for f in ["nuts", "apples", "oranges"] {
            bb.add(Predicate::ground("food", [f]).unwrap()).unwrap();
        }
        (rag, bb)
    }

    #[test]
    fn rag_render() {
        let (rag, bb) = foodie_rag();
        assert_eq!(rag.inputs().len(), 1);
        assert_eq!(
            rag.render(Some(&bb)).unwrap(),
            "Which of the following are fruits?\nnuts\napples\noranges"
        );
        assert_eq!(rag.render(Some(&BeliefBase::new())).unwrap(), rag.intro());
        assert_eq!(rag.render(None), Err(TemplateError::MissingBeliefs));
    }

    #[test]
    fn rag_intro_is_literal_and_optional() {
        let rag = RagTemplate::new("cost ${x}");
        assert_eq!(rag.render(Some(&BeliefBase::new())).unwrap(), "cost ${x}");

        let mut rag = RagTemplate::new("");
        rag.add_input(pred("food(string A)"), "- ${A}").unwrap();
        let (_, bb) = foodie_rag();
        assert_eq!(rag.render(Some(&bb)).unwrap(), "- nuts\n- apples\n- oranges");
    }

    #[test]
    fn rag_input_must_use_pattern_vars() {
        let mut rag = RagTemplate::new("x");
        assert_eq!(
            rag.add_input(pred("food(string A)"), "${B}"),
            Err(TemplateError::UnknownParameter("B".into()))
        );
    }

    #[test]
    fn rag_towerworld_lines() {
        let mut rag = RagTemplate::new("The following sentences define the current state of the blocks.");
        rag.add_input(pred("on(string A, string B)"), "block ${A} is on top of ${B}.").unwrap();
        rag.add_input(pred("holding(string C)"), "the gripper is holding ${C}.").unwrap();
        let mut bb = BeliefBase::new();
        bb.add(pred("holding(\"b\")")).unwrap();
        bb.add(pred("on(\"a\",\"table\")")).unwrap();
        assert_eq!(
            rag.render(Some(&bb)).unwrap(),
            "The following sentences define the current state of the blocks.\n\
             block a is on top of table.\n\
             the gripper is holding b."
        );
    }

    #[test]
    fn composite_basics() {
        let mut c = CompositeTemplate::new();
        assert_eq!(c.render(None), Err(TemplateError::EmptyComposite));
        c.add_template(PromptTemplate::new("A").unwrap());
        assert_eq!(c.render(None).unwrap(), "A");
        c.add_template(PromptTemplate::new("B").unwrap());
        assert_eq!(c.render(None).unwrap(), "A\nB");
    }

    #[test]
    fn composite_routes_bindings_and_sees_late_beliefs() {
        let (rag, mut bb) = foodie_rag();
        let mut c = CompositeTemplate::new();
        c.add_template(PromptTemplate::new("Hi ${who}.").unwrap());
        c.add_template(rag);
        c.add_template(PromptTemplate::new("Bye ${who}, ${when}.").unwrap());
        assert_eq!(
            c.render(Some(&bb)),
            Err(TemplateError::UnboundParameter(vec!["who".into(), "when".into()]))
        );
        c.add_binding("who", "Ann").unwrap();
        c.add_binding("when", "soon").unwrap();
        assert!(c.add_binding("nobody", "x").is_err());
        bb.add(pred("food(\"kiwi\")")).unwrap();
        assert_eq!(
            c.render(Some(&bb)).unwrap(),
            "Hi Ann.\nWhich of the following are fruits?\nnuts\napples\noranges\nkiwi\nBye Ann, soon."
        );
        assert_eq!(c.get_binding("when").unwrap(), "soon");
        c.reset();
        assert!(c.get_binding("who").is_err());
    }
}
