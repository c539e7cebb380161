//! Executable property model: a precondition predicate over GUI states, an
//! interaction script, and a postcondition predicate, with the checking
//! semantics used by the test runner.
//!
//! A property is checked from a state `s` by evaluating the precondition on
//! `s`, executing the interaction script to reach `s'`, and evaluating the
//! postcondition on `s'`. A false precondition or an unexecutable script
//! yields an inapplicable verdict, never a violation.

use crate::backend::{AppModel, Backend, ReplayAnchor};
use crate::gui::{Event, EventData, EventType, GuiState, Label, ScreenId, SwipeDirection, Widget};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PropertyError {
    #[error("invalid property: {0}")]
    Invalid(String),
    /// The replay anchor no longer reproduces its recorded execution.
    #[error("anchor stale: {0}")]
    AnchorStale(String),
}

/// How a selector matches widget text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextMatch {
    Exact(String),
    Regex(String),
}

/// Match multiplicity carried on a selector. Interaction steps always
/// resolve `First` (lowest label); predicates quantify via their own atoms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantifier {
    #[default]
    First,
    All,
    Count,
}

/// Conjunctive widget matcher over kind, resource id, text, description,
/// and label. At least one field must be constrained.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Selector {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub widget_kind: Option<crate::gui::WidgetKind>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub resource_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub text: Option<TextMatch>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub description: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub label: Option<Label>,
    #[serde(default)]
    pub quantifier: Quantifier,
}

fn cached_regex(pattern: &str) -> Result<regex::Regex, regex::Error> {
    static CACHE: OnceLock<Mutex<HashMap<String, regex::Regex>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    if let Some(re) = guard.get(pattern) {
        return Ok(re.clone());
    }
    let re = regex::Regex::new(pattern)?;
    guard.insert(pattern.to_string(), re.clone());
    Ok(re)
}

impl Selector {
    pub fn by_resource_id(rid: impl Into<String>) -> Self {
        Selector { resource_id: Some(rid.into()), ..Default::default() }
    }

    pub fn by_text(text: impl Into<String>) -> Self {
        Selector { text: Some(TextMatch::Exact(text.into())), ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), PropertyError> {
        if self.widget_kind.is_none()
            && self.resource_id.is_none()
            && self.text.is_none()
            && self.description.is_none()
            && self.label.is_none()
        {
            return Err(PropertyError::Invalid("selector constrains no field".into()));
        }
        if let Some(TextMatch::Regex(pattern)) = &self.text {
            cached_regex(pattern)
                .map_err(|e| PropertyError::Invalid(format!("bad regex {pattern:?}: {e}")))?;
        }
        Ok(())
    }

    pub fn matches(&self, w: &Widget) -> bool {
        if let Some(kind) = self.widget_kind {
            if w.widget_kind != kind {
                return false;
            }
        }
        if let Some(rid) = &self.resource_id {
            if w.resource_id.as_deref() != Some(rid.as_str()) {
                return false;
            }
        }
        if let Some(text) = &self.text {
            let widget_text = w.text.as_deref().unwrap_or("");
            let ok = match text {
                TextMatch::Exact(t) => widget_text == t,
                TextMatch::Regex(pattern) => {
                    cached_regex(pattern).map(|re| re.is_match(widget_text)).unwrap_or(false)
                }
            };
            if !ok {
                return false;
            }
        }
        if let Some(d) = &self.description {
            if w.description.as_deref() != Some(d.as_str()) {
                return false;
            }
        }
        if let Some(l) = self.label {
            if w.label != l {
                return false;
            }
        }
        true
    }

    /// All matching widgets in label order.
    pub fn resolve<'a>(&self, s: &'a GuiState) -> Vec<&'a Widget> {
        s.widgets.iter().filter(|w| self.matches(w)).collect()
    }

    /// Lowest-label widget that matches and can receive the given event
    /// type (capability present, widget enabled). Ambiguity resolves to the
    /// lowest label.
    pub fn resolve_for_event<'a>(
        &self,
        s: &'a GuiState,
        event_type: EventType,
    ) -> Option<&'a Widget> {
        let required = event_type.required_capability();
        s.widgets.iter().find(|w| {
            self.matches(w)
                && w.enabled
                && required.map_or(true, |cap| w.capabilities.contains(&cap))
        })
    }

    pub fn render(&self) -> String {
        let mut parts = Vec::new();
        if let Some(k) = self.widget_kind {
            parts.push(format!("kind={k:?}"));
        }
        if let Some(r) = &self.resource_id {
            parts.push(format!("id={r}"));
        }
        match &self.text {
            Some(TextMatch::Exact(t)) => parts.push(format!("text={t:?}")),
            Some(TextMatch::Regex(p)) => parts.push(format!("text~/{p}/")),
            None => {}
        }
        if let Some(d) = &self.description {
            parts.push(format!("desc={d:?}"));
        }
        if let Some(l) = self.label {
            parts.push(format!("label={l}"));
        }
        format!("{{{}}}", parts.join(", "))
    }
}

/// Comparison operator for count atoms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CountOp {
    fn apply(self, lhs: usize, rhs: usize) -> bool {
        match self {
            CountOp::Eq => lhs == rhs,
            CountOp::Ne => lhs != rhs,
            CountOp::Lt => lhs < rhs,
            CountOp::Le => lhs <= rhs,
            CountOp::Gt => lhs > rhs,
            CountOp::Ge => lhs >= rhs,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            CountOp::Eq => "==",
            CountOp::Ne => "!=",
            CountOp::Lt => "<",
            CountOp::Le => "<=",
            CountOp::Gt => ">",
            CountOp::Ge => ">=",
        }
    }
}

/// Predicate over a single GUI state: widget atoms composed with
/// and/or/not. Evaluation is pure and total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredicateExpr {
    Exists(Selector),
    Absent(Selector),
    /// Text of the lowest-label match equals the literal; no match is false.
    TextEquals { selector: Selector, value: String },
    Count { selector: Selector, op: CountOp, value: usize },
    OnScreen(ScreenId),
    And(Vec<PredicateExpr>),
    Or(Vec<PredicateExpr>),
    Not(Box<PredicateExpr>),
}

impl PredicateExpr {
    pub fn exists(selector: Selector) -> Self {
        PredicateExpr::Exists(selector)
    }

    pub fn on_screen(id: impl Into<String>) -> Self {
        PredicateExpr::OnScreen(id.into())
    }

    pub fn and(items: Vec<PredicateExpr>) -> Self {
        PredicateExpr::And(items)
    }

    pub fn validate(&self) -> Result<(), PropertyError> {
        match self {
            PredicateExpr::Exists(s) | PredicateExpr::Absent(s) => s.validate(),
            PredicateExpr::TextEquals { selector, .. } => selector.validate(),
            PredicateExpr::Count { selector, .. } => selector.validate(),
            PredicateExpr::OnScreen(id) => {
                if id.is_empty() {
                    Err(PropertyError::Invalid("on_screen with empty screen id".into()))
                } else {
                    Ok(())
                }
            }
            PredicateExpr::And(items) | PredicateExpr::Or(items) => {
                items.iter().try_for_each(|p| p.validate())
            }
            PredicateExpr::Not(inner) => inner.validate(),
        }
    }

    pub fn render(&self) -> String {
        match self {
            PredicateExpr::Exists(s) => format!("exists{}", s.render()),
            PredicateExpr::Absent(s) => format!("absent{}", s.render()),
            PredicateExpr::TextEquals { selector, value } => {
                format!("text_of{} == {value:?}", selector.render())
            }
            PredicateExpr::Count { selector, op, value } => {
                format!("count{} {} {}", selector.render(), op.symbol(), value)
            }
            PredicateExpr::OnScreen(id) => format!("on_screen({id})"),
            PredicateExpr::And(items) => {
                let parts: Vec<String> = items.iter().map(|p| p.render()).collect();
                format!("({})", parts.join(" && "))
            }
            PredicateExpr::Or(items) => {
                let parts: Vec<String> = items.iter().map(|p| p.render()).collect();
                format!("({})", parts.join(" || "))
            }
            PredicateExpr::Not(inner) => format!("!{}", inner.render()),
        }
    }

    /// Selectors appearing anywhere in the expression.
    pub fn selectors(&self) -> Vec<&Selector> {
        let mut out = Vec::new();
        self.collect_selectors(&mut out);
        out
    }

    fn collect_selectors<'a>(&'a self, out: &mut Vec<&'a Selector>) {
        match self {
            PredicateExpr::Exists(s) | PredicateExpr::Absent(s) => out.push(s),
            PredicateExpr::TextEquals { selector, .. } => out.push(selector),
            PredicateExpr::Count { selector, .. } => out.push(selector),
            PredicateExpr::OnScreen(_) => {}
            PredicateExpr::And(items) | PredicateExpr::Or(items) => {
                for p in items {
                    p.collect_selectors(out);
                }
            }
            PredicateExpr::Not(inner) => inner.collect_selectors(out),
        }
    }

    pub fn screen_ids(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_screens(&mut out);
        out
    }

    fn collect_screens<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            PredicateExpr::OnScreen(id) => out.push(id),
            PredicateExpr::And(items) | PredicateExpr::Or(items) => {
                for p in items {
                    p.collect_screens(out);
                }
            }
            PredicateExpr::Not(inner) => inner.collect_screens(out),
            _ => {}
        }
    }
}

/// Evaluates a predicate on a state. Pure: never touches the session.
pub fn eval_predicate(p: &PredicateExpr, s: &GuiState) -> bool {
    match p {
        PredicateExpr::Exists(sel) => s.widgets.iter().any(|w| sel.matches(w)),
        PredicateExpr::Absent(sel) => !s.widgets.iter().any(|w| sel.matches(w)),
        PredicateExpr::TextEquals { selector, value } => selector
            .resolve(s)
            .first()
            .map(|w| w.text.as_deref().unwrap_or("") == value)
            .unwrap_or(false),
        PredicateExpr::Count { selector, op, value } => {
            op.apply(selector.resolve(s).len(), *value)
        }
        PredicateExpr::OnScreen(id) => &s.screen_id == id,
        PredicateExpr::And(items) => items.iter().all(|p| eval_predicate(p, s)),
        PredicateExpr::Or(items) => items.iter().any(|p| eval_predicate(p, s)),
        PredicateExpr::Not(inner) => !eval_predicate(inner, s),
    }
}

/// Path to the first failing atom (depth-first) of a predicate that
/// evaluated false. Deterministic, so replays reproduce it bit-for-bit.
pub fn failed_atom_path(p: &PredicateExpr, s: &GuiState) -> Option<String> {
    if eval_predicate(p, s) {
        return None;
    }
    Some(explain_failure(p, s))
}

fn explain_failure(p: &PredicateExpr, s: &GuiState) -> String {
    match p {
        PredicateExpr::And(items) => {
            for (i, item) in items.iter().enumerate() {
                if !eval_predicate(item, s) {
                    return format!("and[{i}].{}", explain_failure(item, s));
                }
            }
            "and".to_string()
        }
        PredicateExpr::Or(items) => match items.first() {
            Some(first) => format!("or[0].{}", explain_failure(first, s)),
            None => "or[]".to_string(),
        },
        // `not` is reported as an atom: its subtree evaluated true.
        other => other.render(),
    }
}

/// How an interaction step derives its event payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataGen {
    LiteralText(String),
    LiteralDirection(SwipeDirection),
    /// A word drawn from the edit corpus with the seeded script rng.
    CorpusRandom,
}

/// One step of an interaction script: an event template plus an optional
/// step guard evaluated on the state the step runs from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionStep {
    pub event_type: EventType,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub selector: Option<Selector>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub data: Option<DataGen>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub guard_when: Option<PredicateExpr>,
}

impl InteractionStep {
    pub fn click(selector: Selector) -> Self {
        InteractionStep {
            event_type: EventType::Click,
            selector: Some(selector),
            data: None,
            guard_when: None,
        }
    }

    pub fn back() -> Self {
        InteractionStep { event_type: EventType::Back, selector: None, data: None, guard_when: None }
    }

    pub fn edit(selector: Selector, data: DataGen) -> Self {
        InteractionStep {
            event_type: EventType::Edit,
            selector: Some(selector),
            data: Some(data),
            guard_when: None,
        }
    }

    fn render(&self) -> String {
        let mut s = self.event_type.to_string();
        if let Some(sel) = &self.selector {
            s.push_str(&sel.render());
        }
        match &self.data {
            Some(DataGen::LiteralText(t)) => s.push_str(&format!(" {t:?}")),
            Some(DataGen::LiteralDirection(d)) => s.push_str(&format!(" {d:?}")),
            Some(DataGen::CorpusRandom) => s.push_str(" <corpus>"),
            None => {}
        }
        s
    }
}

/// Ordered, non-empty interaction scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionScript {
    pub steps: Vec<InteractionStep>,
}

impl InteractionScript {
    pub fn new(steps: Vec<InteractionStep>) -> Self {
        InteractionScript { steps }
    }

    pub fn validate(&self) -> Result<(), PropertyError> {
        if self.steps.is_empty() {
            return Err(PropertyError::Invalid("interaction script is empty".into()));
        }
        for (i, step) in self.steps.iter().enumerate() {
            match step.event_type {
                EventType::Back => {
                    if step.selector.is_some() || step.data.is_some() {
                        return Err(PropertyError::Invalid(format!(
                            "step {i}: back carries no selector or data"
                        )));
                    }
                }
                other => {
                    let sel = step.selector.as_ref().ok_or_else(|| {
                        PropertyError::Invalid(format!("step {i}: {other} needs a selector"))
                    })?;
                    sel.validate()?;
                    if sel.quantifier != Quantifier::First {
                        return Err(PropertyError::Invalid(format!(
                            "step {i}: interaction selectors must use the 'first' quantifier"
                        )));
                    }
                    match other {
                        EventType::Edit | EventType::Swipe => {
                            if step.data.is_none() {
                                return Err(PropertyError::Invalid(format!(
                                    "step {i}: {other} needs a data generator"
                                )));
                            }
                        }
                        _ => {}
                    }
                }
            }
            if let Some(g) = &step.guard_when {
                g.validate()?;
            }
        }
        Ok(())
    }

    pub fn render(&self) -> String {
        let parts: Vec<String> = self.steps.iter().map(|s| s.render()).collect();
        parts.join(" ; ")
    }

    pub fn selectors(&self) -> Vec<&Selector> {
        self.steps.iter().filter_map(|s| s.selector.as_ref()).collect()
    }
}

/// Where a property came from: the evidence trace it was synthesized from
/// and the natural-language specification it realizes.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub evidence_id: String,
    pub hypothesis: String,
    #[serde(default)]
    pub nl_precondition: String,
    #[serde(default)]
    pub nl_interaction: String,
    #[serde(default)]
    pub nl_postcondition: String,
}

/// Executable property: precondition, interaction scenario, postcondition,
/// plus provenance and a version bumped by each accepted refinement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Property {
    pub property_id: String,
    pub version: u32,
    pub precondition: PredicateExpr,
    pub interaction: InteractionScript,
    pub postcondition: PredicateExpr,
    #[serde(default)]
    pub provenance: Provenance,
}

impl Property {
    pub fn validate(&self) -> Result<(), PropertyError> {
        if self.property_id.is_empty() {
            return Err(PropertyError::Invalid("empty property id".into()));
        }
        self.precondition.validate()?;
        self.interaction.validate()?;
        self.postcondition.validate()
    }

    /// Stable one-line rendering for reports.
    pub fn render_line(&self) -> String {
        format!(
            "{} v{} :: P: {} | I: {} | Q: {}",
            self.property_id,
            self.version,
            self.precondition.render(),
            self.interaction.render(),
            self.postcondition.render()
        )
    }

    pub fn from_json(json: &str) -> Result<Property, PropertyError> {
        let p: Property = serde_json::from_str(json)
            .map_err(|e| PropertyError::Invalid(format!("parse error: {e}")))?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("property serializes")
    }
}

/// Why a check did not apply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InapplicableReason {
    PreconditionFalse,
    /// The script aborted at `step_index` (unresolvable selector or failing
    /// step guard). Distinct from a violation.
    InteractionAbort { step_index: usize, detail: String },
}

/// Outcome of checking one property from one state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckResult {
    Inapplicable { reason: InapplicableReason, executed: Vec<Event> },
    Satisfied { executed: Vec<Event> },
    Violated {
        pre: Box<GuiState>,
        post: Box<GuiState>,
        failed_atom: String,
        executed: Vec<Event>,
    },
}

impl CheckResult {
    pub fn is_violated(&self) -> bool {
        matches!(self, CheckResult::Violated { .. })
    }

    pub fn is_satisfied(&self) -> bool {
        matches!(self, CheckResult::Satisfied { .. })
    }
}

/// Signal raised when a script step cannot execute.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionAbort {
    pub step_index: usize,
    pub detail: String,
    pub executed: Vec<Event>,
}

/// Executes an interaction script from the session's current state.
/// Each step resolves its selector on the state it runs from; concrete
/// events are returned for replay. Unresolvable selectors and failing step
/// guards abort (they do not report violations).
pub fn run_interaction<B: Backend>(
    script: &InteractionScript,
    session: &mut B,
    rng: &mut impl Rng,
    corpus: &[String],
) -> Result<(GuiState, Vec<Event>), InteractionAbort> {
    let mut executed: Vec<Event> = Vec::new();
    let mut current = session.current_state().clone();
    for (i, step) in script.steps.iter().enumerate() {
        if let Some(guard) = &step.guard_when {
            if !eval_predicate(guard, &current) {
                return Err(InteractionAbort {
                    step_index: i,
                    detail: format!("step guard failed: {}", guard.render()),
                    executed,
                });
            }
        }
        let event = match step.event_type {
            EventType::Back => Event::back(),
            event_type => {
                let selector = step.selector.as_ref().expect("validated step has selector");
                let widget = selector.resolve_for_event(&current, event_type).ok_or_else(|| {
                    InteractionAbort {
                        step_index: i,
                        detail: format!("selector unresolved: {}", selector.render()),
                        executed: executed.clone(),
                    }
                })?;
                let data = match (&step.data, event_type) {
                    (Some(DataGen::LiteralText(t)), _) => Some(EventData::Text(t.clone())),
                    (Some(DataGen::LiteralDirection(d)), _) => Some(EventData::Direction(*d)),
                    (Some(DataGen::CorpusRandom), EventType::Edit) => {
                        if corpus.is_empty() {
                            return Err(InteractionAbort {
                                step_index: i,
                                detail: "empty edit corpus".into(),
                                executed,
                            });
                        }
                        Some(EventData::Text(corpus[rng.gen_range(0..corpus.len())].clone()))
                    }
                    (Some(DataGen::CorpusRandom), EventType::Swipe) => {
                        let dirs = crate::gui::SWIPE_CYCLE;
                        Some(EventData::Direction(dirs[rng.gen_range(0..dirs.len())]))
                    }
                    (Some(DataGen::CorpusRandom), _) => None,
                    (None, _) => None,
                };
                Event { event_type, target: Some(widget.label), data }
            }
        };
        match session.perform(&event) {
            Ok(next) => {
                executed.push(event);
                current = next;
            }
            Err(e) => {
                return Err(InteractionAbort {
                    step_index: i,
                    detail: format!("backend rejected event: {e}"),
                    executed,
                });
            }
        }
    }
    Ok((current, executed))
}

/// Checks one property from the session's current state.
///
/// P false: inapplicable with zero events executed. Script abort:
/// inapplicable carrying the executed prefix. Otherwise the verdict is
/// satisfied iff Q holds on the post-interaction state.
pub fn check_property<B: Backend>(
    property: &Property,
    session: &mut B,
    rng: &mut impl Rng,
    corpus: &[String],
) -> CheckResult {
    let pre = session.current_state().clone();
    if !eval_predicate(&property.precondition, &pre) {
        return CheckResult::Inapplicable {
            reason: InapplicableReason::PreconditionFalse,
            executed: Vec::new(),
        };
    }
    match run_interaction(&property.interaction, session, rng, corpus) {
        Err(abort) => CheckResult::Inapplicable {
            reason: InapplicableReason::InteractionAbort {
                step_index: abort.step_index,
                detail: abort.detail,
            },
            executed: abort.executed,
        },
        Ok((post, executed)) => match failed_atom_path(&property.postcondition, &post) {
            None => CheckResult::Satisfied { executed },
            Some(failed_atom) => CheckResult::Violated {
                pre: Box::new(pre),
                post: Box::new(post),
                failed_atom,
                executed,
            },
        },
    }
}

/// Replays an anchor on a fresh session until the first state satisfying
/// the property's precondition, then checks the property there. True iff
/// the check is satisfied; false if it is violated, inapplicable, or the
/// precondition never fires along the anchor.
pub fn holds_on_trace(
    property: &Property,
    anchor: &ReplayAnchor,
    model: &AppModel,
) -> Result<bool, PropertyError> {
    let mut session = crate::backend::SimulatedSession::launch(model, anchor.seed)
        .map_err(|e| PropertyError::AnchorStale(format!("launch failed: {e}")))?;
    let mut p_reached = eval_predicate(&property.precondition, session.current_state());
    if !p_reached {
        for e in &anchor.events {
            match session.perform(e) {
                Ok(state) => {
                    if eval_predicate(&property.precondition, &state) {
                        p_reached = true;
                        break;
                    }
                }
                Err(err) => {
                    return Err(PropertyError::AnchorStale(format!(
                        "anchor replay diverged: {err}"
                    )));
                }
            }
        }
    }
    if !p_reached {
        return Ok(false);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(anchor.seed ^ 0x5ca1ab1e);
    let corpus = crate::gui::default_edit_corpus();
    let result = check_property(property, &mut session, &mut rng, &corpus);
    Ok(result.is_satisfied())
}

/// Replays a recorded prefix, asserts the precondition holds at its end,
/// and re-checks the property by performing the recorded interaction events
/// verbatim. This re-derives a recorded verdict deterministically.
pub fn replay_check(
    property: &Property,
    model: &AppModel,
    seed: u64,
    prefix: &[Event],
    interaction_events: &[Event],
) -> Result<CheckResult, ReplayDivergence> {
    let mut session = crate::backend::SimulatedSession::launch(model, seed)
        .map_err(|e| ReplayDivergence(format!("launch failed: {e}")))?;
    for e in prefix {
        session
            .perform(e)
            .map_err(|e| ReplayDivergence(format!("prefix event rejected: {e}")))?;
    }
    let pre = session.current_state().clone();
    if !eval_predicate(&property.precondition, &pre) {
        return Err(ReplayDivergence(
            "precondition does not hold at the recorded prefix end".into(),
        ));
    }
    let mut executed = Vec::new();
    for e in interaction_events {
        session
            .perform(e)
            .map_err(|e| ReplayDivergence(format!("interaction event rejected: {e}")))?;
        executed.push(e.clone());
    }
    let post = session.current_state().clone();
    Ok(match failed_atom_path(&property.postcondition, &post) {
        None => CheckResult::Satisfied { executed },
        Some(failed_atom) => CheckResult::Violated {
            pre: Box::new(pre),
            post: Box::new(post),
            failed_atom,
            executed,
        },
    })
}

/// The replayed execution no longer matches the recorded one (different
/// model, stale report, or nondeterminism).
#[derive(Debug, Clone, PartialEq, Error)]
#[error("replay divergence: {0}")]
pub struct ReplayDivergence(pub String);
