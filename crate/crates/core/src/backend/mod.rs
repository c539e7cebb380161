//! Backend contract for launching an app, observing GUI states, and
//! performing events, plus a deterministic simulated-app backend driven by a
//! declarative model with fault injection.
//!
//! Simulated apps are declared as data (serializable [`AppModel`]) rather
//! than code, so new test apps can be added without recompiling. The adapter
//! contract for future real-device backends is the [`Backend`] trait.

mod notes;
mod session;

pub use notes::{build_notes_app, notes_screen_ids, NotesFaults};
pub use session::{replay_events, ReplayAnchor, SimulatedSession};

use crate::gui::{Capability, EventType, ScreenId, WidgetKind};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BackendError {
    /// The app model failed validation (configuration error).
    #[error("invalid app model: {0}")]
    InvalidModel(String),
    /// The event referenced a widget label absent from the current state.
    /// Such events are never silently dispatched.
    #[error("rejected event: {0}")]
    RejectedEvent(String),
}

/// Scalar values held in the app data store.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScalarValue {
    Bool(bool),
    Int(i64),
    Text(String),
}

impl ScalarValue {
    pub fn as_bool(&self) -> bool {
        matches!(self, ScalarValue::Bool(true))
    }

    pub fn as_text(&self) -> &str {
        match self {
            ScalarValue::Text(t) => t,
            _ => "",
        }
    }
}

/// One record in a collection (e.g. a note). Records get stable ids assigned
/// at creation time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub id: u64,
    pub fields: BTreeMap<String, ScalarValue>,
}

impl Record {
    pub fn bool_field(&self, field: &str) -> bool {
        self.fields.get(field).map(ScalarValue::as_bool).unwrap_or(false)
    }

    pub fn text_field(&self, field: &str) -> &str {
        self.fields.get(field).map(ScalarValue::as_text).unwrap_or("")
    }
}

/// Mutable app data: named scalars, record collections, and per-collection
/// cursors (the record currently "open" in the UI).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataStore {
    #[serde(default)]
    pub scalars: BTreeMap<String, ScalarValue>,
    #[serde(default)]
    pub collections: BTreeMap<String, Vec<Record>>,
    #[serde(default)]
    pub cursors: BTreeMap<String, Option<u64>>,
    #[serde(default)]
    pub next_record_id: u64,
}

impl DataStore {
    pub fn scalar_bool(&self, key: &str) -> bool {
        self.scalars.get(key).map(ScalarValue::as_bool).unwrap_or(false)
    }

    pub fn scalar_text(&self, key: &str) -> &str {
        self.scalars.get(key).map(ScalarValue::as_text).unwrap_or("")
    }

    pub fn cursor_record(&self, collection: &str) -> Option<&Record> {
        let id = (*self.cursors.get(collection)?)?;
        self.collections.get(collection)?.iter().find(|r| r.id == id)
    }
}

/// Condition language used by widget visibility, rule guards, and effects.
/// Record-context atoms are only meaningful inside `repeat_for` filters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Always,
    /// True iff the named fault flag is set on the model.
    Fault(String),
    ScalarBool(String),
    ScalarTextEquals { key: String, value: String },
    CursorBool { collection: String, field: String },
    CursorTextEquals { collection: String, field: String, value: String },
    RecordBool { field: String },
    /// True iff the record's text field contains the scalar's current text.
    RecordTextContainsScalar { field: String, query_key: String },
    Not(Box<Condition>),
    All(Vec<Condition>),
    Any(Vec<Condition>),
}

impl Condition {
    pub fn eval(
        &self,
        store: &DataStore,
        record: Option<&Record>,
        faults: &BTreeMap<String, bool>,
    ) -> bool {
        match self {
            Condition::Always => true,
            Condition::Fault(name) => faults.get(name).copied().unwrap_or(false),
            Condition::ScalarBool(key) => store.scalar_bool(key),
            Condition::ScalarTextEquals { key, value } => store.scalar_text(key) == value,
            Condition::CursorBool { collection, field } => {
                store.cursor_record(collection).map(|r| r.bool_field(field)).unwrap_or(false)
            }
            Condition::CursorTextEquals { collection, field, value } => store
                .cursor_record(collection)
                .map(|r| r.text_field(field) == value)
                .unwrap_or(false),
            Condition::RecordBool { field } => record.map(|r| r.bool_field(field)).unwrap_or(false),
            Condition::RecordTextContainsScalar { field, query_key } => record
                .map(|r| r.text_field(field).contains(store.scalar_text(query_key)))
                .unwrap_or(false),
            Condition::Not(inner) => !inner.eval(store, record, faults),
            Condition::All(items) => items.iter().all(|c| c.eval(store, record, faults)),
            Condition::Any(items) => items.iter().any(|c| c.eval(store, record, faults)),
        }
    }

    fn collect_fault_names(&self, out: &mut BTreeSet<String>) {
        match self {
            Condition::Fault(name) => {
                out.insert(name.clone());
            }
            Condition::Not(inner) => inner.collect_fault_names(out),
            Condition::All(items) | Condition::Any(items) => {
                for c in items {
                    c.collect_fault_names(out);
                }
            }
            _ => {}
        }
    }
}

/// How a widget template derives its visible text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextBinding {
    Literal(String),
    FromScalar(String),
    FromScalarBool { key: String, when_true: String, when_false: String },
    FromRecordField(String),
    FromCursorField { collection: String, field: String },
}

impl TextBinding {
    pub fn render(&self, store: &DataStore, record: Option<&Record>) -> String {
        match self {
            TextBinding::Literal(t) => t.clone(),
            TextBinding::FromScalar(key) => store.scalar_text(key).to_string(),
            TextBinding::FromScalarBool { key, when_true, when_false } => {
                if store.scalar_bool(key) { when_true.clone() } else { when_false.clone() }
            }
            TextBinding::FromRecordField(field) => {
                record.map(|r| r.text_field(field).to_string()).unwrap_or_default()
            }
            TextBinding::FromCursorField { collection, field } => store
                .cursor_record(collection)
                .map(|r| r.text_field(field).to_string())
                .unwrap_or_default(),
        }
    }

    /// Static strings this binding can render (feeds the whitelist).
    fn static_texts(&self) -> Vec<String> {
        match self {
            TextBinding::Literal(t) => vec![t.clone()],
            TextBinding::FromScalarBool { when_true, when_false, .. } => {
                vec![when_true.clone(), when_false.clone()]
            }
            _ => Vec::new(),
        }
    }
}

/// Expands a template once per record of a collection (list rows).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordBinding {
    pub collection: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub filter: Option<Condition>,
}

/// Declarative widget template; rendered into zero or more [`crate::gui::Widget`]s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidgetTemplate {
    pub template_id: String,
    pub widget_kind: WidgetKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub resource_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub text: Option<TextBinding>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub description: Option<String>,
    #[serde(default)]
    pub capabilities: BTreeSet<Capability>,
    #[serde(default = "default_true")]
    pub enabled: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub visible_when: Option<Condition>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub repeat_for: Option<RecordBinding>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenDef {
    pub screen_id: ScreenId,
    pub widgets: Vec<WidgetTemplate>,
}

/// Screen-stack navigation effect of a transition rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nav {
    Push(ScreenId),
    /// Pop the current screen, then push (menus that dismiss on choice).
    Replace(ScreenId),
    Pop,
    Stay,
}

/// Data mutation performed by a transition rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectOp {
    SetScalarBool { key: String, value: bool },
    ToggleScalarBool { key: String },
    SetScalarText { key: String, value: String },
    /// Copy the event's text payload into a scalar (edit events).
    SetScalarTextFromEvent { key: String },
    CreateRecord {
        collection: String,
        #[serde(default)]
        defaults: BTreeMap<String, ScalarValue>,
        #[serde(default)]
        set_cursor: bool,
    },
    DeleteCursorRecord { collection: String },
    SetCursorFieldBool { collection: String, field: String, value: bool },
    SetCursorFieldText { collection: String, field: String, value: String },
    SetCursorFieldFromEvent { collection: String, field: String },
    /// Point the collection cursor at the record bound to the clicked row.
    SetCursorToTarget { collection: String },
    If {
        when: Condition,
        then: Vec<EffectOp>,
        #[serde(default)]
        otherwise: Vec<EffectOp>,
    },
}

impl EffectOp {
    fn collect_fault_names(&self, out: &mut BTreeSet<String>) {
        if let EffectOp::If { when, then, otherwise } = self {
            when.collect_fault_names(out);
            for e in then.iter().chain(otherwise) {
                e.collect_fault_names(out);
            }
        }
    }

    fn collect_collections(&self, out: &mut BTreeSet<String>) {
        match self {
            EffectOp::CreateRecord { collection, .. }
            | EffectOp::DeleteCursorRecord { collection }
            | EffectOp::SetCursorFieldBool { collection, .. }
            | EffectOp::SetCursorFieldText { collection, .. }
            | EffectOp::SetCursorFieldFromEvent { collection, .. }
            | EffectOp::SetCursorToTarget { collection } => {
                out.insert(collection.clone());
            }
            EffectOp::If { then, otherwise, .. } => {
                for e in then.iter().chain(otherwise) {
                    e.collect_collections(out);
                }
            }
            _ => {}
        }
    }
}

/// Maps (screen, target widget resource id, event type) to a data mutation
/// plus a navigation effect. `target: None` matches `back` events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionRule {
    pub screen_id: ScreenId,
    pub event_type: EventType,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub target: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub guard_when: Option<Condition>,
    #[serde(default)]
    pub effects: Vec<EffectOp>,
    pub nav: Nav,
}

/// A complete declarative app: screens, initial data, transition rules,
/// static-text whitelist, and named fault flags toggling injected bugs.
///
/// Serializes to the documented JSON app-model format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppModel {
    pub app_name: String,
    pub initial_screen: ScreenId,
    pub screens: Vec<ScreenDef>,
    #[serde(default)]
    pub data_store: DataStore,
    #[serde(default)]
    pub transition_rules: Vec<TransitionRule>,
    #[serde(default)]
    pub static_text_whitelist: BTreeSet<String>,
    #[serde(default)]
    pub fault_flags: BTreeMap<String, bool>,
}

impl AppModel {
    /// Checks structural well-formedness: declared screens are unique, every
    /// rule and navigation target references a declared screen, repeated and
    /// cursor-addressed collections exist, and every fault referenced by a
    /// condition is declared in `fault_flags`.
    pub fn validate(&self) -> Result<(), BackendError> {
        let mut screen_ids = BTreeSet::new();
        for s in &self.screens {
            if !screen_ids.insert(s.screen_id.clone()) {
                return Err(BackendError::InvalidModel(format!(
                    "duplicate screen '{}'",
                    s.screen_id
                )));
            }
        }
        if !screen_ids.contains(&self.initial_screen) {
            return Err(BackendError::InvalidModel(format!(
                "initial screen '{}' is not declared",
                self.initial_screen
            )));
        }

        let mut referenced_faults = BTreeSet::new();
        let mut referenced_collections = BTreeSet::new();
        for screen in &self.screens {
            for w in &screen.widgets {
                if let Some(c) = &w.visible_when {
                    c.collect_fault_names(&mut referenced_faults);
                }
                if let Some(r) = &w.repeat_for {
                    referenced_collections.insert(r.collection.clone());
                    if let Some(c) = &r.filter {
                        c.collect_fault_names(&mut referenced_faults);
                    }
                }
            }
        }
        for rule in &self.transition_rules {
            if !screen_ids.contains(&rule.screen_id) {
                return Err(BackendError::InvalidModel(format!(
                    "transition rule references undeclared screen '{}'",
                    rule.screen_id
                )));
            }
            match &rule.nav {
                Nav::Push(target) | Nav::Replace(target) if !screen_ids.contains(target) => {
                    return Err(BackendError::InvalidModel(format!(
                        "transition to undeclared screen '{target}'"
                    )));
                }
                _ => {}
            }
            if let Some(c) = &rule.guard_when {
                c.collect_fault_names(&mut referenced_faults);
            }
            for e in &rule.effects {
                e.collect_fault_names(&mut referenced_faults);
                e.collect_collections(&mut referenced_collections);
            }
        }
        for fault in &referenced_faults {
            if !self.fault_flags.contains_key(fault) {
                return Err(BackendError::InvalidModel(format!(
                    "condition references undeclared fault '{fault}'"
                )));
            }
        }
        for coll in &referenced_collections {
            if !self.data_store.collections.contains_key(coll) {
                return Err(BackendError::InvalidModel(format!(
                    "effect or binding references undeclared collection '{coll}'"
                )));
            }
        }
        Ok(())
    }

    pub fn set_fault(&mut self, name: &str, value: bool) -> Result<(), BackendError> {
        match self.fault_flags.get_mut(name) {
            Some(flag) => {
                *flag = value;
                Ok(())
            }
            None => Err(BackendError::InvalidModel(format!("unknown fault flag '{name}'"))),
        }
    }

    pub fn screen_ids(&self) -> Vec<ScreenId> {
        self.screens.iter().map(|s| s.screen_id.clone()).collect()
    }

    /// All static strings the templates can render. Used to build and to
    /// cross-check the whitelist.
    pub fn rendered_static_texts(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for screen in &self.screens {
            for w in &screen.widgets {
                if let Some(binding) = &w.text {
                    out.extend(binding.static_texts());
                }
            }
        }
        out
    }

    pub fn from_json(json: &str) -> Result<AppModel, BackendError> {
        let model: AppModel = serde_json::from_str(json)
            .map_err(|e| BackendError::InvalidModel(format!("parse error: {e}")))?;
        model.validate()?;
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("app model serializes")
    }
}

/// App-level semantic cues exposed to the reasoning oracle: the app name and
/// the declared screen list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppCues {
    pub app_name: String,
    pub screen_ids: Vec<ScreenId>,
}

/// Session contract shared by the simulated backend and future device
/// adapters: observe the current state, perform events, reset, and expose
/// the app's static-text whitelist and semantic cues.
pub trait Backend {
    fn current_state(&self) -> &crate::gui::GuiState;

    /// Dispatches one event. Events whose target label is absent are
    /// rejected with an error; events matching no transition rule are no-ops.
    fn perform(&mut self, e: &crate::gui::Event) -> Result<crate::gui::GuiState, BackendError>;

    /// Restores the initial data store and screen and clears the event log.
    fn reset(&mut self);

    fn static_text_whitelist(&self) -> &BTreeSet<String>;

    fn app_cues(&self) -> AppCues;

    /// Concrete events dispatched since launch (or the last reset), in order.
    fn event_log(&self) -> &[crate::gui::Event];

    fn seed(&self) -> u64;

    /// Optional opaque screenshot blob; pass-through for multimodal oracles.
    fn screenshot(&self) -> Option<Vec<u8>> {
        None
    }

    /// Hook for adapters whose UI settles asynchronously after an event.
    /// The simulated backend is synchronous, so this is a no-op.
    fn settle(&mut self) {}
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_rejects_undeclared_screen_transition() {
        let mut model = build_notes_app(NotesFaults::default());
        model.transition_rules.push(TransitionRule {
            screen_id: "notes_list".into(),
            event_type: EventType::Click,
            target: Some("fab_add".into()),
            guard_when: None,
            effects: vec![],
            nav: Nav::Push("no_such_screen".into()),
        });
        assert!(matches!(model.validate(), Err(BackendError::InvalidModel(_))));
    }

    #[test]
    fn validate_rejects_undeclared_fault() {
        let mut model = build_notes_app(NotesFaults::default());
        model.transition_rules.push(TransitionRule {
            screen_id: "notes_list".into(),
            event_type: EventType::Click,
            target: Some("fab_add".into()),
            guard_when: Some(Condition::Fault("mystery".into())),
            effects: vec![],
            nav: Nav::Stay,
        });
        assert!(matches!(model.validate(), Err(BackendError::InvalidModel(_))));
    }

    #[test]
    fn app_model_json_round_trip() {
        let model = build_notes_app(NotesFaults { audio_blocks_photo: true, ..Default::default() });
        let json = model.to_json();
        let back = AppModel::from_json(&json).expect("round trip");
        assert_eq!(model, back);
    }

    #[test]
    fn whitelist_covers_rendered_static_texts() {
        let model = build_notes_app(NotesFaults::default());
        for text in model.rendered_static_texts() {
            assert!(
                model.static_text_whitelist.contains(&text),
                "static text {text:?} missing from whitelist"
            );
        }
    }

    #[test]
    fn set_fault_rejects_unknown_names() {
        let mut model = build_notes_app(NotesFaults::default());
        assert!(model.set_fault("audio_blocks_photo", true).is_ok());
        assert!(model.set_fault("nope", true).is_err());
    }
}
