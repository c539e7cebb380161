//! Deterministic session over a declarative [`AppModel`].
//!
//! A session is single-threaded; `perform` is the only mutator. Identical
//! (model, seed, event sequence) triples yield identical state sequences.

use super::{
    AppCues, AppModel, Backend, BackendError, DataStore, EffectOp, Nav, Record, ScalarValue,
    ScreenDef,
};
use crate::gui::{Event, EventData, EventType, GuiState, Label, ScreenId, Widget};
use std::collections::BTreeMap;
use std::sync::Arc;

/// A launched simulated-app instance.
#[derive(Debug, Clone)]
pub struct SimulatedSession {
    model: Arc<AppModel>,
    store: DataStore,
    screen_stack: Vec<ScreenId>,
    event_counter: u64,
    seed: u64,
    event_log: Vec<Event>,
    current: GuiState,
    /// Label -> record id for row widgets of the current state.
    row_bindings: BTreeMap<Label, (String, u64)>,
}

impl SimulatedSession {
    /// Launches the app at its declared initial screen. Deterministic under
    /// (model, seed); the seed is recorded for replay anchors, the simulated
    /// app itself consumes no randomness.
    pub fn launch(model: &AppModel, seed: u64) -> Result<SimulatedSession, BackendError> {
        Self::launch_arc(Arc::new(model.clone()), seed)
    }

    pub fn launch_arc(model: Arc<AppModel>, seed: u64) -> Result<SimulatedSession, BackendError> {
        model.validate()?;
        let mut session = SimulatedSession {
            store: model.data_store.clone(),
            screen_stack: vec![model.initial_screen.clone()],
            event_counter: 0,
            seed,
            event_log: Vec::new(),
            current: GuiState {
                screen_id: model.initial_screen.clone(),
                widgets: Vec::new(),
                content_snapshot: serde_json::Value::Null,
                monotonic_step: 0,
            },
            row_bindings: BTreeMap::new(),
            model,
        };
        session.render_current();
        Ok(session)
    }

    pub fn model(&self) -> &AppModel {
        &self.model
    }

    pub fn model_arc(&self) -> Arc<AppModel> {
        Arc::clone(&self.model)
    }

    fn current_screen(&self) -> &ScreenId {
        self.screen_stack.last().expect("screen stack is never empty")
    }

    fn screen_def(&self, id: &str) -> &ScreenDef {
        self.model
            .screens
            .iter()
            .find(|s| s.screen_id == id)
            .expect("validated model declares every stacked screen")
    }

    fn render_current(&mut self) {
        let screen_id = self.current_screen().clone();
        let def = self.screen_def(&screen_id);
        let faults = &self.model.fault_flags;

        struct Pending {
            widget_id: String,
            template_index: usize,
            kind: crate::gui::WidgetKind,
            resource_id: Option<String>,
            text: Option<String>,
            description: Option<String>,
            capabilities: std::collections::BTreeSet<crate::gui::Capability>,
            enabled: bool,
            row: Option<(String, u64)>,
        }

        let mut pending: Vec<Pending> = Vec::new();
        for (idx, tpl) in def.widgets.iter().enumerate() {
            let instances: Vec<(Option<&Record>, String)> = match &tpl.repeat_for {
                Some(binding) => {
                    let records = self
                        .store
                        .collections
                        .get(&binding.collection)
                        .map(Vec::as_slice)
                        .unwrap_or(&[]);
                    records
                        .iter()
                        .filter(|r| {
                            binding
                                .filter
                                .as_ref()
                                .map_or(true, |c| c.eval(&self.store, Some(r), faults))
                        })
                        .map(|r| (Some(r), format!("{}#{}", tpl.template_id, r.id)))
                        .collect()
                }
                None => vec![(None, tpl.template_id.clone())],
            };
            for (record, widget_id) in instances {
                if let Some(cond) = &tpl.visible_when {
                    if !cond.eval(&self.store, record, faults) {
                        continue;
                    }
                }
                pending.push(Pending {
                    widget_id,
                    template_index: idx,
                    kind: tpl.widget_kind,
                    resource_id: tpl.resource_id.clone(),
                    text: tpl.text.as_ref().map(|b| b.render(&self.store, record)),
                    description: tpl.description.clone(),
                    capabilities: tpl.capabilities.clone(),
                    enabled: tpl.enabled,
                    row: record.map(|r| {
                        (tpl.repeat_for.as_ref().expect("record implies binding").collection.clone(), r.id)
                    }),
                });
            }
        }

        // Interactive widgets first (stable within each group), labels 1..=n.
        pending.sort_by_key(|p| (p.capabilities.is_empty(), p.template_index));

        let mut widgets = Vec::with_capacity(pending.len());
        let mut row_bindings = BTreeMap::new();
        let mut snapshot_entries: Vec<String> = Vec::new();
        for (i, p) in pending.into_iter().enumerate() {
            let label = (i + 1) as Label;
            if p.capabilities.is_empty() {
                let shown = p.text.clone().filter(|t| !t.is_empty());
                let fallback = p.description.clone().unwrap_or_default();
                snapshot_entries.push(format!(
                    "{:?}:{}",
                    p.kind,
                    shown.unwrap_or(fallback)
                ));
            }
            if let Some(row) = p.row {
                row_bindings.insert(label, row);
            }
            widgets.push(Widget {
                widget_id: p.widget_id,
                widget_kind: p.kind,
                resource_id: p.resource_id,
                text: p.text,
                description: p.description,
                label,
                capabilities: p.capabilities,
                enabled: p.enabled,
            });
        }
        snapshot_entries.sort();

        self.row_bindings = row_bindings;
        self.current = GuiState {
            screen_id,
            widgets,
            content_snapshot: serde_json::json!({ "static_content": snapshot_entries }),
            monotonic_step: self.event_counter,
        };
    }

    fn apply_effects(&mut self, effects: &[EffectOp], event: &Event) {
        for effect in effects {
            self.apply_effect(effect, event);
        }
    }

    fn apply_effect(&mut self, effect: &EffectOp, event: &Event) {
        match effect {
            EffectOp::SetScalarBool { key, value } => {
                self.store.scalars.insert(key.clone(), ScalarValue::Bool(*value));
            }
            EffectOp::ToggleScalarBool { key } => {
                let next = !self.store.scalar_bool(key);
                self.store.scalars.insert(key.clone(), ScalarValue::Bool(next));
            }
            EffectOp::SetScalarText { key, value } => {
                self.store.scalars.insert(key.clone(), ScalarValue::Text(value.clone()));
            }
            EffectOp::SetScalarTextFromEvent { key } => {
                if let Some(EventData::Text(t)) = &event.data {
                    self.store.scalars.insert(key.clone(), ScalarValue::Text(t.clone()));
                }
            }
            EffectOp::CreateRecord { collection, defaults, set_cursor } => {
                let id = self.store.next_record_id;
                self.store.next_record_id += 1;
                self.store
                    .collections
                    .entry(collection.clone())
                    .or_default()
                    .push(Record { id, fields: defaults.clone() });
                if *set_cursor {
                    self.store.cursors.insert(collection.clone(), Some(id));
                }
            }
            EffectOp::DeleteCursorRecord { collection } => {
                if let Some(Some(id)) = self.store.cursors.get(collection).copied() {
                    if let Some(records) = self.store.collections.get_mut(collection) {
                        records.retain(|r| r.id != id);
                    }
                    self.store.cursors.insert(collection.clone(), None);
                }
            }
            EffectOp::SetCursorFieldBool { collection, field, value } => {
                self.set_cursor_field(collection, field, ScalarValue::Bool(*value));
            }
            EffectOp::SetCursorFieldText { collection, field, value } => {
                self.set_cursor_field(collection, field, ScalarValue::Text(value.clone()));
            }
            EffectOp::SetCursorFieldFromEvent { collection, field } => {
                if let Some(EventData::Text(t)) = &event.data {
                    self.set_cursor_field(collection, field, ScalarValue::Text(t.clone()));
                }
            }
            EffectOp::SetCursorToTarget { collection } => {
                if let Some(label) = event.target {
                    if let Some((coll, id)) = self.row_bindings.get(&label) {
                        if coll == collection {
                            self.store.cursors.insert(collection.clone(), Some(*id));
                        }
                    }
                }
            }
            EffectOp::If { when, then, otherwise } => {
                let branch = if when.eval(&self.store, None, &self.model.fault_flags) {
                    then
                } else {
                    otherwise
                };
                // Clone ends the borrow of `effect` before mutating self.
                let branch = branch.clone();
                self.apply_effects(&branch, event);
            }
        }
    }

    fn set_cursor_field(&mut self, collection: &str, field: &str, value: ScalarValue) {
        if let Some(Some(id)) = self.store.cursors.get(collection).copied() {
            if let Some(records) = self.store.collections.get_mut(collection) {
                if let Some(record) = records.iter_mut().find(|r| r.id == id) {
                    record.fields.insert(field.to_string(), value);
                }
            }
        }
    }

    fn apply_nav(&mut self, nav: &Nav) {
        match nav {
            Nav::Push(target) => self.screen_stack.push(target.clone()),
            Nav::Replace(target) => {
                if self.screen_stack.len() > 1 {
                    self.screen_stack.pop();
                }
                self.screen_stack.push(target.clone());
            }
            Nav::Pop => {
                if self.screen_stack.len() > 1 {
                    self.screen_stack.pop();
                }
            }
            Nav::Stay => {}
        }
    }
}

impl Backend for SimulatedSession {
    fn current_state(&self) -> &GuiState {
        &self.current
    }

    fn perform(&mut self, e: &Event) -> Result<GuiState, BackendError> {
        let target_resource: Option<String> = match e.target {
            Some(label) => {
                let widget = self.current.widget_by_label(label).ok_or_else(|| {
                    BackendError::RejectedEvent(format!(
                        "label {label} not present on screen '{}'",
                        self.current.screen_id
                    ))
                })?;
                widget.resource_id.clone()
            }
            None => None,
        };

        let rule_index = self.model.transition_rules.iter().position(|r| {
            r.screen_id == self.current.screen_id
                && r.event_type == e.event_type
                && match (&r.target, &target_resource) {
                    (Some(t), Some(rid)) => t == rid,
                    (None, None) => true,
                    _ => false,
                }
                && r.guard_when
                    .as_ref()
                    .map_or(true, |c| c.eval(&self.store, None, &self.model.fault_flags))
        });

        self.event_counter += 1;
        self.event_log.push(e.clone());

        match rule_index {
            Some(idx) => {
                let rule = self.model.transition_rules[idx].clone();
                self.apply_effects(&rule.effects, e);
                self.apply_nav(&rule.nav);
            }
            None if e.event_type == EventType::Back => {
                // Back pops the screen stack; the root screen is pinned.
                self.apply_nav(&Nav::Pop);
            }
            None => {
                // Unmatched events are no-ops: same view, step advanced.
            }
        }

        self.render_current();
        Ok(self.current.clone())
    }

    fn reset(&mut self) {
        self.store = self.model.data_store.clone();
        self.screen_stack = vec![self.model.initial_screen.clone()];
        self.event_counter = 0;
        self.event_log.clear();
        self.render_current();
    }

    fn static_text_whitelist(&self) -> &std::collections::BTreeSet<String> {
        &self.model.static_text_whitelist
    }

    fn app_cues(&self) -> AppCues {
        AppCues { app_name: self.model.app_name.clone(), screen_ids: self.model.screen_ids() }
    }

    fn event_log(&self) -> &[Event] {
        &self.event_log
    }

    fn seed(&self) -> u64 {
        self.seed
    }
}

/// Reproducible pointer to a concrete execution: the launch seed plus the
/// exact event list dispatched since launch.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ReplayAnchor {
    pub seed: u64,
    pub events: Vec<Event>,
}

impl ReplayAnchor {
    /// Replays the anchor on a fresh session over `model`. Fails with the
    /// underlying rejected-event error if any event no longer binds.
    pub fn replay(&self, model: &AppModel) -> Result<SimulatedSession, BackendError> {
        replay_events(model, self.seed, &self.events)
    }
}

/// Replays a concrete event list on a fresh session. Fails with the
/// underlying rejected-event error if any event no longer binds.
pub fn replay_events(
    model: &AppModel,
    seed: u64,
    events: &[Event],
) -> Result<SimulatedSession, BackendError> {
    let mut session = SimulatedSession::launch(model, seed)?;
    for e in events {
        session.perform(e)?;
    }
    Ok(session)
}
