//! Core domain types for GUI states, widgets, events, and traces, plus the
//! signature/context abstraction used to deduplicate visited states.
//!
//! All types here are immutable values; the operations are pure functions.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;

/// Screen identifier supplied by the backend (the simulated apps declare
/// theirs explicitly; a device adapter would report the activity name).
pub type ScreenId = String;

/// Per-state numeric widget annotation, 1..=n within a single [`GuiState`].
pub type Label = u32;

/// UI element kind of a leaf widget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WidgetKind {
    Button,
    TextField,
    ListItem,
    MenuItem,
    Checkbox,
    Image,
    Label,
}

/// Interaction capability of a widget. The declaration order is the
/// deterministic enumeration order used by [`enabled_events`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Capability {
    Clickable,
    LongClickable,
    Editable,
    Swipeable,
}

/// Event types form a closed 5-element set. Declaration order is the
/// deterministic ordering used when enumerating events per widget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventType {
    Click,
    LongClick,
    Edit,
    Swipe,
    Back,
}

impl EventType {
    /// Capability a target widget must have for this event type.
    /// `Back` targets no widget and needs none.
    pub fn required_capability(self) -> Option<Capability> {
        match self {
            EventType::Click => Some(Capability::Clickable),
            EventType::LongClick => Some(Capability::LongClickable),
            EventType::Edit => Some(Capability::Editable),
            EventType::Swipe => Some(Capability::Swipeable),
            EventType::Back => None,
        }
    }
}

impl fmt::Display for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EventType::Click => "click",
            EventType::LongClick => "long-click",
            EventType::Edit => "edit",
            EventType::Swipe => "swipe",
            EventType::Back => "back",
        };
        f.write_str(s)
    }
}

/// Swipe direction payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SwipeDirection {
    Up,
    Down,
    Left,
    Right,
}

/// Deterministic cycle used when deriving swipe directions for event enumeration.
pub const SWIPE_CYCLE: [SwipeDirection; 4] = [
    SwipeDirection::Up,
    SwipeDirection::Down,
    SwipeDirection::Left,
    SwipeDirection::Right,
];

/// Optional event payload: text for `edit`, a direction for `swipe`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventData {
    Text(String),
    Direction(SwipeDirection),
}

/// One user interaction: type, optional target widget label, optional data.
///
/// `back` carries no target; `edit` carries `EventData::Text`; `swipe`
/// carries `EventData::Direction`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub event_type: EventType,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub target: Option<Label>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub data: Option<EventData>,
}

impl Event {
    pub fn click(target: Label) -> Self {
        Event { event_type: EventType::Click, target: Some(target), data: None }
    }

    pub fn long_click(target: Label) -> Self {
        Event { event_type: EventType::LongClick, target: Some(target), data: None }
    }

    pub fn edit(target: Label, text: impl Into<String>) -> Self {
        Event {
            event_type: EventType::Edit,
            target: Some(target),
            data: Some(EventData::Text(text.into())),
        }
    }

    pub fn swipe(target: Label, direction: SwipeDirection) -> Self {
        Event {
            event_type: EventType::Swipe,
            target: Some(target),
            data: Some(EventData::Direction(direction)),
        }
    }

    pub fn back() -> Self {
        Event { event_type: EventType::Back, target: None, data: None }
    }

    /// Compact single-line rendering for logs, summaries, and oracle payloads.
    pub fn render(&self) -> String {
        let mut s = self.event_type.to_string();
        if let Some(t) = self.target {
            s.push_str(&format!("({t}"));
            match &self.data {
                Some(EventData::Text(text)) => s.push_str(&format!(", {text:?}")),
                Some(EventData::Direction(d)) => s.push_str(&format!(", {d:?}")),
                None => {}
            }
            s.push(')');
        }
        s
    }
}

/// A leaf widget in one GUI state snapshot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Widget {
    /// Backend-scoped opaque identifier, stable within a single snapshot.
    pub widget_id: String,
    pub widget_kind: WidgetKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub resource_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub text: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub description: Option<String>,
    /// Per-state numeric annotation used to ground oracle references.
    pub label: Label,
    pub capabilities: BTreeSet<Capability>,
    pub enabled: bool,
}

impl Widget {
    /// A widget with at least one capability participates in the
    /// interactive-widget set; pure labels and images do not.
    pub fn is_interactive(&self) -> bool {
        !self.capabilities.is_empty()
    }
}

/// Stable identity of a widget across visits: kind, resource id,
/// whitelist-filtered text, and accessibility description.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WidgetSignature {
    pub widget_kind: WidgetKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub resource_id: Option<String>,
    /// Widget text if it appears in the app's static-text whitelist, else empty.
    pub filtered_text: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub description: Option<String>,
}

impl WidgetSignature {
    /// Compact rendering used in oracle payloads and grounding reports.
    pub fn render(&self) -> String {
        let mut parts: Vec<String> = vec![format!("{:?}", self.widget_kind)];
        if let Some(rid) = &self.resource_id {
            parts.push(format!("id={rid}"));
        }
        if !self.filtered_text.is_empty() {
            parts.push(format!("text={:?}", self.filtered_text));
        }
        if let Some(d) = &self.description {
            parts.push(format!("desc={d:?}"));
        }
        parts.join(" ")
    }
}

/// Snapshot of the interface: screen identifier, leaf widgets (interactive
/// first, labels 1..=n contiguous), an opaque dump of visible non-interactive
/// content, and the count of events executed so far in the session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuiState {
    pub screen_id: ScreenId,
    pub widgets: Vec<Widget>,
    pub content_snapshot: serde_json::Value,
    pub monotonic_step: u64,
}

impl GuiState {
    pub fn interactive_widgets(&self) -> impl Iterator<Item = &Widget> {
        self.widgets.iter().filter(|w| w.is_interactive())
    }

    pub fn widget_by_label(&self, label: Label) -> Option<&Widget> {
        self.widgets.iter().find(|w| w.label == label)
    }

    /// View equality ignoring the session step counter. Used when deciding
    /// whether an event left the interface unchanged.
    pub fn same_view(&self, other: &GuiState) -> bool {
        self.screen_id == other.screen_id
            && self.widgets == other.widgets
            && self.content_snapshot == other.content_snapshot
    }

    /// Compact textual rendering (screen + labeled widget lines) used in
    /// oracle payloads and mechanical summaries.
    pub fn render_listing(&self) -> String {
        let mut out = format!("screen: {}\n", self.screen_id);
        for w in &self.widgets {
            let caps: Vec<String> = w.capabilities.iter().map(|c| format!("{c:?}")).collect();
            out.push_str(&format!(
                "[{}] {:?} id={} text={:?} desc={:?} caps=[{}]{}\n",
                w.label,
                w.widget_kind,
                w.resource_id.as_deref().unwrap_or("-"),
                w.text.as_deref().unwrap_or(""),
                w.description.as_deref().unwrap_or(""),
                caps.join(","),
                if w.enabled { "" } else { " disabled" },
            ));
        }
        out
    }
}

/// One executed state transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub pre: GuiState,
    pub event: Event,
    pub post: GuiState,
}

/// An execution trace: initial state plus the ordered transitions produced
/// by an event sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub initial: GuiState,
    pub transitions: Vec<Transition>,
}

impl Trace {
    pub fn new(initial: GuiState) -> Self {
        Trace { initial, transitions: Vec::new() }
    }

    pub fn final_state(&self) -> &GuiState {
        self.transitions.last().map(|t| &t.post).unwrap_or(&self.initial)
    }

    pub fn events(&self) -> impl Iterator<Item = &Event> {
        self.transitions.iter().map(|t| &t.event)
    }

    /// Checks the chaining invariant: post of transition i is pre of i+1.
    pub fn is_well_formed(&self) -> bool {
        let mut prev = &self.initial;
        for t in &self.transitions {
            if t.pre != *prev {
                return false;
            }
            prev = &t.post;
        }
        true
    }
}

/// Unit of state deduplication: the screen identifier paired with the set of
/// interactive leaf-widget signatures.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct UiContext {
    pub screen_id: ScreenId,
    pub signature_set: BTreeSet<WidgetSignature>,
}

/// Builds a widget's signature, filtering its text against the app's
/// static-text whitelist so user-entered content never distinguishes states.
pub fn signature(w: &Widget, whitelist: &BTreeSet<String>) -> WidgetSignature {
    let filtered_text = match &w.text {
        Some(t) if whitelist.contains(t) => t.clone(),
        _ => String::new(),
    };
    WidgetSignature {
        widget_kind: w.widget_kind,
        resource_id: w.resource_id.clone(),
        filtered_text,
        description: w.description.clone(),
    }
}

/// Projects a state onto its deduplication context: screen id plus the
/// signatures of its interactive leaf widgets.
pub fn ui_context(s: &GuiState, whitelist: &BTreeSet<String>) -> UiContext {
    UiContext {
        screen_id: s.screen_id.clone(),
        signature_set: s.interactive_widgets().map(|w| signature(w, whitelist)).collect(),
    }
}

/// True iff `c` introduces widget evidence not covered by any already-seen
/// context on the same screen. A context whose signature set is a subset of
/// a seen one is treated as seen (collapsed menus do not re-trigger
/// inference).
pub fn has_unseen_evidence(c: &UiContext, seen: &[UiContext]) -> bool {
    !seen
        .iter()
        .any(|u| u.screen_id == c.screen_id && c.signature_set.is_subset(&u.signature_set))
}

/// Default input corpus for `edit` events: 8 fixed strings including the
/// empty string and a 256-character string.
pub fn default_edit_corpus() -> Vec<String> {
    vec![
        String::new(),
        "a".to_string(),
        "Buy milk".to_string(),
        "hello world".to_string(),
        "42".to_string(),
        "Zürich ünïcode".to_string(),
        "  spaced  out  ".to_string(),
        "x".repeat(256),
    ]
}

/// Enumerates the events available in a state: one event per enabled
/// (widget, capability) pair, ordered by (label, event type), plus a single
/// trailing `back`. Edit text and swipe direction are drawn deterministically
/// from the corpus by `(monotonic_step + label)`.
pub fn enabled_events(s: &GuiState, corpus: &[String]) -> Vec<Event> {
    let mut events = Vec::new();
    for w in &s.widgets {
        if !w.enabled || !w.is_interactive() {
            continue;
        }
        for cap in &w.capabilities {
            let idx = (s.monotonic_step as usize).wrapping_add(w.label as usize);
            match cap {
                Capability::Clickable => events.push(Event::click(w.label)),
                Capability::LongClickable => events.push(Event::long_click(w.label)),
                Capability::Editable => {
                    if !corpus.is_empty() {
                        events.push(Event::edit(w.label, corpus[idx % corpus.len()].clone()));
                    }
                }
                Capability::Swipeable => {
                    events.push(Event::swipe(w.label, SWIPE_CYCLE[idx % SWIPE_CYCLE.len()]));
                }
            }
        }
    }
    events.sort_by_key(|e| (e.target.unwrap_or(0), e.event_type));
    events.push(Event::back());
    events
}
