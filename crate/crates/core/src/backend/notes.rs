//! Built-in note-taking reference app with injectable faults.
//!
//! The app models a small but realistic note manager: a notes list with a
//! navigation drawer and search, a note editor with photo/audio attachments,
//! an archive list, a camera and audio-recorder flow, and a settings screen
//! with a "reduced attachment view" toggle that swaps the attachment
//! thumbnail for a compact icon.
//!
//! Two injectable faults:
//! - `audio_blocks_photo`: opening the audio recorder for a note prevents a
//!   later camera shot from attaching its photo (the photo silently vanishes
//!   while the camera still reports the capture).
//! - `archive_loses_note`: archiving deletes the note instead of moving it
//!   to the archive list.

use super::{
    AppModel, Condition, DataStore, EffectOp, Nav, RecordBinding, ScreenDef, TextBinding,
    TransitionRule, WidgetTemplate,
};
use crate::gui::{Capability, EventType, WidgetKind};
use std::collections::{BTreeMap, BTreeSet};

/// Named fault toggles for the notes reference app.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NotesFaults {
    pub audio_blocks_photo: bool,
    pub archive_loses_note: bool,
}

/// Screen ids declared by the notes reference app, in declaration order.
pub fn notes_screen_ids() -> Vec<&'static str> {
    vec![
        "notes_list",
        "archive_list",
        "note_edit",
        "attachment_menu",
        "camera",
        "audio_recorder",
        "settings",
    ]
}

fn widget(
    template_id: &str,
    kind: WidgetKind,
    resource_id: &str,
    caps: &[Capability],
) -> WidgetTemplate {
    WidgetTemplate {
        template_id: template_id.to_string(),
        widget_kind: kind,
        resource_id: Some(resource_id.to_string()),
        text: None,
        description: None,
        capabilities: caps.iter().copied().collect(),
        enabled: true,
        visible_when: None,
        repeat_for: None,
    }
}

fn lit(w: WidgetTemplate, text: &str) -> WidgetTemplate {
    WidgetTemplate { text: Some(TextBinding::Literal(text.to_string())), ..w }
}

fn desc(w: WidgetTemplate, d: &str) -> WidgetTemplate {
    WidgetTemplate { description: Some(d.to_string()), ..w }
}

fn visible_when(w: WidgetTemplate, c: Condition) -> WidgetTemplate {
    WidgetTemplate { visible_when: Some(c), ..w }
}

fn origin_is(value: &str) -> Condition {
    Condition::ScalarTextEquals { key: "origin".into(), value: value.into() }
}

fn cursor_bool(field: &str) -> Condition {
    Condition::CursorBool { collection: "notes".into(), field: field.into() }
}

fn rule(
    screen: &str,
    event_type: EventType,
    target: Option<&str>,
    effects: Vec<EffectOp>,
    nav: Nav,
) -> TransitionRule {
    TransitionRule {
        screen_id: screen.to_string(),
        event_type,
        target: target.map(str::to_string),
        guard_when: None,
        effects,
        nav,
    }
}

fn close_drawer() -> EffectOp {
    EffectOp::SetScalarBool { key: "drawer_open".into(), value: false }
}

/// Builds the notes reference app with the given faults injected.
pub fn build_notes_app(faults: NotesFaults) -> AppModel {
    let click = EventType::Click;

    let notes_list = ScreenDef {
        screen_id: "notes_list".into(),
        widgets: vec![
            desc(widget("fab_add", WidgetKind::Button, "fab_add", &[Capability::Clickable]), "Add note"),
            desc(
                lit(widget("menu_button", WidgetKind::Button, "menu_button", &[Capability::Clickable]), "Menu"),
                "Open navigation menu",
            ),
            desc(
                WidgetTemplate {
                    text: Some(TextBinding::FromScalar("search_query".into())),
                    ..widget("search_field", WidgetKind::TextField, "search_field", &[Capability::Editable])
                },
                "Search notes",
            ),
            visible_when(
                lit(widget("nav_archive", WidgetKind::MenuItem, "nav_archive", &[Capability::Clickable]), "Archive"),
                Condition::ScalarBool("drawer_open".into()),
            ),
            visible_when(
                lit(widget("nav_settings", WidgetKind::MenuItem, "nav_settings", &[Capability::Clickable]), "Settings"),
                Condition::ScalarBool("drawer_open".into()),
            ),
            WidgetTemplate {
                text: Some(TextBinding::FromRecordField("title".into())),
                repeat_for: Some(RecordBinding {
                    collection: "notes".into(),
                    filter: Some(Condition::All(vec![
                        Condition::Not(Box::new(Condition::RecordBool { field: "archived".into() })),
                        Condition::RecordTextContainsScalar {
                            field: "title".into(),
                            query_key: "search_query".into(),
                        },
                    ])),
                }),
                ..widget("note_row", WidgetKind::ListItem, "note_row", &[Capability::Clickable])
            },
            lit(widget("notes_header", WidgetKind::Label, "notes_header", &[]), "Notes"),
        ],
    };

    let archive_list = ScreenDef {
        screen_id: "archive_list".into(),
        widgets: vec![
            desc(
                lit(widget("menu_button", WidgetKind::Button, "menu_button", &[Capability::Clickable]), "Menu"),
                "Open navigation menu",
            ),
            visible_when(
                lit(widget("nav_notes", WidgetKind::MenuItem, "nav_notes", &[Capability::Clickable]), "Notes"),
                Condition::ScalarBool("drawer_open".into()),
            ),
            visible_when(
                lit(widget("nav_settings", WidgetKind::MenuItem, "nav_settings", &[Capability::Clickable]), "Settings"),
                Condition::ScalarBool("drawer_open".into()),
            ),
            WidgetTemplate {
                text: Some(TextBinding::FromRecordField("title".into())),
                repeat_for: Some(RecordBinding {
                    collection: "notes".into(),
                    filter: Some(Condition::RecordBool { field: "archived".into() }),
                }),
                ..widget("note_row", WidgetKind::ListItem, "note_row", &[Capability::Clickable])
            },
            lit(widget("archive_header", WidgetKind::Label, "archive_header", &[]), "Archive"),
        ],
    };

    let note_edit = ScreenDef {
        screen_id: "note_edit".into(),
        widgets: vec![
            desc(
                WidgetTemplate {
                    text: Some(TextBinding::FromCursorField { collection: "notes".into(), field: "title".into() }),
                    ..widget("note_title", WidgetKind::TextField, "note_title", &[Capability::Editable])
                },
                "Note title",
            ),
            lit(widget("attach_button", WidgetKind::Button, "attach_button", &[Capability::Clickable]), "Attach"),
            lit(widget("audio_button", WidgetKind::Button, "audio_button", &[Capability::Clickable]), "Record audio"),
            visible_when(
                lit(widget("archive_button", WidgetKind::Button, "archive_button", &[Capability::Clickable]), "Archive note"),
                origin_is("notes"),
            ),
            visible_when(
                lit(widget("unarchive_button", WidgetKind::Button, "unarchive_button", &[Capability::Clickable]), "Unarchive"),
                origin_is("archive"),
            ),
            lit(widget("delete_button", WidgetKind::Button, "delete_button", &[Capability::Clickable]), "Delete"),
            lit(widget("edit_menu_button", WidgetKind::Button, "edit_menu_button", &[Capability::Clickable]), "More options"),
            visible_when(
                lit(widget("origin_header_notes", WidgetKind::Label, "origin_header", &[]), "Notes"),
                origin_is("notes"),
            ),
            visible_when(
                lit(widget("origin_header_archive", WidgetKind::Label, "origin_header", &[]), "Archive"),
                origin_is("archive"),
            ),
            visible_when(
                desc(widget("attachment_thumbnail", WidgetKind::Image, "attachment_thumbnail", &[]), "Photo attachment"),
                Condition::All(vec![
                    cursor_bool("has_photo"),
                    Condition::Not(Box::new(Condition::ScalarBool("reduced_view".into()))),
                ]),
            ),
            visible_when(
                desc(widget("attachment_icon", WidgetKind::Image, "attachment_icon", &[]), "Photo attachment"),
                Condition::All(vec![cursor_bool("has_photo"), Condition::ScalarBool("reduced_view".into())]),
            ),
            visible_when(
                desc(widget("audio_attachment", WidgetKind::Image, "audio_attachment", &[]), "Audio attachment"),
                cursor_bool("has_audio"),
            ),
        ],
    };

    let attachment_menu = ScreenDef {
        screen_id: "attachment_menu".into(),
        widgets: vec![
            lit(widget("camera_option", WidgetKind::MenuItem, "camera_option", &[Capability::Clickable]), "Camera"),
            lit(widget("attach_header", WidgetKind::Label, "attach_header", &[]), "Attach"),
        ],
    };

    let camera = ScreenDef {
        screen_id: "camera".into(),
        widgets: vec![
            desc(widget("shutter_button", WidgetKind::Button, "shutter_button", &[Capability::Clickable]), "Take photo"),
            visible_when(
                lit(widget("capture_indicator", WidgetKind::Label, "capture_indicator", &[]), "Photo captured"),
                Condition::ScalarBool("camera_captured".into()),
            ),
            lit(widget("camera_header", WidgetKind::Label, "camera_header", &[]), "Camera"),
        ],
    };

    let audio_recorder = ScreenDef {
        screen_id: "audio_recorder".into(),
        widgets: vec![
            lit(widget("record_button", WidgetKind::Button, "record_button", &[Capability::Clickable]), "Record"),
            visible_when(
                lit(widget("recording_indicator", WidgetKind::Label, "recording_indicator", &[]), "Recording saved"),
                cursor_bool("has_audio"),
            ),
            lit(widget("audio_header", WidgetKind::Label, "audio_header", &[]), "Audio recorder"),
        ],
    };

    let settings = ScreenDef {
        screen_id: "settings".into(),
        widgets: vec![
            lit(
                widget("reduced_view_toggle", WidgetKind::Checkbox, "reduced_view_toggle", &[Capability::Clickable]),
                "Reduced attachment view",
            ),
            WidgetTemplate {
                text: Some(TextBinding::FromScalarBool {
                    key: "reduced_view".into(),
                    when_true: "On".into(),
                    when_false: "Off".into(),
                }),
                ..widget("reduced_view_state", WidgetKind::Label, "reduced_view_state", &[])
            },
            lit(widget("settings_header", WidgetKind::Label, "settings_header", &[]), "Settings"),
        ],
    };

    let mut note_defaults = BTreeMap::new();
    note_defaults.insert("title".to_string(), super::ScalarValue::Text(String::new()));
    note_defaults.insert("archived".to_string(), super::ScalarValue::Bool(false));
    note_defaults.insert("has_photo".to_string(), super::ScalarValue::Bool(false));
    note_defaults.insert("has_audio".to_string(), super::ScalarValue::Bool(false));
    note_defaults.insert("audio_opened".to_string(), super::ScalarValue::Bool(false));

    let transition_rules = vec![
        // notes_list
        rule(
            "notes_list",
            click,
            Some("fab_add"),
            vec![
                close_drawer(),
                EffectOp::CreateRecord {
                    collection: "notes".into(),
                    defaults: note_defaults.clone(),
                    set_cursor: true,
                },
                EffectOp::SetScalarText { key: "origin".into(), value: "notes".into() },
            ],
            Nav::Push("note_edit".into()),
        ),
        rule(
            "notes_list",
            click,
            Some("menu_button"),
            vec![EffectOp::ToggleScalarBool { key: "drawer_open".into() }],
            Nav::Stay,
        ),
        rule(
            "notes_list",
            click,
            Some("nav_archive"),
            vec![close_drawer()],
            Nav::Push("archive_list".into()),
        ),
        rule(
            "notes_list",
            click,
            Some("nav_settings"),
            vec![close_drawer()],
            Nav::Push("settings".into()),
        ),
        rule(
            "notes_list",
            EventType::Edit,
            Some("search_field"),
            vec![EffectOp::SetScalarTextFromEvent { key: "search_query".into() }],
            Nav::Stay,
        ),
        rule(
            "notes_list",
            click,
            Some("note_row"),
            vec![
                close_drawer(),
                EffectOp::SetCursorToTarget { collection: "notes".into() },
                EffectOp::SetScalarText { key: "origin".into(), value: "notes".into() },
            ],
            Nav::Push("note_edit".into()),
        ),
        TransitionRule {
            screen_id: "notes_list".into(),
            event_type: EventType::Back,
            target: None,
            guard_when: Some(Condition::ScalarBool("drawer_open".into())),
            effects: vec![close_drawer()],
            nav: Nav::Stay,
        },
        // archive_list
        rule(
            "archive_list",
            click,
            Some("menu_button"),
            vec![EffectOp::ToggleScalarBool { key: "drawer_open".into() }],
            Nav::Stay,
        ),
        rule("archive_list", click, Some("nav_notes"), vec![close_drawer()], Nav::Pop),
        rule(
            "archive_list",
            click,
            Some("nav_settings"),
            vec![close_drawer()],
            Nav::Push("settings".into()),
        ),
        rule(
            "archive_list",
            click,
            Some("note_row"),
            vec![
                close_drawer(),
                EffectOp::SetCursorToTarget { collection: "notes".into() },
                EffectOp::SetScalarText { key: "origin".into(), value: "archive".into() },
            ],
            Nav::Push("note_edit".into()),
        ),
        TransitionRule {
            screen_id: "archive_list".into(),
            event_type: EventType::Back,
            target: None,
            guard_when: Some(Condition::ScalarBool("drawer_open".into())),
            effects: vec![close_drawer()],
            nav: Nav::Stay,
        },
        // note_edit
        rule(
            "note_edit",
            EventType::Edit,
            Some("note_title"),
            vec![EffectOp::SetCursorFieldFromEvent { collection: "notes".into(), field: "title".into() }],
            Nav::Stay,
        ),
        rule("note_edit", click, Some("attach_button"), vec![], Nav::Push("attachment_menu".into())),
        rule(
            "note_edit",
            click,
            Some("audio_button"),
            vec![EffectOp::SetCursorFieldBool {
                collection: "notes".into(),
                field: "audio_opened".into(),
                value: true,
            }],
            Nav::Push("audio_recorder".into()),
        ),
        rule(
            "note_edit",
            click,
            Some("archive_button"),
            vec![EffectOp::If {
                when: Condition::Fault("archive_loses_note".into()),
                then: vec![EffectOp::DeleteCursorRecord { collection: "notes".into() }],
                otherwise: vec![EffectOp::SetCursorFieldBool {
                    collection: "notes".into(),
                    field: "archived".into(),
                    value: true,
                }],
            }],
            Nav::Pop,
        ),
        rule(
            "note_edit",
            click,
            Some("unarchive_button"),
            vec![EffectOp::SetCursorFieldBool {
                collection: "notes".into(),
                field: "archived".into(),
                value: false,
            }],
            Nav::Pop,
        ),
        rule(
            "note_edit",
            click,
            Some("delete_button"),
            vec![EffectOp::DeleteCursorRecord { collection: "notes".into() }],
            Nav::Pop,
        ),
        // attachment_menu: choosing the camera dismisses the menu.
        rule(
            "attachment_menu",
            click,
            Some("camera_option"),
            vec![EffectOp::SetScalarBool { key: "camera_captured".into(), value: false }],
            Nav::Replace("camera".into()),
        ),
        // camera
        rule(
            "camera",
            click,
            Some("shutter_button"),
            vec![EffectOp::If {
                when: Condition::All(vec![
                    Condition::Fault("audio_blocks_photo".into()),
                    cursor_bool("audio_opened"),
                ]),
                then: vec![EffectOp::SetScalarBool { key: "camera_captured".into(), value: true }],
                otherwise: vec![
                    EffectOp::SetScalarBool { key: "camera_captured".into(), value: true },
                    EffectOp::SetCursorFieldBool {
                        collection: "notes".into(),
                        field: "has_photo".into(),
                        value: true,
                    },
                ],
            }],
            Nav::Stay,
        ),
        // audio_recorder
        rule(
            "audio_recorder",
            click,
            Some("record_button"),
            vec![EffectOp::SetCursorFieldBool {
                collection: "notes".into(),
                field: "has_audio".into(),
                value: true,
            }],
            Nav::Stay,
        ),
        // settings
        rule(
            "settings",
            click,
            Some("reduced_view_toggle"),
            vec![EffectOp::ToggleScalarBool { key: "reduced_view".into() }],
            Nav::Stay,
        ),
    ];

    let mut scalars = BTreeMap::new();
    scalars.insert("drawer_open".to_string(), super::ScalarValue::Bool(false));
    scalars.insert("reduced_view".to_string(), super::ScalarValue::Bool(false));
    scalars.insert("search_query".to_string(), super::ScalarValue::Text(String::new()));
    scalars.insert("origin".to_string(), super::ScalarValue::Text("notes".into()));
    scalars.insert("camera_captured".to_string(), super::ScalarValue::Bool(false));

    let mut collections = BTreeMap::new();
    collections.insert("notes".to_string(), Vec::new());

    let mut fault_flags = BTreeMap::new();
    fault_flags.insert("audio_blocks_photo".to_string(), faults.audio_blocks_photo);
    fault_flags.insert("archive_loses_note".to_string(), faults.archive_loses_note);

    let mut model = AppModel {
        app_name: "Pocket Notes".into(),
        initial_screen: "notes_list".into(),
        screens: vec![
            notes_list,
            archive_list,
            note_edit,
            attachment_menu,
            camera,
            audio_recorder,
            settings,
        ],
        data_store: DataStore {
            scalars,
            collections,
            cursors: BTreeMap::new(),
            next_record_id: 1,
        },
        transition_rules,
        static_text_whitelist: BTreeSet::new(),
        fault_flags,
    };
    model.static_text_whitelist = model.rendered_static_texts();
    model.validate().expect("notes reference app is well-formed");
    model
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn declares_the_expected_screens() {
        let model = build_notes_app(NotesFaults::default());
        let ids = model.screen_ids();
        assert_eq!(ids, notes_screen_ids());
    }

    #[test]
    fn fault_flags_match_builder_input() {
        let model = build_notes_app(NotesFaults { audio_blocks_photo: true, archive_loses_note: false });
        assert_eq!(model.fault_flags["audio_blocks_photo"], true);
        assert_eq!(model.fault_flags["archive_loses_note"], false);
    }

    #[test]
    fn whitelist_contains_app_defined_labels_only() {
        let model = build_notes_app(NotesFaults::default());
        assert!(model.static_text_whitelist.contains("Notes"));
        assert!(model.static_text_whitelist.contains("Archive"));
        assert!(model.static_text_whitelist.contains("Camera"));
        // User-entered content never appears in the whitelist.
        assert!(!model.static_text_whitelist.contains("groceries"));
    }
}
