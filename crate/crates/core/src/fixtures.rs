//! Reference property set shipped with the notes app. With every fault flag
//! off the app satisfies all of these under exhaustive short-sequence
//! enumeration and long seeded random runs; each injected fault breaks at
//! least one of them.

use crate::property::{
    DataGen, InteractionScript, InteractionStep, PredicateExpr, Property, Provenance, Selector,
};

fn selector(rid: &str) -> Selector {
    Selector::by_resource_id(rid)
}

fn prop(
    id: &str,
    hypothesis: &str,
    precondition: PredicateExpr,
    steps: Vec<InteractionStep>,
    postcondition: PredicateExpr,
) -> Property {
    let property = Property {
        property_id: id.to_string(),
        version: 1,
        precondition,
        interaction: InteractionScript::new(steps),
        postcondition,
        provenance: Provenance {
            evidence_id: "builtin:notes".into(),
            hypothesis: hypothesis.to_string(),
            ..Default::default()
        },
    };
    property.validate().expect("reference property is well-formed");
    property
}

/// The six reference properties of the notes app.
pub fn notes_reference_properties() -> Vec<Property> {
    vec![
        prop(
            "ref_create_note",
            "create a note",
            PredicateExpr::And(vec![
                PredicateExpr::on_screen("notes_list"),
                PredicateExpr::exists(selector("fab_add")),
            ]),
            vec![InteractionStep::click(selector("fab_add"))],
            PredicateExpr::And(vec![
                PredicateExpr::on_screen("note_edit"),
                PredicateExpr::exists(selector("note_title")),
                PredicateExpr::TextEquals {
                    selector: selector("origin_header"),
                    value: "Notes".into(),
                },
            ]),
        ),
        prop(
            "ref_attach_photo",
            "attach a photo to the note",
            PredicateExpr::And(vec![
                PredicateExpr::on_screen("note_edit"),
                PredicateExpr::exists(selector("attach_button")),
            ]),
            vec![
                InteractionStep::click(selector("attach_button")),
                InteractionStep::click(selector("camera_option")),
                InteractionStep::click(selector("shutter_button")),
                InteractionStep::back(),
            ],
            PredicateExpr::And(vec![
                PredicateExpr::exists(selector("edit_menu_button")),
                PredicateExpr::Or(vec![
                    PredicateExpr::exists(selector("attachment_thumbnail")),
                    PredicateExpr::exists(Selector {
                        widget_kind: Some(crate::gui::WidgetKind::Image),
                        description: Some("Photo attachment".into()),
                        ..Default::default()
                    }),
                ]),
            ]),
        ),
        prop(
            "ref_record_audio",
            "record an audio memo",
            PredicateExpr::And(vec![
                PredicateExpr::on_screen("note_edit"),
                PredicateExpr::exists(selector("audio_button")),
            ]),
            vec![
                InteractionStep::click(selector("audio_button")),
                InteractionStep::click(selector("record_button")),
                InteractionStep::back(),
            ],
            PredicateExpr::And(vec![
                PredicateExpr::on_screen("note_edit"),
                PredicateExpr::exists(selector("audio_attachment")),
            ]),
        ),
        prop(
            "ref_archive_note",
            "archive the current note",
            PredicateExpr::And(vec![
                PredicateExpr::on_screen("note_edit"),
                PredicateExpr::exists(selector("archive_button")),
            ]),
            vec![
                InteractionStep::click(selector("archive_button")),
                InteractionStep::click(selector("menu_button")),
                InteractionStep::click(selector("nav_archive")),
            ],
            PredicateExpr::And(vec![
                PredicateExpr::on_screen("archive_list"),
                PredicateExpr::Count {
                    selector: selector("note_row"),
                    op: crate::property::CountOp::Ge,
                    value: 1,
                },
            ]),
        ),
        prop(
            "ref_delete_note",
            "delete the note",
            PredicateExpr::And(vec![
                PredicateExpr::on_screen("note_edit"),
                PredicateExpr::exists(selector("delete_button")),
                PredicateExpr::TextEquals {
                    selector: selector("origin_header"),
                    value: "Notes".into(),
                },
            ]),
            vec![InteractionStep::click(selector("delete_button"))],
            PredicateExpr::on_screen("notes_list"),
        ),
        prop(
            "ref_reduced_view_toggle",
            "toggle the reduced attachment view",
            PredicateExpr::And(vec![
                PredicateExpr::on_screen("settings"),
                PredicateExpr::exists(selector("reduced_view_toggle")),
            ]),
            vec![InteractionStep::click(selector("reduced_view_toggle"))],
            PredicateExpr::And(vec![
                PredicateExpr::on_screen("settings"),
                PredicateExpr::exists(selector("reduced_view_state")),
            ]),
        ),
    ]
}

/// An interaction step that types a corpus word into the search field; used
/// by tests that need a seeded data generator in a realistic script.
pub fn search_with_corpus_word() -> InteractionStep {
    InteractionStep::edit(selector("search_field"), DataGen::CorpusRandom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{build_notes_app, NotesFaults};
    use crate::runner::{run, RunConfig};

    #[test]
    fn reference_properties_validate() {
        let properties = notes_reference_properties();
        assert_eq!(properties.len(), 6);
        for p in &properties {
            p.validate().unwrap();
        }
    }

    #[test]
    fn archive_fault_violates_the_archive_property() {
        let model = build_notes_app(NotesFaults { archive_loses_note: true, ..Default::default() });
        let properties = notes_reference_properties();
        let mut any = false;
        for seed in 0..10 {
            let config = RunConfig { seed, max_events: 2_000, ..Default::default() };
            let (reports, _) = run(&config, &properties, &model).unwrap();
            if reports.iter().any(|r| r.property_id == "ref_archive_note") {
                any = true;
                break;
            }
        }
        assert!(any, "archive_loses_note goes undetected by the reference set");
    }

    #[test]
    fn photo_fault_violates_the_photo_property() {
        let model = build_notes_app(NotesFaults { audio_blocks_photo: true, ..Default::default() });
        let properties = notes_reference_properties();
        let mut any = false;
        for seed in 0..10 {
            let config = RunConfig { seed, max_events: 3_000, ..Default::default() };
            let (reports, _) = run(&config, &properties, &model).unwrap();
            if reports.iter().any(|r| r.property_id == "ref_attach_photo") {
                any = true;
                break;
            }
        }
        assert!(any, "audio_blocks_photo goes undetected by the reference set");
    }
}
