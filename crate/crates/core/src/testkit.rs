//! Random generators for tiny app models, properties, and start states.
//! Test and benchmark support: the acceptance suite drives its brute-force
//! satisfaction oracle over these, and the benchmarks reuse them for
//! realistic inputs.

use crate::backend::{
    AppModel, Condition, DataStore, EffectOp, Nav, ScalarValue, ScreenDef, TransitionRule,
    WidgetTemplate, TextBinding,
};
use crate::gui::{Capability, EventType, WidgetKind};
use crate::property::{
    CountOp, DataGen, InteractionScript, InteractionStep, PredicateExpr, Property, Provenance,
    Selector, TextMatch,
};
use rand::Rng;
use std::collections::{BTreeMap, BTreeSet};

const TEXT_POOL: [&str; 6] = ["Alpha", "Beta", "Gamma", "Item 1", "Item 2", "Save"];

fn random_kind(rng: &mut impl Rng) -> WidgetKind {
    match rng.gen_range(0..6) {
        0 => WidgetKind::Button,
        1 => WidgetKind::TextField,
        2 => WidgetKind::ListItem,
        3 => WidgetKind::Checkbox,
        4 => WidgetKind::Label,
        _ => WidgetKind::Image,
    }
}

fn random_caps(rng: &mut impl Rng) -> BTreeSet<Capability> {
    let mut caps = BTreeSet::new();
    if rng.gen_bool(0.6) {
        caps.insert(Capability::Clickable);
    }
    if rng.gen_bool(0.2) {
        caps.insert(Capability::LongClickable);
    }
    if rng.gen_bool(0.25) {
        caps.insert(Capability::Editable);
    }
    if rng.gen_bool(0.15) {
        caps.insert(Capability::Swipeable);
    }
    caps
}

/// A random well-formed app model with at most `max_screens` screens and
/// `max_widgets` widgets per screen, two boolean flags toggled by random
/// rules, and random navigation.
pub fn random_model(rng: &mut impl Rng, max_screens: usize, max_widgets: usize) -> AppModel {
    let n_screens = rng.gen_range(1..=max_screens.max(1));
    let screen_ids: Vec<String> = (0..n_screens).map(|i| format!("s{i}")).collect();

    let mut screens = Vec::new();
    let mut clickable_targets: Vec<(String, String)> = Vec::new();
    let mut editable_targets: Vec<(String, String)> = Vec::new();
    for sid in &screen_ids {
        let n_widgets = rng.gen_range(0..=max_widgets);
        let mut widgets = Vec::new();
        for w in 0..n_widgets {
            let rid = format!("{sid}_w{w}");
            let caps = random_caps(rng);
            if caps.contains(&Capability::Clickable) {
                clickable_targets.push((sid.clone(), rid.clone()));
            }
            if caps.contains(&Capability::Editable) {
                editable_targets.push((sid.clone(), rid.clone()));
            }
            widgets.push(WidgetTemplate {
                template_id: rid.clone(),
                widget_kind: random_kind(rng),
                resource_id: Some(rid),
                text: if rng.gen_bool(0.7) {
                    Some(TextBinding::Literal(
                        TEXT_POOL[rng.gen_range(0..TEXT_POOL.len())].to_string(),
                    ))
                } else {
                    None
                },
                description: if rng.gen_bool(0.3) { Some(format!("widget {w}")) } else { None },
                capabilities: caps,
                enabled: rng.gen_bool(0.9),
                visible_when: if rng.gen_bool(0.25) {
                    let flag = format!("flag{}", rng.gen_range(0..2));
                    Some(if rng.gen_bool(0.5) {
                        Condition::ScalarBool(flag)
                    } else {
                        Condition::Not(Box::new(Condition::ScalarBool(flag)))
                    })
                } else {
                    None
                },
                repeat_for: None,
            });
        }
        screens.push(ScreenDef { screen_id: sid.clone(), widgets });
    }

    let mut transition_rules = Vec::new();
    for (sid, rid) in &clickable_targets {
        if rng.gen_bool(0.8) {
            let nav = match rng.gen_range(0..4) {
                0 => Nav::Push(screen_ids[rng.gen_range(0..screen_ids.len())].clone()),
                1 => Nav::Replace(screen_ids[rng.gen_range(0..screen_ids.len())].clone()),
                2 => Nav::Pop,
                _ => Nav::Stay,
            };
            let mut effects = Vec::new();
            if rng.gen_bool(0.5) {
                effects.push(EffectOp::ToggleScalarBool {
                    key: format!("flag{}", rng.gen_range(0..2)),
                });
            }
            transition_rules.push(TransitionRule {
                screen_id: sid.clone(),
                event_type: EventType::Click,
                target: Some(rid.clone()),
                guard_when: None,
                effects,
                nav,
            });
        }
    }
    for (sid, rid) in &editable_targets {
        if rng.gen_bool(0.5) {
            transition_rules.push(TransitionRule {
                screen_id: sid.clone(),
                event_type: EventType::Edit,
                target: Some(rid.clone()),
                guard_when: None,
                effects: vec![EffectOp::SetScalarTextFromEvent { key: "text0".into() }],
                nav: Nav::Stay,
            });
        }
    }

    let mut scalars = BTreeMap::new();
    scalars.insert("flag0".to_string(), ScalarValue::Bool(rng.gen_bool(0.5)));
    scalars.insert("flag1".to_string(), ScalarValue::Bool(rng.gen_bool(0.5)));
    scalars.insert("text0".to_string(), ScalarValue::Text(String::new()));

    let mut model = AppModel {
        app_name: "Random App".into(),
        initial_screen: screen_ids[0].clone(),
        screens,
        data_store: DataStore { scalars, ..Default::default() },
        transition_rules,
        static_text_whitelist: BTreeSet::new(),
        fault_flags: BTreeMap::new(),
    };
    model.static_text_whitelist = model.rendered_static_texts();
    model.validate().expect("random model is well-formed by construction");
    model
}

fn random_selector(rng: &mut impl Rng, model: &AppModel) -> Selector {
    let mut selector = Selector::default();
    let all_rids: Vec<&str> = model
        .screens
        .iter()
        .flat_map(|s| s.widgets.iter())
        .filter_map(|w| w.resource_id.as_deref())
        .collect();
    // Constrain one to three fields; bias toward fields that can match.
    if rng.gen_bool(0.6) && !all_rids.is_empty() {
        selector.resource_id = Some(all_rids[rng.gen_range(0..all_rids.len())].to_string());
    }
    if rng.gen_bool(0.3) {
        selector.widget_kind = Some(random_kind(rng));
    }
    if rng.gen_bool(0.3) {
        let text = TEXT_POOL[rng.gen_range(0..TEXT_POOL.len())];
        selector.text = Some(if rng.gen_bool(0.8) {
            TextMatch::Exact(text.to_string())
        } else {
            TextMatch::Regex("^Item [0-9]+$".to_string())
        });
    }
    if selector.resource_id.is_none() && selector.widget_kind.is_none() && selector.text.is_none()
    {
        selector.widget_kind = Some(random_kind(rng));
    }
    selector
}

fn random_predicate(rng: &mut impl Rng, model: &AppModel, depth: usize) -> PredicateExpr {
    if depth > 0 && rng.gen_bool(0.4) {
        let n = rng.gen_range(1..=3);
        let children: Vec<PredicateExpr> =
            (0..n).map(|_| random_predicate(rng, model, depth - 1)).collect();
        return match rng.gen_range(0..3) {
            0 => PredicateExpr::And(children),
            1 => PredicateExpr::Or(children),
            _ => PredicateExpr::Not(Box::new(
                children.into_iter().next().expect("at least one child"),
            )),
        };
    }
    match rng.gen_range(0..5) {
        0 => PredicateExpr::Exists(random_selector(rng, model)),
        1 => PredicateExpr::Absent(random_selector(rng, model)),
        2 => PredicateExpr::TextEquals {
            selector: random_selector(rng, model),
            value: TEXT_POOL[rng.gen_range(0..TEXT_POOL.len())].to_string(),
        },
        3 => PredicateExpr::Count {
            selector: random_selector(rng, model),
            op: match rng.gen_range(0..6) {
                0 => CountOp::Eq,
                1 => CountOp::Ne,
                2 => CountOp::Lt,
                3 => CountOp::Le,
                4 => CountOp::Gt,
                _ => CountOp::Ge,
            },
            value: rng.gen_range(0..3),
        },
        _ => {
            let declared = rng.gen_bool(0.8);
            let screen = if declared {
                model.screens[rng.gen_range(0..model.screens.len())].screen_id.clone()
            } else {
                "nowhere".to_string()
            };
            PredicateExpr::OnScreen(screen)
        }
    }
}

fn random_step(rng: &mut impl Rng, model: &AppModel) -> InteractionStep {
    let event_type = match rng.gen_range(0..5) {
        0 => EventType::Click,
        1 => EventType::LongClick,
        2 => EventType::Edit,
        3 => EventType::Swipe,
        _ => EventType::Back,
    };
    if event_type == EventType::Back {
        return InteractionStep::back();
    }
    let data = match event_type {
        EventType::Edit => Some(DataGen::LiteralText(
            TEXT_POOL[rng.gen_range(0..TEXT_POOL.len())].to_string(),
        )),
        EventType::Swipe => Some(DataGen::LiteralDirection(
            crate::gui::SWIPE_CYCLE[rng.gen_range(0..4)],
        )),
        _ => None,
    };
    let guard_when =
        if rng.gen_bool(0.2) { Some(random_predicate(rng, model, 1)) } else { None };
    InteractionStep { event_type, selector: Some(random_selector(rng, model)), data, guard_when }
}

/// A random structurally valid property over the model's vocabulary, with
/// deterministic (literal) interaction data.
pub fn random_property(rng: &mut impl Rng, model: &AppModel) -> Property {
    let steps: Vec<InteractionStep> =
        (0..rng.gen_range(1..=3)).map(|_| random_step(rng, model)).collect();
    let property = Property {
        property_id: "p_random".into(),
        version: 1,
        precondition: random_predicate(rng, model, 2),
        interaction: InteractionScript::new(steps),
        postcondition: random_predicate(rng, model, 2),
        provenance: Provenance::default(),
    };
    property.validate().expect("random property is well-formed by construction");
    property
}

/// Launches the model and performs a short random walk to land in a random
/// reachable start state.
pub fn random_start_session(
    rng: &mut impl Rng,
    model: &AppModel,
    seed: u64,
) -> crate::backend::SimulatedSession {
    use crate::backend::Backend;
    let mut session =
        crate::backend::SimulatedSession::launch(model, seed).expect("random model launches");
    let corpus = crate::gui::default_edit_corpus();
    for _ in 0..rng.gen_range(0..=6) {
        let events = crate::gui::enabled_events(session.current_state(), &corpus);
        let event = events[rng.gen_range(0..events.len())].clone();
        session.perform(&event).expect("enabled events dispatch");
    }
    session
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_models_and_properties_are_well_formed() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let model = random_model(&mut rng, 6, 8);
            model.validate().unwrap();
            let property = random_property(&mut rng, &model);
            property.validate().unwrap();
            let _ = random_start_session(&mut rng, &model, 3);
        }
    }
}
