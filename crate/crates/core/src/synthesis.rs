//! Two-step property synthesis from behavioral evidence: an oracle-drafted
//! natural-language specification, then translation into an executable
//! property. Translations must ground every selector in the vocabulary
//! observed along the source trace, and accepted properties must hold on
//! their own source trace.

use crate::backend::AppModel;
use crate::explore::{SummarizedTrace, TraceStatus};
use crate::gui::WidgetSignature;
use crate::oracle::schema::{DraftPropertyRequest, TranslatePropertyRequest};
use crate::oracle::{OracleClient, OracleError};
use crate::property::{
    check_property, eval_predicate, CheckResult, PredicateExpr, Property, Provenance, Selector,
    TextMatch,
};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthesisError {
    /// Drafting requires evidence whose execution completed.
    #[error("evidence {0} did not complete; nothing to synthesize")]
    EvidenceNotComplete(String),
    /// Oracle output stayed malformed after repair; the evidence is left
    /// unsynthesized.
    #[error("synthesis skipped: {0}")]
    Skip(String),
    /// Translation kept referencing selectors outside the evidence
    /// vocabulary after the one allowed reprompt.
    #[error("translation failure: {0}")]
    TranslationFailure(String),
}

/// Natural-language property specification drafted from one evidence trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NlPropertySpec {
    pub precondition_text: String,
    pub interaction_text: String,
    pub postcondition_text: String,
    pub cited_steps: Vec<usize>,
}

impl NlPropertySpec {
    pub fn validate(&self, evidence: &SummarizedTrace) -> Result<(), SynthesisError> {
        if self.precondition_text.trim().is_empty()
            || self.interaction_text.trim().is_empty()
            || self.postcondition_text.trim().is_empty()
        {
            return Err(SynthesisError::Skip("specification has an empty part".into()));
        }
        if let Some(bad) = self.cited_steps.iter().find(|&&i| i >= evidence.steps.len()) {
            return Err(SynthesisError::Skip(format!(
                "cited step {bad} is out of range for {} steps",
                evidence.steps.len()
            )));
        }
        Ok(())
    }
}

/// Drafts the natural-language specification for one completed evidence
/// trace.
pub fn draft_nl_spec(
    evidence: &SummarizedTrace,
    oracle: &OracleClient,
    variant: usize,
) -> Result<NlPropertySpec, SynthesisError> {
    if evidence.status != TraceStatus::Complete {
        return Err(SynthesisError::EvidenceNotComplete(evidence.evidence_id.clone()));
    }
    let mut hypothesis = evidence.hypothesis.clone();
    if variant > 0 {
        // Distinct key so the oracle can propose a different aspect.
        hypothesis = format!("{hypothesis} (variant {variant})");
    }
    let request = DraftPropertyRequest {
        hypothesis,
        steps: evidence.steps.clone(),
        completed: true,
    };
    let response = oracle
        .draft_property(&request)
        .map_err(|e| SynthesisError::Skip(e.to_string()))?;
    let spec = NlPropertySpec {
        precondition_text: response.precondition_text,
        interaction_text: response.interaction_text,
        postcondition_text: response.postcondition_text,
        cited_steps: response.cited_steps,
    };
    spec.validate(evidence)?;
    Ok(spec)
}

fn selector_matches_signature(selector: &Selector, sig: &WidgetSignature) -> bool {
    if let Some(kind) = selector.widget_kind {
        if sig.widget_kind != kind {
            return false;
        }
    }
    if let Some(rid) = &selector.resource_id {
        if sig.resource_id.as_deref() != Some(rid.as_str()) {
            return false;
        }
    }
    if let Some(text) = &selector.text {
        let ok = match text {
            TextMatch::Exact(t) => &sig.filtered_text == t,
            TextMatch::Regex(pattern) => regex::Regex::new(pattern)
                .map(|re| re.is_match(&sig.filtered_text))
                .unwrap_or(false),
        };
        if !ok {
            return false;
        }
    }
    if let Some(d) = &selector.description {
        if sig.description.as_deref() != Some(d.as_str()) {
            return false;
        }
    }
    true
}

/// A selector is grounded when some observed signature is consistent with
/// every constrained field. Label constraints are state-specific and cannot
/// ground a selector on their own.
pub fn selector_grounded(selector: &Selector, vocabulary: &BTreeSet<WidgetSignature>) -> bool {
    if selector.widget_kind.is_none()
        && selector.resource_id.is_none()
        && selector.text.is_none()
        && selector.description.is_none()
    {
        return false;
    }
    vocabulary.iter().any(|sig| selector_matches_signature(selector, sig))
}

/// All grounding violations of a property against an observed vocabulary
/// and screen set. Empty means fully grounded.
pub fn grounding_violations(
    property: &Property,
    vocabulary: &BTreeSet<WidgetSignature>,
    screens: &BTreeSet<String>,
) -> Vec<String> {
    let mut violations = Vec::new();
    let mut check_predicate = |label: &str, p: &PredicateExpr| {
        for selector in p.selectors() {
            if !selector_grounded(selector, vocabulary) {
                violations.push(format!("{label} selector {} is not grounded", selector.render()));
            }
        }
        for screen in p.screen_ids() {
            if !screens.contains(screen) {
                violations.push(format!("{label} references unobserved screen '{screen}'"));
            }
        }
    };
    check_predicate("precondition", &property.precondition);
    check_predicate("postcondition", &property.postcondition);
    for selector in property.interaction.selectors() {
        if !selector_grounded(selector, vocabulary) {
            violations.push(format!("interaction selector {} is not grounded", selector.render()));
        }
    }
    violations
}

/// Translates a natural-language specification into an executable property.
/// Selectors must reference only signatures observed in the evidence; one
/// reprompt listing the violations is allowed before failing.
pub fn translate(
    spec: &NlPropertySpec,
    evidence: &SummarizedTrace,
    oracle: &OracleClient,
) -> Result<Property, SynthesisError> {
    if evidence.observed_vocabulary.is_empty() {
        return Err(SynthesisError::TranslationFailure(
            "evidence observed an empty vocabulary".into(),
        ));
    }
    let vocabulary: Vec<WidgetSignature> =
        evidence.observed_vocabulary.iter().cloned().collect();
    let observed_screens: Vec<String> = evidence.observed_screens.iter().cloned().collect();
    let base_request = TranslatePropertyRequest {
        hypothesis: evidence.hypothesis.clone(),
        precondition_text: spec.precondition_text.clone(),
        interaction_text: spec.interaction_text.clone(),
        postcondition_text: spec.postcondition_text.clone(),
        vocabulary,
        observed_screens,
        retry_feedback: None,
    };

    let mut request = base_request.clone();
    for attempt in 0..2 {
        let response = match oracle.translate_property(&request) {
            Ok(r) => r,
            Err(OracleError::MalformedOutput { detail, .. }) => {
                return Err(SynthesisError::TranslationFailure(detail));
            }
            Err(e) => return Err(SynthesisError::TranslationFailure(e.to_string())),
        };
        let property = Property {
            property_id: format!("p{}", evidence.evidence_id.trim_start_matches('e')),
            version: 1,
            precondition: response.precondition,
            interaction: response.interaction,
            postcondition: response.postcondition,
            provenance: Provenance {
                evidence_id: evidence.evidence_id.clone(),
                hypothesis: evidence.hypothesis.clone(),
                nl_precondition: spec.precondition_text.clone(),
                nl_interaction: spec.interaction_text.clone(),
                nl_postcondition: spec.postcondition_text.clone(),
            },
        };
        if let Err(e) = property.validate() {
            return Err(SynthesisError::TranslationFailure(e.to_string()));
        }
        let violations = grounding_violations(
            &property,
            &evidence.observed_vocabulary,
            &evidence.observed_screens,
        );
        if violations.is_empty() {
            return Ok(property);
        }
        if attempt == 0 {
            request = TranslatePropertyRequest {
                retry_feedback: Some(violations.join("; ")),
                ..base_request.clone()
            };
        } else {
            return Err(SynthesisError::TranslationFailure(violations.join("; ")));
        }
    }
    unreachable!("translate loop returns within two attempts")
}

/// Gate outcome for one translated property.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateOutcome {
    Accepted,
    Rejected { reason: String },
}

impl GateOutcome {
    pub fn is_accepted(&self) -> bool {
        matches!(self, GateOutcome::Accepted)
    }
}

/// Accepts a property only if it holds on its own source trace: the anchor
/// replays, the precondition fires somewhere along it, and the check from
/// that state is satisfied.
pub fn source_trace_gate(
    property: &Property,
    evidence: &SummarizedTrace,
    model: &AppModel,
) -> GateOutcome {
    let anchor = &evidence.replay_anchor;
    let mut session = match crate::backend::SimulatedSession::launch(model, anchor.seed) {
        Ok(s) => s,
        Err(e) => return GateOutcome::Rejected { reason: format!("anchor-stale: {e}") },
    };
    use crate::backend::Backend;
    let mut fired = eval_predicate(&property.precondition, session.current_state());
    if !fired {
        for event in &anchor.events {
            match session.perform(event) {
                Ok(state) => {
                    if eval_predicate(&property.precondition, &state) {
                        fired = true;
                        break;
                    }
                }
                Err(e) => {
                    return GateOutcome::Rejected { reason: format!("anchor-stale: {e}") };
                }
            }
        }
    }
    if !fired {
        return GateOutcome::Rejected {
            reason: "precondition never fires on the source trace".into(),
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(anchor.seed ^ 0x5ca1ab1e);
    let corpus = crate::gui::default_edit_corpus();
    match check_property(property, &mut session, &mut rng, &corpus) {
        CheckResult::Satisfied { .. } => GateOutcome::Accepted,
        CheckResult::Violated { failed_atom, .. } => GateOutcome::Rejected {
            reason: format!("postcondition fails on the source trace at {failed_atom}"),
        },
        CheckResult::Inapplicable { reason, .. } => GateOutcome::Rejected {
            reason: format!("interaction does not execute on the source trace: {reason:?}"),
        },
    }
}

/// Per-evidence record in the synthesis report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisEntry {
    pub evidence_id: String,
    pub hypothesis: String,
    pub outcome: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub property_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SynthesisReport {
    pub entries: Vec<SynthesisEntry>,
    pub accepted: usize,
    pub rejected: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone)]
pub struct SynthesisConfig {
    /// Properties to attempt per completed evidence trace.
    pub properties_per_evidence: usize,
    /// Worker threads for the gate checks; results stay in evidence order.
    pub jobs: usize,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig { properties_per_evidence: 1, jobs: 1 }
    }
}

/// Runs draft, translate, and gate for every completed evidence trace.
/// Rejected properties are reported but not returned.
pub fn synthesize_all(
    evidence: &[SummarizedTrace],
    oracle: &OracleClient,
    model: &AppModel,
    cfg: &SynthesisConfig,
) -> (Vec<Property>, SynthesisReport) {
    let mut report = SynthesisReport::default();
    let mut candidates: Vec<(usize, Property)> = Vec::new();

    for (index, item) in evidence.iter().enumerate() {
        if item.status != TraceStatus::Complete {
            report.skipped += 1;
            report.entries.push(SynthesisEntry {
                evidence_id: item.evidence_id.clone(),
                hypothesis: item.hypothesis.clone(),
                outcome: "skipped".into(),
                property_id: None,
                reason: Some("execution did not complete".into()),
            });
            continue;
        }
        for variant in 0..cfg.properties_per_evidence.max(1) {
            let spec = match draft_nl_spec(item, oracle, variant) {
                Ok(s) => s,
                Err(e) => {
                    if variant == 0 {
                        report.skipped += 1;
                        report.entries.push(SynthesisEntry {
                            evidence_id: item.evidence_id.clone(),
                            hypothesis: item.hypothesis.clone(),
                            outcome: "skipped".into(),
                            property_id: None,
                            reason: Some(e.to_string()),
                        });
                    }
                    break;
                }
            };
            match translate(&spec, item, oracle) {
                Ok(mut property) => {
                    if variant > 0 {
                        property.property_id = format!("{}-{}", property.property_id, variant + 1);
                    }
                    candidates.push((index, property));
                }
                Err(e) => {
                    report.skipped += 1;
                    report.entries.push(SynthesisEntry {
                        evidence_id: item.evidence_id.clone(),
                        hypothesis: item.hypothesis.clone(),
                        outcome: "translation_failed".into(),
                        property_id: None,
                        reason: Some(e.to_string()),
                    });
                }
            }
        }
    }

    // The gate needs a session per check; distribute over a bounded pool.
    let jobs = cfg.jobs.max(1);
    let outcomes: Vec<GateOutcome> = if jobs == 1 || candidates.len() <= 1 {
        candidates
            .iter()
            .map(|(i, p)| source_trace_gate(p, &evidence[*i], model))
            .collect()
    } else {
        let mut outcomes: Vec<Option<GateOutcome>> = vec![None; candidates.len()];
        let chunk = candidates.len().div_ceil(jobs);
        std::thread::scope(|scope| {
            for (slot_chunk, cand_chunk) in
                outcomes.chunks_mut(chunk).zip(candidates.chunks(chunk))
            {
                scope.spawn(move || {
                    for (slot, (i, p)) in slot_chunk.iter_mut().zip(cand_chunk) {
                        *slot = Some(source_trace_gate(p, &evidence[*i], model));
                    }
                });
            }
        });
        outcomes.into_iter().map(|o| o.expect("gate ran")).collect()
    };

    let mut accepted = Vec::new();
    for ((index, property), outcome) in candidates.into_iter().zip(outcomes) {
        let item = &evidence[index];
        match outcome {
            GateOutcome::Accepted => {
                report.accepted += 1;
                report.entries.push(SynthesisEntry {
                    evidence_id: item.evidence_id.clone(),
                    hypothesis: item.hypothesis.clone(),
                    outcome: "accepted".into(),
                    property_id: Some(property.property_id.clone()),
                    reason: None,
                });
                accepted.push(property);
            }
            GateOutcome::Rejected { reason } => {
                report.rejected += 1;
                report.entries.push(SynthesisEntry {
                    evidence_id: item.evidence_id.clone(),
                    hypothesis: item.hypothesis.clone(),
                    outcome: "rejected".into(),
                    property_id: Some(property.property_id.clone()),
                    reason: Some(reason),
                });
            }
        }
    }
    (accepted, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{build_notes_app, NotesFaults, SimulatedSession};
    use crate::explore::{run_exploration, Budget, ExploreConfig};
    use crate::oracle::{builtin_fixture, OracleClient, ScriptedOracle};

    fn notes_client() -> OracleClient {
        OracleClient::new(Box::new(ScriptedOracle::new(builtin_fixture("notes").unwrap())))
    }

    fn explore_notes(seed: u64, budget: u64) -> (crate::backend::AppModel, Vec<SummarizedTrace>) {
        let model = build_notes_app(NotesFaults::default());
        let mut session = SimulatedSession::launch(&model, seed).unwrap();
        let client = notes_client();
        let cfg = ExploreConfig { budget: Budget::Steps(budget), ..Default::default() };
        let outcome = run_exploration(&mut session, &client, cfg, seed);
        (model, outcome.evidence)
    }

    fn photo_evidence(evidence: &[SummarizedTrace]) -> &SummarizedTrace {
        evidence.iter().find(|e| e.hypothesis == "attach a photo to the note").expect("photo")
    }

    #[test]
    fn draft_refuses_failed_evidence() {
        let (_, evidence) = explore_notes(7, 200);
        let mut failed = photo_evidence(&evidence).clone();
        failed.status = TraceStatus::Failed;
        let client = notes_client();
        assert!(matches!(
            draft_nl_spec(&failed, &client, 0),
            Err(SynthesisError::EvidenceNotComplete(_))
        ));
    }

    #[test]
    fn draft_is_byte_stable() {
        let (_, evidence) = explore_notes(7, 200);
        let client = notes_client();
        let a = draft_nl_spec(photo_evidence(&evidence), &client, 0).unwrap();
        let b = draft_nl_spec(photo_evidence(&evidence), &client, 0).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn translation_produces_the_expected_interaction() {
        let (_, evidence) = explore_notes(7, 200);
        let client = notes_client();
        let photo = photo_evidence(&evidence);
        let spec = draft_nl_spec(photo, &client, 0).unwrap();
        let property = translate(&spec, photo, &client).unwrap();
        let rendered = property.interaction.render();
        assert!(rendered.contains("attach_button"), "got {rendered}");
        assert!(rendered.contains("camera_option"));
        assert!(rendered.contains("shutter_button"));
        assert!(rendered.contains("back"));
        assert_eq!(property.version, 1);
        assert_eq!(property.provenance.evidence_id, photo.evidence_id);
    }

    #[test]
    fn empty_vocabulary_fails_translation_immediately() {
        let (_, evidence) = explore_notes(7, 200);
        let client = notes_client();
        let photo = photo_evidence(&evidence);
        let spec = draft_nl_spec(photo, &client, 0).unwrap();
        let mut hollow = photo.clone();
        hollow.observed_vocabulary.clear();
        assert!(matches!(
            translate(&spec, &hollow, &client),
            Err(SynthesisError::TranslationFailure(_))
        ));
    }

    #[test]
    fn out_of_vocabulary_selector_reprompts_then_fails() {
        let (_, evidence) = explore_notes(7, 200);
        let client = notes_client();
        let photo = photo_evidence(&evidence);
        let spec = draft_nl_spec(photo, &client, 0).unwrap();
        // Strip the camera screens' widgets from the vocabulary so the
        // scripted translation goes out of bounds.
        let mut constrained = photo.clone();
        constrained.observed_vocabulary.retain(|sig| {
            sig.resource_id.as_deref() != Some("camera_option")
        });
        let before = client.calls_for(crate::oracle::TaskKind::TranslateProperty);
        let result = translate(&spec, &constrained, &client);
        let after = client.calls_for(crate::oracle::TaskKind::TranslateProperty);
        assert!(matches!(result, Err(SynthesisError::TranslationFailure(_))));
        assert_eq!(after - before, 2, "one initial call plus one reprompt");
    }

    #[test]
    fn gate_accepts_faithful_property_and_rejects_wrong_ones() {
        let (model, evidence) = explore_notes(7, 200);
        let client = notes_client();
        let photo = photo_evidence(&evidence);
        let spec = draft_nl_spec(photo, &client, 0).unwrap();
        let property = translate(&spec, photo, &client).unwrap();
        assert!(source_trace_gate(&property, photo, &model).is_accepted());

        // Asserting an absent widget must be rejected by the gate.
        let mut absent = property.clone();
        absent.postcondition =
            PredicateExpr::exists(Selector::by_resource_id("recording_indicator"));
        match source_trace_gate(&absent, photo, &model) {
            GateOutcome::Rejected { reason } => {
                assert!(reason.contains("postcondition fails"), "got {reason}");
            }
            other => panic!("expected rejection, got {other:?}"),
        }

        // A precondition that never fires along the anchor is rejected.
        let mut never = property.clone();
        never.precondition = PredicateExpr::on_screen("no_such_screen");
        match source_trace_gate(&never, photo, &model) {
            GateOutcome::Rejected { reason } => {
                assert!(reason.contains("never fires"), "got {reason}");
            }
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn synthesize_all_reports_every_evidence_item() {
        let (model, evidence) = explore_notes(7, 250);
        let client = notes_client();
        let (properties, report) =
            synthesize_all(&evidence, &client, &model, &SynthesisConfig::default());
        assert_eq!(report.entries.len() >= evidence.len(), true);
        assert_eq!(report.accepted, properties.len());
        assert!(properties.iter().any(|p| p.provenance.hypothesis == "attach a photo to the note"));
        // Accepted properties satisfy the gate invariant by construction.
        for p in &properties {
            let src = evidence
                .iter()
                .find(|e| e.evidence_id == p.provenance.evidence_id)
                .expect("provenance resolves");
            assert!(source_trace_gate(p, src, &model).is_accepted());
        }
        // Provenance links exactly one evidence item and one NL spec.
        for p in &properties {
            assert!(!p.provenance.nl_precondition.is_empty());
            assert_eq!(
                evidence.iter().filter(|e| e.evidence_id == p.provenance.evidence_id).count(),
                1
            );
        }
    }

    #[test]
    fn parallel_gate_matches_sequential() {
        let (model, evidence) = explore_notes(11, 250);
        let client = notes_client();
        let (seq, _) = synthesize_all(&evidence, &client, &model, &SynthesisConfig::default());
        let client2 = notes_client();
        let (par, _) = synthesize_all(
            &evidence,
            &client2,
            &model,
            &SynthesisConfig { jobs: 4, ..Default::default() },
        );
        assert_eq!(seq, par);
    }
}
