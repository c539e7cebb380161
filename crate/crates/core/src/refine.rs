//! Feedback-driven property refinement: diagnose a reported violation
//! against the property's source evidence, revise exactly the imprecise
//! component, and verify the revision against both the source trace and the
//! newly observed execution.

use crate::backend::{AppModel, SimulatedSession};
use crate::explore::SummarizedTrace;
use crate::gui::{signature, WidgetSignature};
use crate::oracle::schema::{DiagnoseViolationRequest, RefinePropertyRequest};
use crate::oracle::{OracleClient, OracleError};
use crate::property::{check_property, holds_on_trace, CheckResult, Property};
use crate::runner::ViolationReport;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

pub use crate::oracle::schema::{DiagnosisVerdict, PropertyComponent};

#[derive(Debug, Error)]
pub enum RefineError {
    /// Refinement only acts on the three imprecision verdicts.
    #[error("diagnosis verdict {0:?} does not permit refinement")]
    NotImprecise(DiagnosisVerdict),
    /// The oracle kept revising a non-diagnosed component or producing
    /// ungrounded selectors after the one allowed reprompt.
    #[error("refinement failure: {0}")]
    Failure(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Triage result for one reported violation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnosis {
    pub verdict: DiagnosisVerdict,
    pub rationale: String,
    pub evidence_id: String,
    pub failed_atom: String,
}

fn report_observed_signatures(
    report: &ViolationReport,
    whitelist: &BTreeSet<String>,
) -> BTreeSet<WidgetSignature> {
    report
        .pre_state
        .widgets
        .iter()
        .chain(report.post_state.widgets.iter())
        .map(|w| signature(w, whitelist))
        .collect()
}

/// Asks the oracle which component of the property has become imprecise,
/// grounding the question in the source evidence and the failing execution.
/// Malformed output degrades to an automation-failure verdict.
pub fn diagnose(
    property: &Property,
    evidence: &SummarizedTrace,
    report: &ViolationReport,
    oracle: &OracleClient,
    prior_attempts: &[String],
) -> Diagnosis {
    let request = DiagnoseViolationRequest {
        property_line: property.render_line(),
        hypothesis: property.provenance.hypothesis.clone(),
        evidence_steps: evidence.steps.clone(),
        evidence_screens: evidence.observed_screens.iter().cloned().collect(),
        report_pre_screen: report.pre_state.screen_id.clone(),
        report_post_screen: report.post_state.screen_id.clone(),
        report_post_resource_ids: report
            .post_state
            .widgets
            .iter()
            .filter_map(|w| w.resource_id.clone())
            .collect(),
        failed_atom: report.failed_atom.clone(),
        prior_attempts: prior_attempts.to_vec(),
    };
    match oracle.diagnose_violation(&request) {
        Ok(r) => Diagnosis {
            verdict: r.verdict,
            rationale: r.rationale,
            evidence_id: evidence.evidence_id.clone(),
            failed_atom: report.failed_atom.clone(),
        },
        Err(e) => {
            log::warn!("diagnosis failed, falling back to automation_failure: {e}");
            Diagnosis {
                verdict: DiagnosisVerdict::AutomationFailure,
                rationale: format!("oracle output was unusable: {e}"),
                evidence_id: evidence.evidence_id.clone(),
                failed_atom: report.failed_atom.clone(),
            }
        }
    }
}

fn component_of(verdict: DiagnosisVerdict) -> Option<PropertyComponent> {
    match verdict {
        DiagnosisVerdict::ImprecisePrecondition => Some(PropertyComponent::Precondition),
        DiagnosisVerdict::ImpreciseInteraction => Some(PropertyComponent::Interaction),
        DiagnosisVerdict::ImprecisePostcondition => Some(PropertyComponent::Postcondition),
        _ => None,
    }
}

/// Components on which two properties structurally differ.
pub fn structural_diff(a: &Property, b: &Property) -> Vec<PropertyComponent> {
    let mut changed = Vec::new();
    if a.precondition != b.precondition {
        changed.push(PropertyComponent::Precondition);
    }
    if a.interaction != b.interaction {
        changed.push(PropertyComponent::Interaction);
    }
    if a.postcondition != b.postcondition {
        changed.push(PropertyComponent::Postcondition);
    }
    changed
}

/// Applies a minimal targeted revision: only the diagnosed component may
/// change, and its selectors must stay within the union of the evidence
/// vocabulary and the report-observed signatures. One reprompt is allowed
/// when the oracle strays.
pub fn refine(
    property: &Property,
    diagnosis: &Diagnosis,
    evidence: &SummarizedTrace,
    report: &ViolationReport,
    oracle: &OracleClient,
    whitelist: &BTreeSet<String>,
    prior_attempts: &[String],
) -> Result<Property, RefineError> {
    let Some(target) = component_of(diagnosis.verdict) else {
        return Err(RefineError::NotImprecise(diagnosis.verdict));
    };
    let mut vocabulary = evidence.observed_vocabulary.clone();
    vocabulary.extend(report_observed_signatures(report, whitelist));
    let mut screens: BTreeSet<String> = evidence.observed_screens.clone();
    screens.insert(report.pre_state.screen_id.clone());
    screens.insert(report.post_state.screen_id.clone());

    let mut attempts: Vec<String> = prior_attempts.to_vec();
    for round in 0..2 {
        let request = RefinePropertyRequest {
            property: property.clone(),
            hypothesis: property.provenance.hypothesis.clone(),
            verdict: diagnosis.verdict,
            rationale: diagnosis.rationale.clone(),
            vocabulary: vocabulary.iter().cloned().collect(),
            prior_attempts: attempts.clone(),
        };
        let response = oracle.refine_property(&request)?;

        let revised_wrong_component = response.component != target
            || (response.new_precondition.is_some() && target != PropertyComponent::Precondition)
            || (response.new_interaction.is_some() && target != PropertyComponent::Interaction)
            || (response.new_postcondition.is_some() && target != PropertyComponent::Postcondition);
        let mut candidate = property.clone();
        candidate.version = property.version + 1;
        let mut applied = false;
        match target {
            PropertyComponent::Precondition => {
                if let Some(p) = response.new_precondition.clone() {
                    candidate.precondition = p;
                    applied = true;
                }
            }
            PropertyComponent::Interaction => {
                if let Some(i) = response.new_interaction.clone() {
                    candidate.interaction = i;
                    applied = true;
                }
            }
            PropertyComponent::Postcondition => {
                if let Some(q) = response.new_postcondition.clone() {
                    candidate.postcondition = q;
                    applied = true;
                }
            }
        }

        let mut problems = Vec::new();
        if revised_wrong_component || !applied {
            problems.push(format!(
                "revision must change exactly the diagnosed component ({target:?})"
            ));
        }
        if applied {
            if let Err(e) = candidate.validate() {
                problems.push(e.to_string());
            } else {
                problems.extend(crate::synthesis::grounding_violations(
                    &candidate,
                    &vocabulary,
                    &screens,
                ));
            }
        }
        if problems.is_empty() {
            return Ok(candidate);
        }
        if round == 0 {
            attempts.push(format!("rejected revision: {}", problems.join("; ")));
        } else {
            return Err(RefineError::Failure(problems.join("; ")));
        }
    }
    unreachable!("refine loop returns within two rounds")
}

/// Outcome of verifying one refinement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyOutcome {
    Accepted,
    Rejected { reason: String },
}

impl VerifyOutcome {
    pub fn is_accepted(&self) -> bool {
        matches!(self, VerifyOutcome::Accepted)
    }
}

/// A refinement is accepted iff it changed exactly one component, still
/// holds on the source-trace anchor, and the report's execution path now
/// yields satisfied or inapplicable.
pub fn verify_refinement(
    old: &Property,
    new: &Property,
    evidence: &SummarizedTrace,
    report: &ViolationReport,
    model: &AppModel,
) -> VerifyOutcome {
    let changed = structural_diff(old, new);
    if changed.len() != 1 {
        return VerifyOutcome::Rejected {
            reason: format!("revision must change exactly one component, changed {changed:?}"),
        };
    }
    match holds_on_trace(new, &evidence.replay_anchor, model) {
        Ok(true) => {}
        Ok(false) => {
            return VerifyOutcome::Rejected { reason: "source trace broken".into() };
        }
        Err(e) => {
            return VerifyOutcome::Rejected { reason: format!("anchor stale: {e}") };
        }
    }
    // Replay the report's prefix and re-check with the revised property.
    let mut session = match SimulatedSession::launch(model, report.seed) {
        Ok(s) => s,
        Err(e) => return VerifyOutcome::Rejected { reason: format!("launch failed: {e}") },
    };
    for event in &report.prefix_events {
        use crate::backend::Backend;
        if let Err(e) = session.perform(event) {
            return VerifyOutcome::Rejected { reason: format!("report prefix diverged: {e}") };
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(report.seed ^ 0x0ddba11);
    let corpus = crate::gui::default_edit_corpus();
    match check_property(new, &mut session, &mut rng, &corpus) {
        CheckResult::Violated { failed_atom, .. } => VerifyOutcome::Rejected {
            reason: format!("still violated on the report path at {failed_atom}"),
        },
        CheckResult::Satisfied { .. } | CheckResult::Inapplicable { .. } => {
            VerifyOutcome::Accepted
        }
    }
}

/// One diagnose/refine/verify round in the audit log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementRound {
    pub round: usize,
    pub verdict: DiagnosisVerdict,
    pub rationale: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub component: Option<PropertyComponent>,
    pub accepted: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub new_version: Option<u32>,
}

/// Audit log of one refinement loop.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RefinementAudit {
    pub property_id: String,
    pub rounds: Vec<RefinementRound>,
    /// Final outcome: refined | likely_bug | automation_failure | unrefined.
    pub outcome: String,
}

/// Bounded diagnose/refine/verify loop. Stops early on an accepted
/// revision, a likely-bug verdict, or an automation failure; an exhausted
/// loop keeps the property at its last accepted version.
pub fn refinement_loop(
    property: &Property,
    evidence: &SummarizedTrace,
    report: &ViolationReport,
    model: &AppModel,
    oracle: &OracleClient,
    max_rounds: usize,
) -> (Property, RefinementAudit) {
    let mut audit =
        RefinementAudit { property_id: property.property_id.clone(), ..Default::default() };
    let mut prior_attempts: Vec<String> = Vec::new();
    let whitelist = model.static_text_whitelist.clone();

    for round in 0..max_rounds {
        let diagnosis = diagnose(property, evidence, report, oracle, &prior_attempts);
        if !diagnosis.verdict.is_imprecision() {
            audit.rounds.push(RefinementRound {
                round,
                verdict: diagnosis.verdict,
                rationale: diagnosis.rationale,
                component: None,
                accepted: false,
                reason: Some("verdict halts refinement".into()),
                new_version: None,
            });
            audit.outcome = match diagnosis.verdict {
                DiagnosisVerdict::LikelyBug => "likely_bug".into(),
                _ => "automation_failure".into(),
            };
            return (property.clone(), audit);
        }
        let component = component_of(diagnosis.verdict);
        match refine(property, &diagnosis, evidence, report, oracle, &whitelist, &prior_attempts) {
            Ok(candidate) => {
                match verify_refinement(property, &candidate, evidence, report, model) {
                    VerifyOutcome::Accepted => {
                        audit.rounds.push(RefinementRound {
                            round,
                            verdict: diagnosis.verdict,
                            rationale: diagnosis.rationale,
                            component,
                            accepted: true,
                            reason: None,
                            new_version: Some(candidate.version),
                        });
                        audit.outcome = "refined".into();
                        return (candidate, audit);
                    }
                    VerifyOutcome::Rejected { reason } => {
                        prior_attempts.push(format!(
                            "round {round}: revised {component:?} but verification rejected it: {reason}"
                        ));
                        audit.rounds.push(RefinementRound {
                            round,
                            verdict: diagnosis.verdict,
                            rationale: diagnosis.rationale,
                            component,
                            accepted: false,
                            reason: Some(reason),
                            new_version: None,
                        });
                    }
                }
            }
            Err(e) => {
                prior_attempts.push(format!("round {round}: refinement failed: {e}"));
                audit.rounds.push(RefinementRound {
                    round,
                    verdict: diagnosis.verdict,
                    rationale: diagnosis.rationale,
                    component,
                    accepted: false,
                    reason: Some(e.to_string()),
                    new_version: None,
                });
            }
        }
    }
    audit.outcome = "unrefined".into();
    (property.clone(), audit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{build_notes_app, NotesFaults};
    use crate::explore::{run_exploration, Budget, ExploreConfig};
    use crate::oracle::{builtin_fixture, OracleClient, ScriptedOracle};
    use crate::runner::{run, RunConfig};
    use crate::synthesis::{draft_nl_spec, translate};

    fn notes_client() -> OracleClient {
        OracleClient::new(Box::new(ScriptedOracle::new(builtin_fixture("notes").unwrap())))
    }

    struct Fixture {
        model: crate::backend::AppModel,
        evidence: SummarizedTrace,
        property: Property,
        report: ViolationReport,
    }

    /// Healthy-app photo property with the over-specific postcondition and
    /// a spurious violation produced by the runner.
    fn spurious_photo_fixture() -> Fixture {
        let model = build_notes_app(NotesFaults::default());
        let client = notes_client();
        let mut session = crate::backend::SimulatedSession::launch(&model, 7).unwrap();
        let outcome = run_exploration(
            &mut session,
            &client,
            ExploreConfig { budget: Budget::Steps(200), ..Default::default() },
            7,
        );
        let evidence = outcome
            .evidence
            .iter()
            .find(|e| e.hypothesis == "attach a photo to the note")
            .expect("photo evidence")
            .clone();
        let spec = draft_nl_spec(&evidence, &client, 0).unwrap();
        let property = translate(&spec, &evidence, &client).unwrap();

        let mut report = None;
        for seed in 0..20 {
            let config = RunConfig { seed, max_events: 4_000, ..Default::default() };
            let (reports, _) = run(&config, &[property.clone()], &model).unwrap();
            if let Some(r) = reports.into_iter().next() {
                report = Some(r);
                break;
            }
        }
        Fixture { model, evidence, property, report: report.expect("a spurious violation occurs") }
    }

    #[test]
    fn spurious_photo_violation_is_diagnosed_and_refined() {
        let fixture = spurious_photo_fixture();
        let client = notes_client();
        let diagnosis =
            diagnose(&fixture.property, &fixture.evidence, &fixture.report, &client, &[]);
        assert_eq!(diagnosis.verdict, DiagnosisVerdict::ImprecisePostcondition);

        let whitelist = fixture.model.static_text_whitelist.clone();
        let refined = refine(
            &fixture.property,
            &diagnosis,
            &fixture.evidence,
            &fixture.report,
            &client,
            &whitelist,
            &[],
        )
        .unwrap();
        assert_eq!(refined.version, 2);
        assert_eq!(structural_diff(&fixture.property, &refined), vec![
            PropertyComponent::Postcondition
        ]);
        assert!(verify_refinement(
            &fixture.property,
            &refined,
            &fixture.evidence,
            &fixture.report,
            &fixture.model
        )
        .is_accepted());
    }

    #[test]
    fn refine_refuses_non_imprecision_verdicts() {
        let fixture = spurious_photo_fixture();
        let client = notes_client();
        let diagnosis = Diagnosis {
            verdict: DiagnosisVerdict::LikelyBug,
            rationale: "real bug".into(),
            evidence_id: fixture.evidence.evidence_id.clone(),
            failed_atom: fixture.report.failed_atom.clone(),
        };
        let whitelist = fixture.model.static_text_whitelist.clone();
        assert!(matches!(
            refine(
                &fixture.property,
                &diagnosis,
                &fixture.evidence,
                &fixture.report,
                &client,
                &whitelist,
                &[]
            ),
            Err(RefineError::NotImprecise(_))
        ));
    }

    #[test]
    fn verify_rejects_multi_component_revisions() {
        let fixture = spurious_photo_fixture();
        let mut double = fixture.property.clone();
        double.version += 1;
        double.precondition = crate::property::PredicateExpr::on_screen("note_edit");
        double.postcondition = crate::property::PredicateExpr::on_screen("note_edit");
        match verify_refinement(
            &fixture.property,
            &double,
            &fixture.evidence,
            &fixture.report,
            &fixture.model,
        ) {
            VerifyOutcome::Rejected { reason } => {
                assert!(reason.contains("exactly one component"), "got {reason}");
            }
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn verify_rejects_source_trace_breakers() {
        let fixture = spurious_photo_fixture();
        let mut breaker = fixture.property.clone();
        breaker.version += 1;
        breaker.postcondition = crate::property::PredicateExpr::exists(
            crate::property::Selector::by_resource_id("recording_indicator"),
        );
        match verify_refinement(
            &fixture.property,
            &breaker,
            &fixture.evidence,
            &fixture.report,
            &fixture.model,
        ) {
            VerifyOutcome::Rejected { reason } => {
                assert!(reason.contains("source trace broken"), "got {reason}");
            }
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn refinement_loop_accepts_in_one_round_and_keeps_versions_monotone() {
        let fixture = spurious_photo_fixture();
        let client = notes_client();
        let (refined, audit) = refinement_loop(
            &fixture.property,
            &fixture.evidence,
            &fixture.report,
            &fixture.model,
            &client,
            2,
        );
        assert_eq!(audit.outcome, "refined");
        assert_eq!(audit.rounds.len(), 1);
        assert!(refined.version > fixture.property.version);
        // The refined property still holds on the source anchor.
        assert!(holds_on_trace(&refined, &fixture.evidence.replay_anchor, &fixture.model).unwrap());
    }

    #[test]
    fn refinement_loop_zero_rounds_is_a_noop() {
        let fixture = spurious_photo_fixture();
        let client = notes_client();
        let (same, audit) = refinement_loop(
            &fixture.property,
            &fixture.evidence,
            &fixture.report,
            &fixture.model,
            &client,
            0,
        );
        assert_eq!(same, fixture.property);
        assert_eq!(audit.outcome, "unrefined");
        assert!(audit.rounds.is_empty());
    }

    #[test]
    fn bug_violation_halts_refinement_as_likely_bug() {
        // Produce a true-bug report on the fault-injected build.
        let faulty =
            build_notes_app(NotesFaults { audio_blocks_photo: true, ..Default::default() });
        let fixture = spurious_photo_fixture();
        let client = notes_client();
        let mut bug_report = None;
        for seed in 0..20 {
            let config = RunConfig { seed, max_events: 4_000, ..Default::default() };
            let (reports, _) = run(&config, &[fixture.property.clone()], &faulty).unwrap();
            if let Some(r) = reports.iter().find(|r| {
                !r.post_state.widgets.iter().any(|w| {
                    matches!(
                        w.resource_id.as_deref(),
                        Some("attachment_thumbnail") | Some("attachment_icon")
                    )
                })
            }) {
                bug_report = Some(r.clone());
                break;
            }
        }
        let bug_report = bug_report.expect("fault triggers within budget");
        let (unchanged, audit) = refinement_loop(
            &fixture.property,
            &fixture.evidence,
            &bug_report,
            &faulty,
            &client,
            2,
        );
        assert_eq!(audit.outcome, "likely_bug");
        assert_eq!(unchanged, fixture.property);
    }
}
