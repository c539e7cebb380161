//! Deterministic scripted oracle: a rule engine over request payloads,
//! configured by a fixture file. It stands in for the LLM in hermetic tests
//! and desk-scale runs; identical requests always produce identical,
//! schema-valid responses.

use super::schema::*;
use super::{OracleBackend, OracleError, OracleRequest, OracleResponse, TaskKind};
use crate::gui::{EventData, EventType, Widget};
use crate::property::{InteractionScript, PredicateExpr};
use serde::{Deserialize, Serialize};

/// One inference rule: matched by screen id and (optionally) the presence
/// of a widget resource id. First matching rule wins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisRule {
    pub screen_id: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub requires_widget: Option<String>,
    pub items: Vec<HypothesisTemplate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisTemplate {
    pub description: String,
    /// Resource id of the triggering widget; resolved to a label per state.
    pub trigger: String,
    #[serde(default)]
    pub main: bool,
}

/// Scripted event plan for one functionality goal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub goal: String,
    pub steps: Vec<PlanStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanStep {
    pub event_type: EventType,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub target: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub data: Option<EventData>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NlSpecEntry {
    pub goal: String,
    pub precondition: String,
    pub interaction: String,
    pub postcondition: String,
    #[serde(default)]
    pub cited_steps: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationEntry {
    pub goal: String,
    pub precondition: PredicateExpr,
    pub interaction: InteractionScript,
    pub postcondition: PredicateExpr,
}

/// Condition under which a diagnosis rule fires, evaluated against the
/// diagnose request payload. Rules are tried in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosisWhen {
    /// The failing execution applied the property on a screen the source
    /// evidence never visited.
    PreScreenMismatch,
    /// The failing post state still shows one of these widgets.
    PostHasAny(Vec<String>),
    /// The failing post state shows none of these widgets.
    PostLacksAll(Vec<String>),
    GoalContains(String),
    Always,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisRule {
    pub when: DiagnosisWhen,
    pub verdict: DiagnosisVerdict,
    pub rationale: String,
    /// Only fires once at least this many refinement attempts were made.
    #[serde(default)]
    pub min_prior_attempts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementRule {
    pub goal_contains: String,
    pub component: PropertyComponent,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub new_precondition: Option<PredicateExpr>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub new_interaction: Option<InteractionScript>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub new_postcondition: Option<PredicateExpr>,
    pub rationale: String,
    #[serde(default)]
    pub min_prior_attempts: usize,
}

/// Complete scripted-oracle configuration for one app fixture.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScriptedFixture {
    pub name: String,
    #[serde(default)]
    pub hypothesis_rules: Vec<HypothesisRule>,
    #[serde(default)]
    pub plans: Vec<PlanEntry>,
    #[serde(default)]
    pub nl_specs: Vec<NlSpecEntry>,
    #[serde(default)]
    pub translations: Vec<TranslationEntry>,
    #[serde(default)]
    pub diagnosis_rules: Vec<DiagnosisRule>,
    #[serde(default)]
    pub refinement_rules: Vec<RefinementRule>,
}

impl ScriptedFixture {
    pub fn from_json(json: &str) -> Result<ScriptedFixture, OracleError> {
        serde_json::from_str(json)
            .map_err(|e| OracleError::Config(format!("bad scripted fixture: {e}")))
    }
}

/// The bundled fixture driving the notes reference app end to end.
pub fn builtin_fixture(name: &str) -> Result<ScriptedFixture, OracleError> {
    match name {
        "notes" => ScriptedFixture::from_json(include_str!("../../../../fixtures/notes_oracle.json")),
        other => Err(OracleError::Config(format!("unknown builtin fixture '{other}'"))),
    }
}

/// Deterministic rule-engine backend over a [`ScriptedFixture`].
pub struct ScriptedOracle {
    fixture: ScriptedFixture,
}

impl ScriptedOracle {
    pub fn new(fixture: ScriptedFixture) -> ScriptedOracle {
        ScriptedOracle { fixture }
    }

    pub fn from_file(path: &std::path::Path) -> Result<ScriptedOracle, OracleError> {
        let json = std::fs::read_to_string(path)
            .map_err(|e| OracleError::Config(format!("cannot read fixture {path:?}: {e}")))?;
        Ok(ScriptedOracle::new(ScriptedFixture::from_json(&json)?))
    }

    pub fn fixture(&self) -> &ScriptedFixture {
        &self.fixture
    }

    fn parse_request<T: for<'de> Deserialize<'de>>(
        task: TaskKind,
        payload: &serde_json::Value,
    ) -> Result<T, OracleError> {
        serde_json::from_value(payload.clone()).map_err(|e| OracleError::MalformedOutput {
            task,
            detail: format!("scripted oracle cannot read request: {e}"),
        })
    }

    fn label_of(widgets: &[Widget], resource_id: &str) -> Option<u32> {
        widgets
            .iter()
            .find(|w| w.resource_id.as_deref() == Some(resource_id))
            .map(|w| w.label)
    }

    fn plan_for(&self, goal: &str) -> Option<&PlanEntry> {
        self.fixture.plans.iter().find(|p| p.goal == goal)
    }

    fn infer(&self, req: InferHypothesesRequest) -> InferHypothesesResponse {
        let rule = self.fixture.hypothesis_rules.iter().find(|r| {
            r.screen_id == req.screen_id
                && r.requires_widget
                    .as_ref()
                    .map_or(true, |rid| Self::label_of(&req.widgets, rid).is_some())
        });
        let hypotheses = match rule {
            Some(rule) => rule
                .items
                .iter()
                .filter_map(|item| {
                    Self::label_of(&req.widgets, &item.trigger).map(|trigger_label| {
                        HypothesisItem {
                            description: item.description.clone(),
                            trigger_label,
                            main: item.main,
                        }
                    })
                })
                .collect(),
            None => Vec::new(),
        };
        InferHypothesesResponse { hypotheses }
    }

    fn plan(&self, req: PlanEventRequest) -> PlanEventResponse {
        let progress = req.progress as usize;
        let step = self
            .plan_for(&req.goal)
            .and_then(|p| p.steps.get(progress).or_else(|| p.steps.last()));
        match step {
            Some(step) => {
                let target_label = match (&step.target, step.event_type) {
                    (_, EventType::Back) => None,
                    (Some(rid), _) => {
                        // An absent widget resolves to label 0, which no state
                        // contains; the guard turns it into a failed step.
                        Some(Self::label_of(&req.widgets, rid).unwrap_or(0))
                    }
                    (None, _) => None,
                };
                PlanEventResponse { event_type: step.event_type, target_label, data: step.data.clone() }
            }
            None => PlanEventResponse { event_type: EventType::Back, target_label: None, data: None },
        }
    }

    fn judge(&self, req: JudgeStepRequest) -> JudgeStepResponse {
        if !req.state_changed {
            return JudgeStepResponse { outcome: StepOutcome::Fail };
        }
        let non_fail_done = req.progress as usize + 1;
        let outcome = match self.plan_for(&req.goal) {
            Some(plan) if non_fail_done >= plan.steps.len() => StepOutcome::Complete,
            Some(_) => StepOutcome::Success,
            None => StepOutcome::Success,
        };
        JudgeStepResponse { outcome }
    }

    fn summarize(&self, req: SummarizeStepRequest) -> SummarizeStepResponse {
        let count_widgets = |listing: &str| listing.lines().count().saturating_sub(1);
        SummarizeStepResponse {
            pre_summary: format!(
                "On '{}' with {} visible elements",
                req.pre_screen,
                count_widgets(&req.pre_listing)
            ),
            event_summary: format!("Performed {} toward: {}", req.event, req.goal),
            post_summary: format!(
                "On '{}' with {} visible elements",
                req.post_screen,
                count_widgets(&req.post_listing)
            ),
            diff_summary: req.mechanical_diff.clone(),
        }
    }

    fn draft(&self, req: DraftPropertyRequest) -> Result<DraftPropertyResponse, OracleError> {
        let entry = self
            .fixture
            .nl_specs
            .iter()
            .find(|e| e.goal == req.hypothesis)
            .ok_or_else(|| OracleError::MalformedOutput {
                task: TaskKind::DraftProperty,
                detail: format!("no scripted specification for goal '{}'", req.hypothesis),
            })?;
        Ok(DraftPropertyResponse {
            precondition_text: entry.precondition.clone(),
            interaction_text: entry.interaction.clone(),
            postcondition_text: entry.postcondition.clone(),
            cited_steps: entry.cited_steps.clone(),
        })
    }

    fn translate(
        &self,
        req: TranslatePropertyRequest,
    ) -> Result<TranslatePropertyResponse, OracleError> {
        let entry = self
            .fixture
            .translations
            .iter()
            .find(|e| e.goal == req.hypothesis)
            .ok_or_else(|| OracleError::MalformedOutput {
                task: TaskKind::TranslateProperty,
                detail: format!("no scripted translation for goal '{}'", req.hypothesis),
            })?;
        Ok(TranslatePropertyResponse {
            precondition: entry.precondition.clone(),
            interaction: entry.interaction.clone(),
            postcondition: entry.postcondition.clone(),
        })
    }

    fn diagnose(&self, req: DiagnoseViolationRequest) -> DiagnoseViolationResponse {
        for rule in &self.fixture.diagnosis_rules {
            if req.prior_attempts.len() < rule.min_prior_attempts {
                continue;
            }
            let hit = match &rule.when {
                DiagnosisWhen::PreScreenMismatch => {
                    !req.evidence_screens.contains(&req.report_pre_screen)
                }
                DiagnosisWhen::PostHasAny(rids) => {
                    rids.iter().any(|rid| req.report_post_resource_ids.contains(rid))
                }
                DiagnosisWhen::PostLacksAll(rids) => {
                    !rids.iter().any(|rid| req.report_post_resource_ids.contains(rid))
                }
                DiagnosisWhen::GoalContains(s) => req.hypothesis.contains(s.as_str()),
                DiagnosisWhen::Always => true,
            };
            if hit {
                return DiagnoseViolationResponse {
                    verdict: rule.verdict,
                    rationale: rule.rationale.clone(),
                };
            }
        }
        DiagnoseViolationResponse {
            verdict: DiagnosisVerdict::AutomationFailure,
            rationale: "no diagnosis rule matched the failing execution".into(),
        }
    }

    fn refine(&self, req: RefinePropertyRequest) -> Result<RefinePropertyResponse, OracleError> {
        let rule = self
            .fixture
            .refinement_rules
            .iter()
            .find(|r| {
                req.hypothesis.contains(r.goal_contains.as_str())
                    && req.prior_attempts.len() >= r.min_prior_attempts
            })
            .ok_or_else(|| OracleError::MalformedOutput {
                task: TaskKind::RefineProperty,
                detail: format!("no scripted refinement for goal '{}'", req.hypothesis),
            })?;
        Ok(RefinePropertyResponse {
            component: rule.component,
            new_precondition: rule.new_precondition.clone(),
            new_interaction: rule.new_interaction.clone(),
            new_postcondition: rule.new_postcondition.clone(),
            rationale: rule.rationale.clone(),
        })
    }
}

impl OracleBackend for ScriptedOracle {
    fn complete(&self, req: &OracleRequest) -> Result<OracleResponse, OracleError> {
        let task = req.task_kind;
        let payload = &req.context_payload;
        let result = match task {
            TaskKind::InferHypotheses => {
                serde_json::to_value(self.infer(Self::parse_request(task, payload)?))
            }
            TaskKind::PlanEvent => {
                serde_json::to_value(self.plan(Self::parse_request(task, payload)?))
            }
            TaskKind::JudgeStep => {
                serde_json::to_value(self.judge(Self::parse_request(task, payload)?))
            }
            TaskKind::SummarizeStep => {
                serde_json::to_value(self.summarize(Self::parse_request(task, payload)?))
            }
            TaskKind::DraftProperty => {
                serde_json::to_value(self.draft(Self::parse_request(task, payload)?)?)
            }
            TaskKind::TranslateProperty => {
                serde_json::to_value(self.translate(Self::parse_request(task, payload)?)?)
            }
            TaskKind::DiagnoseViolation => {
                serde_json::to_value(self.diagnose(Self::parse_request(task, payload)?))
            }
            TaskKind::RefineProperty => {
                serde_json::to_value(self.refine(Self::parse_request(task, payload)?)?)
            }
        }
        .expect("scripted responses serialize");
        Ok(OracleResponse::from_value(task, result))
    }

    fn name(&self) -> &str {
        "scripted"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{build_notes_app, Backend, NotesFaults, SimulatedSession};
    use crate::oracle::OracleClient;

    fn notes_oracle() -> OracleClient {
        OracleClient::new(Box::new(ScriptedOracle::new(builtin_fixture("notes").unwrap())))
    }

    fn notes_list_request() -> InferHypothesesRequest {
        let session =
            SimulatedSession::launch(&build_notes_app(NotesFaults::default()), 1).unwrap();
        let state = session.current_state();
        InferHypothesesRequest {
            app_name: "Pocket Notes".into(),
            screen_ids: vec!["notes_list".into()],
            screen_id: state.screen_id.clone(),
            widgets: state.widgets.clone(),
            executed_descriptions: vec![],
        }
    }

    #[test]
    fn notes_list_yields_three_hypotheses() {
        let client = notes_oracle();
        let resp = client.infer_hypotheses(&notes_list_request()).unwrap();
        let descriptions: Vec<&str> =
            resp.hypotheses.iter().map(|h| h.description.as_str()).collect();
        assert_eq!(
            descriptions,
            vec!["create a note", "open the navigation drawer", "search the notes"]
        );
        // Triggers are grounded to labels present in the state.
        for h in &resp.hypotheses {
            assert!(h.trigger_label >= 1);
        }
    }

    #[test]
    fn identical_requests_get_identical_responses() {
        let client = notes_oracle();
        let a = client.infer_hypotheses(&notes_list_request()).unwrap();
        let b = client.infer_hypotheses(&notes_list_request()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn plan_follows_script_by_progress() {
        let client = notes_oracle();
        let session =
            SimulatedSession::launch(&build_notes_app(NotesFaults::default()), 1).unwrap();
        let state = session.current_state();
        let req = PlanEventRequest {
            goal: "create a note".into(),
            screen_id: state.screen_id.clone(),
            widgets: state.widgets.clone(),
            history: vec![],
            progress: 0,
        };
        let resp = client.plan_event(&req).unwrap();
        assert_eq!(resp.event_type, EventType::Click);
        // First step targets the FAB.
        let fab = state
            .widgets
            .iter()
            .find(|w| w.resource_id.as_deref() == Some("fab_add"))
            .unwrap()
            .label;
        assert_eq!(resp.target_label, Some(fab));
    }

    #[test]
    fn judge_fails_noop_and_completes_at_plan_end() {
        let client = notes_oracle();
        let base = JudgeStepRequest {
            goal: "open the navigation drawer".into(),
            event: "click(2)".into(),
            pre_screen: "notes_list".into(),
            post_screen: "notes_list".into(),
            pre_listing: String::new(),
            post_listing: String::new(),
            state_changed: false,
            history: vec![],
            progress: 0,
        };
        assert_eq!(client.judge_step(&base).unwrap().outcome, StepOutcome::Fail);
        let changed = JudgeStepRequest { state_changed: true, ..base };
        // Single-step plan completes on its first productive step.
        assert_eq!(client.judge_step(&changed).unwrap().outcome, StepOutcome::Complete);
    }

    #[test]
    fn draft_without_fixture_entry_is_malformed_output() {
        let client = notes_oracle();
        let req = DraftPropertyRequest {
            hypothesis: "fold space and time".into(),
            steps: vec![],
            completed: true,
        };
        assert!(matches!(
            client.draft_property(&req),
            Err(OracleError::MalformedOutput { .. })
        ));
    }
}
