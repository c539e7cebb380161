//! Typed request/response payloads for each oracle task. Every response the
//! engine consumes must parse into one of these; downstream modules never
//! read raw oracle text.

use crate::gui::{EventData, EventType, Widget, WidgetSignature};
use crate::property::{InteractionScript, PredicateExpr, Property};
use serde::{Deserialize, Serialize};

/// Outcome label the oracle assigns to one executed step: meaningful
/// progress, an unproductive event, or goal completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepOutcome {
    Success,
    Fail,
    Complete,
}

/// Triage verdict for a reported violation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosisVerdict {
    ImprecisePrecondition,
    ImpreciseInteraction,
    ImprecisePostcondition,
    LikelyBug,
    AutomationFailure,
}

impl DiagnosisVerdict {
    /// True for the three verdicts refinement may act on.
    pub fn is_imprecision(self) -> bool {
        matches!(
            self,
            DiagnosisVerdict::ImprecisePrecondition
                | DiagnosisVerdict::ImpreciseInteraction
                | DiagnosisVerdict::ImprecisePostcondition
        )
    }
}

/// Which property component a refinement changes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropertyComponent {
    Precondition,
    Interaction,
    Postcondition,
}

/// One prior (event, outcome) pair of the current execution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryItem {
    pub event: String,
    pub outcome: StepOutcome,
}

/// Five-element record of one executed step, as shipped in evidence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepEvidence {
    pub pre_summary: String,
    pub event_summary: String,
    pub post_summary: String,
    pub state_diff_summary: String,
    pub outcome: StepOutcome,
}

// --- infer_hypotheses ---

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferHypothesesRequest {
    pub app_name: String,
    pub screen_ids: Vec<String>,
    pub screen_id: String,
    pub widgets: Vec<Widget>,
    /// Cross-state functionality memory: descriptions already executed.
    pub executed_descriptions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisItem {
    pub description: String,
    pub trigger_label: u32,
    /// Whether the oracle considers this a core app behavior.
    pub main: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferHypothesesResponse {
    pub hypotheses: Vec<HypothesisItem>,
}

// --- plan_event ---

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEventRequest {
    pub goal: String,
    pub screen_id: String,
    pub widgets: Vec<Widget>,
    /// Recent execution history (bounded window).
    pub history: Vec<HistoryItem>,
    /// Count of non-fail steps executed so far toward the goal.
    pub progress: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEventResponse {
    pub event_type: EventType,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub target_label: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub data: Option<EventData>,
}

// --- judge_step ---

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeStepRequest {
    pub goal: String,
    pub event: String,
    pub pre_screen: String,
    pub post_screen: String,
    pub pre_listing: String,
    pub post_listing: String,
    /// False iff the event left the view unchanged.
    pub state_changed: bool,
    /// Recent execution history (bounded window).
    pub history: Vec<HistoryItem>,
    /// Count of non-fail steps executed before this one.
    pub progress: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeStepResponse {
    pub outcome: StepOutcome,
}

// --- summarize_step ---

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummarizeStepRequest {
    pub goal: String,
    pub event: String,
    pub pre_screen: String,
    pub post_screen: String,
    pub pre_listing: String,
    pub post_listing: String,
    /// Mechanically derived widget-set and content deltas.
    pub mechanical_diff: String,
    pub outcome: StepOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummarizeStepResponse {
    pub pre_summary: String,
    pub event_summary: String,
    pub post_summary: String,
    pub diff_summary: String,
}

// --- draft_property ---

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DraftPropertyRequest {
    pub hypothesis: String,
    pub steps: Vec<StepEvidence>,
    pub completed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DraftPropertyResponse {
    pub precondition_text: String,
    pub interaction_text: String,
    pub postcondition_text: String,
    #[serde(default)]
    pub cited_steps: Vec<usize>,
}

// --- translate_property ---

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslatePropertyRequest {
    pub hypothesis: String,
    pub precondition_text: String,
    pub interaction_text: String,
    pub postcondition_text: String,
    /// Widget signatures observed in the source evidence; selectors must
    /// stay within this vocabulary.
    pub vocabulary: Vec<WidgetSignature>,
    pub observed_screens: Vec<String>,
    /// Set on the one retry after an out-of-vocabulary translation.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub retry_feedback: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslatePropertyResponse {
    pub precondition: PredicateExpr,
    pub interaction: InteractionScript,
    pub postcondition: PredicateExpr,
}

// --- diagnose_violation ---

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseViolationRequest {
    pub property_line: String,
    pub hypothesis: String,
    pub evidence_steps: Vec<StepEvidence>,
    /// Screens traversed by the source evidence execution.
    pub evidence_screens: Vec<String>,
    pub report_pre_screen: String,
    pub report_post_screen: String,
    /// Resource ids visible in the failing post state.
    pub report_post_resource_ids: Vec<String>,
    pub failed_atom: String,
    /// Earlier refinement attempts within the same loop, most recent last.
    #[serde(default)]
    pub prior_attempts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseViolationResponse {
    pub verdict: DiagnosisVerdict,
    pub rationale: String,
}

// --- refine_property ---

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinePropertyRequest {
    pub property: Property,
    pub hypothesis: String,
    pub verdict: DiagnosisVerdict,
    pub rationale: String,
    /// Union of evidence vocabulary and report-observed signatures.
    pub vocabulary: Vec<WidgetSignature>,
    #[serde(default)]
    pub prior_attempts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinePropertyResponse {
    pub component: PropertyComponent,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub new_precondition: Option<PredicateExpr>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub new_interaction: Option<InteractionScript>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub new_postcondition: Option<PredicateExpr>,
    pub rationale: String,
}
