//! Hypothesis-guided exploration: infer functionality hypotheses per UI
//! context, execute them through a guarded plan/perform/judge loop, summarize
//! each execution into behavioral evidence, and fall back to random
//! exploration when the current context is exhausted.

use crate::backend::{Backend, ReplayAnchor};
use crate::gui::{
    enabled_events, has_unseen_evidence, signature, ui_context, Event, GuiState, UiContext,
    WidgetSignature,
};
use crate::oracle::schema::{
    HistoryItem, InferHypothesesRequest, JudgeStepRequest, PlanEventRequest, StepEvidence,
    SummarizeStepRequest,
};
use crate::oracle::OracleClient;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

pub use crate::oracle::schema::StepOutcome;

pub type HypothesisId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HypothesisStatus {
    Unexplored,
    Explored,
    Failed,
}

/// A natural-language functionality intent grounded to a concrete
/// triggering widget of the context it was inferred in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalityHypothesis {
    pub hypothesis_id: HypothesisId,
    pub description: String,
    pub trigger: WidgetSignature,
    pub origin_context: UiContext,
    pub status: HypothesisStatus,
    /// Core-functionality bit assigned by the oracle at inference time.
    pub main: bool,
}

/// Global pool of hypotheses with a context index and the executed-
/// description memory shared across states. Hypotheses are never removed;
/// status only moves from unexplored to explored or failed.
#[derive(Debug, Default, Clone)]
pub struct HypothesisPool {
    hypotheses: BTreeMap<HypothesisId, FunctionalityHypothesis>,
    by_context: BTreeMap<UiContext, Vec<HypothesisId>>,
    dedup: BTreeSet<(String, WidgetSignature, String)>,
    executed_descriptions: Vec<String>,
    next_id: HypothesisId,
}

impl HypothesisPool {
    pub fn new() -> HypothesisPool {
        HypothesisPool::default()
    }

    /// Inserts unless an equal (description, trigger, origin screen) triple
    /// already exists. Returns the new id on insertion.
    pub fn insert(
        &mut self,
        description: String,
        trigger: WidgetSignature,
        origin_context: UiContext,
        main: bool,
    ) -> Option<HypothesisId> {
        let key = (description.clone(), trigger.clone(), origin_context.screen_id.clone());
        if !self.dedup.insert(key) {
            return None;
        }
        self.next_id += 1;
        let id = self.next_id;
        self.by_context.entry(origin_context.clone()).or_default().push(id);
        self.hypotheses.insert(
            id,
            FunctionalityHypothesis {
                hypothesis_id: id,
                description,
                trigger,
                origin_context,
                status: HypothesisStatus::Unexplored,
                main,
            },
        );
        Some(id)
    }

    pub fn get(&self, id: HypothesisId) -> Option<&FunctionalityHypothesis> {
        self.hypotheses.get(&id)
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &FunctionalityHypothesis> {
        self.hypotheses.values()
    }

    /// Hypotheses inferred at `context` (exact index lookup).
    pub fn for_origin(&self, context: &UiContext) -> Vec<&FunctionalityHypothesis> {
        self.by_context
            .get(context)
            .map(|ids| ids.iter().filter_map(|id| self.hypotheses.get(id)).collect())
            .unwrap_or_default()
    }

    /// Unexplored hypotheses executable from `context`: inferred on the same
    /// screen with their trigger widget present in the context.
    pub fn candidates_for(&self, context: &UiContext) -> Vec<&FunctionalityHypothesis> {
        self.hypotheses
            .values()
            .filter(|h| {
                h.status == HypothesisStatus::Unexplored
                    && h.origin_context.screen_id == context.screen_id
                    && context.signature_set.contains(&h.trigger)
            })
            .collect()
    }

    /// Marks an execution attempt. Only unexplored hypotheses transition;
    /// the description enters the cross-state functionality memory.
    pub fn mark(&mut self, id: HypothesisId, status: HypothesisStatus) {
        if let Some(h) = self.hypotheses.get_mut(&id) {
            debug_assert_eq!(h.status, HypothesisStatus::Unexplored, "status is write-once");
            if h.status == HypothesisStatus::Unexplored {
                h.status = status;
                self.executed_descriptions.push(h.description.clone());
            }
        }
    }

    pub fn executed_descriptions(&self) -> &[String] {
        &self.executed_descriptions
    }

    pub fn count_with_status(&self, status: HypothesisStatus) -> usize {
        self.hypotheses.values().filter(|h| h.status == status).count()
    }
}

/// True iff the event can be dispatched on this state: its target label
/// exists, the widget is enabled and has the capability the event type
/// needs, and the payload shape matches the event type. A well-formed back
/// (no target, no data) is always accepted.
pub fn guard(e: &Event, s: &GuiState) -> bool {
    use crate::gui::{EventData, EventType};
    match e.event_type {
        EventType::Back => e.target.is_none() && e.data.is_none(),
        event_type => {
            let Some(label) = e.target else { return false };
            let Some(widget) = s.widget_by_label(label) else { return false };
            let cap = event_type.required_capability().expect("non-back event has capability");
            if !widget.enabled || !widget.capabilities.contains(&cap) {
                return false;
            }
            match event_type {
                EventType::Edit => matches!(e.data, Some(EventData::Text(_))),
                EventType::Swipe => matches!(e.data, Some(EventData::Direction(_))),
                _ => e.data.is_none(),
            }
        }
    }
}

/// Word-level Jaccard similarity over lowercased alphanumeric tokens.
fn jaccard(a: &str, b: &str) -> f64 {
    let tokens = |s: &str| -> BTreeSet<String> {
        s.to_lowercase()
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(str::to_string)
            .collect()
    };
    let (ta, tb) = (tokens(a), tokens(b));
    if ta.is_empty() && tb.is_empty() {
        return 1.0;
    }
    let inter = ta.intersection(&tb).count() as f64;
    let union = ta.union(&tb).count() as f64;
    inter / union
}

/// Selection score: 2·main + 2·novelty + 1·executable, where novelty is one
/// minus the highest word overlap with already-executed descriptions and
/// executable marks a trigger present in the current state.
pub fn selection_score(
    h: &FunctionalityHypothesis,
    executed: &[String],
    current_signatures: &BTreeSet<WidgetSignature>,
) -> f64 {
    let main = if h.main { 1.0 } else { 0.0 };
    let novelty = 1.0
        - executed
            .iter()
            .map(|d| jaccard(&h.description, d))
            .fold(0.0_f64, f64::max);
    let executable = if current_signatures.contains(&h.trigger) { 1.0 } else { 0.0 };
    2.0 * main + 2.0 * novelty + executable
}

/// Picks the highest-scoring unexplored candidate; ties break toward the
/// earliest-inserted hypothesis.
pub fn select_hypothesis<'a>(
    candidates: &[&'a FunctionalityHypothesis],
    executed: &[String],
    current_signatures: &BTreeSet<WidgetSignature>,
) -> Option<&'a FunctionalityHypothesis> {
    candidates
        .iter()
        .map(|h| (selection_score(h, executed, current_signatures), h))
        .fold(None, |best: Option<(f64, &FunctionalityHypothesis)>, (score, h)| match best {
            Some((best_score, best_h))
                if score < best_score
                    || (score == best_score && h.hypothesis_id > best_h.hypothesis_id) =>
            {
                best
            }
            _ => Some((score, h)),
        })
        .map(|(_, h)| h)
}

/// One executed (or guard-rejected) step of a hypothesis execution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionHistoryEntry {
    pub event: Event,
    pub outcome: StepOutcome,
    pub evidence: StepEvidence,
}

/// Ordered execution history; at most one `complete` outcome, final only.
pub type ExecutionHistory = Vec<ExecutionHistoryEntry>;

/// Final status of one summarized execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceStatus {
    Complete,
    Failed,
}

/// Behavioral evidence for one executed functionality: the five-element
/// step records, the final status, a replay anchor reproducing the
/// execution, and the vocabulary observed along it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummarizedTrace {
    pub evidence_id: String,
    pub hypothesis_id: HypothesisId,
    pub hypothesis: String,
    pub trigger: WidgetSignature,
    pub origin_screen: String,
    pub steps: Vec<StepEvidence>,
    pub status: TraceStatus,
    pub replay_anchor: ReplayAnchor,
    pub final_screen_id: String,
    /// Signatures of every widget observed in any state of the execution.
    pub observed_vocabulary: BTreeSet<WidgetSignature>,
    pub observed_screens: BTreeSet<String>,
}

impl SummarizedTrace {
    pub fn from_json(json: &str) -> Result<SummarizedTrace, serde_json::Error> {
        serde_json::from_str(json)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("evidence serializes")
    }
}

/// Exploration budget: a step count (backend events) or a wall-clock limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Budget {
    Steps(u64),
    WallClock(Duration),
}

struct BudgetMeter {
    budget: Budget,
    steps_used: u64,
    started: Instant,
}

impl BudgetMeter {
    fn new(budget: Budget) -> BudgetMeter {
        BudgetMeter { budget, steps_used: 0, started: Instant::now() }
    }

    fn remaining(&self) -> bool {
        match self.budget {
            Budget::Steps(max) => self.steps_used < max,
            Budget::WallClock(limit) => self.started.elapsed() < limit,
        }
    }

    fn spend(&mut self) {
        self.steps_used += 1;
    }
}

#[derive(Debug, Clone)]
pub struct ExploreConfig {
    pub budget: Budget,
    /// Max planned steps per hypothesis execution.
    pub step_limit: usize,
    /// Abort an execution after this many consecutive fail outcomes.
    pub max_fail_streak: usize,
    /// Max random steps before re-checking contexts.
    pub random_max_steps: usize,
    pub edit_corpus: Vec<String>,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        ExploreConfig {
            budget: Budget::Steps(200),
            step_limit: 10,
            max_fail_streak: 3,
            random_max_steps: 15,
            edit_corpus: crate::gui::default_edit_corpus(),
        }
    }
}

/// Per-run counters, serialized as the run manifest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub seed: u64,
    pub oracle_backend: String,
    pub budget_steps: Option<u64>,
    pub events_performed: u64,
    /// Distinct contexts that triggered an inference call.
    pub contexts_inferred: u64,
    /// Hypothesis items returned by the oracle.
    pub hypotheses_inferred: u64,
    /// Items grounded to a present widget and pooled.
    pub hypotheses_pooled: u64,
    /// Items dropped because their trigger label was absent.
    pub hypotheses_dropped_ungrounded: u64,
    /// Duplicates of already-pooled hypotheses.
    pub hypotheses_duplicate: u64,
    pub hypotheses_executed: u64,
    pub hypotheses_completed: u64,
    pub hypotheses_failed: u64,
    pub oracle_calls: BTreeMap<String, u64>,
}

/// Result of one exploration run.
#[derive(Debug, Clone)]
pub struct ExplorationOutcome {
    pub evidence: Vec<SummarizedTrace>,
    pub manifest: RunManifest,
    pub pool: HypothesisPool,
}

/// Instrumentation hook. `state_visited` fires at every point the explorer
/// consults the seen-context set, so an observer can independently recount
/// deduplication decisions.
pub trait ExploreObserver {
    fn state_visited(&mut self, _state: &GuiState) {}
    fn inference_issued(&mut self, _context: &UiContext) {}
}

struct NoopObserver;

impl ExploreObserver for NoopObserver {}

/// Outcome of executing one hypothesis.
#[derive(Debug, Clone)]
pub struct ExecutionRecord {
    pub trace: crate::gui::Trace,
    pub history: ExecutionHistory,
    pub completed: bool,
    pub observed_vocabulary: BTreeSet<WidgetSignature>,
    pub observed_screens: BTreeSet<String>,
}

pub struct Explorer<'a, B: Backend> {
    session: &'a mut B,
    oracle: &'a OracleClient,
    cfg: ExploreConfig,
    pool: HypothesisPool,
    seen: Vec<UiContext>,
    rng: ChaCha8Rng,
    evidence: Vec<SummarizedTrace>,
    manifest: RunManifest,
    meter: BudgetMeter,
    observer: &'a mut dyn ExploreObserver,
}

/// Runs the full exploration loop and returns the collected behavioral
/// evidence with its run manifest.
pub fn run_exploration<B: Backend>(
    session: &mut B,
    oracle: &OracleClient,
    cfg: ExploreConfig,
    seed: u64,
) -> ExplorationOutcome {
    let mut observer = NoopObserver;
    run_exploration_observed(session, oracle, cfg, seed, &mut observer)
}

pub fn run_exploration_observed<B: Backend>(
    session: &mut B,
    oracle: &OracleClient,
    cfg: ExploreConfig,
    seed: u64,
    observer: &mut dyn ExploreObserver,
) -> ExplorationOutcome {
    let meter = BudgetMeter::new(cfg.budget);
    let manifest = RunManifest {
        seed,
        oracle_backend: oracle.backend_name().to_string(),
        budget_steps: match cfg.budget {
            Budget::Steps(n) => Some(n),
            Budget::WallClock(_) => None,
        },
        ..Default::default()
    };
    let mut explorer = Explorer {
        session,
        oracle,
        cfg,
        pool: HypothesisPool::new(),
        seen: Vec::new(),
        rng: ChaCha8Rng::seed_from_u64(seed),
        evidence: Vec::new(),
        manifest,
        meter,
        observer,
    };
    explorer.run();
    let oracle_calls = oracle
        .call_counts()
        .into_iter()
        .map(|(task, count)| (task.as_str().to_string(), count))
        .collect();
    explorer.manifest.oracle_calls = oracle_calls;
    ExplorationOutcome {
        evidence: explorer.evidence,
        manifest: explorer.manifest,
        pool: explorer.pool,
    }
}

impl<'a, B: Backend> Explorer<'a, B> {
    fn whitelist(&self) -> std::collections::BTreeSet<String> {
        self.session.static_text_whitelist().clone()
    }

    fn run(&mut self) {
        while self.meter.remaining() {
            let state = self.session.current_state().clone();
            let context = self.check_context_and_infer(&state);
            let candidates = self.pool.candidates_for(&context);
            let selected = select_hypothesis(
                &candidates,
                self.pool.executed_descriptions(),
                &context.signature_set,
            )
            .map(|h| h.hypothesis_id);
            drop(candidates);
            match selected {
                Some(id) => {
                    let record = self.execute_hypothesis(id);
                    self.finish_execution(id, record);
                }
                None => {
                    let before = self.meter.steps_used;
                    self.random_explore();
                    if self.meter.steps_used == before {
                        // Nothing to execute and the walk cannot move
                        // (zero random steps or no budget): stop rather
                        // than spin.
                        break;
                    }
                }
            }
        }
    }

    /// Extracts the context, observes it, and runs inference when the state
    /// introduces unseen widget evidence. Infers at most once per context:
    /// the context enters the seen set even when the oracle output was
    /// malformed (the call was spent).
    fn check_context_and_infer(&mut self, state: &GuiState) -> UiContext {
        let whitelist = self.whitelist();
        let context = ui_context(state, &whitelist);
        self.observer.state_visited(state);
        if has_unseen_evidence(&context, &self.seen) {
            self.observer.inference_issued(&context);
            self.manifest.contexts_inferred += 1;
            self.infer_hypotheses(state, &context);
            self.seen.push(context.clone());
        }
        context
    }

    /// Requests hypotheses for the state and pools the grounded ones.
    /// Entries referencing an absent or non-interactive label are dropped.
    fn infer_hypotheses(&mut self, state: &GuiState, context: &UiContext) {
        let cues = self.session.app_cues();
        let request = InferHypothesesRequest {
            app_name: cues.app_name,
            screen_ids: cues.screen_ids,
            screen_id: state.screen_id.clone(),
            widgets: state.widgets.clone(),
            executed_descriptions: self.pool.executed_descriptions().to_vec(),
        };
        let response = match self.oracle.infer_hypotheses(&request) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("hypothesis inference failed on '{}': {e}", state.screen_id);
                return;
            }
        };
        let whitelist = self.whitelist();
        for item in response.hypotheses {
            self.manifest.hypotheses_inferred += 1;
            let widget = state
                .widget_by_label(item.trigger_label)
                .filter(|w| w.is_interactive());
            match widget {
                Some(w) => {
                    let trigger = signature(w, &whitelist);
                    match self.pool.insert(
                        item.description,
                        trigger,
                        context.clone(),
                        item.main,
                    ) {
                        Some(_) => self.manifest.hypotheses_pooled += 1,
                        None => self.manifest.hypotheses_duplicate += 1,
                    }
                }
                None => {
                    log::warn!(
                        "dropping ungrounded hypothesis '{}' (label {})",
                        item.description,
                        item.trigger_label
                    );
                    self.manifest.hypotheses_dropped_ungrounded += 1;
                }
            }
        }
    }

    /// Goal-directed interaction loop: plan, guard, perform, judge,
    /// summarize. Terminates on a complete outcome, the step limit, the
    /// fail-streak limit, or budget exhaustion. Newly reached states feed
    /// back into inference.
    pub fn execute_hypothesis(&mut self, id: HypothesisId) -> ExecutionRecord {
        let hypothesis = self.pool.get(id).expect("selected hypothesis exists").clone();
        let goal = hypothesis.description.clone();
        let whitelist = self.whitelist();
        let start = self.session.current_state().clone();
        let mut trace = crate::gui::Trace::new(start.clone());
        let mut history: ExecutionHistory = Vec::new();
        let mut vocabulary: BTreeSet<WidgetSignature> =
            start.widgets.iter().map(|w| signature(w, &whitelist)).collect();
        let mut screens: BTreeSet<String> = [start.screen_id.clone()].into();
        let mut fail_streak = 0usize;
        let mut progress = 0u64;
        let mut completed = false;

        while history.len() < self.cfg.step_limit && self.meter.remaining() {
            let pre = self.session.current_state().clone();
            let plan = self.oracle.plan_event(&PlanEventRequest {
                goal: goal.clone(),
                screen_id: pre.screen_id.clone(),
                widgets: pre.widgets.clone(),
                history: recent_history(&history),
                progress,
            });
            let event = match plan {
                Ok(p) => Event { event_type: p.event_type, target: p.target_label, data: p.data },
                Err(e) => {
                    log::warn!("event planning failed for '{goal}': {e}");
                    let entry = rejected_step(&pre, None, "event planning produced no usable event");
                    history.push(entry);
                    fail_streak += 1;
                    if fail_streak >= self.cfg.max_fail_streak {
                        break;
                    }
                    continue;
                }
            };

            if !guard(&event, &pre) {
                let entry = rejected_step(&pre, Some(&event), "event rejected by guard");
                history.push(entry);
                fail_streak += 1;
                if fail_streak >= self.cfg.max_fail_streak {
                    break;
                }
                continue;
            }

            let post = match self.session.perform(&event) {
                Ok(s) => s,
                Err(e) => {
                    // The guard should make this unreachable; record and go on.
                    let entry =
                        rejected_step(&pre, Some(&event), &format!("backend rejected event: {e}"));
                    history.push(entry);
                    fail_streak += 1;
                    if fail_streak >= self.cfg.max_fail_streak {
                        break;
                    }
                    continue;
                }
            };
            self.meter.spend();
            self.manifest.events_performed += 1;

            // Newly reached states feed the hypothesis pool and seen set.
            self.check_context_and_infer(&post);
            for w in &post.widgets {
                vocabulary.insert(signature(w, &whitelist));
            }
            screens.insert(post.screen_id.clone());

            let state_changed = !pre.same_view(&post);
            let outcome = self
                .oracle
                .judge_step(&JudgeStepRequest {
                    goal: goal.clone(),
                    event: event.render(),
                    pre_screen: pre.screen_id.clone(),
                    post_screen: post.screen_id.clone(),
                    pre_listing: pre.render_listing(),
                    post_listing: post.render_listing(),
                    state_changed,
                    history: recent_history(&history),
                    progress,
                })
                .map(|r| r.outcome)
                .unwrap_or(StepOutcome::Fail);
            if outcome != StepOutcome::Fail {
                progress += 1;
            }

            let evidence = self.summarize_step(&goal, &pre, &event, &post, outcome);
            trace.transitions.push(crate::gui::Transition {
                pre: pre.clone(),
                event: event.clone(),
                post: post.clone(),
            });
            history.push(ExecutionHistoryEntry { event, outcome, evidence });

            match outcome {
                StepOutcome::Complete => {
                    completed = true;
                    break;
                }
                StepOutcome::Fail => {
                    fail_streak += 1;
                    if fail_streak >= self.cfg.max_fail_streak {
                        break;
                    }
                }
                StepOutcome::Success => {
                    fail_streak = 0;
                }
            }
        }

        ExecutionRecord {
            trace,
            history,
            completed,
            observed_vocabulary: vocabulary,
            observed_screens: screens,
        }
    }

    /// Oracle-phrased five-element step record, with a mechanical fallback
    /// when the oracle output is malformed.
    fn summarize_step(
        &self,
        goal: &str,
        pre: &GuiState,
        event: &Event,
        post: &GuiState,
        outcome: StepOutcome,
    ) -> StepEvidence {
        let diff = mechanical_diff(pre, post);
        let request = SummarizeStepRequest {
            goal: goal.to_string(),
            event: event.render(),
            pre_screen: pre.screen_id.clone(),
            post_screen: post.screen_id.clone(),
            pre_listing: pre.render_listing(),
            post_listing: post.render_listing(),
            mechanical_diff: diff.clone(),
            outcome,
        };
        match self.oracle.summarize_step(&request) {
            Ok(r) => StepEvidence {
                pre_summary: r.pre_summary,
                event_summary: r.event_summary,
                post_summary: r.post_summary,
                state_diff_summary: r.diff_summary,
                outcome,
            },
            Err(e) => {
                log::warn!("step summarization failed, using mechanical fallback: {e}");
                StepEvidence {
                    pre_summary: mechanical_state_summary(pre),
                    event_summary: format!("Performed {}", event.render()),
                    post_summary: mechanical_state_summary(post),
                    state_diff_summary: diff,
                    outcome,
                }
            }
        }
    }

    fn finish_execution(&mut self, id: HypothesisId, record: ExecutionRecord) {
        let hypothesis = self.pool.get(id).expect("hypothesis exists").clone();
        let status =
            if record.completed { HypothesisStatus::Explored } else { HypothesisStatus::Failed };
        self.pool.mark(id, status);
        self.manifest.hypotheses_executed += 1;
        match status {
            HypothesisStatus::Explored => self.manifest.hypotheses_completed += 1,
            _ => self.manifest.hypotheses_failed += 1,
        }
        let evidence_id = format!("e{:04}", self.evidence.len() + 1);
        let final_screen_id = record.trace.final_state().screen_id.clone();
        self.evidence.push(SummarizedTrace {
            evidence_id,
            hypothesis_id: id,
            hypothesis: hypothesis.description,
            trigger: hypothesis.trigger,
            origin_screen: hypothesis.origin_context.screen_id,
            steps: record.history.iter().map(|h| h.evidence.clone()).collect(),
            status: if record.completed { TraceStatus::Complete } else { TraceStatus::Failed },
            replay_anchor: ReplayAnchor {
                seed: self.session.seed(),
                events: self.session.event_log().to_vec(),
            },
            final_screen_id,
            observed_vocabulary: record.observed_vocabulary,
            observed_screens: record.observed_screens,
        });
    }

    /// Uniformly random seeded events until a context with unexplored
    /// hypotheses or unseen evidence is reached, or `random_max_steps` runs
    /// out. Inference itself happens back in the main loop.
    pub fn random_explore(&mut self) -> GuiState {
        let whitelist = self.whitelist();
        for _ in 0..self.cfg.random_max_steps {
            if !self.meter.remaining() {
                break;
            }
            let state = self.session.current_state().clone();
            let events = enabled_events(&state, &self.cfg.edit_corpus);
            let event = events[self.rng.gen_range(0..events.len())].clone();
            if self.session.perform(&event).is_ok() {
                self.meter.spend();
                self.manifest.events_performed += 1;
            }
            let reached = self.session.current_state().clone();
            let context = ui_context(&reached, &whitelist);
            self.observer.state_visited(&reached);
            if has_unseen_evidence(&context, &self.seen)
                || !self.pool.candidates_for(&context).is_empty()
            {
                break;
            }
        }
        self.session.current_state().clone()
    }
}

/// Most recent history entries shipped in oracle payloads; long executions
/// stay bounded the way a prompt context window would.
const HISTORY_WINDOW: usize = 20;

fn recent_history(history: &ExecutionHistory) -> Vec<HistoryItem> {
    history
        .iter()
        .rev()
        .take(HISTORY_WINDOW)
        .rev()
        .map(|entry| HistoryItem { event: entry.event.render(), outcome: entry.outcome })
        .collect()
}

fn mechanical_state_summary(s: &GuiState) -> String {
    format!(
        "On '{}' with {} widgets ({} interactive)",
        s.screen_id,
        s.widgets.len(),
        s.interactive_widgets().count()
    )
}

fn rejected_step(pre: &GuiState, event: Option<&Event>, why: &str) -> ExecutionHistoryEntry {
    let rendered = event.map(Event::render).unwrap_or_else(|| "<no event>".to_string());
    ExecutionHistoryEntry {
        event: event.cloned().unwrap_or_else(Event::back),
        outcome: StepOutcome::Fail,
        evidence: StepEvidence {
            pre_summary: mechanical_state_summary(pre),
            event_summary: format!("{rendered} ({why})"),
            post_summary: mechanical_state_summary(pre),
            state_diff_summary: "no visible change".to_string(),
            outcome: StepOutcome::Fail,
        },
    }
}

/// Mechanically derived widget-set and content deltas between two states.
pub fn mechanical_diff(pre: &GuiState, post: &GuiState) -> String {
    if pre.same_view(post) {
        return "no visible change".to_string();
    }
    let widget_lines = |s: &GuiState| -> BTreeSet<String> {
        s.widgets
            .iter()
            .map(|w| {
                format!(
                    "{:?} id={} text={:?} desc={:?}",
                    w.widget_kind,
                    w.resource_id.as_deref().unwrap_or("-"),
                    w.text.as_deref().unwrap_or(""),
                    w.description.as_deref().unwrap_or("")
                )
            })
            .collect()
    };
    let (pre_set, post_set) = (widget_lines(pre), widget_lines(post));
    let mut parts = Vec::new();
    if pre.screen_id != post.screen_id {
        parts.push(format!("screen: {} -> {}", pre.screen_id, post.screen_id));
    }
    let added: Vec<&String> = post_set.difference(&pre_set).collect();
    if !added.is_empty() {
        parts.push(format!(
            "appeared: [{}]",
            added.iter().map(|s| s.as_str()).collect::<Vec<_>>().join("; ")
        ));
    }
    let removed: Vec<&String> = pre_set.difference(&post_set).collect();
    if !removed.is_empty() {
        parts.push(format!(
            "disappeared: [{}]",
            removed.iter().map(|s| s.as_str()).collect::<Vec<_>>().join("; ")
        ));
    }
    if pre.content_snapshot != post.content_snapshot && parts.is_empty() {
        parts.push("visible content changed".to_string());
    }
    if parts.is_empty() {
        parts.push("widget state changed".to_string());
    }
    parts.join("; ")
}

/// Validates the execution-history invariant: at most one complete outcome,
/// and only as the final entry.
pub fn history_is_well_formed(history: &ExecutionHistory) -> bool {
    let completes = history.iter().filter(|h| h.outcome == StepOutcome::Complete).count();
    match completes {
        0 => true,
        1 => history.last().map(|h| h.outcome == StepOutcome::Complete).unwrap_or(false),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{build_notes_app, NotesFaults, SimulatedSession};
    use crate::gui::{Capability, EventData, SwipeDirection, Widget, WidgetKind};
    use crate::oracle::{builtin_fixture, OracleClient, ScriptedOracle};

    fn notes_client() -> OracleClient {
        OracleClient::new(Box::new(ScriptedOracle::new(builtin_fixture("notes").unwrap())))
    }

    fn test_widget(label: u32, caps: &[Capability], enabled: bool) -> Widget {
        Widget {
            widget_id: format!("w{label}"),
            widget_kind: WidgetKind::Button,
            resource_id: Some(format!("rid{label}")),
            text: None,
            description: None,
            label,
            capabilities: caps.iter().copied().collect(),
            enabled,
        }
    }

    fn test_state(widgets: Vec<Widget>) -> GuiState {
        GuiState {
            screen_id: "s".into(),
            widgets,
            content_snapshot: serde_json::json!({}),
            monotonic_step: 0,
        }
    }

    #[test]
    fn guard_accepts_click_on_enabled_clickable() {
        let s = test_state(vec![test_widget(1, &[Capability::Clickable], true)]);
        assert!(guard(&Event::click(1), &s));
    }

    #[test]
    fn guard_rejects_edit_on_non_editable() {
        let s = test_state(vec![test_widget(1, &[Capability::Clickable], true)]);
        assert!(!guard(&Event::edit(1, "x"), &s));
    }

    #[test]
    fn guard_rejects_disabled_and_absent_targets() {
        let s = test_state(vec![test_widget(1, &[Capability::Clickable], false)]);
        assert!(!guard(&Event::click(1), &s));
        assert!(!guard(&Event::click(7), &s));
    }

    #[test]
    fn guard_accepts_well_formed_back_only() {
        let s = test_state(vec![]);
        assert!(guard(&Event::back(), &s));
        let mut bad = Event::back();
        bad.target = Some(1);
        assert!(!guard(&bad, &s));
    }

    #[test]
    fn guard_enforces_payload_shape() {
        let s = test_state(vec![test_widget(
            1,
            &[Capability::Editable, Capability::Swipeable, Capability::Clickable],
            true,
        )]);
        // Edit without text data.
        let mut edit = Event::click(1);
        edit.event_type = crate::gui::EventType::Edit;
        assert!(!guard(&edit, &s));
        // Swipe with proper direction.
        assert!(guard(&Event::swipe(1, SwipeDirection::Up), &s));
        // Click carrying stray data.
        let mut click = Event::click(1);
        click.data = Some(EventData::Text("x".into()));
        assert!(!guard(&click, &s));
    }

    #[test]
    fn every_enabled_event_passes_guard() {
        // Event-space closure on a kitchen-sink state.
        let s = test_state(vec![
            test_widget(1, &[Capability::Clickable], true),
            test_widget(2, &[Capability::Editable], true),
            test_widget(3, &[Capability::Swipeable, Capability::LongClickable], true),
            test_widget(4, &[], true),
        ]);
        for e in enabled_events(&s, &crate::gui::default_edit_corpus()) {
            assert!(guard(&e, &s), "event {e:?} failed guard");
        }
    }

    fn make_hypothesis(id: u32, description: &str, main: bool, trigger_rid: &str) -> FunctionalityHypothesis {
        let trigger = WidgetSignature {
            widget_kind: WidgetKind::Button,
            resource_id: Some(trigger_rid.to_string()),
            filtered_text: String::new(),
            description: None,
        };
        FunctionalityHypothesis {
            hypothesis_id: id,
            description: description.to_string(),
            trigger,
            origin_context: UiContext { screen_id: "s".into(), signature_set: BTreeSet::new() },
            status: HypothesisStatus::Unexplored,
            main,
        }
    }

    #[test]
    fn selection_prefers_present_trigger() {
        let a = make_hypothesis(1, "do alpha", false, "absent");
        let b = make_hypothesis(2, "do beta", false, "present");
        let current: BTreeSet<WidgetSignature> = [b.trigger.clone()].into();
        let chosen = select_hypothesis(&[&a, &b], &[], &current).unwrap();
        assert_eq!(chosen.hypothesis_id, 2);
    }

    #[test]
    fn selection_penalizes_duplicate_descriptions() {
        let a = make_hypothesis(1, "create a note", false, "present");
        let b = make_hypothesis(2, "share the note", false, "present");
        let current: BTreeSet<WidgetSignature> = [a.trigger.clone()].into();
        let executed = vec!["create a note".to_string()];
        let chosen = select_hypothesis(&[&a, &b], &executed, &current).unwrap();
        assert_eq!(chosen.hypothesis_id, 2, "novelty 0 for the repeated description");
    }

    #[test]
    fn selection_ties_break_by_insertion_order() {
        let a = make_hypothesis(1, "alpha", false, "present");
        let b = make_hypothesis(2, "beta", false, "present");
        let current: BTreeSet<WidgetSignature> = [a.trigger.clone()].into();
        let chosen = select_hypothesis(&[&b, &a], &[], &current).unwrap();
        assert_eq!(chosen.hypothesis_id, 1);
    }

    #[test]
    fn pool_dedups_and_is_monotonic() {
        let mut pool = HypothesisPool::new();
        let ctx = UiContext { screen_id: "s".into(), signature_set: BTreeSet::new() };
        let sig = WidgetSignature {
            widget_kind: WidgetKind::Button,
            resource_id: Some("x".into()),
            filtered_text: String::new(),
            description: None,
        };
        let id = pool.insert("do it".into(), sig.clone(), ctx.clone(), true).unwrap();
        assert!(pool.insert("do it".into(), sig.clone(), ctx.clone(), false).is_none());
        assert_eq!(pool.len(), 1);
        pool.mark(id, HypothesisStatus::Explored);
        assert_eq!(pool.get(id).unwrap().status, HypothesisStatus::Explored);
        assert_eq!(pool.executed_descriptions(), &["do it".to_string()]);
    }

    #[test]
    fn mechanical_diff_reports_no_change() {
        let s = test_state(vec![test_widget(1, &[Capability::Clickable], true)]);
        assert_eq!(mechanical_diff(&s, &s), "no visible change");
    }

    #[test]
    fn mechanical_diff_reports_appearances() {
        let a = test_state(vec![test_widget(1, &[Capability::Clickable], true)]);
        let b = test_state(vec![
            test_widget(1, &[Capability::Clickable], true),
            test_widget(2, &[Capability::Editable], true),
        ]);
        let diff = mechanical_diff(&a, &b);
        assert!(diff.contains("appeared"));
        assert!(diff.contains("rid2"));
    }

    #[test]
    fn zero_budget_explores_nothing() {
        let model = build_notes_app(NotesFaults::default());
        let mut session = SimulatedSession::launch(&model, 1).unwrap();
        let client = notes_client();
        let cfg = ExploreConfig { budget: Budget::Steps(0), ..Default::default() };
        let outcome = run_exploration(&mut session, &client, cfg, 1);
        assert!(outcome.evidence.is_empty());
        assert_eq!(outcome.manifest.events_performed, 0);
        assert_eq!(client.calls_for(crate::oracle::TaskKind::InferHypotheses), 0);
    }

    #[test]
    fn exploration_collects_create_and_photo_evidence() {
        let model = build_notes_app(NotesFaults::default());
        let mut session = SimulatedSession::launch(&model, 7).unwrap();
        let client = notes_client();
        let cfg = ExploreConfig { budget: Budget::Steps(200), ..Default::default() };
        let outcome = run_exploration(&mut session, &client, cfg, 7);
        let hypotheses: Vec<&str> =
            outcome.evidence.iter().map(|e| e.hypothesis.as_str()).collect();
        assert!(hypotheses.contains(&"create a note"), "got {hypotheses:?}");
        assert!(hypotheses.contains(&"attach a photo to the note"), "got {hypotheses:?}");
        let photo = outcome
            .evidence
            .iter()
            .find(|e| e.hypothesis == "attach a photo to the note")
            .unwrap();
        assert_eq!(photo.status, TraceStatus::Complete);
        assert_eq!(photo.steps.len(), 4);
    }

    #[test]
    fn exploration_is_deterministic() {
        let model = build_notes_app(NotesFaults::default());
        let run = || {
            let mut session = SimulatedSession::launch(&model, 5).unwrap();
            let client = notes_client();
            let cfg = ExploreConfig { budget: Budget::Steps(120), ..Default::default() };
            let outcome = run_exploration(&mut session, &client, cfg, 5);
            serde_json::to_string(&outcome.evidence).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn create_note_completes_in_three_steps() {
        let model = build_notes_app(NotesFaults::default());
        let mut session = SimulatedSession::launch(&model, 3).unwrap();
        let client = notes_client();
        let cfg = ExploreConfig { budget: Budget::Steps(50), ..Default::default() };
        let outcome = run_exploration(&mut session, &client, cfg, 3);
        let create =
            outcome.evidence.iter().find(|e| e.hypothesis == "create a note").unwrap();
        assert_eq!(create.status, TraceStatus::Complete);
        assert_eq!(create.steps.len(), 3);
        assert_eq!(create.steps.last().unwrap().outcome, StepOutcome::Complete);
    }

    #[test]
    fn step_limit_one_fails_multi_step_goal() {
        let model = build_notes_app(NotesFaults::default());
        let mut session = SimulatedSession::launch(&model, 3).unwrap();
        let client = notes_client();
        let cfg = ExploreConfig { budget: Budget::Steps(30), step_limit: 1, ..Default::default() };
        let outcome = run_exploration(&mut session, &client, cfg, 3);
        let create = outcome.evidence.iter().find(|e| e.hypothesis == "create a note");
        if let Some(create) = create {
            assert_eq!(create.status, TraceStatus::Failed);
        }
        assert!(outcome.evidence.iter().all(|e| e.steps.len() <= 1));
    }

    #[test]
    fn ungrounded_hypotheses_are_dropped() {
        struct BadLabelOracle;
        impl crate::oracle::OracleBackend for BadLabelOracle {
            fn complete(
                &self,
                req: &crate::oracle::OracleRequest,
            ) -> Result<crate::oracle::OracleResponse, crate::oracle::OracleError> {
                use crate::oracle::TaskKind;
                let result = match req.task_kind {
                    TaskKind::InferHypotheses => serde_json::json!({
                        "hypotheses": [
                            {"description": "use the phantom widget", "trigger_label": 99, "main": true}
                        ]
                    }),
                    _ => serde_json::json!({"outcome": "fail"}),
                };
                Ok(crate::oracle::OracleResponse::from_value(req.task_kind, result))
            }
            fn name(&self) -> &str {
                "bad-label"
            }
        }
        let model = build_notes_app(NotesFaults::default());
        let mut session = SimulatedSession::launch(&model, 1).unwrap();
        let client = OracleClient::new(Box::new(BadLabelOracle));
        let cfg = ExploreConfig { budget: Budget::Steps(5), ..Default::default() };
        let outcome = run_exploration(&mut session, &client, cfg, 1);
        assert_eq!(outcome.manifest.hypotheses_dropped_ungrounded, outcome.manifest.hypotheses_inferred);
        assert_eq!(outcome.pool.len(), 0);
    }

    #[test]
    fn identical_context_revisits_issue_no_inference_calls() {
        let model = build_notes_app(NotesFaults::default());
        let mut session = SimulatedSession::launch(&model, 2).unwrap();
        let client = notes_client();
        let cfg = ExploreConfig { budget: Budget::Steps(150), ..Default::default() };
        let outcome = run_exploration(&mut session, &client, cfg, 2);
        let calls = client.calls_for(crate::oracle::TaskKind::InferHypotheses);
        assert_eq!(calls, outcome.manifest.contexts_inferred);
    }

    #[test]
    fn evidence_replay_anchor_reproduces_final_screen() {
        let model = build_notes_app(NotesFaults::default());
        let mut session = SimulatedSession::launch(&model, 9).unwrap();
        let client = notes_client();
        let cfg = ExploreConfig { budget: Budget::Steps(100), ..Default::default() };
        let outcome = run_exploration(&mut session, &client, cfg, 9);
        assert!(!outcome.evidence.is_empty());
        for evidence in &outcome.evidence {
            let replayed = evidence.replay_anchor.replay(&model).unwrap();
            assert_eq!(
                crate::backend::Backend::current_state(&replayed).screen_id,
                evidence.final_screen_id,
                "anchor of {} diverged",
                evidence.evidence_id
            );
        }
    }

    #[test]
    fn histories_are_well_formed() {
        let entry = |outcome| ExecutionHistoryEntry {
            event: Event::back(),
            outcome,
            evidence: StepEvidence {
                pre_summary: "a".into(),
                event_summary: "b".into(),
                post_summary: "c".into(),
                state_diff_summary: "d".into(),
                outcome,
            },
        };
        assert!(history_is_well_formed(&vec![entry(StepOutcome::Success)]));
        assert!(history_is_well_formed(&vec![
            entry(StepOutcome::Success),
            entry(StepOutcome::Complete)
        ]));
        assert!(!history_is_well_formed(&vec![
            entry(StepOutcome::Complete),
            entry(StepOutcome::Success)
        ]));
        assert!(!history_is_well_formed(&vec![
            entry(StepOutcome::Complete),
            entry(StepOutcome::Complete)
        ]));
    }

    #[test]
    fn random_explore_zero_steps_keeps_state() {
        let model = build_notes_app(NotesFaults::default());
        let mut session = SimulatedSession::launch(&model, 1).unwrap();
        let client = notes_client();
        let before = crate::backend::Backend::current_state(&session).clone();
        let cfg = ExploreConfig {
            budget: Budget::Steps(100),
            random_max_steps: 0,
            ..Default::default()
        };
        let mut observer = NoopObserver;
        let mut explorer = Explorer {
            session: &mut session,
            oracle: &client,
            cfg,
            pool: HypothesisPool::new(),
            seen: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(1),
            evidence: Vec::new(),
            manifest: RunManifest::default(),
            meter: BudgetMeter::new(Budget::Steps(100)),
            observer: &mut observer,
        };
        let after = explorer.random_explore();
        assert!(before.same_view(&after));
    }

    #[test]
    fn random_walk_is_seed_deterministic() {
        let model = build_notes_app(NotesFaults::default());
        let walk = |seed: u64| {
            let mut session = SimulatedSession::launch(&model, 1).unwrap();
            let client = notes_client();
            let mut observer = NoopObserver;
            let mut explorer = Explorer {
                session: &mut session,
                oracle: &client,
                cfg: ExploreConfig {
                    budget: Budget::Steps(40),
                    random_max_steps: 40,
                    ..Default::default()
                },
                pool: HypothesisPool::new(),
                seen: Vec::new(),
                rng: ChaCha8Rng::seed_from_u64(seed),
                evidence: Vec::new(),
                manifest: RunManifest::default(),
                meter: BudgetMeter::new(Budget::Steps(40)),
                observer: &mut observer,
            };
            // Pre-seed the seen set so the walk never stops early.
            explorer.random_explore();
            crate::backend::Backend::event_log(explorer.session).to_vec()
        };
        assert_eq!(walk(4), walk(4));
        assert_ne!(walk(4), walk(5));
    }
}
