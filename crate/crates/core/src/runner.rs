//! Property-based testing loop: randomized event generation interleaved
//! with precondition monitoring, property checking, and reproducible
//! violation reporting.
//!
//! At each state the runner collects the properties whose precondition
//! holds; with probability `p_check` it checks one of them (chosen
//! uniformly, seeded), otherwise it performs one random enabled event.

use crate::backend::{AppModel, Backend, SimulatedSession};
use crate::gui::{enabled_events, Event, GuiState};
use crate::property::{
    check_property, eval_predicate, replay_check, CheckResult, InapplicableReason, Property,
    ReplayDivergence,
};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("runner configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Replay(#[from] ReplayDivergence),
}

/// Configuration for one testing run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    /// Maximum number of performed events (random walk plus interaction
    /// events). One in-flight interaction may overrun by its own length.
    pub max_events: u64,
    /// Optional wall-clock cap checked alongside the event budget.
    pub wall_clock: Option<Duration>,
    /// Probability of attempting a property check when at least one
    /// precondition holds.
    pub p_check: f64,
    /// Reset the app after each violation so one bug does not poison
    /// subsequent checks. Off means persistent state across checks.
    pub reset_between_violations: bool,
    pub edit_corpus: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            max_events: 5_000,
            wall_clock: None,
            p_check: 0.3,
            reset_between_violations: true,
            edit_corpus: crate::gui::default_edit_corpus(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), RunnerError> {
        if !(0.0..=1.0).contains(&self.p_check) {
            return Err(RunnerError::Config(format!(
                "p_check must lie in [0, 1], got {}",
                self.p_check
            )));
        }
        Ok(())
    }
}

/// Reproducible record of one property violation. Replaying (seed, prefix,
/// interaction events) on the same app model re-derives the verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub property_id: String,
    pub property_version: u32,
    pub seed: u64,
    /// Concrete events from launch (or the last reset) to the state where
    /// the precondition held.
    pub prefix_events: Vec<Event>,
    /// Concrete interaction events the check executed.
    pub interaction_events: Vec<Event>,
    pub pre_state: GuiState,
    pub post_state: GuiState,
    pub failed_atom: String,
    /// Logical timestamp: total events performed when the verdict landed.
    pub logical_time: u64,
    pub app_name: String,
    pub fault_flags: BTreeMap<String, bool>,
}

impl ViolationReport {
    pub fn from_json(json: &str) -> Result<ViolationReport, serde_json::Error> {
        serde_json::from_str(json)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Per-property counters over one run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyStats {
    /// States where the precondition held (counted once per visited state).
    pub times_applicable: u64,
    pub times_checked: u64,
    pub satisfied: u64,
    pub violated: u64,
    pub inapplicable_aborts: u64,
}

/// Aggregated run statistics.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub seed: u64,
    pub events_performed: u64,
    pub checks_attempted: u64,
    pub violations: u64,
    pub per_property: BTreeMap<String, PropertyStats>,
    /// Dead preconditions: properties never applicable over the whole run.
    pub never_applicable: Vec<String>,
}

impl RunStats {
    /// Plain-text table for the run summary.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "seed {}  events {}  checks {}  violations {}\n",
            self.seed, self.events_performed, self.checks_attempted, self.violations
        ));
        out.push_str(&format!(
            "{:<24} {:>10} {:>8} {:>9} {:>8} {:>7}\n",
            "property", "applicable", "checked", "satisfied", "violated", "aborts"
        ));
        for (id, s) in &self.per_property {
            out.push_str(&format!(
                "{:<24} {:>10} {:>8} {:>9} {:>8} {:>7}\n",
                id, s.times_applicable, s.times_checked, s.satisfied, s.violated,
                s.inapplicable_aborts
            ));
        }
        if !self.never_applicable.is_empty() {
            out.push_str(&format!(
                "never applicable (dead preconditions): {}\n",
                self.never_applicable.join(", ")
            ));
        }
        out
    }
}

/// Runs the property-based testing loop against a fresh session over the
/// model. Returns every violation report plus run statistics.
pub fn run(
    config: &RunConfig,
    properties: &[Property],
    model: &AppModel,
) -> Result<(Vec<ViolationReport>, RunStats), RunnerError> {
    config.validate()?;
    if properties.is_empty() {
        return Err(RunnerError::Config("property set is empty".into()));
    }
    for p in properties {
        p.validate().map_err(|e| RunnerError::Config(e.to_string()))?;
    }
    let mut session = SimulatedSession::launch(model, config.seed)
        .map_err(|e| RunnerError::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut stats = RunStats { seed: config.seed, ..Default::default() };
    for p in properties {
        stats.per_property.insert(p.property_id.clone(), PropertyStats::default());
    }
    let mut reports = Vec::new();
    let started = Instant::now();

    while stats.events_performed < config.max_events {
        if let Some(limit) = config.wall_clock {
            if started.elapsed() >= limit {
                break;
            }
        }
        let state = session.current_state().clone();
        let applicable: Vec<usize> = properties
            .iter()
            .enumerate()
            .filter(|(_, p)| eval_predicate(&p.precondition, &state))
            .map(|(i, _)| i)
            .collect();
        for &i in &applicable {
            stats
                .per_property
                .get_mut(&properties[i].property_id)
                .expect("stats preallocated")
                .times_applicable += 1;
        }

        if !applicable.is_empty() && rng.gen_bool(config.p_check) {
            let property = &properties[applicable[rng.gen_range(0..applicable.len())]];
            let prefix = session.event_log().to_vec();
            stats.checks_attempted += 1;
            let result = check_property(property, &mut session, &mut rng, &config.edit_corpus);
            let entry = stats
                .per_property
                .get_mut(&property.property_id)
                .expect("stats preallocated");
            entry.times_checked += 1;
            match result {
                CheckResult::Satisfied { executed } => {
                    entry.satisfied += 1;
                    stats.events_performed += executed.len() as u64;
                }
                CheckResult::Inapplicable { reason, executed } => {
                    if matches!(reason, InapplicableReason::InteractionAbort { .. }) {
                        entry.inapplicable_aborts += 1;
                    }
                    stats.events_performed += executed.len() as u64;
                }
                CheckResult::Violated { pre, post, failed_atom, executed } => {
                    entry.violated += 1;
                    stats.violations += 1;
                    stats.events_performed += executed.len() as u64;
                    reports.push(ViolationReport {
                        property_id: property.property_id.clone(),
                        property_version: property.version,
                        seed: config.seed,
                        prefix_events: prefix,
                        interaction_events: executed,
                        pre_state: *pre,
                        post_state: *post,
                        failed_atom,
                        logical_time: stats.events_performed,
                        app_name: model.app_name.clone(),
                        fault_flags: model.fault_flags.clone(),
                    });
                    if config.reset_between_violations {
                        session.reset();
                    }
                }
            }
        } else {
            let events = enabled_events(&state, &config.edit_corpus);
            let event = events[rng.gen_range(0..events.len())].clone();
            session
                .perform(&event)
                .expect("enabled events always dispatch");
            stats.events_performed += 1;
        }
    }

    stats.never_applicable = stats
        .per_property
        .iter()
        .filter(|(_, s)| s.times_applicable == 0)
        .map(|(id, _)| id.clone())
        .collect();
    Ok((reports, stats))
}

/// Deterministically re-derives a report's verdict on the given model by
/// replaying the recorded prefix and interaction events. On the model and
/// fault flags of the original run this reproduces the violation with an
/// identical failed-atom path; on a fault-fixed build it typically returns
/// satisfied.
pub fn replay(
    report: &ViolationReport,
    property: &Property,
    model: &AppModel,
) -> Result<CheckResult, RunnerError> {
    if property.property_id != report.property_id {
        return Err(RunnerError::Config(format!(
            "report references property '{}' but '{}' was supplied",
            report.property_id, property.property_id
        )));
    }
    if model.app_name != report.app_name {
        return Err(RunnerError::Replay(ReplayDivergence(format!(
            "report was recorded on app '{}', not '{}'",
            report.app_name, model.app_name
        ))));
    }
    Ok(replay_check(
        property,
        model,
        report.seed,
        &report.prefix_events,
        &report.interaction_events,
    )?)
}
