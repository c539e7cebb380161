//! Stage orchestration: explore, synthesize, test, and refine, each reading
//! the previous stage's artifacts from the output directory and writing its
//! own. The full pipeline chains all four under one seed.

use crate::artifacts::{self, ArtifactError, RefineSummary};
use crate::backend::{AppModel, SimulatedSession};
use crate::explore::{run_exploration, Budget, ExploreConfig, ExplorationOutcome};
use crate::oracle::OracleClient;
use crate::refine::{refinement_loop, structural_diff, PropertyComponent, RefinementAudit};
use crate::runner::{run as runner_run, RunConfig, RunStats, ViolationReport};
use crate::synthesis::{synthesize_all, SynthesisConfig, SynthesisReport};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("stage failure: {0}")]
    Failure(String),
}

#[derive(Debug, Clone)]
pub struct PipelineSettings {
    pub seed: u64,
    pub explore_budget: u64,
    pub max_events: u64,
    pub p_check: f64,
    pub reset_between_violations: bool,
    pub jobs: usize,
    pub max_refine_rounds: usize,
    pub properties_per_evidence: usize,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        PipelineSettings {
            seed: 0,
            explore_budget: 300,
            max_events: 5_000,
            p_check: 0.3,
            reset_between_violations: true,
            jobs: 1,
            max_refine_rounds: 2,
            properties_per_evidence: 1,
        }
    }
}

/// Explore stage: collect behavioral evidence and write it with the run
/// manifest.
pub fn stage_explore(
    model: &AppModel,
    oracle: &OracleClient,
    settings: &PipelineSettings,
    out: &Path,
) -> Result<ExplorationOutcome, StageError> {
    let mut session = SimulatedSession::launch(model, settings.seed)
        .map_err(|e| StageError::Config(e.to_string()))?;
    let cfg = ExploreConfig {
        budget: Budget::Steps(settings.explore_budget),
        ..Default::default()
    };
    let outcome = run_exploration(&mut session, oracle, cfg, settings.seed);
    artifacts::write_evidence(out, &outcome.evidence, &outcome.manifest)?;
    Ok(outcome)
}

/// Synthesis stage: read the evidence directory, draft/translate/gate, and
/// write accepted properties with the synthesis report.
pub fn stage_synth(
    model: &AppModel,
    oracle: &OracleClient,
    settings: &PipelineSettings,
    out: &Path,
) -> Result<(Vec<crate::property::Property>, SynthesisReport), StageError> {
    let (evidence, _) = artifacts::read_evidence(out)?;
    if evidence.is_empty() {
        let report = SynthesisReport::default();
        artifacts::write_synthesis_report(out, &report)?;
        return Ok((Vec::new(), report));
    }
    let cfg = SynthesisConfig {
        properties_per_evidence: settings.properties_per_evidence,
        jobs: settings.jobs,
    };
    let (properties, report) = synthesize_all(&evidence, oracle, model, &cfg);
    artifacts::write_properties(out, &properties)?;
    artifacts::write_synthesis_report(out, &report)?;
    Ok((properties, report))
}

/// Test stage: run the property-based testing loop over the latest version
/// of every property in the output directory (or an explicit set).
pub fn stage_test(
    model: &AppModel,
    settings: &PipelineSettings,
    out: &Path,
    properties: Option<Vec<crate::property::Property>>,
) -> Result<(Vec<ViolationReport>, RunStats), StageError> {
    let properties = match properties {
        Some(p) => p,
        None => {
            let dir = artifacts::properties_dir(out);
            if !dir.is_dir() {
                return Err(StageError::Config(format!(
                    "property directory {} does not exist",
                    dir.display()
                )));
            }
            artifacts::latest_versions(artifacts::read_properties(&dir)?)
        }
    };
    if properties.is_empty() {
        return Err(StageError::Config("no properties to test".into()));
    }
    let config = RunConfig {
        seed: settings.seed,
        max_events: settings.max_events,
        p_check: settings.p_check,
        reset_between_violations: settings.reset_between_violations,
        ..Default::default()
    };
    let (reports, stats) =
        runner_run(&config, &properties, model).map_err(|e| StageError::Failure(e.to_string()))?;
    artifacts::write_violation_reports(out, &reports)?;
    artifacts::write_run_stats(out, &stats)?;
    Ok((reports, stats))
}

/// Refine stage: for each property with at least one violation, run the
/// bounded diagnose/refine/verify loop on its first report. Revised
/// properties are written as new version files; all versions are retained.
pub fn stage_refine(
    model: &AppModel,
    oracle: &OracleClient,
    settings: &PipelineSettings,
    out: &Path,
) -> Result<(Vec<RefinementAudit>, RefineSummary), StageError> {
    let properties =
        artifacts::latest_versions(artifacts::read_properties(&artifacts::properties_dir(out))?);
    let (evidence, _) = artifacts::read_evidence(out)?;
    let reports = artifacts::read_violation_reports(out)?;

    let mut audits = Vec::new();
    let mut summary = RefineSummary::default();
    for property in &properties {
        let Some(report) = reports.iter().find(|r| r.property_id == property.property_id) else {
            continue;
        };
        let Some(source) =
            evidence.iter().find(|e| e.evidence_id == property.provenance.evidence_id)
        else {
            log::warn!(
                "property {} has unresolved provenance {}; skipping refinement",
                property.property_id,
                property.provenance.evidence_id
            );
            continue;
        };
        summary.properties_diagnosed += 1;
        let (refined, audit) = refinement_loop(
            property,
            source,
            report,
            model,
            oracle,
            settings.max_refine_rounds,
        );
        match audit.outcome.as_str() {
            "refined" => {
                summary.refined += 1;
                match structural_diff(property, &refined).first() {
                    Some(PropertyComponent::Precondition) => summary.modified_precondition += 1,
                    Some(PropertyComponent::Interaction) => summary.modified_interaction += 1,
                    Some(PropertyComponent::Postcondition) => summary.modified_postcondition += 1,
                    None => {}
                }
                artifacts::write_property(out, &refined)?;
            }
            "likely_bug" => summary.likely_bug += 1,
            "automation_failure" => summary.automation_failure += 1,
            _ => summary.unrefined += 1,
        }
        audits.push(audit);
    }
    artifacts::write_refine_outputs(out, &audits, &summary)?;
    Ok((audits, summary))
}

/// Outcome of a full pipeline run.
#[derive(Debug)]
pub struct PipelineOutcome {
    pub evidence_count: usize,
    pub accepted_properties: usize,
    pub violations: usize,
    pub stats: RunStats,
    pub refine_summary: RefineSummary,
}

/// Chains explore, synth, test, and refine under one shared seed.
pub fn run_pipeline(
    model: &AppModel,
    oracle: &OracleClient,
    settings: &PipelineSettings,
    out: &Path,
) -> Result<PipelineOutcome, StageError> {
    let exploration = stage_explore(model, oracle, settings, out)?;
    let (properties, _) = stage_synth(model, oracle, settings, out)?;
    if properties.is_empty() {
        return Err(StageError::Failure("synthesis accepted no properties".into()));
    }
    let (reports, stats) = stage_test(model, settings, out, Some(properties.clone()))?;
    let (_, refine_summary) = stage_refine(model, oracle, settings, out)?;
    Ok(PipelineOutcome {
        evidence_count: exploration.evidence.len(),
        accepted_properties: properties.len(),
        violations: reports.len(),
        stats,
        refine_summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{build_notes_app, NotesFaults};
    use crate::oracle::{builtin_fixture, OracleClient, ScriptedOracle};

    fn notes_client() -> OracleClient {
        OracleClient::new(Box::new(ScriptedOracle::new(builtin_fixture("notes").unwrap())))
    }

    #[test]
    fn stages_chain_through_the_output_directory() {
        let model = build_notes_app(NotesFaults::default());
        let out = tempfile::tempdir().unwrap();
        let settings = PipelineSettings {
            seed: 7,
            explore_budget: 200,
            max_events: 400,
            ..Default::default()
        };
        let client = notes_client();
        let exploration = stage_explore(&model, &client, &settings, out.path()).unwrap();
        assert!(!exploration.evidence.is_empty());
        let (properties, report) = stage_synth(&model, &client, &settings, out.path()).unwrap();
        assert!(!properties.is_empty());
        assert_eq!(report.accepted, properties.len());
        let (_reports, stats) = stage_test(&model, &settings, out.path(), None).unwrap();
        assert!(stats.events_performed > 0);
        let (_audits, _summary) = stage_refine(&model, &client, &settings, out.path()).unwrap();
    }

    #[test]
    fn test_stage_without_properties_is_a_config_error() {
        let model = build_notes_app(NotesFaults::default());
        let out = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(artifacts::properties_dir(out.path())).unwrap();
        let settings = PipelineSettings::default();
        assert!(matches!(
            stage_test(&model, &settings, out.path(), None),
            Err(StageError::Config(_))
        ));
    }
}
