//! Declarative run configuration: a TOML file with nested sections,
//! overridable by command-line flags (flags win). The oracle auth token is
//! only ever read from the environment, never from flags or config.

use anyhow::{anyhow, Context};
use propforge_core::pipeline::PipelineSettings;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub app: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    #[serde(default)]
    pub oracle: OracleSection,
    #[serde(default)]
    pub explore: ExploreSection,
    #[serde(default)]
    pub test: TestSection,
    #[serde(default)]
    pub refine: RefineSection,
    #[serde(default)]
    pub synth: SynthSection,
    #[serde(default)]
    pub faults: BTreeMap<String, bool>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    /// Backend spec: scripted:<path>, builtin:<name>, replay:<path>, http:<url>.
    pub spec: Option<String>,
    /// Model name for the http backend.
    pub model: Option<String>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExploreSection {
    pub budget: Option<u64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestSection {
    pub max_events: Option<u64>,
    pub p_check: Option<f64>,
    pub reset_between_violations: Option<bool>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefineSection {
    pub max_rounds: Option<usize>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub properties_per_evidence: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<FileConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("bad config {}", path.display()))
    }
}

/// Fully resolved run configuration after merging defaults, the config
/// file, and flags.
#[derive(Debug, Clone)]
pub struct EffectiveConfig {
    /// Absent only for `replay`, which defaults to the report's app.
    pub app: Option<String>,
    pub oracle: String,
    pub model: Option<String>,
    pub out: PathBuf,
    pub record: bool,
    pub fault_overrides: Vec<(String, bool)>,
    pub settings: PipelineSettings,
}

impl EffectiveConfig {
    pub fn require_app(&self) -> anyhow::Result<&str> {
        self.app
            .as_deref()
            .ok_or_else(|| anyhow!("no app configured; pass --app or set it in the config"))
    }

    pub fn merge(file: &FileConfig, cli: &crate::Cli) -> anyhow::Result<EffectiveConfig> {
        let app = cli.app.clone().or_else(|| file.app.clone());
        let oracle = cli
            .oracle
            .clone()
            .or_else(|| file.oracle.spec.clone())
            .unwrap_or_else(|| "builtin:notes".to_string());
        let model = cli.model.clone().or_else(|| file.oracle.model.clone());
        let out = cli
            .out
            .clone()
            .or_else(|| file.out.clone())
            .unwrap_or_else(|| PathBuf::from("out"));

        let defaults = PipelineSettings::default();
        let settings = PipelineSettings {
            seed: cli.seed.or(file.seed).unwrap_or(defaults.seed),
            explore_budget: cli
                .budget
                .or(file.explore.budget)
                .unwrap_or(defaults.explore_budget),
            max_events: cli
                .max_events
                .or(file.test.max_events)
                .unwrap_or(defaults.max_events),
            p_check: cli.p_check.or(file.test.p_check).unwrap_or(defaults.p_check),
            reset_between_violations: file
                .test
                .reset_between_violations
                .unwrap_or(defaults.reset_between_violations),
            jobs: cli.jobs.or(file.jobs).unwrap_or(defaults.jobs),
            max_refine_rounds: file.refine.max_rounds.unwrap_or(defaults.max_refine_rounds),
            properties_per_evidence: file
                .synth
                .properties_per_evidence
                .unwrap_or(defaults.properties_per_evidence),
        };

        // Config-file faults apply first; --fault flags win on conflicts.
        let mut fault_overrides: Vec<(String, bool)> =
            file.faults.iter().map(|(k, v)| (k.clone(), *v)).collect();
        fault_overrides.extend(crate::parse_fault_overrides(&cli.faults)?);

        Ok(EffectiveConfig {
            app,
            oracle,
            model,
            out,
            record: cli.record,
            fault_overrides,
            settings,
        })
    }
}
