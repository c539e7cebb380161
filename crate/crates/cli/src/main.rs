//! Batch front door: configure an app backend and a reasoning oracle, run
//! each pipeline stage (or the whole pipeline), replay violation reports,
//! and emit machine-readable artifacts.
//!
//! Exit codes: 0 ok / no violations, 1 violations found, 2 configuration
//! error, 3 stage failure.

mod config;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use config::{EffectiveConfig, FileConfig};
use propforge_core::artifacts;
use propforge_core::backend::{build_notes_app, AppModel, NotesFaults};
use propforge_core::oracle::transcript::RecordsHandle;
use propforge_core::oracle::{
    transcript_from_handle, HttpOracleBackend, HttpOracleConfig, OracleBackend, OracleClient,
    RecordingBackend, ReplayBackend, ScriptedOracle,
};
use propforge_core::pipeline::{
    run_pipeline, stage_explore, stage_refine, stage_synth, stage_test, StageError,
};
use propforge_core::property::CheckResult;
use propforge_core::runner::{replay as replay_report, ViolationReport};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_OK: u8 = 0;
const EXIT_VIOLATIONS: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_STAGE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "propforge",
    about = "Explore a simulated app, synthesize executable properties, test them, and refine them",
    version
)]
pub struct Cli {
    /// Declarative config file (TOML); flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// App under test: "notes", "notes_faulty", or a path to an app-model JSON file.
    #[arg(long, global = true)]
    pub app: Option<String>,
    /// Oracle backend: scripted:<path>, builtin:notes, replay:<transcript>, or http:<base-url>.
    #[arg(long, global = true)]
    pub oracle: Option<String>,
    /// Model name for the http oracle backend.
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Seed fixing all randomness of the run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Exploration step budget.
    #[arg(long, global = true)]
    pub budget: Option<u64>,
    /// Event budget for the testing stage.
    #[arg(long, global = true)]
    pub max_events: Option<u64>,
    /// Probability of checking an applicable property at a state.
    #[arg(long, global = true)]
    pub p_check: Option<f64>,
    /// Output directory for stage artifacts.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for synthesis and refinement verification.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Fault flag override, repeatable: --fault audio_blocks_photo=true.
    #[arg(long = "fault", global = true, value_name = "NAME=BOOL")]
    pub faults: Vec<String>,
    /// Record the oracle exchange to <out>/oracle_transcript.jsonl.
    #[arg(long, global = true)]
    pub record: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Explore the app and write behavioral evidence.
    Explore,
    /// Synthesize executable properties from collected evidence.
    Synth,
    /// Run property-based testing over synthesized properties.
    Test {
        /// Read properties from this directory instead of <out>/properties.
        #[arg(long)]
        properties: Option<PathBuf>,
    },
    /// Diagnose reported violations and refine imprecise properties.
    Refine {
        /// Maximum diagnose/refine/verify rounds per property.
        #[arg(long)]
        rounds: Option<usize>,
    },
    /// Run explore, synth, test, and refine under one seed.
    Pipeline,
    /// Replay a violation report and reproduce its verdict.
    Replay {
        /// Path to the violation report JSON.
        #[arg(long)]
        report: PathBuf,
        /// Directory holding the property files (defaults to <out>/properties).
        #[arg(long)]
        properties: Option<PathBuf>,
    },
}

fn parse_fault_overrides(raw: &[String]) -> anyhow::Result<Vec<(String, bool)>> {
    raw.iter()
        .map(|item| {
            let (name, value) = item
                .split_once('=')
                .ok_or_else(|| anyhow!("--fault expects NAME=BOOL, got '{item}'"))?;
            let value: bool = value
                .parse()
                .map_err(|_| anyhow!("--fault value must be true or false, got '{value}'"))?;
            Ok((name.to_string(), value))
        })
        .collect()
}

fn resolve_app(spec: &str, fault_overrides: &[(String, bool)]) -> anyhow::Result<AppModel> {
    let mut model = match spec {
        "notes" => build_notes_app(NotesFaults::default()),
        "notes_faulty" => {
            build_notes_app(NotesFaults { audio_blocks_photo: true, ..Default::default() })
        }
        path => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read app model '{path}'"))?;
            AppModel::from_json(&text)?
        }
    };
    for (name, value) in fault_overrides {
        model.set_fault(name, *value)?;
    }
    Ok(model)
}

struct OracleSetup {
    client: OracleClient,
    transcript: Option<(RecordsHandle, String)>,
}

fn resolve_oracle(
    spec: &str,
    model_name: Option<&str>,
    record: bool,
) -> anyhow::Result<OracleSetup> {
    let backend: Box<dyn OracleBackend> = match spec.split_once(':') {
        Some(("scripted", rest)) => {
            if let Some(name) = rest.strip_prefix("builtin:") {
                Box::new(ScriptedOracle::new(propforge_core::oracle::builtin_fixture(name)?))
            } else {
                Box::new(ScriptedOracle::from_file(Path::new(rest))?)
            }
        }
        Some(("builtin", name)) => {
            Box::new(ScriptedOracle::new(propforge_core::oracle::builtin_fixture(name)?))
        }
        Some(("replay", path)) => Box::new(ReplayBackend::from_file(Path::new(path))?),
        Some(("http", url)) => {
            let model_name = model_name
                .ok_or_else(|| anyhow!("the http oracle needs --model (or [oracle].model)"))?;
            let url =
                if url.starts_with("//") { format!("http:{url}") } else { url.to_string() };
            Box::new(HttpOracleBackend::new(HttpOracleConfig::new(url, model_name))?)
        }
        _ => {
            return Err(anyhow!(
                "oracle spec must be scripted:<path>, builtin:<name>, replay:<path>, or http:<url>; got '{spec}'"
            ))
        }
    };
    if record {
        let recording = RecordingBackend::new(backend);
        let handle = recording.records_handle();
        let name = recording.name().to_string();
        Ok(OracleSetup {
            client: OracleClient::new(Box::new(recording)),
            transcript: Some((handle, name)),
        })
    } else {
        Ok(OracleSetup { client: OracleClient::new(backend), transcript: None })
    }
}

fn write_transcript(setup: &OracleSetup, out: &Path) -> anyhow::Result<()> {
    if let Some((handle, name)) = &setup.transcript {
        let transcript = transcript_from_handle(handle, name);
        std::fs::create_dir_all(out)
            .with_context(|| format!("cannot create {}", out.display()))?;
        transcript.write_jsonl(&out.join("oracle_transcript.jsonl"))?;
    }
    Ok(())
}

/// Error that pins the process exit code while displaying cleanly.
#[derive(Debug)]
struct ExitError {
    code: u8,
    message: String,
}

impl std::fmt::Display for ExitError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for ExitError {}

fn stage_error(err: StageError) -> ExitError {
    let code = match &err {
        StageError::Config(_) => EXIT_CONFIG,
        StageError::Artifact(_) | StageError::Failure(_) => EXIT_STAGE,
    };
    ExitError { code, message: err.to_string() }
}

fn run_command(cli: Cli) -> anyhow::Result<u8> {
    let file_config = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let cfg = EffectiveConfig::merge(&file_config, &cli)?;

    match &cli.command {
        Command::Explore => {
            let model = resolve_app(cfg.require_app()?, &cfg.fault_overrides)?;
            let oracle = resolve_oracle(&cfg.oracle, cfg.model.as_deref(), cfg.record)?;
            let outcome = stage_explore(&model, &oracle.client, &cfg.settings, &cfg.out)
                .map_err(stage_error)?;
            write_transcript(&oracle, &cfg.out)?;
            println!(
                "explore: {} evidence items ({} complete) over {} events -> {}",
                outcome.evidence.len(),
                outcome
                    .evidence
                    .iter()
                    .filter(|e| e.status == propforge_core::explore::TraceStatus::Complete)
                    .count(),
                outcome.manifest.events_performed,
                cfg.out.display()
            );
            Ok(EXIT_OK)
        }
        Command::Synth => {
            let model = resolve_app(cfg.require_app()?, &cfg.fault_overrides)?;
            let oracle = resolve_oracle(&cfg.oracle, cfg.model.as_deref(), cfg.record)?;
            let (properties, report) =
                stage_synth(&model, &oracle.client, &cfg.settings, &cfg.out)
                    .map_err(stage_error)?;
            write_transcript(&oracle, &cfg.out)?;
            println!(
                "synth: {} accepted, {} rejected, {} skipped -> {}",
                report.accepted,
                report.rejected,
                report.skipped,
                cfg.out.display()
            );
            if properties.is_empty() {
                println!("synth: no properties were accepted");
            }
            Ok(EXIT_OK)
        }
        Command::Test { properties } => {
            let model = resolve_app(cfg.require_app()?, &cfg.fault_overrides)?;
            let explicit = match properties {
                Some(dir) => Some(artifacts::latest_versions(artifacts::read_properties(dir)?)),
                None => None,
            };
            let (reports, stats) = stage_test(&model, &cfg.settings, &cfg.out, explicit)
                .map_err(stage_error)?;
            print!("{}", stats.render_table());
            println!("test: {} violation reports -> {}", reports.len(), cfg.out.display());
            Ok(if reports.is_empty() { EXIT_OK } else { EXIT_VIOLATIONS })
        }
        Command::Refine { rounds } => {
            let model = resolve_app(cfg.require_app()?, &cfg.fault_overrides)?;
            let oracle = resolve_oracle(&cfg.oracle, cfg.model.as_deref(), cfg.record)?;
            let mut settings = cfg.settings.clone();
            if let Some(r) = rounds {
                settings.max_refine_rounds = *r;
            }
            let (_audits, summary) = stage_refine(&model, &oracle.client, &settings, &cfg.out)
                .map_err(stage_error)?;
            write_transcript(&oracle, &cfg.out)?;
            print!("{}", summary.render_table());
            Ok(EXIT_OK)
        }
        Command::Pipeline => {
            let model = resolve_app(cfg.require_app()?, &cfg.fault_overrides)?;
            let oracle = resolve_oracle(&cfg.oracle, cfg.model.as_deref(), cfg.record)?;
            let outcome = run_pipeline(&model, &oracle.client, &cfg.settings, &cfg.out)
                .map_err(stage_error)?;
            write_transcript(&oracle, &cfg.out)?;
            println!(
                "pipeline: {} evidence items, {} accepted properties, {} violations",
                outcome.evidence_count, outcome.accepted_properties, outcome.violations
            );
            print!("{}", outcome.stats.render_table());
            print!("{}", outcome.refine_summary.render_table());
            Ok(if outcome.violations == 0 { EXIT_OK } else { EXIT_VIOLATIONS })
        }
        Command::Replay { report, properties } => {
            let text = std::fs::read_to_string(report)
                .with_context(|| format!("cannot read report {}", report.display()))?;
            let report: ViolationReport = ViolationReport::from_json(&text)?;
            let properties_dir =
                properties.clone().unwrap_or_else(|| artifacts::properties_dir(&cfg.out));
            let all = artifacts::read_properties(&properties_dir)?;
            let property = all
                .iter()
                .find(|p| {
                    p.property_id == report.property_id && p.version == report.property_version
                })
                .ok_or_else(|| {
                    anyhow!(
                        "property {} v{} not found under {}",
                        report.property_id,
                        report.property_version,
                        properties_dir.display()
                    )
                })?;
            // Default to the app and fault flags recorded in the report;
            // --app and --fault override them.
            let model = if let Some(app) = &cfg.app {
                resolve_app(app, &cfg.fault_overrides)?
            } else {
                let mut model = match report.app_name.as_str() {
                    "Pocket Notes" => build_notes_app(NotesFaults::default()),
                    other => return Err(anyhow!("pass --app to replay reports for '{other}'")),
                };
                for (name, value) in &report.fault_flags {
                    model.set_fault(name, *value)?;
                }
                for (name, value) in &cfg.fault_overrides {
                    model.set_fault(name, *value)?;
                }
                model
            };
            match replay_report(&report, property, &model) {
                Ok(CheckResult::Violated { failed_atom, .. }) => {
                    println!("replay: violated at {failed_atom}");
                    Ok(EXIT_VIOLATIONS)
                }
                Ok(CheckResult::Satisfied { .. }) => {
                    println!("replay: satisfied");
                    Ok(EXIT_OK)
                }
                Ok(CheckResult::Inapplicable { reason, .. }) => {
                    println!("replay: inapplicable ({reason:?})");
                    Ok(EXIT_STAGE)
                }
                Err(e) => {
                    println!("replay: divergence: {e}");
                    Ok(EXIT_STAGE)
                }
            }
        }
    }
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(exit) = cause.downcast_ref::<ExitError>() {
            return exit.code;
        }
    }
    // Anything unmapped is a configuration problem: bad flags, unreadable
    // files, unknown apps or oracle specs.
    EXIT_CONFIG
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run_command(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
