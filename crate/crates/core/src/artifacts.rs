//! On-disk artifact formats shared across pipeline stages: evidence files,
//! property files, violation reports, and stage summaries. Every file one
//! stage writes is readable by the next. Writes go through a temp file and
//! rename so a crash never leaves a truncated artifact.

use crate::explore::{RunManifest, SummarizedTrace};
use crate::property::Property;
use crate::refine::RefinementAudit;
use crate::runner::{RunStats, ViolationReport};
use crate::synthesis::SynthesisReport;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("artifact io error at {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("artifact parse error at {path}: {detail}")]
    Parse { path: PathBuf, detail: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ArtifactError + '_ {
    move |source| ArtifactError::Io { path: path.to_path_buf(), source }
}

/// Write-then-rename so readers never observe partial files.
pub fn atomic_write(path: &Path, contents: &str) -> Result<(), ArtifactError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io_err(path))?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents).map_err(io_err(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_err(path))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, ArtifactError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text)
        .map_err(|e| ArtifactError::Parse { path: path.to_path_buf(), detail: e.to_string() })
}

fn json_files_sorted(dir: &Path) -> Result<Vec<PathBuf>, ArtifactError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().map_or(false, |ext| ext == "json"))
        .collect();
    files.sort();
    Ok(files)
}

// --- evidence ---

pub fn evidence_dir(out: &Path) -> PathBuf {
    out.join("evidence")
}

pub fn write_evidence(
    out: &Path,
    evidence: &[SummarizedTrace],
    manifest: &RunManifest,
) -> Result<(), ArtifactError> {
    let dir = evidence_dir(out);
    for item in evidence {
        let path = dir.join(format!("trace_{}.json", item.evidence_id));
        atomic_write(&path, &item.to_json())?;
    }
    let manifest_path = dir.join("manifest.json");
    atomic_write(
        &manifest_path,
        &serde_json::to_string_pretty(manifest).expect("manifest serializes"),
    )
}

pub fn read_evidence(out: &Path) -> Result<(Vec<SummarizedTrace>, Option<RunManifest>), ArtifactError> {
    let dir = evidence_dir(out);
    let mut evidence = Vec::new();
    let mut manifest = None;
    for path in json_files_sorted(&dir)? {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name == "manifest.json" {
            manifest = Some(read_json(&path)?);
        } else if name.starts_with("trace_") {
            evidence.push(read_json::<SummarizedTrace>(&path)?);
        }
    }
    evidence.sort_by(|a, b| a.evidence_id.cmp(&b.evidence_id));
    Ok((evidence, manifest))
}

// --- properties ---

pub fn properties_dir(out: &Path) -> PathBuf {
    out.join("properties")
}

pub fn property_file_name(p: &Property) -> String {
    format!("prop_{}.v{}.json", p.property_id, p.version)
}

pub fn write_property(out: &Path, property: &Property) -> Result<(), ArtifactError> {
    let path = properties_dir(out).join(property_file_name(property));
    atomic_write(&path, &property.to_json())
}

pub fn write_properties(out: &Path, properties: &[Property]) -> Result<(), ArtifactError> {
    for p in properties {
        write_property(out, p)?;
    }
    Ok(())
}

/// Reads every property version file in the directory.
pub fn read_properties(dir: &Path) -> Result<Vec<Property>, ArtifactError> {
    let mut properties = Vec::new();
    for path in json_files_sorted(dir)? {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.starts_with("prop_") {
            let property: Property = read_json(&path)?;
            property.validate().map_err(|e| ArtifactError::Parse {
                path: path.clone(),
                detail: e.to_string(),
            })?;
            properties.push(property);
        }
    }
    properties.sort_by(|a, b| (&a.property_id, a.version).cmp(&(&b.property_id, b.version)));
    Ok(properties)
}

/// Keeps only the highest version of each property id.
pub fn latest_versions(properties: Vec<Property>) -> Vec<Property> {
    let mut latest: BTreeMap<String, Property> = BTreeMap::new();
    for p in properties {
        match latest.get(&p.property_id) {
            Some(existing) if existing.version >= p.version => {}
            _ => {
                latest.insert(p.property_id.clone(), p);
            }
        }
    }
    latest.into_values().collect()
}

pub fn write_synthesis_report(out: &Path, report: &SynthesisReport) -> Result<(), ArtifactError> {
    let path = properties_dir(out).join("synthesis_report.json");
    atomic_write(&path, &serde_json::to_string_pretty(report).expect("report serializes"))
}

// --- violation reports & run stats ---

pub fn reports_dir(out: &Path) -> PathBuf {
    out.join("reports")
}

pub fn write_violation_reports(
    out: &Path,
    reports: &[ViolationReport],
) -> Result<(), ArtifactError> {
    let dir = reports_dir(out);
    for (i, report) in reports.iter().enumerate() {
        let path = dir.join(format!("violation_{:04}.json", i + 1));
        atomic_write(&path, &report.to_json())?;
    }
    Ok(())
}

pub fn read_violation_reports(out: &Path) -> Result<Vec<ViolationReport>, ArtifactError> {
    let dir = reports_dir(out);
    let mut reports = Vec::new();
    for path in json_files_sorted(&dir)? {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.starts_with("violation_") {
            reports.push(read_json::<ViolationReport>(&path)?);
        }
    }
    Ok(reports)
}

pub fn write_run_stats(out: &Path, stats: &RunStats) -> Result<(), ArtifactError> {
    let dir = reports_dir(out);
    atomic_write(
        &dir.join("run_stats.json"),
        &serde_json::to_string_pretty(stats).expect("stats serialize"),
    )?;
    atomic_write(&dir.join("run_stats.txt"), &stats.render_table())
}

// --- refinement ---

pub fn refine_dir(out: &Path) -> PathBuf {
    out.join("refine")
}

/// Table-3-style local summary of one refinement stage.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RefineSummary {
    pub properties_diagnosed: usize,
    pub refined: usize,
    pub likely_bug: usize,
    pub automation_failure: usize,
    pub unrefined: usize,
    pub modified_precondition: usize,
    pub modified_interaction: usize,
    pub modified_postcondition: usize,
}

impl RefineSummary {
    pub fn render_table(&self) -> String {
        format!(
            "{:<28} {:>6}\n{:<28} {:>6}\n{:<28} {:>6}\n{:<28} {:>6}\n{:<28} {:>6}\n\
             modified components  pre {:>3}  interaction {:>3}  post {:>3}\n",
            "properties diagnosed", self.properties_diagnosed,
            "refined", self.refined,
            "likely bug", self.likely_bug,
            "automation failure", self.automation_failure,
            "unrefined", self.unrefined,
            self.modified_precondition, self.modified_interaction, self.modified_postcondition,
        )
    }
}

pub fn write_refine_outputs(
    out: &Path,
    audits: &[RefinementAudit],
    summary: &RefineSummary,
) -> Result<(), ArtifactError> {
    let dir = refine_dir(out);
    atomic_write(
        &dir.join("audit.json"),
        &serde_json::to_string_pretty(audits).expect("audits serialize"),
    )?;
    atomic_write(
        &dir.join("summary.json"),
        &serde_json::to_string_pretty(summary).expect("summary serializes"),
    )?;
    atomic_write(&dir.join("summary.txt"), &summary.render_table())
}
