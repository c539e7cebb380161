//! Binary-level acceptance: criterion 2 (end-to-end bug rediscovery through
//! `propforge pipeline` and `propforge replay`) plus the stable exit-code
//! contract.

use propforge_core::artifacts;
use propforge_core::backend::{build_notes_app, NotesFaults};
use propforge_core::property::CheckResult;
use propforge_core::runner::replay;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

fn propforge() -> Command {
    Command::new(env!("CARGO_BIN_EXE_propforge"))
}

fn fixture_path() -> String {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/notes_oracle.json");
    root.canonicalize().unwrap().to_string_lossy().to_string()
}

#[test]
fn acceptance_02_end_to_end_bug_rediscovery() {
    let started = Instant::now();
    let out = tempfile::tempdir().unwrap();
    let out_path = out.path().to_string_lossy().to_string();

    // cmd_pipeline on the fault-injected build with the scripted oracle.
    let status = propforge()
        .args([
            "pipeline",
            "--app",
            "notes_faulty",
            "--oracle",
            &format!("scripted:{}", fixture_path()),
            "--seed",
            "7",
            "--budget",
            "300",
            "--max-events",
            "5000",
            "--out",
            &out_path,
        ])
        .status()
        .expect("pipeline runs");
    assert_eq!(status.code(), Some(1), "violations found exits 1");

    // At least one accepted property for the photo-attachment functionality.
    let properties =
        artifacts::read_properties(&artifacts::properties_dir(out.path())).unwrap();
    let photo = properties
        .iter()
        .find(|p| p.provenance.hypothesis == "attach a photo to the note" && p.version == 1)
        .expect("accepted photo-attachment property");

    // At least one violation report for it within the event budget.
    let reports = artifacts::read_violation_reports(out.path()).unwrap();
    let photo_reports: Vec<_> =
        reports.iter().filter(|r| r.property_id == photo.property_id).collect();
    assert!(!photo_reports.is_empty(), "no violation reports for the photo property");

    // Find the bug-caused report: reproducibly violated on the faulty build
    // and satisfied once the fault flag is flipped off.
    let faulty = build_notes_app(NotesFaults { audio_blocks_photo: true, ..Default::default() });
    let healthy = build_notes_app(NotesFaults::default());
    let (index, bug_report) = photo_reports
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let pos = reports.iter().position(|x| std::ptr::eq(x, *r)).unwrap();
            (pos, r)
        })
        .find(|(_, r)| {
            matches!(replay(r, photo, &faulty), Ok(CheckResult::Violated { .. }))
                && matches!(replay(r, photo, &healthy), Ok(CheckResult::Satisfied { .. }))
        })
        .map(|(i, r)| (i, (*r).clone()))
        .expect("a report caused by the injected fault");
    let report_file = out.path().join("reports").join(format!("violation_{:04}.json", index + 1));
    assert!(report_file.exists(), "report file {report_file:?} missing");

    // cmd_replay reproduces the violated verdict.
    let output = propforge()
        .args([
            "replay",
            "--report",
            &report_file.to_string_lossy(),
            "--out",
            &out_path,
        ])
        .output()
        .expect("replay runs");
    assert_eq!(output.status.code(), Some(1), "replay reproduces the violation");
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("violated"), "got {stdout}");
    assert!(stdout.contains(&bug_report.failed_atom), "failed atom differs: {stdout}");

    // Flipping the fault flag makes replay return satisfied.
    let output = propforge()
        .args([
            "replay",
            "--report",
            &report_file.to_string_lossy(),
            "--out",
            &out_path,
            "--fault",
            "audio_blocks_photo=false",
        ])
        .output()
        .expect("replay runs");
    assert_eq!(output.status.code(), Some(0), "fault-off replay exits clean");
    assert!(String::from_utf8_lossy(&output.stdout).contains("satisfied"));

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 60, "criterion 2 exceeded its 1-minute budget: {elapsed:?}");
    println!(
        "[PASS] criterion 2: pipeline on the fault-injected build accepted a photo-attachment \
         property, reported {} violations for it, replay reproduced the verdict, and flipping \
         the fault made it satisfied ({elapsed:?})",
        photo_reports.len()
    );
}

#[test]
fn exit_codes_are_stable() {
    // Configuration error: missing app.
    let status = propforge().args(["explore"]).status().unwrap();
    assert_eq!(status.code(), Some(2));

    // Configuration error: empty property directory.
    let out = tempfile::tempdir().unwrap();
    std::fs::create_dir_all(out.path().join("properties")).unwrap();
    let status = propforge()
        .args(["test", "--app", "notes", "--out", &out.path().to_string_lossy()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    // Configuration error: unknown fault flag.
    let status = propforge()
        .args(["explore", "--app", "notes", "--fault", "warp_drive=true"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    // Configuration error: missing report file.
    let status = propforge()
        .args(["replay", "--report", "/nonexistent/report.json"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn explore_with_zero_budget_succeeds_with_empty_evidence() {
    let out = tempfile::tempdir().unwrap();
    let status = propforge()
        .args([
            "explore",
            "--app",
            "notes",
            "--oracle",
            "builtin:notes",
            "--seed",
            "1",
            "--budget",
            "0",
            "--out",
            &out.path().to_string_lossy(),
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let (evidence, manifest) = artifacts::read_evidence(out.path()).unwrap();
    assert!(evidence.is_empty());
    assert_eq!(manifest.unwrap().events_performed, 0);
}

#[test]
fn healthy_test_run_exits_zero_when_no_violations() {
    let out = tempfile::tempdir().unwrap();
    // Seed the property directory with the reference set, which the healthy
    // build satisfies.
    for property in propforge_core::fixtures::notes_reference_properties() {
        artifacts::write_property(out.path(), &property).unwrap();
    }
    let status = propforge()
        .args([
            "test",
            "--app",
            "notes",
            "--seed",
            "5",
            "--max-events",
            "2000",
            "--out",
            &out.path().to_string_lossy(),
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0), "healthy run with the reference set is clean");
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("out_a");
    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        format!(
            "app = \"notes\"\nseed = 5\nout = \"{}\"\n\n[oracle]\nspec = \"builtin:notes\"\n\n[explore]\nbudget = 0\n",
            out_a.display()
        ),
    )
    .unwrap();
    // Flag overrides the zero budget from the file.
    let status = propforge()
        .args(["explore", "--config", &config.to_string_lossy(), "--budget", "40"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let (_, manifest) = artifacts::read_evidence(&out_a).unwrap();
    assert!(manifest.unwrap().events_performed > 0, "flag did not override the file budget");
}

#[test]
fn record_then_replay_transcript_is_hermetic() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let run = |out: &Path, oracle: &str, record: bool| {
        let mut cmd = propforge();
        cmd.args([
            "explore",
            "--app",
            "notes",
            "--oracle",
            oracle,
            "--seed",
            "4",
            "--budget",
            "120",
            "--out",
            &out.to_string_lossy(),
        ]);
        if record {
            cmd.arg("--record");
        }
        cmd.status().unwrap()
    };
    assert_eq!(run(&out_a, "builtin:notes", true).code(), Some(0));
    let transcript = out_a.join("oracle_transcript.jsonl");
    assert!(transcript.exists());
    // Replay the recorded transcript: identical evidence, no scripted oracle.
    let replay_spec = format!("replay:{}", transcript.to_string_lossy());
    assert_eq!(run(&out_b, &replay_spec, false).code(), Some(0));
    let (evidence_a, _) = artifacts::read_evidence(&out_a).unwrap();
    let (evidence_b, _) = artifacts::read_evidence(&out_b).unwrap();
    assert_eq!(evidence_a, evidence_b);
}
