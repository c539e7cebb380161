//! Benchmark helpers: shared setup for the criterion benches.

use propforge_core::backend::{build_notes_app, NotesFaults, SimulatedSession};
use propforge_core::oracle::{builtin_fixture, OracleClient, ScriptedOracle};

pub fn healthy_session(seed: u64) -> SimulatedSession {
    SimulatedSession::launch(&build_notes_app(NotesFaults::default()), seed)
        .expect("notes app launches")
}

pub fn scripted_client() -> OracleClient {
    OracleClient::new(Box::new(ScriptedOracle::new(
        builtin_fixture("notes").expect("builtin fixture parses"),
    )))
}
