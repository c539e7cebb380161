//! Engine benchmarks: predicate evaluation, state abstraction, simulated
//! backend throughput, and a short end-to-end runner loop.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use propforge_bench::{healthy_session, scripted_client};
use propforge_core::backend::{build_notes_app, Backend, NotesFaults};
use propforge_core::explore::{run_exploration, Budget, ExploreConfig};
use propforge_core::fixtures::notes_reference_properties;
use propforge_core::gui::{default_edit_corpus, enabled_events, ui_context};
use propforge_core::property::eval_predicate;
use propforge_core::runner::{run, RunConfig};
use propforge_core::testkit::{random_model, random_property, random_start_session};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn bench_predicates(c: &mut Criterion) {
    let mut session = healthy_session(1);
    // Land on the note editor, the busiest screen.
    let fab = session
        .current_state()
        .widgets
        .iter()
        .find(|w| w.resource_id.as_deref() == Some("fab_add"))
        .unwrap()
        .label;
    session.perform(&propforge_core::gui::Event::click(fab)).unwrap();
    let state = session.current_state().clone();
    let properties = notes_reference_properties();

    c.bench_function("eval_reference_preconditions", |b| {
        b.iter(|| {
            let mut holds = 0usize;
            for p in &properties {
                if eval_predicate(std::hint::black_box(&p.precondition), &state) {
                    holds += 1;
                }
            }
            holds
        })
    });

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let model = random_model(&mut rng, 6, 8);
    let random_prop = random_property(&mut rng, &model);
    let random_session = random_start_session(&mut rng, &model, 1);
    let random_state = random_session.current_state().clone();
    c.bench_function("eval_random_predicate", |b| {
        b.iter(|| eval_predicate(std::hint::black_box(&random_prop.precondition), &random_state))
    });
}

fn bench_state_abstraction(c: &mut Criterion) {
    let session = healthy_session(1);
    let state = session.current_state().clone();
    let whitelist = session.static_text_whitelist().clone();
    c.bench_function("ui_context_extraction", |b| {
        b.iter(|| ui_context(std::hint::black_box(&state), &whitelist))
    });
}

fn bench_backend_walk(c: &mut Criterion) {
    let model = build_notes_app(NotesFaults::default());
    let corpus = default_edit_corpus();
    c.bench_function("simulated_backend_100_events", |b| {
        b.iter_batched(
            || {
                (
                    propforge_core::backend::SimulatedSession::launch(&model, 1).unwrap(),
                    ChaCha8Rng::seed_from_u64(2),
                )
            },
            |(mut session, mut rng)| {
                for _ in 0..100 {
                    let events = enabled_events(session.current_state(), &corpus);
                    let event = events[rng.gen_range(0..events.len())].clone();
                    session.perform(&event).unwrap();
                }
                session
            },
            BatchSize::SmallInput,
        )
    });
}

fn bench_runner_and_exploration(c: &mut Criterion) {
    let model = build_notes_app(NotesFaults::default());
    let properties = notes_reference_properties();
    c.bench_function("runner_500_events", |b| {
        b.iter(|| {
            let config = RunConfig { seed: 3, max_events: 500, ..Default::default() };
            run(&config, std::hint::black_box(&properties), &model).unwrap()
        })
    });

    c.bench_function("exploration_100_steps_scripted", |b| {
        b.iter_batched(
            || {
                (
                    propforge_core::backend::SimulatedSession::launch(&model, 5).unwrap(),
                    scripted_client(),
                )
            },
            |(mut session, client)| {
                let cfg = ExploreConfig { budget: Budget::Steps(100), ..Default::default() };
                run_exploration(&mut session, &client, cfg, 5)
            },
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(
    benches,
    bench_predicates,
    bench_state_abstraction,
    bench_backend_walk,
    bench_runner_and_exploration
);
criterion_main!(benches);
