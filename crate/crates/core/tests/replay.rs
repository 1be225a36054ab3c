use std::path::PathBuf;

use avsup_core::backend::{
    build_backend, read_transcript, record_transcript, BackendConfig, BackendError, DecisionBackend, OracleBackend,
    Query, ReplayBackend,
};
use avsup_core::context::{parse_reply, render_question, RawResponse, SituationReport};
use avsup_core::dynamics::VehicleState;
use avsup_core::rules::{assess, stopping_distance, BrakingProfile, Decision, Nudge, PedestrianState, RoadGeometry};
use avsup_core::sim::{reference_scenario, run, SimError};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

/// EGO and pedestrian states behind the four logged exchanges, together
/// with whether EGO was below target or nudged at the time.
fn logged_states() -> Vec<(VehicleState, &'static str, PedestrianState, bool)> {
    let first = VehicleState {
        x_world: 29.39,
        y_world: 2.0,
        vx_body: 8.0,
        ..VehicleState::default()
    };
    let second = VehicleState {
        x_world: 33.12,
        y_world: 1.68,
        vx_body: 7.0,
        ..VehicleState::default()
    };
    let ped1 = |y: f64| PedestrianState {
        x: 45.0,
        y,
        crossing_speed: 1.5,
        started: true,
    };
    let ped2 = PedestrianState {
        x: 65.0,
        y: 0.0,
        crossing_speed: 2.0,
        started: false,
    };
    vec![
        (first, "Ped1", ped1(0.5), true),
        (first, "Ped2", ped2, true),
        (second, "Ped1", ped1(1.25), true),
        (second, "Ped2", ped2, true),
    ]
}

#[test]
fn logged_exchanges_render_and_decide_identically() {
    let entries = read_transcript(&fixture("exchanges.jsonl")).unwrap();
    assert_eq!(entries.len(), 4);
    let road = RoadGeometry::default();
    let profile = BrakingProfile::default();
    for (entry, (ego, name, ped, nudged)) in entries.iter().zip(logged_states()) {
        let a = assess(&ego, &ped, &road, 10.0, nudged, &profile);
        let report = SituationReport::new(&ego, 0.0, name, &a, stopping_distance(ego.vx_body, profile.hard), true);
        assert_eq!(render_question(&report), entry.question);

        let mut oracle = OracleBackend;
        let reply = oracle
            .decide(&Query {
                sim_time: entry.sim_time,
                question: &entry.question,
                assessment: &a,
            })
            .unwrap();
        let recorded = parse_reply(&RawResponse::new(entry.response.clone())).unwrap();
        assert_eq!(reply.structured, Some(recorded));
    }
}

#[test]
fn logged_replies_parse_to_exact_triples() {
    let entries = read_transcript(&fixture("exchanges.jsonl")).unwrap();
    let triples: Vec<(u8, i8, Nudge)> = entries
        .iter()
        .map(|e| {
            let d = parse_reply(&RawResponse::new(e.response.clone())).unwrap().unwrap();
            (d.requirement_id(), d.accel(), d.nudge())
        })
        .collect();
    assert_eq!(
        triples,
        vec![
            (2, -2, Nudge::Away),
            (7, 2, Nudge::Center),
            (2, -2, Nudge::Away),
            (7, 2, Nudge::Center)
        ]
    );
}

#[test]
fn replayed_oracle_run_is_identical() {
    let scenario = reference_scenario(0.5);
    let recorded = run(&scenario, &mut OracleBackend).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("oracle.jsonl");
    record_transcript(&recorded.transcript, &path).unwrap();

    let mut replay = build_backend(&BackendConfig::replay(&path)).unwrap();
    let replayed = run(&scenario, replay.as_mut()).unwrap();
    assert_eq!(replayed.steps, recorded.steps);
    assert_eq!(replayed.decisions, recorded.decisions);
    assert_eq!(replayed.transcript, recorded.transcript);

    // Recording the replay reproduces the file byte for byte.
    let again = dir.path().join("again.jsonl");
    record_transcript(&replayed.transcript, &again).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn replay_against_different_scenario_aborts() {
    let recorded = run(&reference_scenario(0.5), &mut OracleBackend).unwrap();
    let mut replay = ReplayBackend::new(recorded.transcript);
    let mut other = reference_scenario(0.5);
    other.initial_state.vx_body = 9.0;
    let abort = run(&other, &mut replay).unwrap_err();
    assert!(matches!(
        abort.error,
        SimError::Backend(BackendError::ReplayMismatch { index: 0, .. })
    ));
}

#[test]
fn short_transcript_is_exhausted() {
    let recorded = run(&reference_scenario(0.5), &mut OracleBackend).unwrap();
    let keep = recorded.transcript.len() / 2;
    let mut replay = ReplayBackend::new(recorded.transcript[..keep].to_vec());
    let abort = run(&reference_scenario(0.5), &mut replay).unwrap_err();
    assert!(matches!(
        abort.error,
        SimError::Backend(BackendError::ReplayExhausted { index }) if index == keep
    ));
    assert!(!abort.log.steps.is_empty());
}

#[test]
fn every_decision_survives_the_text_channel() {
    for d in Decision::all() {
        let text = avsup_core::context::render_decision(&d);
        assert_eq!(parse_reply(&RawResponse::new(text)).unwrap(), Some(d));
    }
}
