use approx::assert_relative_eq;

use avsup_core::backend::OracleBackend;
use avsup_core::dynamics::{step_euler, ControlCommand, VehicleParams, VehicleState, DEFAULT_DT};
use avsup_core::lateral::{LateralController, LqrWeights, DEFAULT_RESCHEDULE_THRESHOLD};
use avsup_core::rules::Verdict;
use avsup_core::sim::{reference_scenario, run, Scenario};
use avsup_core::sweep::{sweep_periods, sweep_periods_sequential};

#[test]
fn shorter_periods_stay_collision_free() {
    let base = reference_scenario(0.5);
    for o in sweep_periods(&base, &[0.1, 0.25, 0.5]) {
        assert_eq!(o.collided(), Some(false), "period {}", o.decision_period);
    }
}

#[test]
fn sweep_agrees_with_individual_runs() {
    let base = reference_scenario(0.5);
    let periods = [0.25, 2.0];
    let swept = sweep_periods_sequential(&base, &periods);
    for (o, &p) in swept.iter().zip(&periods) {
        let log = run(&base.clone().with_decision_period(p), &mut OracleBackend).unwrap();
        assert_eq!(o.result.as_ref().unwrap(), &log.summary);
    }
}

#[test]
fn scenario_json_round_trip() {
    let s = reference_scenario(0.5);
    let text = serde_json::to_string_pretty(&s).unwrap();
    let back: Scenario = serde_json::from_str(&text).unwrap();
    assert_eq!(back, s);
}

#[test]
fn minimal_scenario_file_takes_defaults() {
    let text = r#"{
        "initial_state": {"x_world": 0, "y_world": 2, "yaw": 0, "vx_body": 10, "vy_body": 0, "yaw_rate": 0},
        "pedestrians": [
            {"name": "Ped1", "distance_from_ego_x0": 45, "crossing_speed": 1.5, "lateral_position": 0, "start_delay": 1},
            {"name": "Ped2", "distance_from_ego_x0": 65, "crossing_speed": 2.0, "lateral_position": 0, "start_delay": 5}
        ],
        "decision_period": 0.5
    }"#;
    let s: Scenario = serde_json::from_str(text).unwrap();
    assert_eq!(s, reference_scenario(0.5));
}

#[test]
fn braking_and_recovery_profile() {
    let log = run(&reference_scenario(0.5), &mut OracleBackend).unwrap();
    let decel_steps = log.steps.iter().filter(|r| r.accel_cmd < 0.0).count();
    let accel_steps = log.steps.iter().filter(|r| r.accel_cmd > 0.0).count();
    assert!(decel_steps > 0 && accel_steps > 0);
    // All braking happens before any acceleration back to target.
    let last_brake = log.steps.iter().rposition(|r| r.accel_cmd < 0.0).unwrap();
    let first_accel = log.steps.iter().position(|r| r.accel_cmd > 0.0).unwrap();
    assert!(last_brake < first_accel);
    assert!(log.decisions.iter().all(|d| d.verdict != Verdict::FailSafe));
}

#[test]
fn lqr_recovers_from_lateral_offset() {
    let params = VehicleParams::sedan();
    let mut ctrl = LateralController::new(
        10.0,
        params,
        LqrWeights::lateral_tracking(),
        DEFAULT_RESCHEDULE_THRESHOLD,
    )
    .unwrap();
    let mut s = VehicleState::straight(0.0, 1.0, 10.0);
    let mut peak_past_ref: f64 = 0.0;
    for _ in 0..1000 {
        let delta = ctrl.command(&s, 0.0).unwrap();
        s = step_euler(&s, &ControlCommand::new(delta, 0.0), DEFAULT_DT, &params);
        peak_past_ref = peak_past_ref.max(-s.y_world);
    }
    assert!(s.y_world.abs() < 0.05, "final offset {}", s.y_world);
    assert!(peak_past_ref < 0.5);
    assert_relative_eq!(s.vx_body, 10.0);
}
