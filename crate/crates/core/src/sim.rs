//! Closed-loop scenario runner.
//!
//! Every `dt` the vehicle is integrated under the held acceleration command
//! and the LQR steering command. Every `decision_period` the monitor asks
//! one question per pedestrian, arbitrates the answers, and updates the
//! acceleration command and lateral reference.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, DecisionBackend, Query, TranscriptEntry};
use crate::context::{parse_reply, render_question, SituationReport};
use crate::dynamics::{step_euler, ControlCommand, VehicleParams, VehicleState, DEFAULT_DT};
use crate::lateral::{LateralController, LateralError, LqrWeights, DEFAULT_RESCHEDULE_THRESHOLD};
use crate::rules::{
    arbitrate_gated, assess, classify_pedestrian, predicted_lateral, stopping_distance, BrakingProfile, CrossingPhase,
    Decision, Nudge, PedestrianState, RoadGeometry, Verdict, SPEED_MATCH_TOL,
};

/// Collision envelope around EGO's reference point, m.
pub const COLLISION_HALF_LENGTH: f64 = 2.3;
pub const COLLISION_HALF_WIDTH: f64 = 0.9;
/// Lateral reference shift for a nudge, m.
pub const NUDGE_OFFSET: f64 = 1.0;
/// Run ends once EGO is this far past the last pedestrian, m.
pub const PASS_MARGIN: f64 = 20.0;
pub const DEFAULT_DURATION: f64 = 15.0;
pub const DEFAULT_TARGET_SPEED: f64 = 10.0;

const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pedestrian {
    pub name: String,
    /// Longitudinal (X) position of the crossing line, m.
    pub distance_from_ego_x0: f64,
    pub crossing_speed: f64,
    /// Current lateral position, m.
    pub lateral_position: f64,
    /// Seconds after the start of the run before the pedestrian steps off.
    pub start_delay: f64,
}

impl Pedestrian {
    pub fn new(name: &str, x: f64, crossing_speed: f64, lateral_position: f64, start_delay: f64) -> Self {
        Self {
            name: name.to_string(),
            distance_from_ego_x0: x,
            crossing_speed,
            lateral_position,
            start_delay,
        }
    }

    pub fn has_started(&self, t: f64) -> bool {
        t + TIME_EPS >= self.start_delay
    }

    pub fn state_at(&self, t: f64) -> PedestrianState {
        PedestrianState {
            x: self.distance_from_ego_x0,
            y: self.lateral_position,
            crossing_speed: self.crossing_speed,
            started: self.has_started(t),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("dt must be positive, got {0}")]
    BadTimeStep(f64),
    #[error("decision period {period} s is not a positive integer multiple of dt = {dt} s")]
    BadDecisionPeriod { period: f64, dt: f64 },
    #[error("duration must be positive, got {0}")]
    BadDuration(f64),
    #[error("target speed must be positive, got {0}")]
    BadTargetSpeed(f64),
    #[error("invalid road geometry")]
    BadRoad,
    #[error("invalid vehicle parameters")]
    BadVehicle,
    #[error("braking profile must be strictly increasing and positive")]
    BadBraking,
    #[error("initial state must be finite with non-negative speed")]
    BadInitialState,
    #[error("pedestrian {0}: crossing speed and distance must be positive")]
    BadPedestrian(String),
}

/// Returns `period / dt` when it is a positive integer (to 1e-9).
pub fn steps_per_period(period: f64, dt: f64) -> Option<usize> {
    if !(dt > 0.0) || !(period >= dt - TIME_EPS) || !period.is_finite() {
        return None;
    }
    let ratio = period / dt;
    let n = ratio.round();
    ((ratio - n).abs() < 1e-9 * n.max(1.0)).then_some(n as usize)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub initial_state: VehicleState,
    #[serde(default = "default_target_speed")]
    pub target_speed: f64,
    pub pedestrians: Vec<Pedestrian>,
    #[serde(default)]
    pub road: RoadGeometry,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub decision_period: f64,
    #[serde(default = "default_duration")]
    pub duration: f64,
    #[serde(default)]
    pub vehicle: VehicleParams,
    #[serde(default)]
    pub braking: BrakingProfile,
    #[serde(default = "default_reschedule")]
    pub lqr_reschedule_threshold: f64,
}

fn default_target_speed() -> f64 {
    DEFAULT_TARGET_SPEED
}
fn default_dt() -> f64 {
    DEFAULT_DT
}
fn default_duration() -> f64 {
    DEFAULT_DURATION
}
fn default_reschedule() -> f64 {
    DEFAULT_RESCHEDULE_THRESHOLD
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.dt > 0.0) {
            return Err(ScenarioError::BadTimeStep(self.dt));
        }
        if steps_per_period(self.decision_period, self.dt).is_none() {
            return Err(ScenarioError::BadDecisionPeriod {
                period: self.decision_period,
                dt: self.dt,
            });
        }
        if !(self.duration > 0.0) {
            return Err(ScenarioError::BadDuration(self.duration));
        }
        if !(self.target_speed > 0.0) {
            return Err(ScenarioError::BadTargetSpeed(self.target_speed));
        }
        if !self.road.is_valid() {
            return Err(ScenarioError::BadRoad);
        }
        if !self.vehicle.is_valid() {
            return Err(ScenarioError::BadVehicle);
        }
        if !self.braking.is_valid() {
            return Err(ScenarioError::BadBraking);
        }
        if !self.initial_state.is_finite() || self.initial_state.vx_body < 0.0 {
            return Err(ScenarioError::BadInitialState);
        }
        for p in &self.pedestrians {
            if !(p.crossing_speed > 0.0) || !(p.distance_from_ego_x0 > 0.0) {
                return Err(ScenarioError::BadPedestrian(p.name.clone()));
            }
        }
        Ok(())
    }

    pub fn with_decision_period(mut self, period: f64) -> Self {
        self.decision_period = period;
        self
    }
}

/// The two-pedestrian crossing scenario: EGO starts at X = 0 on the lane
/// center at 10 m/s; Ped1 crosses 20 m beyond EGO's soft-braking stopping
/// distance and Ped2 20 m further on.
pub fn reference_scenario(decision_period: f64) -> Scenario {
    let x0 = 0.0;
    let y0 = 2.0;
    let speed = DEFAULT_TARGET_SPEED;
    let braking = BrakingProfile::default();
    let soft_stop = stopping_distance(speed, braking.soft);
    Scenario {
        initial_state: VehicleState::straight(x0, y0, speed),
        target_speed: speed,
        pedestrians: vec![
            Pedestrian::new("Ped1", x0 + soft_stop + 20.0, 1.5, 0.0, 1.0),
            Pedestrian::new("Ped2", x0 + soft_stop + 40.0, 2.0, 0.0, 5.0),
        ],
        road: RoadGeometry::default(),
        dt: DEFAULT_DT,
        decision_period,
        duration: DEFAULT_DURATION,
        vehicle: VehicleParams::sedan(),
        braking,
        lqr_reschedule_threshold: DEFAULT_RESCHEDULE_THRESHOLD,
    }
}

/// Advances every pedestrian that has started and not yet reached the far
/// edge; the far edge is absorbing.
pub fn step_pedestrians(peds: &mut [Pedestrian], t: f64, dt: f64, road: &RoadGeometry) {
    for p in peds.iter_mut() {
        if p.has_started(t) && p.lateral_position < road.road_y_max {
            p.lateral_position = (p.lateral_position + p.crossing_speed * dt).min(road.road_y_max);
        }
    }
}

pub fn detect_collision(ego: &VehicleState, ped: &PedestrianState) -> bool {
    (ego.x_world - ped.x).abs() <= COLLISION_HALF_LENGTH && (ego.y_world - ped.y).abs() <= COLLISION_HALF_WIDTH
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PedestrianSample {
    pub y: f64,
    pub phase: CrossingPhase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub time: f64,
    pub state: VehicleState,
    pub accel_cmd: f64,
    pub steer_cmd: f64,
    pub verdict: Verdict,
    pub lateral_ref: f64,
    pub pedestrians: Vec<PedestrianSample>,
    pub collision: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PedestrianDecision {
    pub name: String,
    pub phase: CrossingPhase,
    /// `None` when no requirement applied or the reply was unusable.
    pub decision: Option<Decision>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub time: f64,
    pub verdict: Verdict,
    pub per_pedestrian: Vec<PedestrianDecision>,
    /// At least one reply could not be used at this instant.
    pub reply_failure: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    pub time: f64,
    pub pedestrian: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub collided: bool,
    pub min_speed: f64,
    pub final_speed: f64,
    /// Smallest EGO-to-pedestrian distance seen, m (infinite with no pedestrians).
    pub min_distance: f64,
    pub end_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimLog {
    pub dt: f64,
    pub decision_period: f64,
    pub pedestrian_names: Vec<String>,
    /// Crossing-line X of each pedestrian, same order as the names.
    pub pedestrian_x: Vec<f64>,
    pub steps: Vec<StepRecord>,
    pub decisions: Vec<DecisionRecord>,
    pub transcript: Vec<TranscriptEntry>,
    pub collisions: Vec<CollisionEvent>,
    pub summary: SimSummary,
}

impl SimLog {
    fn new(scenario: &Scenario) -> Self {
        Self {
            dt: scenario.dt,
            decision_period: scenario.decision_period,
            pedestrian_names: scenario.pedestrians.iter().map(|p| p.name.clone()).collect(),
            pedestrian_x: scenario.pedestrians.iter().map(|p| p.distance_from_ego_x0).collect(),
            steps: Vec::new(),
            decisions: Vec::new(),
            transcript: Vec::new(),
            collisions: Vec::new(),
            summary: SimSummary {
                collided: false,
                min_speed: scenario.initial_state.vx_body,
                final_speed: scenario.initial_state.vx_body,
                min_distance: f64::INFINITY,
                end_time: 0.0,
            },
        }
    }

    fn finish(&mut self) {
        let speeds = self.steps.iter().map(|s| s.state.vx_body);
        self.summary.min_speed = speeds.clone().fold(f64::INFINITY, f64::min);
        if let Some(last) = self.steps.last() {
            self.summary.final_speed = last.state.vx_body;
            self.summary.end_time = self.summary.end_time.max(last.time);
        }
        self.summary.collided = !self.collisions.is_empty();
    }

    /// Requirement ids of the arbitrated verdicts, in time order.
    pub fn requirement_sequence(&self) -> Vec<Option<u8>> {
        self.decisions.iter().map(|d| d.verdict.requirement_id()).collect()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Lateral(#[from] LateralError),
    #[error("decision backend failed: {0}")]
    Backend(#[from] BackendError),
}

/// A run that stopped early; carries everything logged up to the failure.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{error} (aborted at t = {:.2} s)", log.summary.end_time)]
pub struct SimAbort {
    pub error: SimError,
    pub log: Box<SimLog>,
}

impl SimAbort {
    fn new(error: impl Into<SimError>, mut log: SimLog) -> Self {
        log.finish();
        Self {
            error: error.into(),
            log: Box::new(log),
        }
    }
}

/// Mutable loop state shared between decision instants.
struct Supervisor {
    verdict: Verdict,
    lateral_ref: f64,
    failure_streak: u32,
}

impl Supervisor {
    /// `hazard_y` is the predicted lateral position of the pedestrian that
    /// triggered the verdict.
    fn apply_nudge(&mut self, nudge: Nudge, hazard_y: Option<f64>, road: &RoadGeometry) {
        let center = road.lane_center_y;
        match nudge {
            Nudge::Keep => {}
            Nudge::Center => self.lateral_ref = center,
            Nudge::Away => {
                if let Some(y) = hazard_y {
                    self.lateral_ref = if y < center {
                        center + NUDGE_OFFSET
                    } else {
                        center - NUDGE_OFFSET
                    };
                }
            }
        }
    }
}

/// Runs the scenario to completion against `backend`.
pub fn run(scenario: &Scenario, backend: &mut dyn DecisionBackend) -> Result<SimLog, SimAbort> {
    let mut log = SimLog::new(scenario);
    if let Err(e) = scenario.validate() {
        return Err(SimAbort::new(e, log));
    }
    let steps_per_decision = steps_per_period(scenario.decision_period, scenario.dt).expect("validated");
    let last_step = (scenario.duration / scenario.dt).round() as usize;
    let road = scenario.road;
    let target = scenario.target_speed;
    let x0 = scenario.initial_state.x_world;

    let mut controller = match LateralController::new(
        scenario.initial_state.vx_body,
        scenario.vehicle,
        LqrWeights::lateral_tracking(),
        scenario.lqr_reschedule_threshold,
    ) {
        Ok(c) => c,
        Err(e) => return Err(SimAbort::new(e, log)),
    };

    let mut ego = scenario.initial_state;
    let mut peds = scenario.pedestrians.clone();
    let last_ped_x = peds
        .iter()
        .map(|p| p.distance_from_ego_x0)
        .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x))));
    let mut sup = Supervisor {
        verdict: Verdict::Hold,
        lateral_ref: road.lane_center_y,
        failure_streak: 0,
    };
    let mut in_contact = vec![false; peds.len()];

    for k in 0..=last_step {
        let t = k as f64 * scenario.dt;

        if k % steps_per_decision == 0 {
            if let Err(e) = decide(scenario, t, x0, &ego, &peds, backend, &mut sup, &mut log) {
                log.summary.end_time = t;
                return Err(SimAbort::new(e, log));
            }
        }

        let steer = match controller.command(&ego, sup.lateral_ref) {
            Ok(s) => s,
            Err(e) => return Err(SimAbort::new(e, log)),
        };

        let mut samples = Vec::with_capacity(peds.len());
        let mut any_contact = false;
        for (i, p) in peds.iter().enumerate() {
            let ps = p.state_at(t);
            let hit = detect_collision(&ego, &ps);
            if hit && !in_contact[i] {
                log.collisions.push(CollisionEvent {
                    time: t,
                    pedestrian: p.name.clone(),
                    x: ego.x_world,
                    y: ego.y_world,
                });
            }
            in_contact[i] = hit;
            any_contact |= hit;
            let dist = (ego.x_world - ps.x).hypot(ego.y_world - ps.y);
            log.summary.min_distance = log.summary.min_distance.min(dist);
            samples.push(PedestrianSample {
                y: ps.y,
                phase: classify_pedestrian(&ego, &ps, &road),
            });
        }

        let accel = sup.verdict.accel();
        log.steps.push(StepRecord {
            time: t,
            state: ego,
            accel_cmd: accel,
            steer_cmd: steer,
            verdict: sup.verdict,
            lateral_ref: sup.lateral_ref,
            pedestrians: samples,
            collision: any_contact,
        });

        let passed_all = last_ped_x.is_some_and(|x| ego.x_world - x > PASS_MARGIN);
        if k == last_step || passed_all {
            break;
        }

        ego = step_euler(&ego, &ControlCommand::new(steer, accel), scenario.dt, &scenario.vehicle);
        ego.vx_body = ego.vx_body.min(target);
        step_pedestrians(&mut peds, t, scenario.dt, &road);
    }

    log.finish();
    Ok(log)
}

#[allow(clippy::too_many_arguments)]
fn decide(
    scenario: &Scenario,
    t: f64,
    x0: f64,
    ego: &VehicleState,
    peds: &[Pedestrian],
    backend: &mut dyn DecisionBackend,
    sup: &mut Supervisor,
    log: &mut SimLog,
) -> Result<(), BackendError> {
    let road = &scenario.road;
    let target = scenario.target_speed;
    let has_nudged = (sup.lateral_ref - road.lane_center_y).abs() > TIME_EPS;
    let below_target = ego.vx_body < target - SPEED_MATCH_TOL;
    let stop_hard = stopping_distance(ego.vx_body, scenario.braking.hard);

    let mut decisions: Vec<(Decision, usize)> = Vec::new();
    let mut per_pedestrian = Vec::with_capacity(peds.len());
    let mut reply_failure = false;
    let mut any_active = false;

    for (i, p) in peds.iter().enumerate() {
        let ps = p.state_at(t);
        let assessment = assess(ego, &ps, road, target, has_nudged, &scenario.braking);
        any_active |= assessment.phase.is_active();
        let report = SituationReport::new(ego, x0, &p.name, &assessment, stop_hard, below_target || has_nudged);
        let question = render_question(&report);

        let query = Query {
            sim_time: t,
            question: &question,
            assessment: &assessment,
        };
        let decision = match backend.decide(&query) {
            Ok(reply) => {
                log.transcript.push(TranscriptEntry {
                    sim_time: t,
                    question: question.clone(),
                    response: reply.response.text.clone(),
                    latency: reply.latency,
                    backend_kind: reply.backend_kind.clone(),
                });
                match reply.structured {
                    Some(d) => d,
                    None => match parse_reply(&reply.response) {
                        Ok(d) => d,
                        Err(e) => {
                            log::warn!("t = {t:.2}: unusable reply for {}: {e}", p.name);
                            reply_failure = true;
                            None
                        }
                    },
                }
            }
            Err(e) if e.is_transient() => {
                log::warn!("t = {t:.2}: backend error for {}: {e}", p.name);
                log.transcript.push(TranscriptEntry {
                    sim_time: t,
                    question: question.clone(),
                    response: format!("ERROR: {e}"),
                    latency: 0.0,
                    backend_kind: backend.kind().as_str().to_string(),
                });
                reply_failure = true;
                None
            }
            Err(e) => return Err(e),
        };
        if let Some(d) = decision {
            decisions.push((d, i));
        }
        per_pedestrian.push(PedestrianDecision {
            name: p.name.clone(),
            phase: assessment.phase,
            decision,
        });
    }

    if reply_failure {
        // Hold the previous verdict once; brake fully on a second failure.
        sup.failure_streak += 1;
        if sup.failure_streak >= 2 {
            sup.verdict = Verdict::FailSafe;
        }
    } else {
        sup.failure_streak = 0;
        let only: Vec<Decision> = decisions.iter().map(|(d, _)| *d).collect();
        let verdict = arbitrate_gated(&only, any_active);
        let hazard_y = match verdict {
            Verdict::Rule(w) => decisions
                .iter()
                .find(|(d, _)| *d == w)
                .map(|(_, i)| predicted_lateral(ego, &peds[*i].state_at(t))),
            _ => None,
        };
        sup.apply_nudge(verdict.nudge(), hazard_y, road);
        sup.verdict = verdict;
    }

    log.decisions.push(DecisionRecord {
        time: t,
        verdict: sup.verdict,
        per_pedestrian,
        reply_failure,
    });
    Ok(())
}
