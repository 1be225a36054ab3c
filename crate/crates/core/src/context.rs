//! Context translation between simulator state and model text.
//!
//! Outbound: the system prompt with the seven requirements, and one
//! question per pedestrian describing EGO's state. Inbound: the fixed
//! `Req=<id>, accel=<a>,nudge=<n>` reply grammar.

use std::fmt::Write as _;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::VehicleState;
use crate::rules::{Assessment, BrakeLevel, CrossingPhase, Decision};

/// Printed in place of the gap when a pedestrian is not on EGO's path.
pub const ABSENT_GAP_SENTINEL: u32 = 9999;

/// Reply used in recorded transcripts when no requirement applies. Never
/// advertised to a model; only the oracle emits it.
pub const NO_REQUIREMENT_REPLY: &str = "Req=none";

const PREAMBLE: &str = "You are an autonomous vehicle driver. The vehicle you are driving is called EGO. \
You need to drive subject to the following requirements:";

const REQUIREMENTS: [&str; 7] = [
    "If a pedestrian is jaywalking along EGO's path AND is expected to have crossed the road by the time EGO will reach them, then the EGO shall maintain speed.",
    "If a pedestrian is jaywalking along EGO's path AND is expected to be close to crossing the road by the time EGO will reach them, and EGO and pedestrian are within soft braking distance, then the EGO shall apply soft braking and shall nudge away from the pedestrian.",
    "If a pedestrian is jaywalking along EGO's path AND is expected to be close to crossing the road by the time EGO will reach them, and EGO and pedestrian are within medium braking distance, then the EGO shall apply hard braking and shall nudge away from the pedestrian.",
    "If a pedestrian is jaywalking along EGO's path AND is expected to be in the middle of the road by the time EGO will reach them, and EGO and pedestrian are within soft braking distance, then the EGO shall apply medium braking.",
    "If a pedestrian is jaywalking along EGO's path AND is expected to be in the middle of the road by the time EGO will reach them, and EGO and pedestrian are within medium braking distance, then the EGO shall apply hard braking.",
    "If a pedestrian is jaywalking along EGO's path AND is expected to be on the road by the time EGO will reach them, and EGO and pedestrian are within hard braking distance, then the EGO shall apply full braking.",
    "If the EGO has slowed down below the route target speed OR nudged due to a pedestrian jaywalking AND there is no pedestrian on the road, then the EGO shall accelerate smoothly to the target route speed and shall go back to center of the road.",
];

const FORMAT_RULE: &str = "You can only respond with the text within the quotes \"\" but (not include the quote \" symbol itself) \
and not come up with your answers because there is a program that parses your responses and is expecting a fixed structure.";

pub fn render_system_prompt() -> String {
    let mut out = String::new();
    out.push_str(PREAMBLE);
    out.push('\n');
    for (i, req) in REQUIREMENTS.iter().enumerate() {
        let _ = writeln!(out, "{}. {}", i + 1, req);
    }
    out.push_str("Response rules:\n");
    out.push_str("- A requirement is met if all the AND conditions in the requirement are met.\n");
    for d in Decision::all() {
        let _ = writeln!(
            out,
            "- You need to respond with \"{}\" if you encounter all the conditions for Requirement {}.",
            render_decision(&d),
            d.requirement_id()
        );
    }
    let _ = writeln!(out, "- {FORMAT_RULE}");
    out
}

/// What the pedestrian sentence of a question says.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Situation {
    /// Pedestrian on or near EGO's path, with the exclusive braking band
    /// the gap currently falls in.
    Jaywalking {
        phase: CrossingPhase,
        band: Option<BrakeLevel>,
    },
    /// Nobody on the path; flags whether EGO is slow or off-center.
    ClearPath { below_target_or_nudged: bool },
}

impl Situation {
    pub fn from_assessment(a: &Assessment, below_target_or_nudged: bool) -> Self {
        match a.phase {
            CrossingPhase::NotOnPath => Situation::ClearPath { below_target_or_nudged },
            phase => Situation::Jaywalking { phase, band: a.band },
        }
    }

    pub fn sentence(&self) -> String {
        match *self {
            Situation::ClearPath {
                below_target_or_nudged: true,
            } => "There is not a pedestrian along the EGO's path and EGO travels with less than target speed or has nudged."
                .to_string(),
            Situation::ClearPath {
                below_target_or_nudged: false,
            } => "There is not a pedestrian along the EGO's path and EGO travels at target speed.".to_string(),
            Situation::Jaywalking {
                phase: CrossingPhase::Crossed,
                ..
            } => "A pedestrian is jaywalking and is expected to have crossed the road by the time EGO will reach them."
                .to_string(),
            Situation::Jaywalking { phase, band } => {
                let expected = match phase {
                    CrossingPhase::CloseToCrossing => "be close crossing the road",
                    CrossingPhase::MiddleOfRoad => "be in the middle of the road",
                    _ => "be on the road",
                };
                let distance = match band {
                    Some(level) => format!("are within {} braking distance", level.as_str()),
                    None => "are not within braking distance".to_string(),
                };
                format!(
                    "A pedestrian is jaywalking and is expected to {expected} and EGO and pedestrian {distance}."
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SituationReport {
    pub ego_speed: f64,
    /// X − X0, m.
    pub longitudinal_from_x0: f64,
    /// EGO's lateral position Y measured from the road's Y = 0 line, m.
    pub lateral_from_y0: f64,
    pub pedestrian_name: String,
    /// `None` renders as the absent sentinel.
    pub gap_to_pedestrian: Option<f64>,
    pub distance_to_stop_hard: f64,
    pub situation: Situation,
}

impl SituationReport {
    /// Report for one pedestrian. The gap is reported only while the
    /// pedestrian is on EGO's path; otherwise the sentinel is printed.
    pub fn new(
        ego: &VehicleState,
        x0: f64,
        pedestrian_name: &str,
        assessment: &Assessment,
        distance_to_stop_hard: f64,
        below_target_or_nudged: bool,
    ) -> Self {
        let gap_to_pedestrian = match assessment.phase {
            CrossingPhase::NotOnPath => None,
            _ => Some(assessment.gap),
        };
        Self {
            ego_speed: ego.vx_body,
            longitudinal_from_x0: ego.x_world - x0,
            lateral_from_y0: ego.y_world,
            pedestrian_name: pedestrian_name.to_string(),
            gap_to_pedestrian,
            distance_to_stop_hard,
            situation: Situation::from_assessment(assessment, below_target_or_nudged),
        }
    }
}

/// Rounds to two decimals and prints the shortest form keeping at least
/// one fractional digit: `8.0`, `29.39`, `1.68`.
pub fn format_measure(value: f64) -> String {
    let mut s = format!("{value:.2}");
    if s.ends_with('0') {
        s.pop();
    }
    if s == "-0.0" {
        s = "0.0".to_string();
    }
    s
}

pub fn render_question(report: &SituationReport) -> String {
    let gap = match report.gap_to_pedestrian {
        Some(g) => format_measure(g),
        None => ABSENT_GAP_SENTINEL.to_string(),
    };
    format!(
        "EGO is traveling at {} m/s I am {} m longitudinally from X0 {} m laterally from Y0. \
         Distance to {} is {} m with distanceToStopHard {} m. {} What should the EGO do?",
        format_measure(report.ego_speed),
        format_measure(report.longitudinal_from_x0),
        format_measure(report.lateral_from_y0),
        report.pedestrian_name,
        gap,
        format_measure(report.distance_to_stop_hard),
        report.situation.sentence(),
    )
}

/// Verbatim model reply.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RawResponse {
    pub text: String,
}

impl RawResponse {
    pub fn new(text: impl Into<String>) -> Self {
        Self { text: text.into() }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("reply does not match `Req=<1..7>, accel=<int>,nudge=<0|1|2>`: {0:?}")]
    Malformed(String),
    #[error("reply states accel={stated_accel}, nudge={stated_nudge} but requirement {} means {canonical}", canonical.requirement_id())]
    Inconsistent {
        stated_accel: i64,
        stated_nudge: u8,
        canonical: Decision,
    },
}

static REPLY_PATTERN: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r#"^\s*["'`]*\s*Req\s*=\s*([1-7])\s*,\s*accel\s*=\s*([+-]?\d{1,3})\s*,\s*nudge\s*=\s*([0-2])\s*["'`]*\s*$"#,
    )
    .expect("reply pattern compiles")
});

static NONE_PATTERN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"^\s*["'`]*\s*Req\s*=\s*none\s*["'`]*\s*$"#).expect("pattern compiles"));

pub fn parse_response(raw: &RawResponse) -> Result<Decision, ParseError> {
    let caps = REPLY_PATTERN
        .captures(&raw.text)
        .ok_or_else(|| ParseError::Malformed(raw.text.chars().take(120).collect()))?;
    // The pattern bounds every capture, so these conversions cannot fail.
    let id: u8 = caps[1].parse().map_err(|_| ParseError::Malformed(raw.text.clone()))?;
    let accel: i64 = caps[2].parse().map_err(|_| ParseError::Malformed(raw.text.clone()))?;
    let nudge: u8 = caps[3].parse().map_err(|_| ParseError::Malformed(raw.text.clone()))?;
    let canonical = Decision::from_requirement(id).ok_or_else(|| ParseError::Malformed(raw.text.clone()))?;
    if accel != i64::from(canonical.accel()) || nudge != canonical.nudge().code() {
        return Err(ParseError::Inconsistent {
            stated_accel: accel,
            stated_nudge: nudge,
            canonical,
        });
    }
    Ok(canonical)
}

/// Like [`parse_response`], but also accepts [`NO_REQUIREMENT_REPLY`] as
/// "no requirement applies" and resolves inconsistent replies to the
/// canonical table entry.
pub fn parse_reply(raw: &RawResponse) -> Result<Option<Decision>, ParseError> {
    if NONE_PATTERN.is_match(&raw.text) {
        return Ok(None);
    }
    match parse_response(raw) {
        Ok(d) => Ok(Some(d)),
        Err(ParseError::Inconsistent { canonical, .. }) => {
            log::warn!("inconsistent reply {:?}; using {}", raw.text, canonical);
            Ok(Some(canonical))
        }
        Err(e) => Err(e),
    }
}

pub fn render_decision(d: &Decision) -> String {
    format!(
        "Req={}, accel={},nudge={}",
        d.requirement_id(),
        d.accel(),
        d.nudge().code()
    )
}

/// Canonical text for an optional decision, as written to transcripts.
pub fn render_reply(d: Option<&Decision>) -> String {
    d.map_or_else(|| NO_REQUIREMENT_REPLY.to_string(), render_decision)
}
