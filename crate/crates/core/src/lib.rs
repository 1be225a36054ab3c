//! Supervisory-control simulator for an autonomous vehicle.
//!
//! A bicycle-model vehicle tracks a straight lane under speed-scheduled LQR
//! steering while a supervisory monitor decides braking and nudging around
//! jaywalking pedestrians. Decisions come from a deterministic rule oracle,
//! a live LLM endpoint, or a recorded transcript.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backend;
pub mod context;
pub mod dynamics;
pub mod lateral;
pub mod rules;
pub mod sim;
pub mod sweep;
