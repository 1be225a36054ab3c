//! Batch evaluation over independent inputs: decision-period sweeps with the
//! oracle backend, and LQR gain tables over a speed grid.
//!
//! With the `parallel` feature (default) the top-level functions fan out over
//! a rayon pool; the `_sequential` variants are always available and give
//! identical results in the same order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::backend::OracleBackend;
use crate::dynamics::VehicleParams;
use crate::lateral::{synthesize_gain, GainMatrix, LateralError, LqrWeights};
use crate::sim::{run, Scenario, SimError, SimSummary};

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodOutcome {
    pub decision_period: f64,
    pub result: Result<SimSummary, SimError>,
}

impl PeriodOutcome {
    pub fn collided(&self) -> Option<bool> {
        self.result.as_ref().ok().map(|s| s.collided)
    }
}

fn run_period(base: &Scenario, period: f64) -> PeriodOutcome {
    let scenario = base.clone().with_decision_period(period);
    let result = run(&scenario, &mut OracleBackend)
        .map(|log| log.summary)
        .map_err(|a| a.error);
    PeriodOutcome {
        decision_period: period,
        result,
    }
}

pub fn sweep_periods_sequential(base: &Scenario, periods: &[f64]) -> Vec<PeriodOutcome> {
    periods.iter().map(|&p| run_period(base, p)).collect()
}

#[cfg(feature = "parallel")]
pub fn sweep_periods(base: &Scenario, periods: &[f64]) -> Vec<PeriodOutcome> {
    periods.par_iter().map(|&p| run_period(base, p)).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn sweep_periods(base: &Scenario, periods: &[f64]) -> Vec<PeriodOutcome> {
    sweep_periods_sequential(base, periods)
}

pub fn gain_table_sequential(
    speeds: &[f64],
    params: &VehicleParams,
    weights: &LqrWeights,
) -> Vec<Result<GainMatrix, LateralError>> {
    speeds.iter().map(|&v| synthesize_gain(v, params, weights)).collect()
}

#[cfg(feature = "parallel")]
pub fn gain_table(
    speeds: &[f64],
    params: &VehicleParams,
    weights: &LqrWeights,
) -> Vec<Result<GainMatrix, LateralError>> {
    speeds
        .par_iter()
        .map(|&v| synthesize_gain(v, params, weights))
        .collect()
}

#[cfg(not(feature = "parallel"))]
pub fn gain_table(
    speeds: &[f64],
    params: &VehicleParams,
    weights: &LqrWeights,
) -> Vec<Result<GainMatrix, LateralError>> {
    gain_table_sequential(speeds, params, weights)
}

/// `n` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}
