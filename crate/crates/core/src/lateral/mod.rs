//! Speed-scheduled LQR lateral tracking.
//!
//! The lateral error dynamics are linearized around straight-line motion at
//! the current longitudinal speed (state `[Y, ẏ, Ψ, ψ̇]`, input δ). A new
//! gain is synthesized whenever the speed has drifted more than a threshold
//! from the speed the current gain was built at.

pub mod care;

use nalgebra::{DMatrix, Matrix1, Matrix4, RowVector4, Vector4};
use thiserror::Error;

use crate::dynamics::{VehicleParams, VehicleState};
pub use care::CareError;

/// Below this speed the linear model is not built; the last gain is held.
pub const V_MIN: f64 = 0.5;
/// Below this speed the steering command is forced to zero.
pub const V_STEER_CUTOFF: f64 = 0.05;
/// Road-wheel angle saturation, rad.
pub const DELTA_MAX: f64 = 0.5;
/// Default gain-rescheduling speed delta, m/s.
pub const DEFAULT_RESCHEDULE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LateralError {
    #[error("speed {speed} m/s is below the {V_MIN} m/s model floor")]
    SpeedBelowMinimum { speed: f64 },
    #[error("Riccati solve failed: {0}")]
    Solver(#[from] CareError),
    #[error("closed loop is not Hurwitz (max real part {max_real_part:e})")]
    ClosedLoopUnstable { max_real_part: f64 },
}

/// Linearized lateral model, states ordered `[Y, ẏ, Ψ, ψ̇]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearLateralModel {
    pub state_matrix: Matrix4<f64>,
    pub input_matrix: Vector4<f64>,
    pub built_at_speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LqrWeights {
    pub state_cost: Matrix4<f64>,
    pub input_cost: f64,
}

impl LqrWeights {
    /// Lateral-tracking weights: position, lateral velocity and yaw rate
    /// penalized, heading left free, and a heavy steering penalty.
    pub fn lateral_tracking() -> Self {
        Self {
            state_cost: Matrix4::from_diagonal(&Vector4::new(0.5, 0.3, 0.0, 0.3)),
            input_cost: 5.0,
        }
    }

    pub fn is_valid(&self) -> bool {
        let q = self.state_cost;
        let symmetric = (q - q.transpose()).norm() == 0.0;
        symmetric && self.input_cost > 0.0 && q.symmetric_eigenvalues().iter().all(|&l| l >= -1e-12)
    }
}

impl Default for LqrWeights {
    fn default() -> Self {
        Self::lateral_tracking()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiccatiSolution {
    pub cost_matrix: Matrix4<f64>,
    pub residual_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainMatrix {
    pub gains: RowVector4<f64>,
    pub valid_at_speed: f64,
    /// Largest real part of eig(A − BK) at synthesis time.
    pub closed_loop_max_real: f64,
}

pub fn build_linear_model(speed: f64, params: &VehicleParams) -> Result<LinearLateralModel, LateralError> {
    if !(speed >= V_MIN) {
        return Err(LateralError::SpeedBelowMinimum { speed });
    }
    let VehicleParams {
        mass: m,
        yaw_inertia: iz,
        dist_front_axle: lf,
        dist_rear_axle: lr,
        cornering_stiffness_front: cf,
        cornering_stiffness_rear: cr,
    } = *params;
    let v = speed;

    #[rustfmt::skip]
    let a = Matrix4::new(
        0.0, 1.0,                                   v,   0.0,
        0.0, -(cf + cr) / (m * v),                  0.0, -(cf * lf - cr * lr) / (m * v) - v,
        0.0, 0.0,                                   0.0, 1.0,
        0.0, -(cf * lf - cr * lr) / (iz * v),       0.0, -(cf * lf * lf + cr * lr * lr) / (iz * v),
    );
    let b = Vector4::new(0.0, cf / m, 0.0, lf * cf / iz);

    Ok(LinearLateralModel {
        state_matrix: a,
        input_matrix: b,
        built_at_speed: speed,
    })
}

pub fn solve_care(model: &LinearLateralModel, weights: &LqrWeights) -> Result<RiccatiSolution, LateralError> {
    let a = DMatrix::from_column_slice(4, 4, model.state_matrix.as_slice());
    let b = DMatrix::from_column_slice(4, 1, model.input_matrix.as_slice());
    let q = DMatrix::from_column_slice(4, 4, weights.state_cost.as_slice());
    let r = DMatrix::from_element(1, 1, weights.input_cost);
    let sol = care::solve_care(&a, &b, &q, &r)?;
    Ok(RiccatiSolution {
        cost_matrix: Matrix4::from_column_slice(sol.p.as_slice()),
        residual_norm: sol.residual_norm,
    })
}

/// Largest real part among the eigenvalues of `m`.
pub fn spectral_abscissa(m: &Matrix4<f64>) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `K = R⁻¹ Bᵀ P`, rejected unless `A − BK` is Hurwitz.
pub fn compute_gain(
    sol: &RiccatiSolution,
    model: &LinearLateralModel,
    weights: &LqrWeights,
) -> Result<GainMatrix, LateralError> {
    let r_inv = Matrix1::new(1.0 / weights.input_cost);
    let gains: RowVector4<f64> = r_inv * model.input_matrix.transpose() * sol.cost_matrix;
    let closed = model.state_matrix - model.input_matrix * gains;
    let max_real = spectral_abscissa(&closed);
    if !(max_real < 0.0) {
        return Err(LateralError::ClosedLoopUnstable {
            max_real_part: max_real,
        });
    }
    Ok(GainMatrix {
        gains,
        valid_at_speed: model.built_at_speed,
        closed_loop_max_real: max_real,
    })
}

/// Full synthesis at one speed: model, Riccati solve, gain.
pub fn synthesize_gain(speed: f64, params: &VehicleParams, weights: &LqrWeights) -> Result<GainMatrix, LateralError> {
    let model = build_linear_model(speed, params)?;
    let sol = solve_care(&model, weights)?;
    compute_gain(&sol, &model, weights)
}

/// Re-synthesizes the gain when the speed has moved more than `threshold`
/// from the gain's scheduling speed; otherwise returns `gain` untouched.
pub fn maybe_update_gain(
    current_speed: f64,
    gain: &GainMatrix,
    threshold: f64,
    params: &VehicleParams,
    weights: &LqrWeights,
) -> Result<GainMatrix, LateralError> {
    debug_assert!(threshold > 0.0);
    if (current_speed - gain.valid_at_speed).abs() > threshold && current_speed >= V_MIN {
        synthesize_gain(current_speed, params, weights)
    } else {
        Ok(*gain)
    }
}

/// `δ = −K (x − x_ref)` with `x_ref = [lateral_ref, 0, 0, 0]`, saturated.
pub fn steering_command(gain: &GainMatrix, state: &VehicleState, lateral_ref: f64) -> f64 {
    let error = Vector4::new(state.y_world - lateral_ref, state.vy_body, state.yaw, state.yaw_rate);
    let delta = -(gain.gains * error)[0];
    delta.clamp(-DELTA_MAX, DELTA_MAX)
}

/// Gain-scheduled steering controller owned by the simulation loop.
#[derive(Debug, Clone)]
pub struct LateralController {
    params: VehicleParams,
    weights: LqrWeights,
    threshold: f64,
    gain: GainMatrix,
    resyntheses: usize,
}

impl LateralController {
    pub fn new(
        initial_speed: f64,
        params: VehicleParams,
        weights: LqrWeights,
        threshold: f64,
    ) -> Result<Self, LateralError> {
        let gain = synthesize_gain(initial_speed.max(V_MIN), &params, &weights)?;
        Ok(Self {
            params,
            weights,
            threshold,
            gain,
            resyntheses: 0,
        })
    }

    pub fn gain(&self) -> &GainMatrix {
        &self.gain
    }

    /// Number of times the gain was rebuilt after construction.
    pub fn resyntheses(&self) -> usize {
        self.resyntheses
    }

    pub fn command(&mut self, state: &VehicleState, lateral_ref: f64) -> Result<f64, LateralError> {
        let speed = state.vx_body;
        let next = maybe_update_gain(speed, &self.gain, self.threshold, &self.params, &self.weights)?;
        if next != self.gain {
            self.resyntheses += 1;
            self.gain = next;
        }
        if speed < V_STEER_CUTOFF {
            return Ok(0.0);
        }
        Ok(steering_command(&self.gain, state, lateral_ref))
    }
}
