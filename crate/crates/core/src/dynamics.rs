//! Planar 3-DOF bicycle model with a linear tire and forward-Euler stepping.
//!
//! Body-frame states are longitudinal velocity, lateral velocity and yaw
//! rate; the pose (X, Y, yaw) is carried in the world frame.

use serde::{Deserialize, Serialize};

/// Floor applied to the longitudinal speed in the slip-angle denominators.
pub const SLIP_SPEED_FLOOR: f64 = 0.1;

/// Default integration step (10 ms).
pub const DEFAULT_DT: f64 = 0.01;

/// Bounds on the longitudinal acceleration command, m/s².
pub const ACCEL_MIN: f64 = -8.0;
pub const ACCEL_MAX: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    /// kg
    pub mass: f64,
    /// kg·m²
    pub yaw_inertia: f64,
    /// CG to front axle, m
    pub dist_front_axle: f64,
    /// CG to rear axle, m
    pub dist_rear_axle: f64,
    /// N/rad
    pub cornering_stiffness_front: f64,
    /// N/rad
    pub cornering_stiffness_rear: f64,
}

impl VehicleParams {
    /// Mid-size passenger car used throughout the scenario.
    pub const fn sedan() -> Self {
        Self {
            mass: 1470.0,
            yaw_inertia: 1900.0,
            dist_front_axle: 1.04,
            dist_rear_axle: 1.56,
            cornering_stiffness_front: 71000.0,
            cornering_stiffness_rear: 47000.0,
        }
    }

    pub fn is_valid(&self) -> bool {
        [
            self.mass,
            self.yaw_inertia,
            self.dist_front_axle,
            self.dist_rear_axle,
            self.cornering_stiffness_front,
            self.cornering_stiffness_rear,
        ]
        .iter()
        .all(|v| v.is_finite() && *v > 0.0)
    }
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self::sedan()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub x_world: f64,
    pub y_world: f64,
    pub yaw: f64,
    pub vx_body: f64,
    pub vy_body: f64,
    pub yaw_rate: f64,
}

impl VehicleState {
    /// Driving straight along +X at `speed`.
    pub fn straight(x: f64, y: f64, speed: f64) -> Self {
        Self {
            x_world: x,
            y_world: y,
            vx_body: speed,
            ..Self::default()
        }
    }

    pub fn is_finite(&self) -> bool {
        [
            self.x_world,
            self.y_world,
            self.yaw,
            self.vx_body,
            self.vy_body,
            self.yaw_rate,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlCommand {
    /// Road-wheel angle δ, rad.
    pub road_wheel_angle: f64,
    /// Longitudinal acceleration command, m/s².
    pub accel_long: f64,
}

impl ControlCommand {
    pub fn new(road_wheel_angle: f64, accel_long: f64) -> Self {
        Self {
            road_wheel_angle,
            accel_long,
        }
    }
}

/// Time derivative of every [`VehicleState`] field, same order.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateDerivative {
    pub x_world: f64,
    pub y_world: f64,
    pub yaw: f64,
    pub vx_body: f64,
    pub vy_body: f64,
    pub yaw_rate: f64,
}

/// Front and rear slip angles `(alpha_f, alpha_r)`.
pub fn slip_angles(state: &VehicleState, delta: f64, params: &VehicleParams) -> (f64, f64) {
    let vx = state.vx_body.max(SLIP_SPEED_FLOOR);
    let alpha_f = delta - ((state.vy_body + state.yaw_rate * params.dist_front_axle) / vx).atan();
    let alpha_r = -((state.vy_body - state.yaw_rate * params.dist_rear_axle) / vx).atan();
    (alpha_f, alpha_r)
}

/// Linear (unsaturated) lateral tire forces `(Fyf, Fyr)`.
pub fn tire_forces(alpha_f: f64, alpha_r: f64, params: &VehicleParams) -> (f64, f64) {
    (
        params.cornering_stiffness_front * alpha_f,
        params.cornering_stiffness_rear * alpha_r,
    )
}

pub fn derivatives(state: &VehicleState, cmd: &ControlCommand, params: &VehicleParams) -> StateDerivative {
    let delta = cmd.road_wheel_angle;
    let (alpha_f, alpha_r) = slip_angles(state, delta, params);
    let (fyf, fyr) = tire_forces(alpha_f, alpha_r, params);
    let (sin_yaw, cos_yaw) = state.yaw.sin_cos();

    StateDerivative {
        x_world: state.vx_body * cos_yaw - state.vy_body * sin_yaw,
        y_world: state.vx_body * sin_yaw + state.vy_body * cos_yaw,
        yaw: state.yaw_rate,
        vx_body: cmd.accel_long,
        vy_body: (fyf * delta.cos() + fyr) / params.mass - state.yaw_rate * state.vx_body,
        yaw_rate: (params.dist_front_axle * fyf - params.dist_rear_axle * fyr) / params.yaw_inertia,
    }
}

/// One forward-Euler step. Longitudinal speed is clamped at zero so braking
/// never reverses the vehicle.
pub fn step_euler(state: &VehicleState, cmd: &ControlCommand, dt: f64, params: &VehicleParams) -> VehicleState {
    debug_assert!(dt > 0.0);
    let d = derivatives(state, cmd, params);
    VehicleState {
        x_world: state.x_world + dt * d.x_world,
        y_world: state.y_world + dt * d.y_world,
        yaw: state.yaw + dt * d.yaw,
        vx_body: (state.vx_body + dt * d.vx_body).max(0.0),
        vy_body: state.vy_body + dt * d.vy_body,
        yaw_rate: state.yaw_rate + dt * d.yaw_rate,
    }
}
