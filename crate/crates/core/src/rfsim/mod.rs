//! Seeded simulated building: log-distance radio model and a differential-drive robot.

mod kinematics;
mod radio;
mod trial;
mod world;

use thiserror::Error;

use crate::model::PredictError;
use crate::navctl::NavError;
use crate::planner::PlanError;
use crate::scan::ScanError;

pub use kinematics::{body_velocity, calibrate_drivetrain, step_robot, step_robot_traced, MAX_SUBSTEP_S};
pub use radio::{expected_rssi, generate_synthetic_dataset, simulate_scan};
pub use trial::{
    corner_success_rate, run_trial, CornerReport, FixRecord, Localizer, TrialConfig, TrialOutcome, TrialResult,
    DEFAULT_MAX_FIXES, DEFAULT_SCAN_LATENCY_S, DEFAULT_SUCCESS_RADIUS_FT, DEFAULT_TURN_SPEED,
};
pub use world::{
    reference_world, AccessPointSim, REFERENCE_CORNER_CLEARANCE, REFERENCE_CORNER_GOAL, REFERENCE_CORNER_START, SimRobot, SimWorld, REFERENCE_NOISE_SIGMA_DB, REFERENCE_P0_DBM,
    REFERENCE_PATH_LOSS_EXPONENT,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("position ({x}, {y}) is outside the map")]
    OutOfBounds { x: f64, y: f64 },
    #[error("invalid simulation parameter: {0}")]
    InvalidParameter(String),
    #[error("world file line {line}: {reason}")]
    WorldFormat { line: usize, reason: String },
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Nav(#[from] NavError),
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error("simulated scan failed to parse: {0}")]
    Scan(ScanError),
}
