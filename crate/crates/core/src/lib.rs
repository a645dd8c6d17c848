//! Wi-Fi RSSI fingerprint localization and checkpoint navigation.
//!
//! The pipeline: parse wireless scan output ([`scan`]), assemble a labeled
//! fingerprint matrix ([`dataset`]), select correlated access points and
//! normalize ([`features`]), regress position with a small dense network
//! ([`model`]), plan grid routes with A* ([`planner`]), and drive a
//! differential-drive robot checkpoint to checkpoint ([`navctl`]). The
//! [`rfsim`] module closes the loop against a seeded simulated building.
//!
//! Numeric code is generic over [`Scalar`] (`f32`/`f64`); the aliases below
//! fix it to `f64`.

pub mod config;
pub mod dataset;
pub mod features;
pub mod geometry;
pub mod model;
pub mod navctl;
pub mod pipeline;
pub mod planner;
pub mod rfsim;
pub mod scalar;
pub mod scan;

pub use scalar::Scalar;

pub type Point = geometry::Point<f64>;
pub type Pose = geometry::Pose<f64>;
pub type ScanSnapshot = scan::ScanSnapshot<f64>;
pub type FingerprintDataset = dataset::FingerprintDataset<f64>;
pub type FeatureSelection = features::FeatureSelection<f64>;
pub type NormalizationParams = features::NormalizationParams<f64>;
pub type Sidecar = features::Sidecar<f64>;
pub type MlpRegressor = model::MlpRegressor<f64>;
pub type ModelBundle = model::ModelBundle<f64>;
pub type TrainConfig = model::TrainConfig<f64>;
pub type TrainReport = model::TrainReport<f64>;
pub type NavConfig = navctl::NavConfig<f64>;
pub type DrivetrainCalibration = navctl::DrivetrainCalibration<f64>;
pub type DriveCommand = navctl::DriveCommand<f64>;
pub type SimWorld = rfsim::SimWorld<f64>;
pub type TrialResult = rfsim::TrialResult<f64>;
