use thiserror::Error;

use crate::dataset::{FingerprintDataset, MISSING_RSSI};
use crate::features::{FeatureError, Sidecar};
use crate::geometry::Point;
use crate::scalar::Scalar;
use crate::scan::ScanSnapshot;

use super::matrix::Matrix;
use super::network::{MlpRegressor, Mode, ModelError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PredictError {
    #[error("none of the model's access points are present in the scan")]
    NoKnownAccessPoints,
    #[error("dataset lacks model columns: {}", .0.join(", "))]
    MissingColumns(Vec<String>),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// A trained network together with the column selection and scaling it was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle<T> {
    pub model: MlpRegressor<T>,
    pub sidecar: Sidecar<T>,
}

impl<T: Scalar> ModelBundle<T> {
    pub fn new(model: MlpRegressor<T>, sidecar: Sidecar<T>) -> Result<Self, ModelError> {
        let kept = sidecar.selection.kept_columns.len();
        if model.input_width() != kept || sidecar.normalization.width() != kept {
            return Err(ModelError::ShapeMismatch(format!(
                "model input width {} vs {} selected columns",
                model.input_width(),
                kept
            )));
        }
        if model.output_width() != 2 {
            return Err(ModelError::ShapeMismatch("position model must output 2 values".into()));
        }
        Ok(Self { model, sidecar })
    }

    pub fn columns(&self) -> &[String] {
        &self.sidecar.selection.kept_columns
    }

    /// Raw dBm vector in column order, zero-filled for absent access points.
    /// Errors when no column is present.
    pub fn feature_vector(&self, snapshot: &ScanSnapshot<T>) -> Result<Vec<T>, PredictError> {
        let mut present = 0;
        let raw: Vec<T> = self
            .columns()
            .iter()
            .map(|mac| match snapshot.rssi_of(mac) {
                Some(v) => {
                    present += 1;
                    T::lit(f64::from(v))
                }
                None => T::lit(MISSING_RSSI),
            })
            .collect();
        if present == 0 {
            return Err(PredictError::NoKnownAccessPoints);
        }
        Ok(raw)
    }

    /// Position estimate in feet from raw (unnormalized) selected features.
    pub fn predict_raw(&self, raw: &[T]) -> Result<Point<T>, PredictError> {
        let x = self.sidecar.normalization.normalize_features(raw)?;
        let out = self.model.forward(&x, Mode::Infer)?;
        Ok(self.sidecar.normalization.denormalize_point(Point::new(out[0], out[1])))
    }

    pub fn predict(&self, snapshot: &ScanSnapshot<T>) -> Result<Point<T>, PredictError> {
        let raw = self.feature_vector(snapshot)?;
        self.predict_raw(&raw)
    }

    /// Normalized network inputs and targets for every dataset row.
    pub fn prepare(&self, dataset: &FingerprintDataset<T>) -> Result<(Matrix<T>, Matrix<T>), PredictError> {
        prepare_matrices(dataset, &self.sidecar)
    }
}

/// Projects `dataset` onto the sidecar's columns and applies its normalization.
pub fn prepare_matrices<T: Scalar>(
    dataset: &FingerprintDataset<T>,
    sidecar: &Sidecar<T>,
) -> Result<(Matrix<T>, Matrix<T>), PredictError> {
    let projected = dataset
        .project(&sidecar.selection.kept_columns)
        .map_err(PredictError::MissingColumns)?;
    let norm = &sidecar.normalization;
    let width = projected.ap_columns().len();
    let mut inputs = Vec::with_capacity(projected.len() * width);
    let mut targets = Vec::with_capacity(projected.len() * 2);
    for r in projected.rows() {
        inputs.extend(norm.normalize_features(&r.rssi)?);
        let p = norm.normalize_point(Point::new(r.x, r.y));
        targets.extend([p.x, p.y]);
    }
    Ok((
        Matrix::from_vec(projected.len(), width, inputs),
        Matrix::from_vec(projected.len(), 2, targets),
    ))
}
