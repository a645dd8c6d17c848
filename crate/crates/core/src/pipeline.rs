//! select-features -> split -> normalize -> train, as one call.

use thiserror::Error;

use crate::dataset::FingerprintDataset;
use crate::features::{
    select_features_with, split, FeatureError, NormalizationParams, SelectOptions, Sidecar, SplitDataset,
    DEFAULT_PCC_THRESHOLD, DEFAULT_TRAIN_RATIO,
};
use crate::model::{
    default_architecture, evaluate, prepare_matrices, train, LayerSpec, MlpRegressor, ModelBundle, ModelError,
    PredictError, TrainConfig, TrainError, TrainReport,
};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig<T> {
    pub threshold: T,
    pub min_coverage: Option<T>,
    pub train_ratio: f64,
    /// Seeds the split, the weight initialization and the training shuffles.
    pub seed: u64,
    pub architecture: Vec<LayerSpec>,
    pub train: TrainConfig<T>,
}

impl<T: Scalar> Default for PipelineConfig<T> {
    fn default() -> Self {
        Self {
            threshold: T::lit(DEFAULT_PCC_THRESHOLD),
            min_coverage: None,
            train_ratio: DEFAULT_TRAIN_RATIO,
            seed: 0,
            architecture: default_architecture(),
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError<T: Scalar> {
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error(transparent)]
    Train(#[from] TrainError<T>),
    #[error("no access point column passed the correlation threshold")]
    NoFeaturesSelected,
    #[error("training split is empty")]
    EmptyTrainSplit,
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome<T> {
    pub bundle: ModelBundle<T>,
    pub report: TrainReport<T>,
    pub split: SplitDataset<T>,
}

/// Runs the full training pipeline and fills `report.test` from the held-out rows.
///
/// Correlations are computed on the training split only, as is the scaling.
pub fn fit_pipeline<T: Scalar>(
    dataset: &FingerprintDataset<T>,
    config: &PipelineConfig<T>,
) -> Result<PipelineOutcome<T>, PipelineError<T>> {
    let parts = split(dataset, config.train_ratio, config.seed)?;
    if parts.train.len() < 2 {
        return Err(PipelineError::EmptyTrainSplit);
    }
    let selection = select_features_with(
        &parts.train,
        config.threshold,
        SelectOptions {
            min_coverage: config.min_coverage,
        },
    )?;
    if selection.kept_columns.is_empty() {
        return Err(PipelineError::NoFeaturesSelected);
    }
    let projected = parts
        .train
        .project(&selection.kept_columns)
        .expect("selected columns come from this dataset");
    let normalization = NormalizationParams::fit(&projected)?;
    let mut sidecar = Sidecar::new(selection, normalization);
    for (k, v) in config.train.describe() {
        sidecar.meta.insert(format!("train.{k}"), v);
    }
    sidecar.meta.insert("split.train_ratio".into(), config.train_ratio.to_string());
    sidecar.meta.insert("split.seed".into(), config.seed.to_string());

    let mut model = MlpRegressor::new(sidecar.selection.kept_columns.len(), &config.architecture, config.seed)?;
    let (x, y) = prepare_matrices(&parts.train, &sidecar)?;
    let mut report = train(&mut model, &x, &y, &config.train)?;
    let fit = evaluate(&model, &x, &y, sidecar.normalization.extent)?;
    sidecar.meta.insert("fit.normalized_mae".into(), fit.normalized_mae.to_string());
    sidecar.meta.insert("fit.mean_error_ft".into(), fit.mean_error_ft.to_string());
    report.fit = Some(fit);
    let bundle = ModelBundle::new(model, sidecar)?;
    if !parts.test.is_empty() {
        let (tx, ty) = bundle.prepare(&parts.test)?;
        report.test = Some(evaluate(&bundle.model, &tx, &ty, bundle.sidecar.normalization.extent)?);
    }
    Ok(PipelineOutcome {
        bundle,
        report,
        split: parts,
    })
}
