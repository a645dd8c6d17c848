use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::scalar::Scalar;

use super::layers::{Activation, BatchNormLayer, DenseLayer, Layer, LayerSpec};
use super::loss::mae_gradient;
use super::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("batch-norm layer {0} has no running statistics yet")]
    UninitializedStatistics(usize),
    #[error("empty batch")]
    EmptyBatch,
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch-norm layers normalize with the current batch's statistics.
    Train,
    /// Batch-norm layers use running statistics; samples are independent.
    Infer,
}

/// A stack of dense and batch-norm layers regressing normalized (x, y).
#[derive(Debug, Clone, PartialEq)]
pub struct MlpRegressor<T> {
    layers: Vec<Layer<T>>,
}

/// Intermediate values of a train-mode forward pass, consumed by `backward`.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    input: Matrix<T>,
    steps: Vec<StepCache<T>>,
    output: Matrix<T>,
}

#[derive(Debug, Clone)]
enum StepCache<T> {
    Dense {
        input: Matrix<T>,
        pre_activation: Matrix<T>,
    },
    BatchNorm {
        normalized: Matrix<T>,
        mean: Vec<T>,
        var: Vec<T>,
        inv_std: Vec<T>,
    },
}

impl<T: Scalar> ForwardCache<T> {
    pub fn output(&self) -> &Matrix<T> {
        &self.output
    }

    pub fn batch_size(&self) -> usize {
        self.input.rows()
    }
}

/// Gradient of the loss with respect to one layer's trainable parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerGradient<T> {
    Dense { weights: Matrix<T>, biases: Vec<T> },
    BatchNorm { gamma: Vec<T>, beta: Vec<T> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<LayerGradient<T>>,
}

impl<T: Scalar> Gradients<T> {
    /// Flattened in the same order as [`MlpRegressor::parameters`].
    pub fn flatten(&self) -> Vec<T> {
        let mut out = Vec::new();
        for g in &self.layers {
            match g {
                LayerGradient::Dense { weights, biases } => {
                    out.extend_from_slice(weights.as_slice());
                    out.extend_from_slice(biases);
                }
                LayerGradient::BatchNorm { gamma, beta } => {
                    out.extend_from_slice(gamma);
                    out.extend_from_slice(beta);
                }
            }
        }
        out
    }
}

impl<T: Scalar> MlpRegressor<T> {
    /// Checks that consecutive widths agree.
    pub fn from_layers(layers: Vec<Layer<T>>) -> Result<Self, ModelError> {
        let mut width: Option<usize> = None;
        for (i, layer) in layers.iter().enumerate() {
            let (inp, out) = match layer {
                Layer::Dense(d) => (d.input_width(), d.output_width()),
                Layer::BatchNorm(b) => (b.width(), b.width()),
            };
            if let Some(w) = width {
                if w != inp {
                    return Err(ModelError::InvalidArchitecture(format!(
                        "layer {i} expects width {inp}, previous layer produces {w}"
                    )));
                }
            }
            width = Some(out);
        }
        if !layers.iter().any(|l| matches!(l, Layer::Dense(_))) {
            return Err(ModelError::InvalidArchitecture("no dense layer".into()));
        }
        Ok(Self { layers })
    }

    /// Seeded fan-in uniform initialization: weights drawn from
    /// U(-sqrt(k / fan_in), sqrt(k / fan_in)) with k = 6 for rectifier
    /// layers and k = 3 for identity layers; biases start at 0.
    pub fn new(input_width: usize, spec: &[LayerSpec], seed: u64) -> Result<Self, ModelError> {
        if input_width == 0 {
            return Err(ModelError::InvalidArchitecture("input width 0".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut width = input_width;
        let mut layers = Vec::with_capacity(spec.len());
        for s in spec {
            match *s {
                LayerSpec::Dense { width: out, activation } => {
                    if out == 0 {
                        return Err(ModelError::InvalidArchitecture("dense width 0".into()));
                    }
                    let k = match activation {
                        Activation::Relu => 6.0,
                        Activation::Identity => 3.0,
                    };
                    let limit = (k / width as f64).sqrt();
                    let data = (0..out * width)
                        .map(|_| T::lit(rng.random_range(-limit..limit)))
                        .collect();
                    layers.push(Layer::Dense(DenseLayer::new(
                        Matrix::from_vec(out, width, data),
                        vec![T::zero(); out],
                        activation,
                    )));
                    width = out;
                }
                LayerSpec::BatchNorm => layers.push(Layer::BatchNorm(BatchNormLayer::new(width))),
            }
        }
        Self::from_layers(layers)
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn input_width(&self) -> usize {
        match &self.layers[0] {
            Layer::Dense(d) => d.input_width(),
            Layer::BatchNorm(b) => b.width(),
        }
    }

    pub fn output_width(&self) -> usize {
        self.layers
            .iter()
            .rev()
            .find_map(|l| match l {
                Layer::Dense(d) => Some(d.output_width()),
                Layer::BatchNorm(_) => None,
            })
            .expect("at least one dense layer")
    }

    pub fn layer_specs(&self) -> Vec<LayerSpec> {
        self.layers
            .iter()
            .map(|l| match l {
                Layer::Dense(d) => LayerSpec::Dense {
                    width: d.output_width(),
                    activation: d.activation,
                },
                Layer::BatchNorm(_) => LayerSpec::BatchNorm,
            })
            .collect()
    }

    fn check_input(&self, x: &Matrix<T>) -> Result<(), ModelError> {
        if x.cols() != self.input_width() {
            return Err(ModelError::ShapeMismatch(format!(
                "input has {} features, model expects {}",
                x.cols(),
                self.input_width()
            )));
        }
        if x.rows() == 0 {
            return Err(ModelError::EmptyBatch);
        }
        Ok(())
    }

    /// Forward pass of a single sample.
    pub fn forward(&self, input: &[T], mode: Mode) -> Result<Vec<T>, ModelError> {
        let x = Matrix::from_vec(1, input.len(), input.to_vec());
        Ok(self.forward_batch(&x, mode)?.row(0).to_vec())
    }

    pub fn forward_batch(&self, x: &Matrix<T>, mode: Mode) -> Result<Matrix<T>, ModelError> {
        match mode {
            Mode::Train => Ok(self.forward_train(x)?.output),
            Mode::Infer => self.forward_infer(x),
        }
    }

    fn forward_infer(&self, x: &Matrix<T>) -> Result<Matrix<T>, ModelError> {
        self.check_input(x)?;
        let mut a = x.clone();
        for (li, layer) in self.layers.iter().enumerate() {
            a = match layer {
                Layer::Dense(d) => {
                    let act = d.activation;
                    d.linear(&a).map(|z| act.apply(z))
                }
                Layer::BatchNorm(bn) => {
                    if !bn.stats_ready {
                        return Err(ModelError::UninitializedStatistics(li));
                    }
                    let mut out = a.clone();
                    for s in 0..out.rows() {
                        let row = out.row_mut(s);
                        for j in 0..row.len() {
                            let inv = (bn.running_var[j] + bn.epsilon).sqrt().recip();
                            row[j] = bn.gamma[j] * (row[j] - bn.running_mean[j]) * inv + bn.beta[j];
                        }
                    }
                    out
                }
            };
        }
        Ok(a)
    }

    /// Train-mode forward pass that keeps what `backward` needs.
    pub fn forward_train(&self, x: &Matrix<T>) -> Result<ForwardCache<T>, ModelError> {
        self.check_input(x)?;
        let n = x.rows();
        let nt = T::from_usize_lossy(n);
        let mut steps = Vec::with_capacity(self.layers.len());
        let mut a = x.clone();
        for layer in &self.layers {
            match layer {
                Layer::Dense(d) => {
                    let z = d.linear(&a);
                    let act = d.activation;
                    let out = z.map(|v| act.apply(v));
                    steps.push(StepCache::Dense {
                        input: a,
                        pre_activation: z,
                    });
                    a = out;
                }
                Layer::BatchNorm(bn) => {
                    let w = bn.width();
                    let mut mean = vec![T::zero(); w];
                    let mut var = vec![T::zero(); w];
                    for s in 0..n {
                        for (j, &v) in a.row(s).iter().enumerate() {
                            mean[j] += v;
                        }
                    }
                    mean.iter_mut().for_each(|m| *m /= nt);
                    for s in 0..n {
                        for (j, &v) in a.row(s).iter().enumerate() {
                            let d = v - mean[j];
                            var[j] += d * d;
                        }
                    }
                    var.iter_mut().for_each(|v| *v /= nt);
                    let inv_std: Vec<T> = var.iter().map(|&v| (v + bn.epsilon).sqrt().recip()).collect();
                    let mut normalized = Matrix::zeros(n, w);
                    let mut out = Matrix::zeros(n, w);
                    for s in 0..n {
                        for j in 0..w {
                            let xh = (a.get(s, j) - mean[j]) * inv_std[j];
                            normalized.set(s, j, xh);
                            out.set(s, j, bn.gamma[j] * xh + bn.beta[j]);
                        }
                    }
                    steps.push(StepCache::BatchNorm {
                        normalized,
                        mean,
                        var,
                        inv_std,
                    });
                    a = out;
                }
            }
        }
        Ok(ForwardCache {
            input: x.clone(),
            steps,
            output: a,
        })
    }

    /// Gradients of the mean-absolute-error loss for the batch in `cache`.
    pub fn backward(&self, cache: &ForwardCache<T>, truth: &Matrix<T>) -> Result<Gradients<T>, ModelError> {
        let grad_out = mae_gradient(&cache.output, truth)?;
        self.backward_from(cache, grad_out)
    }

    /// Backpropagates an arbitrary upstream gradient with respect to the network output.
    pub fn backward_from(&self, cache: &ForwardCache<T>, grad_out: Matrix<T>) -> Result<Gradients<T>, ModelError> {
        if cache.steps.len() != self.layers.len() {
            return Err(ModelError::ShapeMismatch("cache does not belong to this model".into()));
        }
        if grad_out.rows() != cache.output.rows() || grad_out.cols() != cache.output.cols() {
            return Err(ModelError::ShapeMismatch("upstream gradient shape".into()));
        }
        let mut grads: Vec<LayerGradient<T>> = Vec::with_capacity(self.layers.len());
        let mut g = grad_out;
        for (layer, step) in self.layers.iter().zip(&cache.steps).rev() {
            match (layer, step) {
                (Layer::Dense(d), StepCache::Dense { input, pre_activation }) => {
                    let (n, out, inp) = (input.rows(), d.output_width(), d.input_width());
                    let mut dz = g;
                    for s in 0..n {
                        for o in 0..out {
                            let v = dz.get(s, o) * d.activation.derivative(pre_activation.get(s, o));
                            dz.set(s, o, v);
                        }
                    }
                    let mut dw = Matrix::zeros(out, inp);
                    let mut db = vec![T::zero(); out];
                    let mut dx = Matrix::zeros(n, inp);
                    for s in 0..n {
                        let xr = input.row(s);
                        for o in 0..out {
                            let gz = dz.get(s, o);
                            if gz == T::zero() {
                                continue;
                            }
                            db[o] += gz;
                            let wrow = d.weights.row(o);
                            let dwrow = dw.row_mut(o);
                            for i in 0..inp {
                                dwrow[i] += gz * xr[i];
                            }
                            let dxrow = dx.row_mut(s);
                            for i in 0..inp {
                                dxrow[i] += gz * wrow[i];
                            }
                        }
                    }
                    grads.push(LayerGradient::Dense { weights: dw, biases: db });
                    g = dx;
                }
                (Layer::BatchNorm(bn), StepCache::BatchNorm { normalized, inv_std, .. }) => {
                    let (n, w) = (normalized.rows(), bn.width());
                    let nt = T::from_usize_lossy(n);
                    let mut dgamma = vec![T::zero(); w];
                    let mut dbeta = vec![T::zero(); w];
                    let mut sum_dxh = vec![T::zero(); w];
                    let mut sum_dxh_xh = vec![T::zero(); w];
                    for s in 0..n {
                        for j in 0..w {
                            let dy = g.get(s, j);
                            let xh = normalized.get(s, j);
                            dgamma[j] += dy * xh;
                            dbeta[j] += dy;
                            let dxh = dy * bn.gamma[j];
                            sum_dxh[j] += dxh;
                            sum_dxh_xh[j] += dxh * xh;
                        }
                    }
                    let mut dx = Matrix::zeros(n, w);
                    for s in 0..n {
                        for j in 0..w {
                            let dxh = g.get(s, j) * bn.gamma[j];
                            let xh = normalized.get(s, j);
                            let v = inv_std[j] / nt * (nt * dxh - sum_dxh[j] - xh * sum_dxh_xh[j]);
                            dx.set(s, j, v);
                        }
                    }
                    grads.push(LayerGradient::BatchNorm { gamma: dgamma, beta: dbeta });
                    g = dx;
                }
                _ => return Err(ModelError::ShapeMismatch("cache does not belong to this model".into())),
            }
        }
        grads.reverse();
        Ok(Gradients { layers: grads })
    }

    /// Folds the batch statistics recorded in `cache` into the running averages.
    pub fn update_running_stats(&mut self, cache: &ForwardCache<T>) {
        for (layer, step) in self.layers.iter_mut().zip(&cache.steps) {
            if let (Layer::BatchNorm(bn), StepCache::BatchNorm { mean, var, .. }) = (layer, step) {
                bn.update_running(mean, var);
            }
        }
    }

    /// Trainable parameters flattened: per dense layer weights then biases,
    /// per batch-norm layer gamma then beta.
    pub fn parameters(&self) -> Vec<T> {
        let mut out = Vec::new();
        for l in &self.layers {
            match l {
                Layer::Dense(d) => {
                    out.extend_from_slice(d.weights.as_slice());
                    out.extend_from_slice(&d.biases);
                }
                Layer::BatchNorm(b) => {
                    out.extend_from_slice(&b.gamma);
                    out.extend_from_slice(&b.beta);
                }
            }
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().len()
    }

    /// Inverse of [`parameters`](Self::parameters).
    pub fn set_parameters(&mut self, values: &[T]) -> Result<(), ModelError> {
        if values.len() != self.parameter_count() {
            return Err(ModelError::ShapeMismatch(format!(
                "{} parameter values for {} parameters",
                values.len(),
                self.parameter_count()
            )));
        }
        let mut it = values.iter().copied();
        let mut fill = |dst: &mut [T]| dst.iter_mut().for_each(|v| *v = it.next().unwrap());
        for l in &mut self.layers {
            match l {
                Layer::Dense(d) => {
                    fill(d.weights.as_mut_slice());
                    fill(&mut d.biases);
                }
                Layer::BatchNorm(b) => {
                    fill(&mut b.gamma);
                    fill(&mut b.beta);
                }
            }
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.parameters().iter().all(|v| v.is_finite())
    }
}
