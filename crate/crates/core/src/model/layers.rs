use crate::scalar::Scalar;

use super::matrix::Matrix;

pub const BATCH_NORM_EPSILON: f64 = 1e-5;
pub const BATCH_NORM_MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    pub fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Relu => z.max(T::zero()),
            Activation::Identity => z,
        }
    }

    /// Derivative at `z`; the rectifier's derivative at exactly 0 is taken as 0.
    pub fn derivative<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Relu if z > T::zero() => T::one(),
            Activation::Relu => T::zero(),
            Activation::Identity => T::one(),
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Identity => 1,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// Fully connected layer; `weights` is `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T> {
    pub weights: Matrix<T>,
    pub biases: Vec<T>,
    pub activation: Activation,
}

impl<T: Scalar> DenseLayer<T> {
    pub fn new(weights: Matrix<T>, biases: Vec<T>, activation: Activation) -> Self {
        assert_eq!(weights.rows(), biases.len(), "one bias per output");
        Self {
            weights,
            biases,
            activation,
        }
    }

    pub fn zeros(input: usize, output: usize, activation: Activation) -> Self {
        Self::new(Matrix::zeros(output, input), vec![T::zero(); output], activation)
    }

    pub fn input_width(&self) -> usize {
        self.weights.cols()
    }

    pub fn output_width(&self) -> usize {
        self.weights.rows()
    }

    /// Pre-activation `x W^T + b` for a batch.
    pub(crate) fn linear(&self, x: &Matrix<T>) -> Matrix<T> {
        let (n, out, inp) = (x.rows(), self.output_width(), self.input_width());
        let mut z = Matrix::zeros(n, out);
        for s in 0..n {
            let xr = x.row(s);
            for o in 0..out {
                let w = self.weights.row(o);
                let mut acc = self.biases[o];
                for i in 0..inp {
                    acc += w[i] * xr[i];
                }
                z.set(s, o, acc);
            }
        }
        z
    }
}

/// Per-feature batch normalization with learned scale/shift and running statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormLayer<T> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    pub epsilon: T,
    pub momentum: T,
    /// False until running statistics have been set or updated at least once.
    pub stats_ready: bool,
}

impl<T: Scalar> BatchNormLayer<T> {
    pub fn new(width: usize) -> Self {
        Self {
            gamma: vec![T::one(); width],
            beta: vec![T::zero(); width],
            running_mean: vec![T::zero(); width],
            running_var: vec![T::one(); width],
            epsilon: T::lit(BATCH_NORM_EPSILON),
            momentum: T::lit(BATCH_NORM_MOMENTUM),
            stats_ready: false,
        }
    }

    /// A layer with explicit parameters and running statistics, ready for inference.
    pub fn from_parts(gamma: Vec<T>, beta: Vec<T>, running_mean: Vec<T>, running_var: Vec<T>) -> Self {
        let w = gamma.len();
        assert!(beta.len() == w && running_mean.len() == w && running_var.len() == w);
        Self {
            gamma,
            beta,
            running_mean,
            running_var,
            epsilon: T::lit(BATCH_NORM_EPSILON),
            momentum: T::lit(BATCH_NORM_MOMENTUM),
            stats_ready: true,
        }
    }

    pub fn width(&self) -> usize {
        self.gamma.len()
    }

    /// Exponential moving average toward this batch's statistics.
    pub(crate) fn update_running(&mut self, mean: &[T], var: &[T]) {
        let m = self.momentum;
        let keep = T::one() - m;
        for j in 0..self.width() {
            self.running_mean[j] = m * self.running_mean[j] + keep * mean[j];
            self.running_var[j] = (m * self.running_var[j] + keep * var[j]).max(T::zero());
        }
        self.stats_ready = true;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer<T> {
    Dense(DenseLayer<T>),
    BatchNorm(BatchNormLayer<T>),
}

/// Layer description used to build a network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Dense { width: usize, activation: Activation },
    BatchNorm,
}

/// dense(32, relu) -> batch-norm -> dense(64, relu) -> dense(2, identity)
pub fn default_architecture() -> Vec<LayerSpec> {
    vec![
        LayerSpec::Dense {
            width: 32,
            activation: Activation::Relu,
        },
        LayerSpec::BatchNorm,
        LayerSpec::Dense {
            width: 64,
            activation: Activation::Relu,
        },
        LayerSpec::Dense {
            width: 2,
            activation: Activation::Identity,
        },
    ]
}
