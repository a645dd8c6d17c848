//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rssinav::model::{Activation, Layer, LayerSpec, Matrix, MlpRegressor};
use rssinav::planner::{Cell, GridMap};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Unit-cost shortest path length (in moves) by breadth-first search.
pub fn bfs_cost(map: &GridMap, start: Cell, goal: Cell) -> Option<usize> {
    if !map.is_walkable(start) || !map.is_walkable(goal) {
        return None;
    }
    let (w, h) = (map.width(), map.height());
    let idx = |c: Cell| c.y as usize * w + c.x as usize;
    let mut dist = vec![usize::MAX; w * h];
    dist[idx(start)] = 0;
    let mut queue = VecDeque::from([start]);
    while let Some(c) = queue.pop_front() {
        if c == goal {
            return Some(dist[idx(c)]);
        }
        for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let n = Cell::new(c.x + dx, c.y + dy);
            if map.is_walkable(n) && dist[idx(n)] == usize::MAX {
                dist[idx(n)] = dist[idx(c)] + 1;
                queue.push_back(n);
            }
        }
    }
    None
}

pub fn random_grid(rng: &mut impl Rng, width: usize, height: usize, blocked: f64) -> GridMap {
    let mask = (0..width * height).map(|_| !rng.random_bool(blocked)).collect();
    GridMap::new(width, height, 1.0, mask).unwrap()
}

/// Ordinary least squares fit `y = a + b x` via the normal equations; returns (a, b).
pub fn least_squares_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let b = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    ((sy - b * sx) / n, b)
}

/// Correlation recovered from the regression slope: r = b * sd(x) / sd(y).
pub fn correlation_via_regression(x: &[f64], y: &[f64]) -> f64 {
    let sd = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / v.len() as f64).sqrt()
    };
    let (_, b) = least_squares_line(x, y);
    b * sd(x) / sd(y)
}

/// Signs that decide which linear piece the training loss is on: every rectifier
/// pre-activation and every output residual.
#[derive(Debug, PartialEq, Eq)]
pub struct KinkSignature(Vec<i8>);

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Training-mode forward pass and MAE written out plainly from the layer
/// parameters, independent of the library's own forward/backward code.
pub fn reference_training_loss(model: &MlpRegressor<f64>, x: &Matrix<f64>, y: &Matrix<f64>) -> (f64, KinkSignature) {
    let n = x.rows();
    let mut act: Vec<Vec<f64>> = (0..n).map(|i| x.row(i).to_vec()).collect();
    let mut signs = Vec::new();
    for layer in model.layers() {
        match layer {
            Layer::Dense(d) => {
                for a in act.iter_mut() {
                    let mut out = Vec::with_capacity(d.biases.len());
                    for o in 0..d.biases.len() {
                        let z = d.biases[o] + (0..a.len()).map(|i| d.weights.get(o, i) * a[i]).sum::<f64>();
                        out.push(match d.activation {
                            Activation::Relu => {
                                signs.push(sign(z));
                                z.max(0.0)
                            }
                            Activation::Identity => z,
                        });
                    }
                    *a = out;
                }
            }
            Layer::BatchNorm(bn) => {
                for j in 0..bn.gamma.len() {
                    let mean = act.iter().map(|a| a[j]).sum::<f64>() / n as f64;
                    let var = act.iter().map(|a| (a[j] - mean).powi(2)).sum::<f64>() / n as f64;
                    for a in act.iter_mut() {
                        a[j] = bn.gamma[j] * (a[j] - mean) / (var + bn.epsilon).sqrt() + bn.beta[j];
                    }
                }
            }
        }
    }
    let mut total = 0.0;
    for (i, a) in act.iter().enumerate() {
        for (j, p) in a.iter().enumerate() {
            let r = p - y.get(i, j);
            signs.push(sign(r));
            total += r.abs();
        }
    }
    (total / (n * y.cols()) as f64, KinkSignature(signs))
}

/// Fourth-order central-difference gradient of [`reference_training_loss`].
/// Entries whose perturbations (up to ±2·step) cross a kink are `None`.
pub fn finite_difference_gradient(
    model: &MlpRegressor<f64>,
    x: &Matrix<f64>,
    y: &Matrix<f64>,
    step: f64,
) -> Vec<Option<f64>> {
    let base = model.parameters();
    let (_, sig0) = reference_training_loss(model, x, y);
    if sig0.0.contains(&0) {
        return vec![None; base.len()];
    }
    let mut probe = model.clone();
    (0..base.len())
        .map(|i| {
            let mut at = |offset: f64| {
                let mut p = base.clone();
                p[i] = base[i] + offset;
                probe.set_parameters(&p).unwrap();
                let (loss, sig) = reference_training_loss(&probe, x, y);
                (sig == sig0).then_some(loss)
            };
            let (f2, f1, b1, b2) = (at(2.0 * step)?, at(step)?, at(-step)?, at(-2.0 * step)?);
            Some((8.0 * (f1 - b1) - (f2 - b2)) / (12.0 * step))
        })
        .collect()
}

/// Small random architecture: 1-3 hidden layers (optionally batch-normalized)
/// and an identity output layer.
pub fn random_architecture(rng: &mut impl Rng) -> (usize, Vec<LayerSpec>) {
    let input = rng.random_range(1..=5);
    let mut spec = Vec::new();
    for _ in 0..rng.random_range(1..=3) {
        let activation = if rng.random_bool(0.75) {
            Activation::Relu
        } else {
            Activation::Identity
        };
        spec.push(LayerSpec::Dense {
            width: rng.random_range(1..=6),
            activation,
        });
        if rng.random_bool(0.5) {
            spec.push(LayerSpec::BatchNorm);
        }
    }
    spec.push(LayerSpec::Dense {
        width: rng.random_range(1..=3),
        activation: Activation::Identity,
    });
    (input, spec)
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix<f64> {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect())
}

/// Largest relative error between analytic and numeric gradients over the
/// differentiable entries, and how many entries were compared.
pub fn max_relative_error(analytic: &[f64], numeric: &[Option<f64>]) -> (f64, usize) {
    let mut worst = 0.0f64;
    let mut compared = 0;
    for (a, n) in analytic.iter().zip(numeric) {
        if let Some(n) = n {
            let denom = a.abs().max(n.abs()).max(1e-7);
            worst = worst.max((a - n).abs() / denom);
            compared += 1;
        }
    }
    (worst, compared)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}
