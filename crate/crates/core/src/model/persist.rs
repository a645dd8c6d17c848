//! Binary model file.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic        8 bytes  "RSSINAV\0"
//! version      u32      = 1
//! layer_count  u32
//! per layer    u8 kind (0 = dense, 1 = batch-norm), then
//!              dense:      u32 input, u32 output, u8 activation (0 relu, 1 identity)
//!              batch-norm: u32 width, f64 epsilon, f64 momentum, u8 stats_ready
//! parameters   f64 blocks in layer order:
//!              dense:      weights (output x input, row-major), biases
//!              batch-norm: gamma, beta, running_mean, running_var
//! sidecar      u32 byte length, UTF-8 sidecar text (feature selection + normalization)
//! checksum     32 bytes SHA-256 of everything above
//! ```

use std::io::{Read, Write};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::features::{FeatureError, Sidecar};
use crate::scalar::Scalar;

use super::layers::{Activation, BatchNormLayer, DenseLayer, Layer};
use super::matrix::Matrix;
use super::network::{MlpRegressor, ModelError};
use super::predict::ModelBundle;

pub const MODEL_MAGIC: &[u8; 8] = b"RSSINAV\0";
pub const MODEL_FORMAT_VERSION: u32 = 1;
const CHECKSUM_LEN: usize = 32;
const MAX_WIDTH: u32 = 1 << 20;

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("unsupported model format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt model file: {0}")]
    CorruptFile(String),
    #[error("model file checksum does not match its contents")]
    ChecksumFailure,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<ModelError> for PersistError {
    fn from(e: ModelError) -> Self {
        PersistError::CorruptFile(e.to_string())
    }
}

impl From<FeatureError> for PersistError {
    fn from(e: FeatureError) -> Self {
        PersistError::CorruptFile(e.to_string())
    }
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_f64s<T: Scalar>(buf: &mut Vec<u8>, values: &[T]) {
    for v in values {
        buf.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
    }
}

/// Serializes the bundle to bytes.
pub fn encode_model<T: Scalar>(bundle: &ModelBundle<T>) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MODEL_MAGIC);
    put_u32(&mut buf, MODEL_FORMAT_VERSION);
    let layers = bundle.model.layers();
    put_u32(&mut buf, layers.len() as u32);
    for layer in layers {
        match layer {
            Layer::Dense(d) => {
                buf.push(0);
                put_u32(&mut buf, d.input_width() as u32);
                put_u32(&mut buf, d.output_width() as u32);
                buf.push(d.activation.code());
            }
            Layer::BatchNorm(b) => {
                buf.push(1);
                put_u32(&mut buf, b.width() as u32);
                put_f64s(&mut buf, &[b.epsilon, b.momentum]);
                buf.push(u8::from(b.stats_ready));
            }
        }
    }
    for layer in layers {
        match layer {
            Layer::Dense(d) => {
                put_f64s(&mut buf, d.weights.as_slice());
                put_f64s(&mut buf, &d.biases);
            }
            Layer::BatchNorm(b) => {
                put_f64s(&mut buf, &b.gamma);
                put_f64s(&mut buf, &b.beta);
                put_f64s(&mut buf, &b.running_mean);
                put_f64s(&mut buf, &b.running_var);
            }
        }
    }
    let text = bundle.sidecar.to_text();
    put_u32(&mut buf, text.len() as u32);
    buf.extend_from_slice(text.as_bytes());
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    buf
}

pub fn save_model<T: Scalar, W: Write>(bundle: &ModelBundle<T>, mut sink: W) -> Result<(), PersistError> {
    sink.write_all(&encode_model(bundle))?;
    sink.flush()?;
    Ok(())
}

pub fn load_model<T: Scalar, R: Read>(mut source: R) -> Result<ModelBundle<T>, PersistError> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    decode_model(&bytes)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], PersistError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| PersistError::CorruptFile(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, PersistError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, PersistError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn width(&mut self) -> Result<usize, PersistError> {
        let w = self.u32()?;
        if w == 0 || w > MAX_WIDTH {
            return Err(PersistError::CorruptFile(format!("implausible layer width {w}")));
        }
        Ok(w as usize)
    }

    fn f64s<T: Scalar>(&mut self, n: usize) -> Result<Vec<T>, PersistError> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| PersistError::CorruptFile("overflow".into()))?)?;
        raw.chunks_exact(8)
            .map(|c| {
                let v = f64::from_le_bytes(c.try_into().unwrap());
                T::from_f64(v).ok_or_else(|| PersistError::CorruptFile("parameter out of range".into()))
            })
            .collect()
    }
}

enum Header {
    Dense { input: usize, output: usize, activation: Activation },
    BatchNorm { width: usize, epsilon: f64, momentum: f64, ready: bool },
}

pub fn decode_model<T: Scalar>(bytes: &[u8]) -> Result<ModelBundle<T>, PersistError> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(MODEL_MAGIC.len())? != MODEL_MAGIC {
        return Err(PersistError::CorruptFile("bad magic".into()));
    }
    let version = c.u32()?;
    if version != MODEL_FORMAT_VERSION {
        return Err(PersistError::VersionMismatch {
            found: version,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    let count = c.u32()? as usize;
    if count == 0 || count > 1024 {
        return Err(PersistError::CorruptFile(format!("implausible layer count {count}")));
    }
    let mut headers = Vec::with_capacity(count);
    for _ in 0..count {
        headers.push(match c.u8()? {
            0 => {
                let input = c.width()?;
                let output = c.width()?;
                let activation = Activation::from_code(c.u8()?)
                    .ok_or_else(|| PersistError::CorruptFile("unknown activation".into()))?;
                Header::Dense { input, output, activation }
            }
            1 => {
                let width = c.width()?;
                let p: Vec<f64> = c.f64s(2)?;
                let ready = match c.u8()? {
                    0 => false,
                    1 => true,
                    _ => return Err(PersistError::CorruptFile("bad flag".into())),
                };
                Header::BatchNorm { width, epsilon: p[0], momentum: p[1], ready }
            }
            k => return Err(PersistError::CorruptFile(format!("unknown layer kind {k}"))),
        });
    }
    let mut layers = Vec::with_capacity(count);
    for h in headers {
        layers.push(match h {
            Header::Dense { input, output, activation } => {
                let w = c.f64s(input * output)?;
                let b = c.f64s(output)?;
                Layer::Dense(DenseLayer::new(Matrix::from_vec(output, input, w), b, activation))
            }
            Header::BatchNorm { width, epsilon, momentum, ready } => {
                let mut bn = BatchNormLayer::new(width);
                bn.gamma = c.f64s(width)?;
                bn.beta = c.f64s(width)?;
                bn.running_mean = c.f64s(width)?;
                bn.running_var = c.f64s(width)?;
                bn.epsilon = T::lit(epsilon);
                bn.momentum = T::lit(momentum);
                bn.stats_ready = ready;
                Layer::BatchNorm(bn)
            }
        });
    }
    let text_len = c.u32()? as usize;
    let text = std::str::from_utf8(c.take(text_len)?)
        .map_err(|_| PersistError::CorruptFile("sidecar is not UTF-8".into()))?;
    let body_end = c.pos;
    let stored = c.take(CHECKSUM_LEN)?;
    if c.pos != bytes.len() {
        return Err(PersistError::CorruptFile("trailing bytes after checksum".into()));
    }
    if Sha256::digest(&bytes[..body_end]).as_slice() != stored {
        return Err(PersistError::ChecksumFailure);
    }
    let model = MlpRegressor::from_layers(layers)?;
    let sidecar = Sidecar::from_text(text)?;
    Ok(ModelBundle::new(model, sidecar)?)
}
