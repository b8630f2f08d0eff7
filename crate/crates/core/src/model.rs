//! Shared pieces of the JSON model files and the parameter-set abstraction
//! used by the optimizer.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::ScalerParams;
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

/// Final squashing of the sequence-to-one head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputHead {
    #[default]
    Sigmoid,
    Linear,
}

/// Everything stored next to the weights in a model file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelMeta {
    pub window: usize,
    pub scaler: Option<ScalerParams>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub(crate) struct ScalerJson {
    pub min: f64,
    pub max: f64,
}

impl ScalerJson {
    pub fn to_params(self) -> Result<ScalerParams> {
        ScalerParams::new(self.min, self.max).map_err(|e| Error::Schema(format!("scaler: {e}")))
    }
}

impl From<ScalerParams> for ScalerJson {
    fn from(s: ScalerParams) -> Self {
        Self { min: s.min, max: s.max }
    }
}

/// A collection of trainable tensors that can be visited in a fixed order.
pub trait ParamSet {
    fn slices(&self) -> Vec<&[f64]>;
    fn slices_mut(&mut self) -> Vec<&mut [f64]>;

    fn num_scalars(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    fn flatten(&self) -> Vec<f64> {
        self.slices().concat()
    }

    fn fill(&mut self, v: f64) {
        for s in self.slices_mut() {
            s.iter_mut().for_each(|x| *x = v);
        }
    }
}

/// Glorot-uniform matrix with limit `sqrt(6 / (fan_in + fan_out))`.
pub(crate) fn glorot<R: Rng>(rng: &mut R, rows: usize, cols: usize, fan_in: usize, fan_out: usize) -> Matrix {
    let limit = glorot_limit(fan_in, fan_out);
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-limit..=limit))
}

pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

pub(crate) fn matrix_field(name: &str, data: Vec<f64>, rows: usize, cols: usize) -> Result<Matrix> {
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Schema(format!("weights.{name}: non-finite value")));
    }
    Matrix::from_vec(rows, cols, data)
        .map_err(|_| Error::Schema(format!("weights.{name}: expected {} values ({rows}x{cols})", rows * cols)))
}

pub(crate) fn vector_field(name: &str, data: Vec<f64>, len: usize) -> Result<Vector> {
    if data.len() != len {
        return Err(Error::Schema(format!("weights.{name}: expected {len} values, got {}", data.len())));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Schema(format!("weights.{name}: non-finite value")));
    }
    Ok(Vector(data))
}

pub(crate) fn check_type_tag(found: &str, expected: &str) -> Result<()> {
    if found != expected {
        return Err(Error::Schema(format!("type: expected {expected:?}, found {found:?}")));
    }
    Ok(())
}

pub(crate) fn json_err(e: serde_json::Error) -> Error {
    Error::Schema(e.to_string())
}

/// Reads only the `"type"` tag of a model file.
pub fn model_type(text: &str) -> Result<String> {
    #[derive(Deserialize)]
    struct Tag {
        #[serde(rename = "type")]
        kind: String,
    }
    Ok(serde_json::from_str::<Tag>(text).map_err(json_err)?.kind)
}
