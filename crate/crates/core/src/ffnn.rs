//! Feed-forward baseline: the window as a flat vector, one relu layer of
//! five units, and a single sigmoid output unit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, relu_scalar, sigmoid_scalar, Matrix, Vector};
use crate::model::{
    check_type_tag, glorot, json_err, matrix_field, vector_field, ModelMeta, OutputHead, ParamSet, ScalerJson,
};

pub const HIDDEN_UNITS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct FfnnParams {
    pub head: OutputHead,
    pub w1: Matrix,
    pub b1: Vector,
    pub w2: Matrix,
    pub b2: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FfnnCache {
    pub x: Vec<f64>,
    /// Pre-activations of the relu layer.
    pub pre: Vec<f64>,
    pub hidden: Vec<f64>,
    pub y_hat: f64,
}

impl FfnnParams {
    pub fn zeros(window: usize) -> Self {
        Self {
            head: OutputHead::Sigmoid,
            w1: Matrix::zeros(HIDDEN_UNITS, window),
            b1: Vector::zeros(HIDDEN_UNITS),
            w2: Matrix::zeros(1, HIDDEN_UNITS),
            b2: Vector::zeros(1),
        }
    }

    /// Glorot-uniform weights and zero biases, seeded like the LSTM.
    pub fn init(window: usize, seed: u64) -> Result<Self> {
        if window == 0 {
            return Err(Error::InvalidArgument("FFNN window must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(window);
        p.w1 = glorot(&mut rng, HIDDEN_UNITS, window, window, HIDDEN_UNITS);
        p.w2 = glorot(&mut rng, 1, HIDDEN_UNITS, HIDDEN_UNITS, 1);
        Ok(p)
    }

    pub fn with_head(mut self, head: OutputHead) -> Self {
        self.head = head;
        self
    }

    pub fn window(&self) -> usize {
        self.w1.cols()
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.window()).with_head(self.head)
    }

    fn check_shapes(&self) -> Result<()> {
        let n = self.w1.rows();
        if self.b1.len() != n || self.w2.rows() != 1 || self.w2.cols() != n || self.b2.len() != 1 {
            return Err(Error::Shape(format!(
                "W1 {} b1 {} W2 {} b2 {}",
                self.w1.shape(),
                self.b1.len(),
                self.w2.shape(),
                self.b2.len()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, window: &[f64]) -> Result<(f64, FfnnCache)> {
        self.check_shapes()?;
        if window.len() != self.window() {
            return Err(Error::Shape(format!("window of {} values for W1 {}", window.len(), self.w1.shape())));
        }
        let pre: Vec<f64> = self
            .w1
            .as_slice()
            .chunks_exact(self.window())
            .zip(self.b1.as_slice())
            .map(|(row, b)| dot(row, window) + b)
            .collect();
        let hidden: Vec<f64> = pre.iter().map(|&v| relu_scalar(v)).collect();
        let z = dot(self.w2.as_slice(), &hidden) + self.b2.0[0];
        let y_hat = match self.head {
            OutputHead::Sigmoid => sigmoid_scalar(z),
            OutputHead::Linear => z,
        };
        Ok((y_hat, FfnnCache { x: window.to_vec(), pre, hidden, y_hat }))
    }

    pub fn predict(&self, window: &[f64]) -> Result<f64> {
        self.forward(window).map(|(y, _)| y)
    }

    pub fn backward(&self, cache: &FfnnCache, d_yhat: f64) -> Result<FfnnParams> {
        let mut grads = self.zeros_like();
        self.backward_acc(cache, d_yhat, &mut grads)?;
        Ok(grads)
    }

    /// Adds the gradient into `grads`. The relu derivative at 0 is taken as 0.
    pub fn backward_acc(&self, cache: &FfnnCache, d_yhat: f64, grads: &mut FfnnParams) -> Result<()> {
        if cache.x.len() != self.window() || cache.pre.len() != self.w1.rows() {
            return Err(Error::Shape(format!("cache for window {} used with W1 {}", cache.x.len(), self.w1.shape())));
        }
        if grads.w1.shape() != self.w1.shape() {
            return Err(Error::Shape("gradient buffer does not match params".into()));
        }
        let d_z = match self.head {
            OutputHead::Sigmoid => d_yhat * cache.y_hat * (1.0 - cache.y_hat),
            OutputHead::Linear => d_yhat,
        };
        grads.w2.add_outer(&[d_z], &cache.hidden);
        grads.b2.0[0] += d_z;
        let d_pre: Vec<f64> =
            self.w2.as_slice().iter().zip(&cache.pre).map(|(w, &p)| if p > 0.0 { w * d_z } else { 0.0 }).collect();
        grads.w1.add_outer(&d_pre, &cache.x);
        grads.b1.0.iter_mut().zip(&d_pre).for_each(|(g, d)| *g += d);
        Ok(())
    }
}

impl ParamSet for FfnnParams {
    fn slices(&self) -> Vec<&[f64]> {
        vec![self.w1.as_slice(), self.b1.as_slice(), self.w2.as_slice(), self.b2.as_slice()]
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.w1.as_mut_slice(), self.b1.as_mut_slice(), self.w2.as_mut_slice(), self.b2.as_mut_slice()]
    }
}

#[allow(non_snake_case)]
#[derive(Serialize, Deserialize)]
struct FfnnWeights {
    W1: Vec<f64>,
    b1: Vec<f64>,
    W2: Vec<f64>,
    b2: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct FfnnFile {
    #[serde(rename = "type")]
    kind: String,
    #[serde(rename = "T")]
    window: usize,
    #[serde(default = "hidden_units")]
    hidden: usize,
    #[serde(default)]
    head: OutputHead,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scaler: Option<ScalerJson>,
    weights: FfnnWeights,
}

fn hidden_units() -> usize {
    HIDDEN_UNITS
}

pub fn serialize(p: &FfnnParams, meta: &ModelMeta) -> String {
    let file = FfnnFile {
        kind: "ffnn".into(),
        window: p.window(),
        hidden: p.w1.rows(),
        head: p.head,
        scaler: meta.scaler.map(ScalerJson::from),
        weights: FfnnWeights {
            W1: p.w1.as_slice().to_vec(),
            b1: p.b1.0.clone(),
            W2: p.w2.as_slice().to_vec(),
            b2: p.b2.0.clone(),
        },
    };
    serde_json::to_string_pretty(&file).expect("model serializes")
}

pub fn deserialize(text: &str) -> Result<(FfnnParams, ModelMeta)> {
    let file: FfnnFile = serde_json::from_str(text).map_err(json_err)?;
    check_type_tag(&file.kind, "ffnn")?;
    let (t, n) = (file.window, file.hidden);
    if t == 0 || n == 0 {
        return Err(Error::Schema("T and hidden must be positive".into()));
    }
    let w = file.weights;
    let params = FfnnParams {
        head: file.head,
        w1: matrix_field("W1", w.W1, n, t)?,
        b1: vector_field("b1", w.b1, n)?,
        w2: matrix_field("W2", w.W2, 1, n)?,
        b2: vector_field("b2", w.b2, 1)?,
    };
    let scaler = file.scaler.map(ScalerJson::to_params).transpose()?;
    Ok((params, ModelMeta { window: t, scaler }))
}
