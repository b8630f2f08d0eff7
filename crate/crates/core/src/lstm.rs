//! Single-layer LSTM regressor.
//!
//! Each cell reads `z = [a_prev, x_t]` and computes
//!
//! ```text
//! f = σ(W_f z + b_f)      i = σ(W_i z + b_i)
//! u = tanh(W_c z + b_c)   o = σ(W_o z + b_o)
//! c = f ∗ c_prev + i ∗ u  a = o ∗ tanh(c)
//! ```
//!
//! Cells are chained over the window from a zero state and the prediction is
//! `ŷ = σ(W_y a_T + b_y)` (or the affine map alone with [`OutputHead::Linear`]).
//! Gradients are exact backpropagation through time over the whole window.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::ScalerParams;
use crate::error::{Error, Result};
use crate::linalg::{dot, sigmoid_scalar, Matrix, Vector};
use crate::model::{
    check_type_tag, glorot, json_err, matrix_field, vector_field, ModelMeta, OutputHead, ParamSet, ScalerJson,
};

pub const DEFAULT_HIDDEN: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub hidden: usize,
    pub input: usize,
    pub head: OutputHead,
    pub w_f: Matrix,
    pub w_i: Matrix,
    pub w_c: Matrix,
    pub w_o: Matrix,
    pub b_f: Vector,
    pub b_i: Vector,
    pub b_c: Vector,
    pub b_o: Vector,
    pub w_y: Matrix,
    pub b_y: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub a: Vector,
    pub c: Vector,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        Self { a: Vector::zeros(hidden), c: Vector::zeros(hidden) }
    }
}

/// Activations of one time step, kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCache {
    pub x: Vec<f64>,
    /// `[a_prev, x]`
    pub concat: Vec<f64>,
    pub gate_f: Vec<f64>,
    pub gate_i: Vec<f64>,
    pub candidate: Vec<f64>,
    pub gate_o: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub a: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    pub steps: Vec<StepCache>,
    pub y_hat: f64,
    hidden: usize,
    input: usize,
}

impl LstmParams {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        let z = hidden + input;
        Self {
            hidden,
            input,
            head: OutputHead::Sigmoid,
            w_f: Matrix::zeros(hidden, z),
            w_i: Matrix::zeros(hidden, z),
            w_c: Matrix::zeros(hidden, z),
            w_o: Matrix::zeros(hidden, z),
            b_f: Vector::zeros(hidden),
            b_i: Vector::zeros(hidden),
            b_c: Vector::zeros(hidden),
            b_o: Vector::zeros(hidden),
            w_y: Matrix::zeros(1, hidden),
            b_y: Vector::zeros(1),
        }
    }

    /// Glorot-uniform weights from a seeded ChaCha8 stream; biases zero except
    /// the forget bias, which starts at 1.
    pub fn init(hidden: usize, input: usize, seed: u64) -> Result<Self> {
        if hidden == 0 || input == 0 {
            return Err(Error::InvalidArgument("LSTM needs hidden >= 1 and input >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = hidden + input;
        let mut p = Self::zeros(hidden, input);
        p.w_f = glorot(&mut rng, hidden, z, z, hidden);
        p.w_i = glorot(&mut rng, hidden, z, z, hidden);
        p.w_c = glorot(&mut rng, hidden, z, z, hidden);
        p.w_o = glorot(&mut rng, hidden, z, z, hidden);
        p.w_y = glorot(&mut rng, 1, hidden, hidden, 1);
        p.b_f = Vector::filled(hidden, 1.0);
        Ok(p)
    }

    pub fn with_head(mut self, head: OutputHead) -> Self {
        self.head = head;
        self
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.hidden, self.input).with_head(self.head)
    }

    fn check_shapes(&self) -> Result<()> {
        let (h, z) = (self.hidden, self.hidden + self.input);
        let mats = [("W_f", &self.w_f), ("W_i", &self.w_i), ("W_c", &self.w_c), ("W_o", &self.w_o)];
        for (name, m) in mats {
            if m.rows() != h || m.cols() != z {
                return Err(Error::Shape(format!("{name} is {}, expected {h}x{z}", m.shape())));
            }
        }
        let vecs = [("b_f", &self.b_f), ("b_i", &self.b_i), ("b_c", &self.b_c), ("b_o", &self.b_o)];
        for (name, v) in vecs {
            if v.len() != h {
                return Err(Error::Shape(format!("{name} has length {}, expected {h}", v.len())));
            }
        }
        if self.w_y.rows() != 1 || self.w_y.cols() != h || self.b_y.len() != 1 {
            return Err(Error::Shape(format!(
                "output head is {} + {}, expected 1x{h} + 1",
                self.w_y.shape(),
                self.b_y.len()
            )));
        }
        Ok(())
    }

    /// One cell step from `prev`.
    pub fn cell_forward(&self, x_t: &[f64], prev: &LstmState) -> Result<(LstmState, StepCache)> {
        self.check_shapes()?;
        if x_t.len() != self.input || prev.a.len() != self.hidden || prev.c.len() != self.hidden {
            return Err(Error::Shape(format!(
                "cell input {} / state {}+{} for hidden {} input {}",
                x_t.len(),
                prev.a.len(),
                prev.c.len(),
                self.hidden,
                self.input
            )));
        }
        let step = self.step(x_t, prev.a.as_slice(), prev.c.as_slice());
        let state = LstmState { a: Vector(step.a.clone()), c: Vector(step.c.clone()) };
        Ok((state, step))
    }

    fn step(&self, x_t: &[f64], a_prev: &[f64], c_prev: &[f64]) -> StepCache {
        let h = self.hidden;
        let mut concat = Vec::with_capacity(h + self.input);
        concat.extend_from_slice(a_prev);
        concat.extend_from_slice(x_t);

        let affine = |w: &Matrix, b: &Vector| -> Vec<f64> {
            let cols = w.cols();
            w.as_slice().chunks_exact(cols).zip(b.as_slice()).map(|(row, bias)| dot(row, &concat) + bias).collect()
        };
        let mut gate_f = affine(&self.w_f, &self.b_f);
        let mut gate_i = affine(&self.w_i, &self.b_i);
        let mut candidate = affine(&self.w_c, &self.b_c);
        let mut gate_o = affine(&self.w_o, &self.b_o);
        gate_f.iter_mut().for_each(|v| *v = sigmoid_scalar(*v));
        gate_i.iter_mut().for_each(|v| *v = sigmoid_scalar(*v));
        candidate.iter_mut().for_each(|v| *v = v.tanh());
        gate_o.iter_mut().for_each(|v| *v = sigmoid_scalar(*v));

        let c: Vec<f64> = (0..h).map(|k| gate_f[k] * c_prev[k] + gate_i[k] * candidate[k]).collect();
        let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        let a: Vec<f64> = gate_o.iter().zip(&tanh_c).map(|(o, t)| o * t).collect();
        StepCache { x: x_t.to_vec(), concat, gate_f, gate_i, candidate, gate_o, c_prev: c_prev.to_vec(), c, tanh_c, a }
    }

    fn head_out(&self, a_last: &[f64]) -> f64 {
        let z = dot(self.w_y.as_slice(), a_last) + self.b_y.0[0];
        match self.head {
            OutputHead::Sigmoid => sigmoid_scalar(z),
            OutputHead::Linear => z,
        }
    }

    /// Runs the window (`T * input` values, time-major) from a zero state.
    pub fn forward(&self, window: &[f64]) -> Result<(f64, ForwardCache)> {
        self.check_shapes()?;
        if window.is_empty() || !window.len().is_multiple_of(self.input) {
            return Err(Error::InvalidArgument(format!(
                "window of {} values does not hold whole steps of {} inputs",
                window.len(),
                self.input
            )));
        }
        let mut steps: Vec<StepCache> = Vec::with_capacity(window.len() / self.input);
        let zeros = vec![0.0; self.hidden];
        for x_t in window.chunks_exact(self.input) {
            let step = match steps.last() {
                Some(prev) => self.step(x_t, &prev.a, &prev.c),
                None => self.step(x_t, &zeros, &zeros),
            };
            steps.push(step);
        }
        let y_hat = self.head_out(&steps.last().expect("window is nonempty").a);
        Ok((y_hat, ForwardCache { steps, y_hat, hidden: self.hidden, input: self.input }))
    }

    pub fn predict(&self, window: &[f64]) -> Result<f64> {
        self.forward(window).map(|(y, _)| y)
    }

    /// Gradient of `loss` for a given `d_loss/d_ŷ`.
    pub fn backward(&self, cache: &ForwardCache, d_yhat: f64) -> Result<LstmParams> {
        let mut grads = self.zeros_like();
        self.backward_acc(cache, d_yhat, &mut grads)?;
        Ok(grads)
    }

    /// Adds the gradient into `grads`.
    pub fn backward_acc(&self, cache: &ForwardCache, d_yhat: f64, grads: &mut LstmParams) -> Result<()> {
        let h = self.hidden;
        if cache.hidden != h || cache.input != self.input || cache.steps.is_empty() {
            return Err(Error::Shape(format!(
                "cache for hidden {} input {} used with params of hidden {h} input {}",
                cache.hidden, cache.input, self.input
            )));
        }
        if grads.hidden != h || grads.input != self.input {
            return Err(Error::Shape("gradient buffer does not match params".into()));
        }
        if d_yhat == 0.0 {
            return Ok(());
        }
        let d_z = match self.head {
            OutputHead::Sigmoid => d_yhat * cache.y_hat * (1.0 - cache.y_hat),
            OutputHead::Linear => d_yhat,
        };
        let last = cache.steps.last().expect("checked nonempty");
        grads.w_y.add_outer(&[d_z], &last.a);
        grads.b_y.0[0] += d_z;

        let mut d_a: Vec<f64> = self.w_y.as_slice().iter().map(|w| w * d_z).collect();
        let mut d_c_next = vec![0.0; h];
        let mut dz_f = vec![0.0; h];
        let mut dz_i = vec![0.0; h];
        let mut dz_u = vec![0.0; h];
        let mut dz_o = vec![0.0; h];
        let mut d_concat = vec![0.0; h + self.input];

        for (t, s) in cache.steps.iter().enumerate().rev() {
            for k in 0..h {
                let d_o = d_a[k] * s.tanh_c[k];
                let d_c = d_c_next[k] + d_a[k] * s.gate_o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
                let d_f = d_c * s.c_prev[k];
                let d_i = d_c * s.candidate[k];
                let d_u = d_c * s.gate_i[k];
                d_c_next[k] = d_c * s.gate_f[k];
                dz_f[k] = d_f * s.gate_f[k] * (1.0 - s.gate_f[k]);
                dz_i[k] = d_i * s.gate_i[k] * (1.0 - s.gate_i[k]);
                dz_u[k] = d_u * (1.0 - s.candidate[k] * s.candidate[k]);
                dz_o[k] = d_o * s.gate_o[k] * (1.0 - s.gate_o[k]);
            }
            grads.w_f.add_outer(&dz_f, &s.concat);
            grads.w_i.add_outer(&dz_i, &s.concat);
            grads.w_c.add_outer(&dz_u, &s.concat);
            grads.w_o.add_outer(&dz_o, &s.concat);
            add_into(&mut grads.b_f.0, &dz_f);
            add_into(&mut grads.b_i.0, &dz_i);
            add_into(&mut grads.b_c.0, &dz_u);
            add_into(&mut grads.b_o.0, &dz_o);

            if t > 0 {
                d_concat.iter_mut().for_each(|v| *v = 0.0);
                self.w_f.matvec_t_acc(&dz_f, &mut d_concat);
                self.w_i.matvec_t_acc(&dz_i, &mut d_concat);
                self.w_c.matvec_t_acc(&dz_u, &mut d_concat);
                self.w_o.matvec_t_acc(&dz_o, &mut d_concat);
                d_a.copy_from_slice(&d_concat[..h]);
            }
        }
        Ok(())
    }
}

fn add_into(acc: &mut [f64], v: &[f64]) {
    acc.iter_mut().zip(v).for_each(|(a, b)| *a += b);
}

impl ParamSet for LstmParams {
    fn slices(&self) -> Vec<&[f64]> {
        vec![
            self.w_f.as_slice(),
            self.w_i.as_slice(),
            self.w_c.as_slice(),
            self.w_o.as_slice(),
            self.b_f.as_slice(),
            self.b_i.as_slice(),
            self.b_c.as_slice(),
            self.b_o.as_slice(),
            self.w_y.as_slice(),
            self.b_y.as_slice(),
        ]
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w_f.as_mut_slice(),
            self.w_i.as_mut_slice(),
            self.w_c.as_mut_slice(),
            self.w_o.as_mut_slice(),
            self.b_f.as_mut_slice(),
            self.b_i.as_mut_slice(),
            self.b_c.as_mut_slice(),
            self.b_o.as_mut_slice(),
            self.w_y.as_mut_slice(),
            self.b_y.as_mut_slice(),
        ]
    }
}

#[allow(non_snake_case)]
#[derive(Serialize, Deserialize)]
struct LstmWeights {
    W_f: Vec<f64>,
    W_i: Vec<f64>,
    W_c: Vec<f64>,
    W_o: Vec<f64>,
    b_f: Vec<f64>,
    b_i: Vec<f64>,
    b_c: Vec<f64>,
    b_o: Vec<f64>,
    W_y: Vec<f64>,
    b_y: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct LstmFile {
    #[serde(rename = "type")]
    kind: String,
    hidden: usize,
    #[serde(default = "one")]
    input: usize,
    #[serde(rename = "T")]
    window: usize,
    #[serde(default)]
    head: OutputHead,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scaler: Option<ScalerJson>,
    weights: LstmWeights,
}

fn one() -> usize {
    1
}

/// JSON model file; matrices are flattened row-major.
pub fn serialize(p: &LstmParams, meta: &ModelMeta) -> String {
    let file = LstmFile {
        kind: "lstm".into(),
        hidden: p.hidden,
        input: p.input,
        window: meta.window,
        head: p.head,
        scaler: meta.scaler.map(ScalerJson::from),
        weights: LstmWeights {
            W_f: p.w_f.as_slice().to_vec(),
            W_i: p.w_i.as_slice().to_vec(),
            W_c: p.w_c.as_slice().to_vec(),
            W_o: p.w_o.as_slice().to_vec(),
            b_f: p.b_f.0.clone(),
            b_i: p.b_i.0.clone(),
            b_c: p.b_c.0.clone(),
            b_o: p.b_o.0.clone(),
            W_y: p.w_y.as_slice().to_vec(),
            b_y: p.b_y.0.clone(),
        },
    };
    serde_json::to_string_pretty(&file).expect("model serializes")
}

pub fn deserialize(text: &str) -> Result<(LstmParams, ModelMeta)> {
    let file: LstmFile = serde_json::from_str(text).map_err(json_err)?;
    check_type_tag(&file.kind, "lstm")?;
    let (h, n_in) = (file.hidden, file.input);
    if h == 0 || n_in == 0 || file.window == 0 {
        return Err(Error::Schema("hidden, input and T must be positive".into()));
    }
    let z = h + n_in;
    let w = file.weights;
    let params = LstmParams {
        hidden: h,
        input: n_in,
        head: file.head,
        w_f: matrix_field("W_f", w.W_f, h, z)?,
        w_i: matrix_field("W_i", w.W_i, h, z)?,
        w_c: matrix_field("W_c", w.W_c, h, z)?,
        w_o: matrix_field("W_o", w.W_o, h, z)?,
        b_f: vector_field("b_f", w.b_f, h)?,
        b_i: vector_field("b_i", w.b_i, h)?,
        b_c: vector_field("b_c", w.b_c, h)?,
        b_o: vector_field("b_o", w.b_o, h)?,
        w_y: matrix_field("W_y", w.W_y, 1, h)?,
        b_y: vector_field("b_y", w.b_y, 1)?,
    };
    let scaler: Option<ScalerParams> = file.scaler.map(ScalerJson::to_params).transpose()?;
    Ok((params, ModelMeta { window: file.window, scaler }))
}
