//! MAE loss, Adam, the mini-batch training loop and test-slice evaluation
//! shared by the LSTM and feed-forward models.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{split, windows_targeting, ScalerParams, SplitSpec, WindowSet};
use crate::error::{Error, Result};
use crate::ffnn::{self, FfnnCache, FfnnParams};
use crate::lstm::{self, ForwardCache, LstmParams, DEFAULT_HIDDEN};
use crate::model::{ModelMeta, OutputHead, ParamSet};
use crate::numfmt::sig17;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Mean absolute error.
pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "mae needs equal nonzero lengths, got {} and {}",
            pred.len(),
            truth.len()
        )));
    }
    Ok(pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / pred.len() as f64)
}

/// Subgradient of `|e|`, zero at zero.
fn sign(e: f64) -> f64 {
    if e > 0.0 {
        1.0
    } else if e < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        Self { m: vec![0.0; n_params], v: vec![0.0; n_params], step: 0 }
    }

    pub fn for_params<P: ParamSet>(p: &P) -> Self {
        Self::new(p.num_scalars())
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step<P: ParamSet>(params: &mut P, grads: &P, state: &mut AdamState, lr: f64) -> Result<()> {
    let n = params.num_scalars();
    if grads.num_scalars() != n || state.m.len() != n || state.v.len() != n {
        return Err(Error::Shape(format!(
            "adam: {n} params, {} grads, {} moments",
            grads.num_scalars(),
            state.m.len()
        )));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - ADAM_BETA1.powi(t);
    let c2 = 1.0 - ADAM_BETA2.powi(t);
    let mut k = 0;
    for (ps, gs) in params.slices_mut().into_iter().zip(grads.slices()) {
        if ps.len() != gs.len() {
            return Err(Error::Shape("adam: parameter and gradient tensors differ".into()));
        }
        for (p, &g) in ps.iter_mut().zip(gs) {
            let m = ADAM_BETA1 * state.m[k] + (1.0 - ADAM_BETA1) * g;
            let v = ADAM_BETA2 * state.v[k] + (1.0 - ADAM_BETA2) * g * g;
            state.m[k] = m;
            state.v[k] = v;
            *p -= lr * (m / c1) / ((v / c2).sqrt() + ADAM_EPS);
            k += 1;
        }
    }
    Ok(())
}

/// Anything that maps a normalized window to a normalized next-slot value.
pub trait Forecaster {
    fn predict(&self, window: &[f64]) -> Result<f64>;
}

impl<F: Fn(&[f64]) -> f64> Forecaster for F {
    fn predict(&self, window: &[f64]) -> Result<f64> {
        Ok(self(window))
    }
}

impl Forecaster for LstmParams {
    fn predict(&self, window: &[f64]) -> Result<f64> {
        LstmParams::predict(self, window)
    }
}

impl Forecaster for FfnnParams {
    fn predict(&self, window: &[f64]) -> Result<f64> {
        FfnnParams::predict(self, window)
    }
}

/// A model the training loop can drive.
pub trait Trainable: ParamSet + Forecaster + Clone {
    type Cache;
    fn forward_cached(&self, window: &[f64]) -> Result<(f64, Self::Cache)>;
    fn backward_acc(&self, cache: &Self::Cache, d_yhat: f64, grads: &mut Self) -> Result<()>;
    fn zeros_like(&self) -> Self;
}

impl Trainable for LstmParams {
    type Cache = ForwardCache;

    fn forward_cached(&self, window: &[f64]) -> Result<(f64, ForwardCache)> {
        self.forward(window)
    }

    fn backward_acc(&self, cache: &ForwardCache, d_yhat: f64, grads: &mut Self) -> Result<()> {
        LstmParams::backward_acc(self, cache, d_yhat, grads)
    }

    fn zeros_like(&self) -> Self {
        LstmParams::zeros_like(self)
    }
}

impl Trainable for FfnnParams {
    type Cache = FfnnCache;

    fn forward_cached(&self, window: &[f64]) -> Result<(f64, FfnnCache)> {
        self.forward(window)
    }

    fn backward_acc(&self, cache: &FfnnCache, d_yhat: f64, grads: &mut Self) -> Result<()> {
        FfnnParams::backward_acc(self, cache, d_yhat, grads)
    }

    fn zeros_like(&self) -> Self {
        FfnnParams::zeros_like(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Lstm,
    Ffnn,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Lstm => "lstm",
            ModelKind::Ffnn => "ffnn",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lstm" => Ok(ModelKind::Lstm),
            "ffnn" => Ok(ModelKind::Ffnn),
            other => Err(Error::InvalidArgument(format!("unknown model {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub window: usize,
    pub hidden: usize,
    pub head: OutputHead,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            learning_rate: 1e-3,
            batch_size: 32,
            seed: 0,
            window: 12,
            hidden: DEFAULT_HIDDEN,
            head: OutputHead::Sigmoid,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.window == 0 || self.hidden == 0 {
            return Err(Error::InvalidArgument("epochs, batch size, window and hidden must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be finite and nonnegative, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean absolute error over the epoch's samples, measured before each update.
    pub train_mae: f64,
    pub val_mae: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct History {
    pub records: Vec<EpochRecord>,
}

impl History {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    /// First (1-based) epoch whose training MAE is below `threshold`.
    pub fn epochs_to_train_mae(&self, threshold: f64) -> Option<usize> {
        self.records.iter().find(|r| r.train_mae < threshold).map(|r| r.epoch)
    }

    pub fn total_wall_ms(&self) -> f64 {
        self.records.iter().map(|r| r.wall_ms).sum()
    }

    /// `epoch,train_mae,val_mae,wall_ms`. With `timing == false` the wall
    /// clock column is written as 0 so the file depends only on the inputs
    /// and the seed.
    pub fn write_csv<W: Write>(&self, mut w: W, timing: bool) -> std::io::Result<()> {
        writeln!(w, "epoch,train_mae,val_mae,wall_ms")?;
        for r in &self.records {
            let ms = if timing { format!("{:.3}", r.wall_ms) } else { "0".to_string() };
            writeln!(w, "{},{},{},{ms}", r.epoch, sig17(r.train_mae), sig17(r.val_mae))?;
        }
        w.flush()
    }
}

fn mean_abs_error<M: Forecaster + ?Sized>(model: &M, set: &WindowSet) -> Result<f64> {
    let mut sum = 0.0;
    for i in 0..set.len() {
        sum += (model.predict(set.window(i))? - set.target(i)).abs();
    }
    Ok(sum / set.len() as f64)
}

/// Trains `model` in place: seeded per-epoch shuffling, batch-averaged MAE
/// subgradients, one Adam step per batch, and a full validation pass after
/// every epoch.
pub fn fit_model<M: Trainable>(
    model: &mut M,
    train: &WindowSet,
    val: &WindowSet,
    cfg: &TrainConfig,
) -> Result<History> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::InvalidArgument("training and validation sets must be nonempty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x05EE_D0FB_A7C4);
    let mut adam = AdamState::for_params(model);
    let mut grads = model.zeros_like();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = History::default();

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let mut abs_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grads.fill(0.0);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let (y, cache) = model.forward_cached(train.window(i))?;
                let err = y - train.target(i);
                abs_sum += err.abs();
                model.backward_acc(&cache, sign(err) * scale, &mut grads)?;
            }
            adam_step(model, &grads, &mut adam, cfg.learning_rate)?;
        }
        let train_mae = abs_sum / train.len() as f64;
        let val_mae = mean_abs_error(model, val)?;
        if !train_mae.is_finite() || !val_mae.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        let wall_ms = started.elapsed().as_secs_f64() * 1e3;
        history.records.push(EpochRecord { epoch, train_mae, val_mae, wall_ms });
    }
    Ok(history)
}

#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Lstm(LstmParams),
    Ffnn(FfnnParams),
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Lstm(_) => ModelKind::Lstm,
            TrainedModel::Ffnn(_) => ModelKind::Ffnn,
        }
    }

    pub fn to_json(&self, meta: &ModelMeta) -> String {
        match self {
            TrainedModel::Lstm(p) => lstm::serialize(p, meta),
            TrainedModel::Ffnn(p) => ffnn::serialize(p, meta),
        }
    }

    pub fn from_json(text: &str) -> Result<(Self, ModelMeta)> {
        match crate::model::model_type(text)?.as_str() {
            "lstm" => lstm::deserialize(text).map(|(p, m)| (TrainedModel::Lstm(p), m)),
            "ffnn" => ffnn::deserialize(text).map(|(p, m)| (TrainedModel::Ffnn(p), m)),
            other => Err(Error::Schema(format!("type: expected \"lstm\" or \"ffnn\", found {other:?}"))),
        }
    }
}

impl Forecaster for TrainedModel {
    fn predict(&self, window: &[f64]) -> Result<f64> {
        match self {
            TrainedModel::Lstm(p) => p.predict(window),
            TrainedModel::Ffnn(p) => p.predict(window),
        }
    }
}

/// Initializes a model of `kind` from `cfg.seed` and trains it.
pub fn fit(kind: ModelKind, train: &WindowSet, val: &WindowSet, cfg: &TrainConfig) -> Result<(TrainedModel, History)> {
    cfg.validate()?;
    if train.window_len != cfg.window || val.window_len != cfg.window {
        return Err(Error::InvalidArgument(format!(
            "window sets of length {}/{} do not match configured window {}",
            train.window_len, val.window_len, cfg.window
        )));
    }
    match kind {
        ModelKind::Lstm => {
            let mut p = LstmParams::init(cfg.hidden, 1, cfg.seed)?.with_head(cfg.head);
            let h = fit_model(&mut p, train, val, cfg)?;
            Ok((TrainedModel::Lstm(p), h))
        }
        ModelKind::Ffnn => {
            let mut p = FfnnParams::init(cfg.window, cfg.seed)?.with_head(cfg.head);
            let h = fit_model(&mut p, train, val, cfg)?;
            Ok((TrainedModel::Ffnn(p), h))
        }
    }
}

/// A series split, scaled on its training slice, and cut into windows whose
/// targets fall inside each slice.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub split: SplitSpec,
    pub scaler: ScalerParams,
    pub normalized: Vec<f64>,
    pub train: WindowSet,
    pub val: WindowSet,
    pub test: WindowSet,
}

pub fn prepare(values: &[f64], train_frac: f64, window: usize) -> Result<PreparedData> {
    let split = split(values.len(), train_frac)?;
    if split.n_train <= window {
        return Err(Error::InvalidArgument(format!(
            "training slice of {} slots is too short for window {window}",
            split.n_train
        )));
    }
    let scaler = ScalerParams::fit(&values[split.train_range()])?;
    let normalized = scaler.transform(values);
    let train = windows_targeting(&normalized, window, window..split.n_train)?;
    let val = windows_targeting(&normalized, window, split.val_range())?;
    let test = windows_targeting(&normalized, window, split.test_range())?;
    Ok(PreparedData { split, scaler, normalized, train, val, test })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// First slot of the test slice.
    pub first_slot: usize,
    pub truth: Vec<f64>,
    pub predictions: Vec<f64>,
    /// MAE on the original scale.
    pub mae: f64,
    pub mae_normalized: f64,
}

impl Evaluation {
    /// Scores original-scale `predictions` against `truth`; the normalized
    /// MAE uses `scaler`.
    pub fn new(first_slot: usize, truth: Vec<f64>, predictions: Vec<f64>, scaler: &ScalerParams) -> Result<Self> {
        let mae_original = mae(&predictions, &truth)?;
        let mae_normalized = mae(&scaler.transform(&predictions), &scaler.transform(&truth))?;
        Ok(Self { first_slot, truth, predictions, mae: mae_original, mae_normalized })
    }

    /// `slot,truth,prediction`
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "slot,truth,prediction")?;
        for (i, (t, p)) in self.truth.iter().zip(&self.predictions).enumerate() {
            writeln!(w, "{},{},{}", self.first_slot + i, sig17(*t), sig17(*p))?;
        }
        w.flush()
    }
}

/// Rolling one-step predictions over the test slice of `values` (original
/// scale), each from the true preceding `window` slots.
pub fn evaluate<M: Forecaster + ?Sized>(
    model: &M,
    values: &[f64],
    split: &SplitSpec,
    window: usize,
    scaler: Option<&ScalerParams>,
) -> Result<Evaluation> {
    let scaler = scaler.ok_or_else(|| Error::InvalidArgument("evaluation needs the training scaler".into()))?;
    if split.n_total != values.len() {
        return Err(Error::InvalidArgument(format!(
            "split of {} slots for a series of {}",
            split.n_total,
            values.len()
        )));
    }
    let range = split.test_range();
    if range.start < window {
        return Err(Error::InvalidArgument(format!("test slice starts before {window} slots of history")));
    }
    let mut buf = Vec::with_capacity(window);
    let mut pred_norm = Vec::with_capacity(range.len());
    for t in range.clone() {
        buf.clear();
        buf.extend(values[t - window..t].iter().map(|&v| scaler.transform_one(v)));
        pred_norm.push(model.predict(&buf)?);
    }
    let predictions = scaler.inverse(&pred_norm);
    Evaluation::new(range.start, values[range].to_vec(), predictions, scaler)
}
