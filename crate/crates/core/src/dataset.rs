//! Supervised windows, chronological splits, min-max scaling and a
//! synthetic diurnal traffic generator.

use std::f64::consts::PI;
use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::cdr::{ActivitySeries, SLOTS_PER_DAY, SLOT_MS};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

/// Fraction of the series reserved for each of the validation and test slices.
pub const HOLDOUT_FRAC: f64 = 0.10;

/// Epoch of 2013-11-01 00:00 CET, the first slot of the Milan record.
pub const MILAN_T0_MS: i64 = 1_383_260_400_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalerParams {
    pub min: f64,
    pub max: f64,
}

impl ScalerParams {
    /// Fits on the training slice only. A constant slice is rejected.
    pub fn fit(train_values: &[f64]) -> Result<Self> {
        let min = train_values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = train_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if train_values.is_empty() || max.partial_cmp(&min) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::InvalidArgument("cannot fit a scaler on an empty or constant training slice".into()));
        }
        Ok(Self { min, max })
    }

    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && max > min) {
            return Err(Error::InvalidArgument(format!("scaler needs finite max > min, got [{min}, {max}]")));
        }
        Ok(Self { min, max })
    }

    /// `(x - min) / (max - min)`; values outside the training range are not clipped.
    pub fn transform_one(&self, x: f64) -> f64 {
        (x - self.min) / (self.max - self.min)
    }

    pub fn inverse_one(&self, z: f64) -> f64 {
        z * (self.max - self.min) + self.min
    }

    pub fn transform(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|&x| self.transform_one(x)).collect()
    }

    pub fn inverse(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|&z| self.inverse_one(z)).collect()
    }
}

/// Sliding windows of length `window_len` and their next-step targets.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    pub window_len: usize,
    pub inputs: Matrix,
    pub targets: Vector,
}

impl WindowSet {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn window(&self, i: usize) -> &[f64] {
        self.inputs.row(i)
    }

    pub fn target(&self, i: usize) -> f64 {
        self.targets.0[i]
    }
}

/// All stride-1 windows over `values`: row `i` is `values[i..i+T]` and the
/// target is `values[i+T]`.
pub fn make_windows(values: &[f64], window_len: usize) -> Result<WindowSet> {
    if window_len == 0 || values.len() <= window_len {
        return Err(Error::InvalidArgument(format!(
            "series of length {} is too short for window {window_len}",
            values.len()
        )));
    }
    windows_targeting(values, window_len, window_len..values.len())
}

/// Windows whose targets are exactly the slots in `targets`. Inputs may reach
/// back before `targets.start`, so a validation window can draw its history
/// from the slots preceding the validation slice.
pub fn windows_targeting(values: &[f64], window_len: usize, targets: Range<usize>) -> Result<WindowSet> {
    if window_len == 0 {
        return Err(Error::InvalidArgument("window length must be at least 1".into()));
    }
    if targets.start < window_len || targets.end > values.len() || targets.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "target range {targets:?} needs {window_len} slots of history inside a series of length {}",
            values.len()
        )));
    }
    let n = targets.len();
    let mut data = Vec::with_capacity(n * window_len);
    for t in targets.clone() {
        data.extend_from_slice(&values[t - window_len..t]);
    }
    Ok(WindowSet {
        window_len,
        inputs: Matrix::from_vec(n, window_len, data)?,
        targets: Vector(values[targets].to_vec()),
    })
}

/// Chronological split of a series: the training slice is the head, then
/// validation and test occupy the last `2 * n_val` slots in that order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub n_total: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
}

impl SplitSpec {
    pub fn train_range(&self) -> Range<usize> {
        0..self.n_train
    }

    pub fn val_range(&self) -> Range<usize> {
        let start = self.n_total - self.n_test - self.n_val;
        start..start + self.n_val
    }

    pub fn test_range(&self) -> Range<usize> {
        self.n_total - self.n_test..self.n_total
    }
}

/// `n_train = floor(frac * n)`, `n_val = n_test = ceil(0.1 * n)`.
pub fn split(n_total: usize, train_frac: f64) -> Result<SplitSpec> {
    if !(train_frac > 0.0 && train_frac <= 0.8) {
        return Err(Error::InvalidArgument(format!("train fraction must be in (0, 0.8], got {train_frac}")));
    }
    let n_train = (train_frac * n_total as f64).floor() as usize;
    let n_hold = (HOLDOUT_FRAC * n_total as f64).ceil() as usize;
    if n_train == 0 || n_hold == 0 {
        return Err(Error::InvalidArgument(format!("series of {n_total} slots is too short to split")));
    }
    if n_train + 2 * n_hold > n_total {
        return Err(Error::InvalidArgument(format!(
            "train slice of {n_train} overlaps the {} held-out slots of a {n_total}-slot series",
            2 * n_hold
        )));
    }
    Ok(SplitSpec { train_frac, n_total, n_train, n_val: n_hold, n_test: n_hold })
}

/// Synthetic Milan-like traffic: a daytime bump, a weekly swing and Gaussian
/// noise, floored at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub days: usize,
    pub slots_per_day: usize,
    pub base: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub weekly_amplitude: f64,
    pub noise_std: f64,
}

impl SynthConfig {
    pub fn new(days: usize) -> Self {
        Self {
            days,
            slots_per_day: SLOTS_PER_DAY,
            base: 20.0,
            amplitude: 100.0,
            phase: 0.5 * PI,
            weekly_amplitude: 10.0,
            noise_std: 3.0,
        }
    }
}

pub fn gen_synthetic(days: usize, seed: u64) -> Result<ActivitySeries> {
    gen_synthetic_with(&SynthConfig::new(days), seed)
}

pub fn gen_synthetic_with(cfg: &SynthConfig, seed: u64) -> Result<ActivitySeries> {
    if cfg.days == 0 || cfg.slots_per_day == 0 {
        return Err(Error::InvalidArgument("synthetic series needs at least one day".into()));
    }
    let noise = Normal::new(0.0, cfg.noise_std).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spd = cfg.slots_per_day as f64;
    let values = (0..cfg.days * cfg.slots_per_day)
        .map(|t| {
            let t = t as f64;
            let daily = (2.0 * PI * t / spd - cfg.phase).sin().max(0.0);
            let weekly = cfg.weekly_amplitude * (2.0 * PI * t / (7.0 * spd)).sin();
            (cfg.base + cfg.amplitude * daily + weekly + noise.sample(&mut rng)).max(0.0)
        })
        .collect();
    Ok(ActivitySeries { origin: None, t0_ms: MILAN_T0_MS, slot_ms: SLOT_MS, values })
}
