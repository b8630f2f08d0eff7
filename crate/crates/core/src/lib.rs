//! Univariate cellular-traffic forecasting: call-data-record ingestion,
//! windowed datasets, an LSTM trained by backpropagation through time, a
//! feed-forward baseline and an ARIMA baseline.

pub mod arima;
pub mod cdr;
pub mod dataset;
pub mod error;
pub mod ffnn;
pub mod linalg;
pub mod lstm;
pub mod model;
pub mod numfmt;
pub mod train;

pub use arima::{ArimaModel, Order};
pub use cdr::{ActivitySeries, CdrRecord, Channel, SeriesOrigin};
pub use dataset::{ScalerParams, SplitSpec, WindowSet};
pub use error::{Error, Result};
pub use ffnn::FfnnParams;
pub use linalg::{Matrix, Vector};
pub use lstm::{LstmParams, LstmState};
pub use model::{ModelMeta, OutputHead, ParamSet};
pub use train::{AdamState, EpochRecord, Forecaster, History, ModelKind, TrainConfig, TrainedModel};
