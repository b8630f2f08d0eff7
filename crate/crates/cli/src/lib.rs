//! The `celltide` command line: series ingestion, synthetic data, model
//! training, the ARIMA baseline, and the three-model comparison run.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use celltide_core::arima::{self, auto_order, rolling_forecast, ArimaModel, Order};
use celltide_core::cdr::{ingest_dir, Channel};
use celltide_core::dataset::{gen_synthetic, split, ScalerParams, SplitSpec};
use celltide_core::train::{
    evaluate, fit, prepare, Evaluation, History, ModelKind, PreparedData, TrainConfig, TrainedModel,
};
use celltide_core::{ActivitySeries, Error, ModelMeta, OutputHead, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "celltide", version, about = "Cellular traffic forecasting: LSTM, feed-forward and ARIMA")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Aggregate a directory of CDR day files into one series CSV
    Ingest(IngestArgs),
    /// Write a synthetic diurnal series CSV
    Synth(SynthArgs),
    /// Train an LSTM or feed-forward model
    Train(TrainArgs),
    /// Fit ARIMA on the training slice and forecast the test slice
    Arima(ArimaArgs),
    /// Run LSTM, FFNN and ARIMA on the same split and write a report
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub input_dir: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub grid: u32,
    #[arg(long, default_value = "internet", value_parser = Channel::from_str)]
    pub channel: Channel,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 62, value_parser = clap::value_parser!(u64).range(1..))]
    pub days: u64,
    #[arg(long, env = "CELLTIDE_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Options shared by every command that trains a network.
#[derive(Debug, Clone, Args)]
pub struct NetArgs {
    #[arg(long)]
    pub series: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    pub train_frac: f64,
    #[arg(long, default_value_t = 12)]
    pub window: usize,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, env = "CELLTIDE_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub hidden: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    #[arg(long, default_value = "sigmoid", value_parser = parse_head)]
    pub head: OutputHead,
}

impl NetArgs {
    pub fn config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            seed: self.seed,
            window: self.window,
            hidden: self.hidden,
            head: self.head,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_parser = ModelKind::from_str)]
    pub model: ModelKind,
    #[command(flatten)]
    pub net: NetArgs,
    #[arg(long)]
    pub out_model: PathBuf,
    #[arg(long)]
    pub out_history: PathBuf,
    /// Write 0 in the wall_ms column so reruns are byte-identical
    #[arg(long)]
    pub no_timing: bool,
}

/// Either explicit orders (missing ones default to 0) or an AIC search,
/// which is also used when nothing is given.
#[derive(Debug, Clone, Default, Args)]
pub struct OrderArgs {
    #[arg(long, conflicts_with = "auto")]
    pub p: Option<usize>,
    #[arg(long, conflicts_with = "auto")]
    pub d: Option<usize>,
    #[arg(long, conflicts_with = "auto")]
    pub q: Option<usize>,
    #[arg(long)]
    pub auto: bool,
}

impl OrderArgs {
    pub fn fixed(&self) -> Option<Order> {
        if self.auto || (self.p.is_none() && self.d.is_none() && self.q.is_none()) {
            return None;
        }
        Some(Order::new(self.p.unwrap_or(0), self.d.unwrap_or(0), self.q.unwrap_or(0)))
    }
}

#[derive(Debug, Args)]
pub struct ArimaArgs {
    #[arg(long)]
    pub series: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    pub train_frac: f64,
    #[command(flatten)]
    pub order: OrderArgs,
    #[arg(long)]
    pub out_model: PathBuf,
    #[arg(long)]
    pub out_predictions: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub net: NetArgs,
    #[command(flatten)]
    pub order: OrderArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Write 0 for wall_ms in the histories and leave wall-clock times out of
    /// report.json, so reruns are byte-identical
    #[arg(long)]
    pub no_timing: bool,
}

fn parse_head(s: &str) -> std::result::Result<OutputHead, String> {
    match s {
        "sigmoid" => Ok(OutputHead::Sigmoid),
        "linear" => Ok(OutputHead::Linear),
        other => Err(format!("unknown head {other:?} (expected sigmoid or linear)")),
    }
}

/// Files written by `compare`, in the order they are written.
pub const COMPARE_FILES: [&str; 6] = [
    "lstm_history.csv",
    "ffnn_history.csv",
    "lstm_predictions.csv",
    "ffnn_predictions.csv",
    "arima_predictions.csv",
    "report.json",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub config: ReportConfig,
    pub models: Vec<ModelReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub series: String,
    pub n_slots: usize,
    pub train_frac: f64,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub window: usize,
    pub epochs: usize,
    pub hidden: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub head: OutputHead,
    pub arima_order: String,
    pub arima_auto: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub model: String,
    pub test_mae: f64,
    pub test_mae_normalized: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_wall_ms: Option<f64>,
}

impl RunReport {
    pub fn model(&self, name: &str) -> Option<&ModelReport> {
        self.models.iter().find(|m| m.model == name)
    }
}

pub fn run(cli: Cli, out: &mut dyn Write, log: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Ingest(a) => cmd_ingest(&a, out),
        Command::Synth(a) => cmd_synth(&a, out),
        Command::Train(a) => cmd_train(&a, log).map(|_| ()),
        Command::Arima(a) => cmd_arima(&a, log).map(|_| ()),
        Command::Compare(a) => cmd_compare(&a, log).map(|_| ()),
    }
}

fn say(log: &mut dyn Write, msg: std::fmt::Arguments) {
    let _ = writeln!(log, "{msg}");
}

fn write_file(path: &Path, fill: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    fill(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_file(path, |w| w.write_all(text.as_bytes()))
}

pub fn cmd_ingest(a: &IngestArgs, out: &mut dyn Write) -> Result<()> {
    let series = ingest_dir(&a.input_dir, a.grid, a.channel)?;
    series.save_csv(&a.out)?;
    say(out, format_args!("{} slots", series.len()));
    Ok(())
}

pub fn cmd_synth(a: &SynthArgs, out: &mut dyn Write) -> Result<()> {
    let series = gen_synthetic(a.days as usize, a.seed)?;
    series.save_csv(&a.out)?;
    say(out, format_args!("{} slots", series.len()));
    Ok(())
}

fn log_split(log: &mut dyn Write, s: &SplitSpec) {
    say(log, format_args!("split {}/{}/{}", s.n_train, s.n_val, s.n_test));
}

pub fn cmd_train(a: &TrainArgs, log: &mut dyn Write) -> Result<(TrainedModel, History)> {
    let series = ActivitySeries::load_csv(&a.net.series)?;
    let cfg = a.net.config();
    cfg.validate()?;
    let data = prepare(&series.values, a.net.train_frac, cfg.window)?;
    log_split(log, &data.split);
    let (model, history) = fit(a.model, &data.train, &data.val, &cfg)?;
    if let Some(last) = history.last() {
        say(
            log,
            format_args!(
                "{}: epoch {} train MAE {:.6} val MAE {:.6}",
                a.model, last.epoch, last.train_mae, last.val_mae
            ),
        );
    }
    let meta = ModelMeta { window: cfg.window, scaler: Some(data.scaler) };
    write_text(&a.out_model, &model.to_json(&meta))?;
    write_file(&a.out_history, |w| history.write_csv(w, !a.no_timing))?;
    Ok((model, history))
}

/// Fits the requested order, or the AIC-best one, on `train`.
fn fit_arima(train: &[f64], order: &OrderArgs, log: &mut dyn Write) -> Result<ArimaModel> {
    let order = match order.fixed() {
        Some(o) => o,
        None => {
            let o = auto_order(train)?;
            say(log, format_args!("arima: selected order {o}"));
            o
        }
    };
    let model = arima::fit(train, order.p, order.d, order.q)?;
    say(log, format_args!("arima{order}: mu {:.6} sigma2 {:.6}", model.mu, model.sigma2));
    Ok(model)
}

fn arima_evaluation(model: &ArimaModel, values: &[f64], s: &SplitSpec, scaler: &ScalerParams) -> Result<Evaluation> {
    let range = s.test_range();
    let predictions = rolling_forecast(model, values, range.clone())?;
    Evaluation::new(range.start, values[range].to_vec(), predictions, scaler)
}

pub fn cmd_arima(a: &ArimaArgs, log: &mut dyn Write) -> Result<(ArimaModel, Evaluation)> {
    let series = ActivitySeries::load_csv(&a.series)?;
    let values = &series.values;
    let s = split(values.len(), a.train_frac)?;
    log_split(log, &s);
    let train = &values[s.train_range()];
    let model = fit_arima(train, &a.order, log)?;
    let scaler = ScalerParams::fit(train)?;
    let eval = arima_evaluation(&model, values, &s, &scaler)?;
    say(log, format_args!("arima: test MAE {:.6}", eval.mae));
    write_text(&a.out_model, &model.to_json())?;
    write_file(&a.out_predictions, |w| eval.write_csv(w))?;
    Ok((model, eval))
}

struct NetRun {
    history: History,
    eval: Evaluation,
    wall_ms: f64,
}

fn train_and_evaluate(kind: ModelKind, values: &[f64], cfg: &TrainConfig, data: &PreparedData) -> Result<NetRun> {
    let started = Instant::now();
    let (model, history) = fit(kind, &data.train, &data.val, cfg)?;
    let wall_ms = started.elapsed().as_secs_f64() * 1e3;
    let eval = evaluate(&model, values, &data.split, cfg.window, Some(&data.scaler))?;
    Ok(NetRun { history, eval, wall_ms })
}

/// Trains both networks (concurrently) and ARIMA on one split, then writes
/// [`COMPARE_FILES`] into the output directory. Nothing is left behind if a
/// step fails.
pub fn cmd_compare(a: &CompareArgs, log: &mut dyn Write) -> Result<RunReport> {
    let series = ActivitySeries::load_csv(&a.net.series)?;
    let values = &series.values;
    let cfg = a.net.config();
    cfg.validate()?;
    let data = prepare(values, a.net.train_frac, cfg.window)?;
    log_split(log, &data.split);

    let (lstm, ffnn) = std::thread::scope(|scope| {
        let lstm = scope.spawn(|| train_and_evaluate(ModelKind::Lstm, values, &cfg, &data));
        let ffnn = train_and_evaluate(ModelKind::Ffnn, values, &cfg, &data);
        (lstm.join().expect("LSTM training thread panicked"), ffnn)
    });
    let (lstm, ffnn) = (lstm?, ffnn?);

    let arima_model = fit_arima(&values[data.split.train_range()], &a.order, log)?;
    let arima_eval = arima_evaluation(&arima_model, values, &data.split, &data.scaler)?;

    let timing = |ms: f64| if a.no_timing { None } else { Some(ms) };
    let net_report = |name: &str, r: &NetRun| ModelReport {
        model: name.into(),
        test_mae: r.eval.mae,
        test_mae_normalized: r.eval.mae_normalized,
        epochs: Some(r.history.len()),
        train_wall_ms: timing(r.wall_ms),
    };
    let report = RunReport {
        seed: cfg.seed,
        config: ReportConfig {
            series: a.net.series.display().to_string(),
            n_slots: values.len(),
            train_frac: a.net.train_frac,
            n_train: data.split.n_train,
            n_val: data.split.n_val,
            n_test: data.split.n_test,
            window: cfg.window,
            epochs: cfg.epochs,
            hidden: cfg.hidden,
            batch_size: cfg.batch_size,
            learning_rate: cfg.learning_rate,
            head: cfg.head,
            arima_order: arima_model.order().to_string(),
            arima_auto: a.order.fixed().is_none(),
        },
        models: vec![
            net_report("lstm", &lstm),
            net_report("ffnn", &ffnn),
            ModelReport {
                model: "arima".into(),
                test_mae: arima_eval.mae,
                test_mae_normalized: arima_eval.mae_normalized,
                epochs: None,
                train_wall_ms: None,
            },
        ],
    };
    for m in &report.models {
        say(log, format_args!("{}: test MAE {:.6} (normalized {:.6})", m.model, m.test_mae, m.test_mae_normalized));
    }

    let report_json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    let created_dir = !a.out_dir.exists();
    fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    let path = |name: &str| a.out_dir.join(name);
    let written = (|| {
        write_file(&path(COMPARE_FILES[0]), |w| lstm.history.write_csv(w, !a.no_timing))?;
        write_file(&path(COMPARE_FILES[1]), |w| ffnn.history.write_csv(w, !a.no_timing))?;
        write_file(&path(COMPARE_FILES[2]), |w| lstm.eval.write_csv(w))?;
        write_file(&path(COMPARE_FILES[3]), |w| ffnn.eval.write_csv(w))?;
        write_file(&path(COMPARE_FILES[4]), |w| arima_eval.write_csv(w))?;
        write_text(&path(COMPARE_FILES[5]), &report_json)
    })();
    if let Err(e) = written {
        for name in COMPARE_FILES {
            let _ = fs::remove_file(path(name));
        }
        if created_dir {
            let _ = fs::remove_dir(&a.out_dir);
        }
        return Err(e);
    }
    Ok(report)
}
