//! ARIMA(p, d, q) baseline.
//!
//! Fitting works on the `d`-times differenced, mean-centred series `w`:
//! Hannan–Rissanen regressions give starting coefficients, then Nelder–Mead
//! minimizes the conditional sum of squared innovations
//!
//! ```text
//! e_t = w_t - Σ φ_i w_{t-i} - Σ θ_j e_{t-j}
//! ```
//!
//! over `t >= p`, with pre-sample innovations set to zero.

mod nelder_mead;

use std::ops::Range;

use serde::{Deserialize, Serialize};

pub use nelder_mead::{minimize, NelderMeadOptions, NelderMeadResult};

use crate::error::{Error, Result};
use crate::linalg::{least_squares, Matrix};
use crate::model::{check_type_tag, json_err};

/// Largest order accepted for each of p, d and q.
pub const MAX_ORDER: usize = 5;
/// Upper bound on the long autoregression used by Hannan–Rissanen.
pub const MAX_LONG_AR: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Order {
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

impl Order {
    pub fn new(p: usize, d: usize, q: usize) -> Self {
        Self { p, d, q }
    }
}

impl std::fmt::Display for Order {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", self.p, self.d, self.q)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaModel {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    pub mu: f64,
    pub sigma2: f64,
    /// First value of each differencing level of the training series,
    /// enough to undo the differencing exactly.
    pub heads: Vec<f64>,
}

impl ArimaModel {
    pub fn order(&self) -> Order {
        Order::new(self.p, self.d, self.q)
    }

    /// Number of innovations the conditional sum of squares was taken over.
    pub fn aic(&self, n_effective: usize) -> f64 {
        n_effective as f64 * self.sigma2.ln() + 2.0 * (self.p + self.q + 1) as f64
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Tagged<'a> {
            #[serde(rename = "type")]
            kind: &'static str,
            #[serde(flatten)]
            model: &'a ArimaModel,
        }
        serde_json::to_string_pretty(&Tagged { kind: "arima", model: self }).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Tagged {
            #[serde(rename = "type")]
            kind: String,
            #[serde(flatten)]
            model: ArimaModel,
        }
        let t: Tagged = serde_json::from_str(text).map_err(json_err)?;
        check_type_tag(&t.kind, "arima")?;
        let m = t.model;
        if m.phi.len() != m.p || m.theta.len() != m.q || m.heads.len() != m.d {
            return Err(Error::Schema("phi/theta/heads lengths must equal p/q/d".into()));
        }
        if m.sigma2 < 0.0 || !m.mu.is_finite() || m.phi.iter().chain(&m.theta).any(|v| !v.is_finite()) {
            return Err(Error::Schema("coefficients must be finite and sigma2 nonnegative".into()));
        }
        Ok(m)
    }
}

/// `d`-fold first differences.
pub fn difference(series: &[f64], d: usize) -> Result<Vec<f64>> {
    if series.len() <= d {
        return Err(Error::InvalidArgument(format!(
            "series of length {} cannot be differenced {d} times",
            series.len()
        )));
    }
    Ok(difference_levels(series, d).0)
}

/// Differenced series plus the head of every level `0..d`.
fn difference_levels(series: &[f64], d: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut level = series.to_vec();
    let mut heads = Vec::with_capacity(d);
    let mut lasts = Vec::with_capacity(d);
    for _ in 0..d {
        heads.push(level.first().copied().unwrap_or(0.0));
        lasts.push(level.last().copied().unwrap_or(0.0));
        level = level.windows(2).map(|w| w[1] - w[0]).collect();
    }
    (level, heads, lasts)
}

/// Inverse of [`difference`] given the head of each level.
pub fn integrate(diffed: &[f64], heads: &[f64], d: usize) -> Result<Vec<f64>> {
    if heads.len() != d {
        return Err(Error::InvalidArgument(format!("integrating {d} times needs {d} heads, got {}", heads.len())));
    }
    let mut level = diffed.to_vec();
    for &head in heads.iter().rev() {
        let mut up = Vec::with_capacity(level.len() + 1);
        up.push(head);
        for v in &level {
            let prev = *up.last().expect("seeded with head");
            up.push(prev + v);
        }
        level = up;
    }
    Ok(level)
}

/// Innovations of the ARMA recursion; entries before `p` are zero.
fn innovations(w: &[f64], phi: &[f64], theta: &[f64]) -> Vec<f64> {
    let p = phi.len();
    let mut e = vec![0.0; w.len()];
    for t in p..w.len() {
        let mut v = w[t];
        for (i, ph) in phi.iter().enumerate() {
            v -= ph * w[t - 1 - i];
        }
        for (j, th) in theta.iter().enumerate() {
            if t > j {
                v -= th * e[t - 1 - j];
            }
        }
        e[t] = v;
    }
    e
}

/// Conditional sum of squares over `t >= p`.
pub fn css(w: &[f64], phi: &[f64], theta: &[f64]) -> f64 {
    innovations(w, phi, theta)[phi.len()..].iter().map(|e| e * e).sum()
}

/// True when every root of `1 - Σ c_k z^k` lies outside the unit circle,
/// tested with the Schur–Cohn step-down recursion.
pub fn is_stationary(coefs: &[f64]) -> bool {
    let mut a = coefs.to_vec();
    while let Some(&r) = a.last() {
        if !r.is_finite() || r.abs() >= 1.0 {
            return false;
        }
        let k = a.len();
        let denom = 1.0 - r * r;
        a = (0..k - 1).map(|j| (a[j] + r * a[k - 2 - j]) / denom).collect();
    }
    true
}

/// `1 + Σ θ_j z^j` has no roots inside or on the unit circle.
pub fn is_invertible(theta: &[f64]) -> bool {
    let neg: Vec<f64> = theta.iter().map(|t| -t).collect();
    is_stationary(&neg)
}

fn fit_error(order: Order, msg: impl Into<String>) -> Error {
    Error::ArimaFit { p: order.p, d: order.d, q: order.q, msg: msg.into() }
}

/// Regresses `w_t` on its `p` lags and `q` lagged residuals for `t >= start`.
fn lagged_regression(w: &[f64], resid: &[f64], p: usize, q: usize, start: usize, order: Order) -> Result<Vec<f64>> {
    let k = p + q;
    let rows: Vec<usize> = (start..w.len()).collect();
    if rows.len() <= k {
        return Err(fit_error(order, "not enough observations for the Hannan–Rissanen regression"));
    }
    let mut design = Vec::with_capacity(rows.len() * k);
    for &t in &rows {
        design.extend((1..=p).map(|i| w[t - i]));
        design.extend((1..=q).map(|j| resid[t - j]));
    }
    let x = Matrix::from_vec(rows.len(), k, design)?;
    let y: Vec<f64> = rows.iter().map(|&t| w[t]).collect();
    least_squares(&x, &y).map_err(|e| match e {
        Error::Singular => fit_error(order, "singular least-squares system"),
        other => other,
    })
}

/// Hannan–Rissanen starting values for `(phi, theta)` on a centred series.
pub fn hannan_rissanen(w: &[f64], p: usize, q: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let order = Order::new(p, 0, q);
    if p + q == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    if q == 0 {
        let beta = lagged_regression(w, &[], p, 0, p, order)?;
        return Ok((beta, Vec::new()));
    }
    let m = (w.len() / 10).min(MAX_LONG_AR).max(p.max(q)).max(1);
    let long = lagged_regression(w, &[], m, 0, m, order)?;
    let mut resid = vec![0.0; w.len()];
    for t in m..w.len() {
        resid[t] = w[t] - (1..=m).map(|i| long[i - 1] * w[t - i]).sum::<f64>();
    }
    let beta = lagged_regression(w, &resid, p, q, m + q, order)?;
    Ok((beta[..p].to_vec(), beta[p..].to_vec()))
}

/// Diagnostics of a fit, useful to compare against the starting point.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub model: ArimaModel,
    pub css_initial: f64,
    pub css_final: f64,
    pub n_effective: usize,
    pub iterations: usize,
}

pub fn fit(series: &[f64], p: usize, d: usize, q: usize) -> Result<ArimaModel> {
    fit_detailed(series, Order::new(p, d, q)).map(|r| r.model)
}

pub fn fit_detailed(series: &[f64], order: Order) -> Result<FitReport> {
    let Order { p, d, q } = order;
    if p > MAX_ORDER || d > MAX_ORDER || q > MAX_ORDER {
        return Err(fit_error(order, format!("orders are capped at {MAX_ORDER}")));
    }
    let needed = 10 * (p + q + 1) + d;
    if series.len() < needed {
        return Err(fit_error(order, format!("needs at least {needed} observations, got {}", series.len())));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(fit_error(order, "series contains non-finite values"));
    }
    let (z, heads, _) = difference_levels(series, d);
    let mu = z.iter().sum::<f64>() / z.len() as f64;
    let w: Vec<f64> = z.iter().map(|v| v - mu).collect();

    let (phi0, theta0) = hannan_rissanen(&w, p, q)?;
    let mut x0 = phi0.clone();
    x0.extend_from_slice(&theta0);
    let objective = |x: &[f64]| css(&w, &x[..p], &x[p..]);
    let css_initial = objective(&x0);
    let result = minimize(objective, &x0, &NelderMeadOptions::default());
    let (x, css_final) = if result.f <= css_initial { (result.x, result.f) } else { (x0, css_initial) };
    let (phi, theta) = (x[..p].to_vec(), x[p..].to_vec());

    if !css_final.is_finite() {
        return Err(fit_error(order, "conditional sum of squares is not finite"));
    }
    if !is_stationary(&phi) {
        return Err(fit_error(order, "AR polynomial has a root on or inside the unit circle"));
    }
    if !is_invertible(&theta) {
        return Err(fit_error(order, "MA polynomial is not invertible"));
    }
    let n_effective = w.len() - p;
    let model = ArimaModel { p, d, q, phi, theta, mu, sigma2: css_final / n_effective as f64, heads };
    Ok(FitReport { model, css_initial, css_final, n_effective, iterations: result.iterations })
}

/// One-step conditional expectation of the next value after `history`.
pub fn forecast_one(model: &ArimaModel, history: &[f64]) -> Result<f64> {
    let needed = model.p + model.d;
    if history.len() < needed || (model.d > 0 && history.is_empty()) {
        return Err(Error::InvalidArgument(format!(
            "ARIMA{} forecast needs {} history values, got {}",
            model.order(),
            needed.max(model.d.min(1)),
            history.len()
        )));
    }
    let (z, _, lasts) = difference_levels(history, model.d);
    let w: Vec<f64> = z.iter().map(|v| v - model.mu).collect();
    let e = innovations(&w, &model.phi, &model.theta);
    let n = w.len();
    let mut w_hat = 0.0;
    for (i, ph) in model.phi.iter().enumerate() {
        w_hat += ph * w[n - 1 - i];
    }
    for (j, th) in model.theta.iter().enumerate() {
        if n > j {
            w_hat += th * e[n - 1 - j];
        }
    }
    Ok(model.mu + w_hat + lasts.iter().sum::<f64>())
}

/// Forecasts each slot of `range` from the true values before it; the model
/// is not refitted along the way.
pub fn rolling_forecast(model: &ArimaModel, series: &[f64], range: Range<usize>) -> Result<Vec<f64>> {
    if range.end > series.len() || range.start > range.end {
        return Err(Error::InvalidArgument(format!(
            "forecast range {range:?} outside series of length {}",
            series.len()
        )));
    }
    range.map(|t| forecast_one(model, &series[..t])).collect()
}

/// Order with the smallest AIC; ties go to fewer parameters, then smaller `d`.
pub(crate) fn pick_best(candidates: &[(Order, f64)]) -> Option<(Order, f64)> {
    candidates
        .iter()
        .copied()
        .min_by(|(oa, aa), (ob, ab)| aa.total_cmp(ab).then((oa.p + oa.q).cmp(&(ob.p + ob.q))).then(oa.d.cmp(&ob.d)))
}

/// Grid search over p, q in 0..=3 and d in 0..=1 by AIC.
pub fn auto_order(series: &[f64]) -> Result<Order> {
    if series.len() < 200 {
        return Err(Error::InvalidArgument(format!("order selection needs 200 observations, got {}", series.len())));
    }
    let mut scored = Vec::new();
    for d in 0..=1 {
        for p in 0..=3 {
            for q in 0..=3 {
                let order = Order::new(p, d, q);
                if let Ok(r) = fit_detailed(series, order) {
                    let aic = r.model.aic(r.n_effective);
                    if !aic.is_nan() {
                        scored.push((order, aic));
                    }
                }
            }
        }
    }
    pick_best(&scored).map(|(o, _)| o).ok_or_else(|| Error::ArimaFit {
        p: 3,
        d: 1,
        q: 3,
        msg: "no candidate order could be fitted".into(),
    })
}
