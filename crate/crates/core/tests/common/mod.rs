//! Independent reference implementations used to check the models.
//!
//! Nothing here calls into the model forward/backward code: the forward
//! oracles are plain index loops over the flat weight arrays, and gradients
//! are checked against central finite differences of the loss.

#![allow(dead_code, clippy::needless_range_loop)]

use std::fs;
use std::path::Path;

use celltide_core::cdr::SLOT_MS;
use celltide_core::dataset::MILAN_T0_MS;
use celltide_core::ffnn::FfnnParams;
use celltide_core::linalg::Matrix;
use celltide_core::lstm::LstmParams;
use celltide_core::model::{OutputHead, ParamSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_EPS: f64 = 1e-5;
pub const GRAD_REL_TOL: f64 = 1e-4;
/// Denominator floor for the relative error, so gradients that are zero up to
/// finite-difference round-off (about 1e-11 here) compare as equal.
pub const GRAD_REL_FLOOR: f64 = 1e-6;
pub const FORWARD_TOL: f64 = 1e-12;

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn squash(head: OutputHead, z: f64) -> f64 {
    match head {
        OutputHead::Sigmoid => logistic(z),
        OutputHead::Linear => z,
    }
}

/// Scalar-loop LSTM: every gate element computed by its own sum.
pub fn lstm_forward_oracle(p: &LstmParams, window: &[f64]) -> f64 {
    let h = p.hidden;
    let n_in = p.input;
    let cols = h + n_in;
    let (wf, wi, wc, wo) = (p.w_f.as_slice(), p.w_i.as_slice(), p.w_c.as_slice(), p.w_o.as_slice());
    let mut a = vec![0.0; h];
    let mut c = vec![0.0; h];
    for step in 0..window.len() / n_in {
        let x = &window[step * n_in..(step + 1) * n_in];
        let mut a_new = vec![0.0; h];
        let mut c_new = vec![0.0; h];
        for k in 0..h {
            let mut sf = p.b_f.0[k];
            let mut si = p.b_i.0[k];
            let mut sc = p.b_c.0[k];
            let mut so = p.b_o.0[k];
            for j in 0..cols {
                let z = if j < h { a[j] } else { x[j - h] };
                sf += wf[k * cols + j] * z;
                si += wi[k * cols + j] * z;
                sc += wc[k * cols + j] * z;
                so += wo[k * cols + j] * z;
            }
            let f = logistic(sf);
            let i = logistic(si);
            let u = sc.tanh();
            let o = logistic(so);
            c_new[k] = f * c[k] + i * u;
            a_new[k] = o * c_new[k].tanh();
        }
        a = a_new;
        c = c_new;
    }
    let mut z = p.b_y.0[0];
    for k in 0..h {
        z += p.w_y.as_slice()[k] * a[k];
    }
    squash(p.head, z)
}

pub fn ffnn_forward_oracle(p: &FfnnParams, window: &[f64]) -> f64 {
    let t = window.len();
    let units = p.b1.len();
    let mut z = p.b2.0[0];
    for u in 0..units {
        let mut s = p.b1.0[u];
        for j in 0..t {
            s += p.w1.as_slice()[u * t + j] * window[j];
        }
        let hidden = if s > 0.0 { s } else { 0.0 };
        z += p.w2.as_slice()[u] * hidden;
    }
    squash(p.head, z)
}

pub fn random_lstm(rng: &mut ChaCha8Rng, hidden: usize, scale: f64, head: OutputHead) -> LstmParams {
    let mut p = LstmParams::zeros(hidden, 1).with_head(head);
    for s in p.slices_mut() {
        s.iter_mut().for_each(|v| *v = rng.random_range(-scale..scale));
    }
    p
}

pub fn random_ffnn(rng: &mut ChaCha8Rng, window: usize, scale: f64, head: OutputHead) -> FfnnParams {
    let mut p = FfnnParams::zeros(window).with_head(head);
    for s in p.slices_mut() {
        s.iter_mut().for_each(|v| *v = rng.random_range(-scale..scale));
    }
    p
}

pub fn random_window(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(0.0..1.0)).collect()
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRAD_REL_FLOOR)
}

/// Worst relative error between `analytic` gradients and central differences
/// of `loss` with respect to every scalar of `params`.
pub fn max_fd_error<P, L>(params: &P, analytic: &P, loss: L) -> f64
where
    P: ParamSet + Clone,
    L: Fn(&P) -> f64,
{
    let grads = analytic.flatten();
    let mut probe = params.clone();
    let mut worst = 0.0f64;
    let mut k = 0;
    let n_slices = params.slices().len();
    for s in 0..n_slices {
        let len = params.slices()[s].len();
        for j in 0..len {
            let orig = probe.slices()[s][j];
            probe.slices_mut()[s][j] = orig + FD_EPS;
            let up = loss(&probe);
            probe.slices_mut()[s][j] = orig - FD_EPS;
            let down = loss(&probe);
            probe.slices_mut()[s][j] = orig;
            let numeric = (up - down) / (2.0 * FD_EPS);
            worst = worst.max(relative_error(grads[k], numeric));
            k += 1;
        }
    }
    worst
}

#[derive(Debug, Clone, Copy)]
pub struct CheckSummary {
    pub configs: usize,
    pub worst: f64,
}

/// Squared-error loss so that the upstream gradient is smooth.
fn half_sq(y: f64, target: f64) -> f64 {
    0.5 * (y - target) * (y - target)
}

pub fn lstm_gradient_check(n_configs: usize, seed: u64) -> CheckSummary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for cfg in 0..n_configs {
        let hidden = rng.random_range(1..=8);
        let steps = rng.random_range(1..=8);
        let head = if cfg % 4 == 3 { OutputHead::Linear } else { OutputHead::Sigmoid };
        let p = random_lstm(&mut rng, hidden, 1.0, head);
        let window = random_window(&mut rng, steps);
        let target = rng.random_range(0.0..1.0);
        let (y, cache) = p.forward(&window).unwrap();
        let grads = p.backward(&cache, y - target).unwrap();
        let err = max_fd_error(&p, &grads, |q: &LstmParams| half_sq(lstm_forward_oracle(q, &window), target));
        worst = worst.max(err);
    }
    CheckSummary { configs: n_configs, worst }
}

pub fn ffnn_gradient_check(n_configs: usize, seed: u64) -> CheckSummary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < n_configs {
        let t = rng.random_range(1..=8);
        let head = if done % 4 == 3 { OutputHead::Linear } else { OutputHead::Sigmoid };
        let p = random_ffnn(&mut rng, t, 1.0, head);
        let window = random_window(&mut rng, t);
        let target = rng.random_range(0.0..1.0);
        let (y, cache) = p.forward(&window).unwrap();
        // a pre-activation within FD reach of the relu kink makes the
        // central difference meaningless; draw again
        if cache.pre.iter().any(|v| v.abs() < 1e-3) {
            continue;
        }
        let grads = p.backward(&cache, y - target).unwrap();
        let err = max_fd_error(&p, &grads, |q: &FfnnParams| half_sq(ffnn_forward_oracle(q, &window), target));
        worst = worst.max(err);
        done += 1;
    }
    CheckSummary { configs: n_configs, worst }
}

/// Largest |vectorized - oracle| forward difference over `n` random instances
/// of each model.
pub fn forward_oracle_gap(n: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lstm_gap = 0.0f64;
    let mut ffnn_gap = 0.0f64;
    for i in 0..n {
        let hidden = rng.random_range(1..=8);
        let t = rng.random_range(1..=10);
        let head = if i % 2 == 0 { OutputHead::Sigmoid } else { OutputHead::Linear };
        let p = random_lstm(&mut rng, hidden, 1.5, head);
        let w = random_window(&mut rng, t);
        lstm_gap = lstm_gap.max((p.predict(&w).unwrap() - lstm_forward_oracle(&p, &w)).abs());

        let f = random_ffnn(&mut rng, t, 1.5, head);
        ffnn_gap = ffnn_gap.max((f.predict(&w).unwrap() - ffnn_forward_oracle(&f, &w)).abs());
    }
    (lstm_gap, ffnn_gap)
}

/// Row-major matrix from nested literals, for readable fixtures.
pub fn mat(rows: &[&[f64]]) -> Matrix {
    Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

/// Writes `days` tab-separated day files with three grids and two country
/// codes per slot; every fifth slot leaves the sms/call fields empty.
/// Returns the raw internet mass recorded for grid 1.
pub fn write_cdr_fixture(dir: &Path, days: usize, slots_per_day: usize) -> f64 {
    let mut mass = 0.0;
    for day in 0..days {
        let mut text = String::new();
        for s in 0..slots_per_day {
            let slot = day * slots_per_day + s;
            let ts = MILAN_T0_MS + slot as i64 * SLOT_MS;
            for grid in 1..=3u32 {
                for (cc, share) in [(39u32, 0.75), (33, 0.25)] {
                    let internet = share * (grid as f64 * 10.0 + (slot % 17) as f64 * 0.37);
                    if grid == 1 {
                        mass += internet;
                    }
                    if slot.is_multiple_of(5) {
                        text.push_str(&format!("{grid}\t{ts}\t{cc}\t\t\t\t\t{internet}\n"));
                    } else {
                        text.push_str(&format!("{grid}\t{ts}\t{cc}\t0.1\t0.2\t0.3\t0.4\t{internet}\n"));
                    }
                }
            }
        }
        fs::write(dir.join(format!("sms-call-internet-mi-day{day:02}.txt")), text).unwrap();
    }
    mass
}
