use celltide_core::arima::{auto_order, fit, fit_detailed, rolling_forecast, ArimaModel, Order};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn ar1(phi: f64, sigma: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).unwrap();
    let mut x = 0.0;
    let mut out = Vec::with_capacity(n + 200);
    for _ in 0..n + 200 {
        x = phi * x + noise.sample(&mut rng);
        out.push(x);
    }
    out.split_off(200)
}

#[test]
fn white_noise_fits_near_zero() {
    for seed in 0..5 {
        let s = ar1(0.0, 1.0, 2000, 500 + seed);
        let m = fit(&s, 1, 0, 0).unwrap();
        assert!(m.phi[0].abs() < 0.1, "seed {seed}: {}", m.phi[0]);
    }
}

#[test]
fn rolling_mae_matches_noise_level() {
    let sigma = 2.0;
    let s = ar1(0.8, sigma, 6000, 77);
    let m = fit(&s[..4000], 1, 0, 0).unwrap();
    let preds = rolling_forecast(&m, &s, 4000..6000).unwrap();
    assert_eq!(preds.len(), 2000);
    let mae = preds.iter().zip(&s[4000..]).map(|(p, t)| (p - t).abs()).sum::<f64>() / 2000.0;
    let expected = sigma * (2.0 / std::f64::consts::PI).sqrt();
    assert!((mae - expected).abs() < 0.1 * expected, "mae {mae} vs {expected}");
}

#[test]
fn rolling_forecasts_are_causal() {
    let s = ar1(0.5, 1.0, 400, 3);
    let m = fit_detailed(&s[..300], Order::new(2, 0, 1)).unwrap().model;
    let clean = rolling_forecast(&m, &s, 300..400).unwrap();
    for cut in [300, 350, 399] {
        let mut poisoned = s.clone();
        poisoned[cut..].iter_mut().for_each(|v| *v = 1e9);
        let p = rolling_forecast(&m, &poisoned, 300..cut + 1).unwrap();
        assert_eq!(p, clean[..cut + 1 - 300]);
    }
}

#[test]
fn mean_model_is_translation_equivariant() {
    let s = ar1(0.3, 1.0, 300, 4);
    let shifted: Vec<f64> = s.iter().map(|v| v + 1000.0).collect();
    let a = fit(&s, 0, 0, 0).unwrap();
    let b = fit(&shifted, 0, 0, 0).unwrap();
    let pa = rolling_forecast(&a, &s, 250..300).unwrap();
    let pb = rolling_forecast(&b, &shifted, 250..300).unwrap();
    for (x, y) in pa.iter().zip(&pb) {
        assert!((y - x - 1000.0).abs() < 1e-9);
    }
    assert!(pa.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn auto_order_on_ar1_data() {
    let mut hits = 0;
    for seed in 0..10 {
        let s = ar1(0.8, 1.0, 1000, 900 + seed);
        let o = auto_order(&s).unwrap();
        if o.p >= 1 && o.q <= 1 && o.d == 0 {
            hits += 1;
        }
    }
    assert!(hits >= 8, "{hits}/10");
}

#[test]
fn auto_order_on_white_noise() {
    let mut small = 0;
    for seed in 0..20 {
        let s = ar1(0.0, 1.0, 2000, 1900 + seed);
        let o = auto_order(&s).unwrap();
        if o.p + o.q <= 1 {
            small += 1;
        }
    }
    assert!(small > 10, "{small}/20");
}

#[test]
fn model_file_round_trip() {
    let s = ar1(0.6, 1.0, 500, 11);
    let m = fit(&s, 1, 1, 1).unwrap();
    assert_eq!(ArimaModel::from_json(&m.to_json()).unwrap(), m);
}
