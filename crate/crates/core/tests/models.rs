mod common;

use celltide_core::linalg::Vector;
use celltide_core::lstm::{LstmParams, LstmState};
use celltide_core::model::OutputHead;
use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn lstm_single_step_matches_scalar_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for _ in 0..30 {
        let h = rng.random_range(1..=4);
        let p = random_lstm(&mut rng, h, 1.0, OutputHead::Sigmoid);
        let x = rng.random_range(-1.0..1.0);
        let (y, _) = p.forward(&[x]).unwrap();
        assert!((y - lstm_forward_oracle(&p, &[x])).abs() < FORWARD_TOL);
    }
}

#[test]
fn lstm_three_steps_two_cells_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let p = random_lstm(&mut rng, 2, 1.0, OutputHead::Sigmoid);
        let w = random_window(&mut rng, 3);
        assert!((p.predict(&w).unwrap() - lstm_forward_oracle(&p, &w)).abs() < FORWARD_TOL);
    }
}

#[test]
fn cell_forward_chains_like_forward() {
    let p = LstmParams::init(5, 1, 17).unwrap();
    let window = [0.1, 0.9, 0.4, 0.6];
    let mut state = LstmState::zeros(5);
    for &x in &window {
        state = p.cell_forward(&[x], &state).unwrap().0;
    }
    let (_, cache) = p.forward(&window).unwrap();
    assert_eq!(cache.steps.last().unwrap().a, state.a.0);
    assert_eq!(cache.steps.last().unwrap().c, state.c.0);
    assert_eq!(cache.steps.len(), 4);
}

#[test]
fn forward_matches_oracle_on_random_instances() {
    let (l, f) = forward_oracle_gap(50, 1234);
    assert!(l < FORWARD_TOL, "lstm gap {l}");
    assert!(f < FORWARD_TOL, "ffnn gap {f}");
}

#[test]
fn lstm_gradients_match_finite_differences() {
    let s = lstm_gradient_check(100, 42);
    assert!(s.worst < GRAD_REL_TOL, "worst relative error {}", s.worst);
}

#[test]
fn ffnn_gradients_match_finite_differences() {
    let s = ffnn_gradient_check(100, 43);
    assert!(s.worst < GRAD_REL_TOL, "worst relative error {}", s.worst);
}

#[test]
fn lstm_is_sensitive_to_time_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut differing = 0;
    for _ in 0..20 {
        let p = random_lstm(&mut rng, 4, 1.0, OutputHead::Sigmoid);
        let w = random_window(&mut rng, 6);
        let mut r = w.clone();
        r.reverse();
        if (p.predict(&w).unwrap() - p.predict(&r).unwrap()).abs() > 1e-9 {
            differing += 1;
        }
    }
    assert!(differing >= 18, "{differing}/20");
}

#[test]
fn forward_and_backward_are_deterministic() {
    let p = LstmParams::init(8, 1, 99).unwrap();
    let w = [0.3, 0.2, 0.8, 0.5, 0.1];
    let (y1, c1) = p.forward(&w).unwrap();
    let (y2, c2) = p.forward(&w).unwrap();
    assert_eq!(y1.to_bits(), y2.to_bits());
    assert_eq!(p.backward(&c1, 0.3).unwrap(), p.backward(&c2, 0.3).unwrap());
}

#[test]
fn state_stays_bounded_under_large_weights() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..10 {
        let p = random_lstm(&mut rng, 6, 5.0, OutputHead::Sigmoid);
        let w: Vec<f64> = (0..30).map(|_| rng.random_range(-10.0..10.0)).collect();
        let (_, cache) = p.forward(&w).unwrap();
        for s in &cache.steps {
            assert!(s.a.iter().all(|v| v.abs() < 1.0));
            assert!(s.c.iter().all(|v| v.is_finite()));
        }
    }
    let _ = Vector::zeros(1);
}
