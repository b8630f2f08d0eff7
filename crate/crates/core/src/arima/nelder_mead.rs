//! Derivative-free simplex minimizer used to refine ARMA coefficients.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    /// Relative spread of objective values across the simplex at which to stop.
    pub f_tol: f64,
    pub max_iter: usize,
    /// Edge length of the initial simplex along each axis.
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { f_tol: 1e-8, max_iter: 2000, initial_step: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Minimizes `f` from `x0`. The returned point is never worse than `x0`.
/// Non-finite objective values are treated as `+inf`.
pub fn minimize<F>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut eval = |x: &[f64]| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    if n == 0 {
        return NelderMeadResult { x: Vec::new(), f: eval(x0), iterations: 0, converged: true };
    }

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), eval(x0)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += opts.initial_step;
        let fx = eval(&x);
        simplex.push((x, fx));
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        // stable sort keeps the tie order deterministic
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (f_best, f_worst) = (simplex[0].1, simplex[n].1);
        if f_worst.is_finite() && f_worst - f_best <= opts.f_tol * (f_best.abs() + opts.f_tol) {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            centroid.iter_mut().zip(x).for_each(|(c, v)| *c += v / n as f64);
        }
        let along = |coef: f64, worst: &[f64]| -> Vec<f64> {
            centroid.iter().zip(worst).map(|(c, w)| c + coef * (c - w)).collect()
        };

        let worst = simplex[n].0.clone();
        let xr = along(REFLECT, &worst);
        let fr = eval(&xr);
        if fr < f_best {
            let xe = along(REFLECT * EXPAND, &worst);
            let fe = eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < f_worst {
            let xc = along(REFLECT * CONTRACT, &worst);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = along(-CONTRACT, &worst);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc < fr.min(f_worst) {
            simplex[n] = (xc, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for (x, fx) in simplex.iter_mut().skip(1) {
            x.iter_mut().zip(&best).for_each(|(v, b)| *v = b + SHRINK * (*v - b));
            *fx = eval(x);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, f) = simplex.swap_remove(0);
    NelderMeadResult { x, f, iterations, converged }
}
