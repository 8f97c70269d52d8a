//! Derivative-free simplex minimization.

use serde::{Deserialize, Serialize};

/// Stopping rule for [`minimize`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadConfig {
    /// Converged once every vertex lies within this distance of the best one.
    pub diameter_tol: f64,
    pub max_iter: usize,
    /// Offset of the initial vertices along each coordinate axis.
    pub initial_step: f64,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        Self { diameter_tol: 1e-6, max_iter: 2000, initial_step: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Every vertex of the simplex evaluated to a non-finite value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexCollapse;

/// Minimizes `f` from `start` with the standard reflection (1), expansion (2),
/// contraction (1/2) and shrink (1/2) moves. Non-finite values are treated as
/// rejected points.
pub fn minimize<F>(mut f: F, start: &[f64], cfg: &NelderMeadConfig) -> Result<Minimum, SimplexCollapse>
where
    F: FnMut(&[f64]) -> f64,
{
    let n = start.len();
    let mut eval = |x: &[f64]| {
        let v = f(x);
        if v.is_finite() { v } else { f64::INFINITY }
    };
    if n == 0 {
        let value = eval(start);
        return if value.is_finite() {
            Ok(Minimum { x: Vec::new(), value, iterations: 0, converged: true })
        } else {
            Err(SimplexCollapse)
        };
    }

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((start.to_vec(), eval(start)));
    for i in 0..n {
        let mut x = start.to_vec();
        x[i] += cfg.initial_step;
        let v = eval(&x);
        simplex.push((x, v));
    }

    let mut iterations = 0;
    let mut converged = false;
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if !simplex[0].1.is_finite() {
            return Err(SimplexCollapse);
        }
        let best = &simplex[0].0;
        let diameter = simplex[1..]
            .iter()
            .map(|(x, _)| x.iter().zip(best).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        if diameter < cfg.diameter_tol {
            converged = true;
            break;
        }
        if iterations >= cfg.max_iter {
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / n as f64;
            }
        }
        let worst = simplex[n].clone();
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&worst.0).map(|(c, w)| c + t * (c - w)).collect()
        };

        let reflected = along(1.0);
        let fr = eval(&reflected);
        if fr < simplex[0].1 {
            let expanded = along(2.0);
            let fe = eval(&expanded);
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
            continue;
        }
        let (contracted, fc) = if fr < worst.1 {
            let x = along(0.5);
            let v = eval(&x);
            (x, v)
        } else {
            let x = along(-0.5);
            let v = eval(&x);
            (x, v)
        };
        if fc < fr.min(worst.1) {
            simplex[n] = (contracted, fc);
            continue;
        }
        let anchor = simplex[0].0.clone();
        for (x, v) in simplex.iter_mut().skip(1) {
            for (xi, ai) in x.iter_mut().zip(&anchor) {
                *xi = ai + 0.5 * (*xi - ai);
            }
            *v = eval(x);
        }
    }
    let (x, value) = simplex.swap_remove(0);
    Ok(Minimum { x, value, iterations, converged })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let cfg = NelderMeadConfig { diameter_tol: 1e-10, max_iter: 5000, initial_step: 0.5 };
        let m = minimize(f, &[-1.2, 1.0], &cfg).unwrap();
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] - 1.0).abs() < 1e-6, "{:?}", m.x);
    }

    #[test]
    fn one_dimensional_quadratic() {
        let m = minimize(|x| (x[0] - 3.0).powi(2), &[0.0], &NelderMeadConfig::default()).unwrap();
        assert!((m.x[0] - 3.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_non_finite_region() {
        let f = |x: &[f64]| if x[0] < 1.0 { f64::NAN } else { x[0] * x[0] };
        let m = minimize(f, &[2.0], &NelderMeadConfig::default()).unwrap();
        assert!((m.x[0] - 1.0).abs() < 1e-5);
        assert_eq!(minimize(|_| f64::NAN, &[0.0, 0.0], &NelderMeadConfig::default()), Err(SimplexCollapse));
    }

    #[test]
    fn iteration_cap() {
        let cfg = NelderMeadConfig { max_iter: 3, ..Default::default() };
        let m = minimize(|x| x[0].powi(2) + x[1].powi(2), &[5.0, 5.0], &cfg).unwrap();
        assert_eq!(m.iterations, 3);
        assert!(!m.converged);
    }
}
