//! Finite-difference verification of reverse-mode gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::graph::{Graph, Tensor, Var};
use super::models::Architecture;
use super::train::batch_loss;

/// Above this many scalars only a seeded subsample is perturbed.
pub const FULL_CHECK_LIMIT: usize = 10_000;

/// Gradients smaller than this are compared in absolute terms.
const REL_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    /// `(tensor, entry)` of the worst coordinate.
    pub worst: Option<(usize, usize)>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compares the gradients returned by `loss_fn` against central differences
/// with step `eps`.
pub fn gradient_check<F>(mut loss_fn: F, params: &[Tensor], eps: f64, tolerance: f64) -> GradCheckReport
where
    F: FnMut(&[Tensor]) -> (f64, Vec<Tensor>),
{
    let (_, analytic) = loss_fn(params);
    let coords: Vec<(usize, usize)> = params.iter().enumerate().flat_map(|(t, p)| (0..p.len()).map(move |i| (t, i))).collect();
    let coords = if coords.len() > FULL_CHECK_LIMIT {
        let mut rng = ChaCha8Rng::seed_from_u64(coords.len() as u64);
        let mut picked: Vec<usize> = sample(&mut rng, coords.len(), FULL_CHECK_LIMIT).into_vec();
        picked.sort_unstable();
        picked.into_iter().map(|k| coords[k]).collect()
    } else {
        coords
    };

    let mut probe = params.to_vec();
    let mut report = GradCheckReport { checked: 0, max_rel_error: 0.0, worst: None, tolerance };
    for (t, i) in coords {
        let orig = probe[t].data[i];
        probe[t].data[i] = orig + eps;
        let up = loss_fn(&probe).0;
        probe[t].data[i] = orig - eps;
        let down = loss_fn(&probe).0;
        probe[t].data[i] = orig;
        let err = relative_error(analytic[t].data[i], (up - down) / (2.0 * eps));
        report.checked += 1;
        if err > report.max_rel_error || report.worst.is_none() {
            report.max_rel_error = err.max(report.max_rel_error);
            report.worst = Some((t, i));
        }
    }
    report
}

/// Training loss of `arch` on one batch together with its parameter gradients.
pub fn network_loss(arch: &Architecture, params: &[Tensor], x: &Tensor, y: &Tensor) -> (f64, Vec<Tensor>) {
    let mut g = Graph::new();
    let vars: Vec<Var> = params.iter().map(|t| g.leaf(t.clone())).collect();
    let loss = batch_loss(arch, &mut g, &vars, x, y);
    let grads = g.backward(loss);
    (g.value(loss).data[0], vars.iter().map(|&v| grads.of(&g, v)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::models::{ModelKind, NBeatsConfig};
    use rand::Rng;

    fn batch(rows: usize, window: usize, seed: u64) -> (Tensor, Tensor) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Tensor::new(rows, window, (0..rows * window).map(|_| rng.random_range(-1.0..1.0)).collect());
        let y = Tensor::new(rows, 1, (0..rows).map(|_| rng.random_range(-1.0..1.0)).collect());
        (x, y)
    }

    fn check(kind: ModelKind) -> GradCheckReport {
        let arch = Architecture { kind, window: 6, hidden: 4, nbeats: NBeatsConfig { stacks: 2, blocks_per_stack: 1, layer_width: 5 } };
        let params = arch.init_params(&mut ChaCha8Rng::seed_from_u64(17));
        let (x, y) = batch(3, 6, 18);
        gradient_check(|p| network_loss(&arch, p, &x, &y), &params, 1e-5, 1e-4)
    }

    #[test]
    fn quadratic_matches_closed_form() {
        let params = vec![Tensor::new(1, 4, vec![0.3, -1.2, 2.0, 0.05]), Tensor::new(2, 1, vec![-0.7, 1.1])];
        let quad = |p: &[Tensor]| {
            let value = p.iter().flat_map(|t| &t.data).map(|v| v * v).sum();
            let grads = p.iter().map(|t| Tensor { shape: t.shape.clone(), data: t.data.iter().map(|v| 2.0 * v).collect() }).collect();
            (value, grads)
        };
        let report = gradient_check(quad, &params, 1e-3, 1e-10);
        assert_eq!(report.checked, 6);
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn lstm_gradients() {
        let r = check(ModelKind::Lstm);
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn gru_gradients() {
        let r = check(ModelKind::Gru);
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn nbeats_gradients() {
        let r = check(ModelKind::NBeats);
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn deepar_nll_gradients() {
        let r = check(ModelKind::DeepAr);
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn corrupted_backward_is_caught() {
        let arch = Architecture { kind: ModelKind::Lstm, window: 6, hidden: 4, nbeats: NBeatsConfig::default() };
        let params = arch.init_params(&mut ChaCha8Rng::seed_from_u64(17));
        let (x, y) = batch(3, 6, 18);
        let broken = |p: &[Tensor]| {
            let (l, mut g) = network_loss(&arch, p, &x, &y);
            for v in &mut g[1].data {
                *v *= 1.5;
            }
            (l, g)
        };
        let r = gradient_check(broken, &params, 1e-5, 1e-4);
        assert!(r.max_rel_error > 1e-2, "{r:?}");
        assert!(!r.passed());
        assert_eq!(r.worst.map(|w| w.0), Some(1));
    }

    #[test]
    fn large_parameter_sets_are_subsampled() {
        let params = vec![Tensor::zeros(1, FULL_CHECK_LIMIT + 7)];
        let zero = |p: &[Tensor]| (0.0, p.to_vec());
        assert_eq!(gradient_check(zero, &params, 1e-5, 1e-4).checked, FULL_CHECK_LIMIT);
    }

    #[test]
    fn gaussian_nll_matches_entropy() {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 10_000;
        let samples: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut g = Graph::new();
        let mu = g.leaf(Tensor::zeros(n, 1));
        let sigma = g.leaf(Tensor::new(n, 1, vec![1.0; n]));
        let y = g.leaf(Tensor::new(n, 1, samples));
        let nll = g.gaussian_nll(mu, sigma, y);
        let expected = 0.5 * (2.0 * std::f64::consts::PI).ln() + 0.5;
        assert!((g.value(nll).data[0] - expected).abs() < 0.05);
    }
}
