use std::cmp::Ordering;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::graph::{Graph, Tensor, Var};
use super::models::{Architecture, ModelKind, NBeatsConfig, Output};
use super::NeuralError;
use crate::preprocess::WindowedDataset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuralConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub window: usize,
    pub batch_size: usize,
    pub hidden_size: usize,
    pub seed: u64,
    pub nbeats: NBeatsConfig,
    pub deepar_samples: usize,
}

impl Default for NeuralConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            learning_rate: 0.01,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            window: 52,
            batch_size: 32,
            hidden_size: 32,
            seed: 0,
            nbeats: NBeatsConfig::default(),
            deepar_samples: 100,
        }
    }
}

impl NeuralConfig {
    pub fn validate(&self) -> Result<(), NeuralError> {
        let bad = |m: &str| Err(NeuralError::Config(m.to_string()));
        if self.epochs == 0 || self.window == 0 || self.batch_size == 0 || self.hidden_size == 0 {
            return bad("epochs, window, batch size and hidden size must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) || !(self.adam_eps > 0.0) {
            return bad("adam betas must lie in [0, 1) and eps must be positive");
        }
        let nb = &self.nbeats;
        if nb.stacks == 0 || nb.blocks_per_stack == 0 || nb.layer_width == 0 || self.deepar_samples == 0 {
            return bad("n-beats sizes and deepar sample count must be positive");
        }
        Ok(())
    }

    pub fn architecture(&self, kind: ModelKind) -> Architecture {
        Architecture { kind, window: self.window, hidden: self.hidden_size, nbeats: self.nbeats }
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(cfg: &NeuralConfig, params: &[Tensor]) -> Self {
        Self {
            lr: cfg.learning_rate,
            beta1: cfg.adam_beta1,
            beta2: cfg.adam_beta2,
            eps: cfg.adam_eps,
            t: 0,
            m: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.len()]).collect(),
        }
    }

    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.data.len() {
                let gi = g.data[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gi;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gi * gi;
                p.data[i] -= self.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + self.eps);
            }
        }
    }
}

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedForecaster {
    pub version: u32,
    pub kind: ModelKind,
    pub config: NeuralConfig,
    pub params: Vec<Tensor>,
    pub train_loss_curve: Vec<f64>,
}

/// Batch loss as a graph node: MSE, or Gaussian NLL for DeepAR.
pub(crate) fn batch_loss(arch: &Architecture, g: &mut Graph, params: &[Var], x: &Tensor, y: &Tensor) -> Var {
    let out = arch.forward(g, params, x);
    let target = g.leaf(y.clone());
    match out {
        Output::Gaussian { mu, sigma } => g.gaussian_nll(mu, sigma, target),
        other => g.mse(other.point(), target),
    }
}

fn lex(a: &[f64], b: &[f64]) -> Ordering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(a.len().cmp(&b.len()))
}

/// Trains `kind` on `windows`.
///
/// Windows are put in a canonical order before the seeded shuffle, so the
/// result depends on their contents and the seed only.
pub fn train(kind: ModelKind, windows: &WindowedDataset, cfg: &NeuralConfig) -> Result<TrainedForecaster, NeuralError> {
    cfg.validate()?;
    if windows.inputs.is_empty() {
        return Err(NeuralError::NoWindows);
    }
    if windows.window_len != cfg.window {
        return Err(NeuralError::Shape(format!("windows have length {}, config expects {}", windows.window_len, cfg.window)));
    }
    let arch = cfg.architecture(kind);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = arch.init_params(&mut rng);
    let mut adam = Adam::new(cfg, &params);

    let mut order: Vec<usize> = (0..windows.inputs.len()).collect();
    order.sort_by(|&a, &b| {
        lex(&windows.inputs[a], &windows.inputs[b]).then(windows.targets[a].total_cmp(&windows.targets[b]))
    });
    let n = order.len();
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let x = Tensor::new(batch.len(), cfg.window, batch.iter().flat_map(|&i| windows.inputs[i].iter().copied()).collect());
            let y = Tensor::new(batch.len(), 1, batch.iter().map(|&i| windows.targets[i]).collect());
            let mut g = Graph::new();
            let vars: Vec<Var> = params.iter().map(|t| g.leaf(t.clone())).collect();
            let loss = batch_loss(&arch, &mut g, &vars, &x, &y);
            let value = g.value(loss).data[0];
            if !value.is_finite() {
                return Err(NeuralError::NonFiniteLoss { epoch: epoch + 1 });
            }
            total += value * batch.len() as f64;
            let grads = g.backward(loss);
            let grads: Vec<Tensor> = vars.iter().map(|&v| grads.of(&g, v)).collect();
            adam.step(&mut params, &grads);
        }
        curve.push(total / n as f64);
    }
    if !params.iter().all(Tensor::is_finite) {
        return Err(NeuralError::NonFiniteLoss { epoch: cfg.epochs });
    }
    Ok(TrainedForecaster { version: CHECKPOINT_VERSION, kind, config: *cfg, params, train_loss_curve: curve })
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Median of `samples` draws from `N(mu, sigma²)`.
pub fn sample_median(mu: f64, sigma: f64, samples: usize, rng: &mut ChaCha8Rng) -> f64 {
    let normal = Normal::new(mu, sigma).expect("sigma is positive and finite");
    let mut draws: Vec<f64> = (0..samples).map(|_| normal.sample(rng)).collect();
    median(&mut draws)
}

impl TrainedForecaster {
    pub fn architecture(&self) -> Architecture {
        self.config.architecture(self.kind)
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    /// Raw network output for each row of `windows`: the point forecast,
    /// plus sigma for DeepAR.
    pub fn predict_batch(&self, windows: &[&[f64]]) -> Result<(Vec<f64>, Option<Vec<f64>>), NeuralError> {
        let arch = self.architecture();
        arch.check_params(&self.params)?;
        if let Some(bad) = windows.iter().find(|w| w.len() != arch.window) {
            return Err(NeuralError::Shape(format!("window has {} values, expected {}", bad.len(), arch.window)));
        }
        if windows.is_empty() {
            return Ok((Vec::new(), None));
        }
        let mut g = Graph::new();
        let vars: Vec<Var> = self.params.iter().map(|t| g.leaf(t.clone())).collect();
        let x = Tensor::new(windows.len(), arch.window, windows.concat());
        let out = arch.forward(&mut g, &vars, &x);
        let point = g.value(out.point()).data.clone();
        let sigma = match out {
            Output::Gaussian { sigma, .. } => Some(g.value(sigma).data.clone()),
            _ => None,
        };
        Ok((point, sigma))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, NeuralError> {
        let model: TrainedForecaster = serde_json::from_str(text)?;
        if model.version != CHECKPOINT_VERSION {
            return Err(NeuralError::Version(model.version));
        }
        model.architecture().check_params(&model.params)?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), NeuralError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NeuralError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// `epoch,loss` rows, epochs counted from 1.
    pub fn loss_curve_csv(&self) -> String {
        let mut out = String::from("epoch,loss\n");
        for (i, l) in self.train_loss_curve.iter().enumerate() {
            out.push_str(&format!("{},{}\n", i + 1, l));
        }
        out
    }
}

/// One-step forecasts over `test`, each from the `w` true observations
/// before it. DeepAR reports the median of seeded samples.
pub fn rolling_forecast_neural(model: &TrainedForecaster, history: &[f64], test: &[f64]) -> Result<Vec<f64>, NeuralError> {
    let w = model.config.window;
    if history.len() < w {
        return Err(NeuralError::HistoryTooShort { len: history.len(), needed: w });
    }
    let all: Vec<f64> = history[history.len() - w..].iter().chain(test).copied().collect();
    let windows: Vec<&[f64]> = (0..test.len()).map(|i| &all[i..i + w]).collect();
    let (point, sigma) = model.predict_batch(&windows)?;
    match sigma {
        None => Ok(point),
        Some(sigma) => {
            let mut rng = ChaCha8Rng::seed_from_u64(model.config.seed ^ 0x5eed_dea5);
            Ok(point
                .iter()
                .zip(&sigma)
                .map(|(&mu, &s)| sample_median(mu, s, model.config.deepar_samples, &mut rng))
                .collect())
        }
    }
}
