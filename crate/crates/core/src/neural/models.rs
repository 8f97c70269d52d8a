//! Network definitions: parameter layouts and forward passes.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::graph::{Graph, Tensor, Var};
use super::NeuralError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "LSTM")]
    Lstm,
    #[serde(rename = "GRU")]
    Gru,
    #[serde(rename = "NBEATS")]
    NBeats,
    #[serde(rename = "DEEPAR")]
    DeepAr,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Lstm, ModelKind::Gru, ModelKind::NBeats, ModelKind::DeepAr];

    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Lstm => "LSTM",
            ModelKind::Gru => "GRU",
            ModelKind::NBeats => "N-BEATS",
            ModelKind::DeepAr => "DeepAR",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NBeatsConfig {
    pub stacks: usize,
    pub blocks_per_stack: usize,
    pub layer_width: usize,
}

impl Default for NBeatsConfig {
    fn default() -> Self {
        Self { stacks: 2, blocks_per_stack: 2, layer_width: 64 }
    }
}

/// Shape and initialization scale of one parameter tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub fan_in: usize,
}

impl ParamSpec {
    fn new(name: impl Into<String>, rows: usize, cols: usize, fan_in: usize) -> Self {
        Self { name: name.into(), rows, cols, fan_in }
    }
}

/// A concrete network: kind plus every dimension its parameters depend on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Architecture {
    pub kind: ModelKind,
    pub window: usize,
    pub hidden: usize,
    pub nbeats: NBeatsConfig,
}

/// What a forward pass produces for a batch.
#[derive(Debug, Clone, Copy)]
pub enum Output {
    Point(Var),
    Gaussian { mu: Var, sigma: Var },
    NBeats { forecast: Var, residual: Var },
}

impl Output {
    /// The point forecast: the prediction, or the Gaussian mean.
    pub fn point(&self) -> Var {
        match *self {
            Output::Point(v) => v,
            Output::Gaussian { mu, .. } => mu,
            Output::NBeats { forecast, .. } => forecast,
        }
    }
}

pub const SIGMA_FLOOR: f64 = 1e-6;

impl Architecture {
    pub fn param_specs(&self) -> Vec<ParamSpec> {
        let h = self.hidden;
        let recurrent = |gates: usize| {
            vec![
                ParamSpec::new("w_ih", 1, gates * h, 1 + h),
                ParamSpec::new("w_hh", h, gates * h, 1 + h),
                ParamSpec::new("b_ih", 1, gates * h, 1 + h),
                ParamSpec::new("b_hh", 1, gates * h, 1 + h),
            ]
        };
        match self.kind {
            ModelKind::Lstm | ModelKind::Gru => {
                let mut specs = recurrent(if self.kind == ModelKind::Lstm { 4 } else { 3 });
                specs.push(ParamSpec::new("w_out", h, 1, h));
                specs.push(ParamSpec::new("b_out", 1, 1, h));
                specs
            }
            ModelKind::DeepAr => {
                let mut specs = recurrent(4);
                specs.push(ParamSpec::new("w_mu", h, 1, h));
                specs.push(ParamSpec::new("b_mu", 1, 1, h));
                specs.push(ParamSpec::new("w_sigma", h, 1, h));
                specs.push(ParamSpec::new("b_sigma", 1, 1, h));
                specs
            }
            ModelKind::NBeats => {
                let (w, width) = (self.window, self.nbeats.layer_width);
                let mut specs = Vec::new();
                for b in 0..self.blocks() {
                    for layer in 0..4 {
                        let fan_in = if layer == 0 { w } else { width };
                        specs.push(ParamSpec::new(format!("block{b}.fc{layer}.w"), fan_in, width, fan_in));
                        specs.push(ParamSpec::new(format!("block{b}.fc{layer}.b"), 1, width, fan_in));
                    }
                    specs.push(ParamSpec::new(format!("block{b}.backcast.w"), width, w, width));
                    specs.push(ParamSpec::new(format!("block{b}.backcast.b"), 1, w, width));
                    specs.push(ParamSpec::new(format!("block{b}.forecast.w"), width, 1, width));
                    specs.push(ParamSpec::new(format!("block{b}.forecast.b"), 1, 1, width));
                }
                specs
            }
        }
    }

    fn blocks(&self) -> usize {
        self.nbeats.stacks * self.nbeats.blocks_per_stack
    }

    pub fn param_count(&self) -> usize {
        self.param_specs().iter().map(|s| s.rows * s.cols).sum()
    }

    /// Draws every entry from `uniform(-k, k)`, `k = 1/sqrt(fan_in)`.
    pub fn init_params(&self, rng: &mut ChaCha8Rng) -> Vec<Tensor> {
        self.param_specs()
            .iter()
            .map(|s| {
                let k = 1.0 / (s.fan_in as f64).sqrt();
                Tensor::new(s.rows, s.cols, (0..s.rows * s.cols).map(|_| rng.random_range(-k..k)).collect())
            })
            .collect()
    }

    pub fn check_params(&self, params: &[Tensor]) -> Result<(), NeuralError> {
        let specs = self.param_specs();
        if specs.len() != params.len() {
            return Err(NeuralError::Shape(format!("expected {} parameter tensors, got {}", specs.len(), params.len())));
        }
        for (s, p) in specs.iter().zip(params) {
            if p.shape != [s.rows, s.cols] || p.data.len() != s.rows * s.cols {
                return Err(NeuralError::Shape(format!("{} should be {}x{}, got {:?}", s.name, s.rows, s.cols, p.shape)));
            }
        }
        Ok(())
    }

    /// Forward pass for a batch `x` of shape `batch × window`.
    pub fn forward(&self, g: &mut Graph, params: &[Var], x: &Tensor) -> Output {
        match self.kind {
            ModelKind::Lstm => {
                let h = self.lstm_trunk(g, params, x);
                let out = g.matmul(h, params[4]);
                Output::Point(g.add_row(out, params[5]))
            }
            ModelKind::Gru => {
                let h = self.gru_trunk(g, params, x);
                let out = g.matmul(h, params[4]);
                Output::Point(g.add_row(out, params[5]))
            }
            ModelKind::DeepAr => {
                let h = self.lstm_trunk(g, params, x);
                let mu = g.matmul(h, params[4]);
                let mu = g.add_row(mu, params[5]);
                let s = g.matmul(h, params[6]);
                let s = g.add_row(s, params[7]);
                let s = g.softplus(s);
                let sigma = g.affine(s, 1.0, SIGMA_FLOOR);
                Output::Gaussian { mu, sigma }
            }
            ModelKind::NBeats => {
                let mut residual = g.leaf(x.clone());
                let mut forecast: Option<Var> = None;
                for b in 0..self.blocks() {
                    let p = &params[b * 12..(b + 1) * 12];
                    let mut z = residual;
                    for layer in 0..4 {
                        let a = g.matmul(z, p[2 * layer]);
                        let a = g.add_row(a, p[2 * layer + 1]);
                        z = g.relu(a);
                    }
                    let back = g.matmul(z, p[8]);
                    let back = g.add_row(back, p[9]);
                    let fore = g.matmul(z, p[10]);
                    let fore = g.add_row(fore, p[11]);
                    residual = g.sub(residual, back);
                    forecast = Some(match forecast {
                        Some(acc) => g.add(acc, fore),
                        None => fore,
                    });
                }
                let forecast = forecast.unwrap_or_else(|| g.leaf(Tensor::zeros(x.rows(), 1)));
                Output::NBeats { forecast, residual }
            }
        }
    }

    fn lstm_trunk(&self, g: &mut Graph, p: &[Var], x: &Tensor) -> Var {
        let (n, h) = (x.rows(), self.hidden);
        let mut hs = g.leaf(Tensor::zeros(n, h));
        let mut cs = g.leaf(Tensor::zeros(n, h));
        for t in 0..x.cols() {
            let xt = g.leaf(x.column(t));
            let a = g.matmul(xt, p[0]);
            let a = g.add_row(a, p[2]);
            let r = g.matmul(hs, p[1]);
            let r = g.add_row(r, p[3]);
            let gates = g.add(a, r);
            let i = g.cols(gates, 0, h);
            let i = g.sigmoid(i);
            let f = g.cols(gates, h, h);
            let f = g.sigmoid(f);
            let c_hat = g.cols(gates, 2 * h, h);
            let c_hat = g.tanh(c_hat);
            let o = g.cols(gates, 3 * h, h);
            let o = g.sigmoid(o);
            let keep = g.mul(f, cs);
            let write = g.mul(i, c_hat);
            cs = g.add(keep, write);
            let tc = g.tanh(cs);
            hs = g.mul(o, tc);
        }
        hs
    }

    fn gru_trunk(&self, g: &mut Graph, p: &[Var], x: &Tensor) -> Var {
        let (n, h) = (x.rows(), self.hidden);
        let mut hs = g.leaf(Tensor::zeros(n, h));
        for t in 0..x.cols() {
            let xt = g.leaf(x.column(t));
            let gi = g.matmul(xt, p[0]);
            let gi = g.add_row(gi, p[2]);
            let gh = g.matmul(hs, p[1]);
            let gh = g.add_row(gh, p[3]);
            let (ir, hr) = (g.cols(gi, 0, h), g.cols(gh, 0, h));
            let r = g.add(ir, hr);
            let r = g.sigmoid(r);
            let (iz, hz) = (g.cols(gi, h, h), g.cols(gh, h, h));
            let z = g.add(iz, hz);
            let z = g.sigmoid(z);
            let (inn, hn) = (g.cols(gi, 2 * h, h), g.cols(gh, 2 * h, h));
            let gated = g.mul(r, hn);
            let cand = g.add(inn, gated);
            let cand = g.tanh(cand);
            // h' = (1 - z)·n + z·h = n + z·(h - n)
            let delta = g.sub(hs, cand);
            let delta = g.mul(z, delta);
            hs = g.add(cand, delta);
        }
        hs
    }

    /// Single-window evaluation without keeping the graph around.
    pub fn evaluate(&self, params: &[Tensor], window: &[f64]) -> Result<(Tensor, Output, Graph), NeuralError> {
        self.check_params(params)?;
        if window.len() != self.window {
            return Err(NeuralError::Shape(format!("window has {} values, expected {}", window.len(), self.window)));
        }
        let mut g = Graph::new();
        let vars: Vec<Var> = params.iter().map(|t| g.leaf(t.clone())).collect();
        let x = Tensor::new(1, window.len(), window.to_vec());
        let out = self.forward(&mut g, &vars, &x);
        Ok((x, out, g))
    }
}

fn recurrent_hidden(params: &[Tensor], gates: usize) -> Result<usize, NeuralError> {
    let first = params.first().ok_or_else(|| NeuralError::Shape("no parameters".into()))?;
    if first.shape.len() != 2 || first.cols() % gates != 0 {
        return Err(NeuralError::Shape(format!("w_ih shape {:?} is not 1x{gates}h", first.shape)));
    }
    Ok(first.cols() / gates)
}

fn scalar(g: &Graph, v: Var) -> f64 {
    g.value(v).data[0]
}

/// LSTM prediction for one window; the hidden size is read off `params`.
pub fn lstm_forward(window: &[f64], params: &[Tensor]) -> Result<f64, NeuralError> {
    let hidden = recurrent_hidden(params, 4)?;
    let arch = Architecture { kind: ModelKind::Lstm, window: window.len(), hidden, nbeats: NBeatsConfig::default() };
    let (_, out, g) = arch.evaluate(params, window)?;
    Ok(scalar(&g, out.point()))
}

pub fn gru_forward(window: &[f64], params: &[Tensor]) -> Result<f64, NeuralError> {
    let hidden = recurrent_hidden(params, 3)?;
    let arch = Architecture { kind: ModelKind::Gru, window: window.len(), hidden, nbeats: NBeatsConfig::default() };
    let (_, out, g) = arch.evaluate(params, window)?;
    Ok(scalar(&g, out.point()))
}

/// Final residual backcast and summed forecast.
pub fn nbeats_forward(window: &[f64], params: &[Tensor], cfg: NBeatsConfig) -> Result<(Vec<f64>, f64), NeuralError> {
    let width = params.first().map(|t| t.cols()).unwrap_or(0);
    let nbeats = NBeatsConfig { layer_width: width, ..cfg };
    let arch = Architecture { kind: ModelKind::NBeats, window: window.len(), hidden: 0, nbeats };
    let (_, out, g) = arch.evaluate(params, window)?;
    match out {
        Output::NBeats { forecast, residual } => Ok((g.value(residual).data.clone(), scalar(&g, forecast))),
        _ => unreachable!(),
    }
}

/// Gaussian parameters `(mu, sigma)` for the step after `window`.
pub fn deepar_step(window: &[f64], params: &[Tensor]) -> Result<(f64, f64), NeuralError> {
    let hidden = recurrent_hidden(params, 4)?;
    let arch = Architecture { kind: ModelKind::DeepAr, window: window.len(), hidden, nbeats: NBeatsConfig::default() };
    let (_, out, g) = arch.evaluate(params, window)?;
    match out {
        Output::Gaussian { mu, sigma } => Ok((scalar(&g, mu), scalar(&g, sigma))),
        _ => unreachable!(),
    }
}
