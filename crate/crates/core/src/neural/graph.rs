//! Reverse-mode differentiation over row-major matrices.
//!
//! A [`Graph`] records every operation of one forward pass. Calling
//! [`Graph::backward`] on a scalar node walks the record in reverse and
//! accumulates gradients for every node that feeds it.

use serde::{Deserialize, Serialize};

/// Dense row-major array. Everything the networks need is 2-D.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len(), "tensor data does not match shape {rows}x{cols}");
        Self { shape: vec![rows, cols], data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(rows, cols, vec![0.0; rows * cols])
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.shape[1]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn column(&self, j: usize) -> Tensor {
        let c = self.cols();
        Tensor::new(self.rows(), 1, (0..self.rows()).map(|i| self.data[i * c + j]).collect())
    }
}

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Affine(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Softplus(Var),
    Cols(Var, usize),
    Mse(Var, Var),
    GaussianNll(Var, Var, Var),
}

struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

const HALF_LN_TAU: f64 = 0.918_938_533_204_672_8;

/// `c += a · b` for `a: r×k`, `b: k×n`.
fn matmul_into(a: &[f64], b: &[f64], c: &mut [f64], r: usize, k: usize, n: usize) {
    for i in 0..r {
        let out = &mut c[i * n..(i + 1) * n];
        for (kk, &av) in a[i * k..(i + 1) * k].iter().enumerate() {
            if av != 0.0 {
                for (o, &bv) in out.iter_mut().zip(&b[kk * n..(kk + 1) * n]) {
                    *o += av * bv;
                }
            }
        }
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn shape(&self, v: Var) -> (usize, usize) {
        let t = &self.nodes[v.0].value;
        (t.rows(), t.cols())
    }

    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let ((r, k), (k2, n)) = (self.shape(a), self.shape(b));
        assert_eq!(k, k2, "matmul shape mismatch {r}x{k} · {k2}x{n}");
        let mut out = vec![0.0; r * n];
        matmul_into(&self.value(a).data, &self.value(b).data, &mut out, r, k, n);
        self.push(Tensor::new(r, n, out), Op::MatMul(a, b))
    }

    fn zip(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "elementwise shape mismatch");
        let (r, c) = self.shape(a);
        let data = self.value(a).data.iter().zip(&self.value(b).data).map(|(&x, &y)| f(x, y)).collect();
        self.push(Tensor::new(r, c, data), op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// `a + bias`, with the `1×c` bias broadcast over the rows of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Var {
        let (r, c) = self.shape(a);
        assert_eq!(self.shape(bias), (1, c), "bias must be 1x{c}");
        let b = &self.value(bias).data;
        let data = self.value(a).data.chunks(c).flat_map(|row| row.iter().zip(b).map(|(x, y)| x + y)).collect();
        self.push(Tensor::new(r, c, data), Op::AddRow(a, bias))
    }

    /// `scale · a + shift`.
    pub fn affine(&mut self, a: Var, scale: f64, shift: f64) -> Var {
        let t = self.value(a);
        let out = Tensor::new(t.rows(), t.cols(), t.data.iter().map(|x| scale * x + shift).collect());
        self.push(out, Op::Affine(a, scale))
    }

    fn map(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let t = self.value(a);
        let out = Tensor::new(t.rows(), t.cols(), t.data.iter().map(|&x| f(x)).collect());
        self.push(out, op)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, f64::tanh, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.map(a, |x| x.max(0.0), Op::Relu(a))
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        self.map(a, softplus, Op::Softplus(a))
    }

    /// Columns `start..start + width`.
    pub fn cols(&mut self, a: Var, start: usize, width: usize) -> Var {
        let (r, c) = self.shape(a);
        assert!(start + width <= c, "column slice out of range");
        let src = &self.value(a).data;
        let data = (0..r).flat_map(|i| src[i * c + start..i * c + start + width].iter().copied()).collect();
        self.push(Tensor::new(r, width, data), Op::Cols(a, start))
    }

    /// Mean squared difference, as a `1×1` node.
    pub fn mse(&mut self, pred: Var, target: Var) -> Var {
        assert_eq!(self.shape(pred), self.shape(target), "mse shape mismatch");
        let (p, t) = (&self.value(pred).data, &self.value(target).data);
        let loss = p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / p.len() as f64;
        self.push(Tensor::new(1, 1, vec![loss]), Op::Mse(pred, target))
    }

    /// Mean Gaussian negative log-likelihood of `target` under `N(mu, sigma²)`.
    pub fn gaussian_nll(&mut self, mu: Var, sigma: Var, target: Var) -> Var {
        assert_eq!(self.shape(mu), self.shape(sigma));
        assert_eq!(self.shape(mu), self.shape(target));
        let (m, s, y) = (&self.value(mu).data, &self.value(sigma).data, &self.value(target).data);
        let n = m.len() as f64;
        let loss = m
            .iter()
            .zip(s)
            .zip(y)
            .map(|((m, s), y)| HALF_LN_TAU + s.ln() + (y - m) * (y - m) / (2.0 * s * s))
            .sum::<f64>()
            / n;
        self.push(Tensor::new(1, 1, vec![loss]), Op::GaussianNll(mu, sigma, target))
    }

    /// Gradients of the scalar `root` with respect to every node; `None`
    /// for nodes that do not influence it.
    pub fn backward(&self, root: Var) -> Gradients {
        assert_eq!(self.shape(root), (1, 1), "backward needs a scalar root");
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(vec![1.0]);

        fn acc(grads: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut Vec<f64> {
            grads[v.0].get_or_insert_with(|| vec![0.0; len])
        }

        for idx in (0..=root.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let out = &node.value;
            match node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let ((r, k), (_, n)) = (self.shape(a), self.shape(b));
                    let (av, bv) = (&self.value(a).data, &self.value(b).data);
                    // dA = dC · Bᵀ, accumulated row by row so the inner loop vectorizes
                    let mut bt = vec![0.0; n * k];
                    for kk in 0..k {
                        for j in 0..n {
                            bt[j * k + kk] = bv[kk * n + j];
                        }
                    }
                    matmul_into(&g, &bt, acc(&mut grads, a, r * k), r, n, k);
                    let gb = acc(&mut grads, b, k * n);
                    for i in 0..r {
                        let gi = &g[i * n..(i + 1) * n];
                        for kk in 0..k {
                            let aik = av[i * k + kk];
                            if aik != 0.0 {
                                for (o, x) in gb[kk * n..(kk + 1) * n].iter_mut().zip(gi) {
                                    *o += aik * x;
                                }
                            }
                        }
                    }
                }
                Op::Add(a, b) | Op::Sub(a, b) => {
                    let sign = if matches!(node.op, Op::Sub(..)) { -1.0 } else { 1.0 };
                    for (o, x) in acc(&mut grads, a, g.len()).iter_mut().zip(&g) {
                        *o += x;
                    }
                    for (o, x) in acc(&mut grads, b, g.len()).iter_mut().zip(&g) {
                        *o += sign * x;
                    }
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (&self.value(a).data, &self.value(b).data);
                    for ((o, x), y) in acc(&mut grads, a, g.len()).iter_mut().zip(&g).zip(bv) {
                        *o += x * y;
                    }
                    for ((o, x), y) in acc(&mut grads, b, g.len()).iter_mut().zip(&g).zip(av) {
                        *o += x * y;
                    }
                }
                Op::AddRow(a, bias) => {
                    let c = out.cols();
                    for (o, x) in acc(&mut grads, a, g.len()).iter_mut().zip(&g) {
                        *o += x;
                    }
                    let gb = acc(&mut grads, bias, c);
                    for row in g.chunks(c) {
                        for (o, x) in gb.iter_mut().zip(row) {
                            *o += x;
                        }
                    }
                }
                Op::Affine(a, scale) => {
                    for (o, x) in acc(&mut grads, a, g.len()).iter_mut().zip(&g) {
                        *o += scale * x;
                    }
                }
                Op::Sigmoid(a) => {
                    for ((o, x), y) in acc(&mut grads, a, g.len()).iter_mut().zip(&g).zip(&out.data) {
                        *o += x * y * (1.0 - y);
                    }
                }
                Op::Tanh(a) => {
                    for ((o, x), y) in acc(&mut grads, a, g.len()).iter_mut().zip(&g).zip(&out.data) {
                        *o += x * (1.0 - y * y);
                    }
                }
                Op::Relu(a) => {
                    let input = &self.value(a).data;
                    for ((o, x), i) in acc(&mut grads, a, g.len()).iter_mut().zip(&g).zip(input) {
                        if *i > 0.0 {
                            *o += x;
                        }
                    }
                }
                Op::Softplus(a) => {
                    let input = &self.value(a).data;
                    for ((o, x), i) in acc(&mut grads, a, g.len()).iter_mut().zip(&g).zip(input) {
                        *o += x * sigmoid(*i);
                    }
                }
                Op::Cols(a, start) => {
                    let (r, c) = self.shape(a);
                    let width = out.cols();
                    let ga = acc(&mut grads, a, r * c);
                    for i in 0..r {
                        for (o, x) in ga[i * c + start..i * c + start + width].iter_mut().zip(&g[i * width..(i + 1) * width]) {
                            *o += x;
                        }
                    }
                }
                Op::Mse(p, t) => {
                    let (pv, tv) = (&self.value(p).data, &self.value(t).data);
                    let scale = 2.0 * g[0] / pv.len() as f64;
                    let diffs: Vec<f64> = pv.iter().zip(tv).map(|(a, b)| scale * (a - b)).collect();
                    for (o, d) in acc(&mut grads, p, pv.len()).iter_mut().zip(&diffs) {
                        *o += d;
                    }
                    for (o, d) in acc(&mut grads, t, pv.len()).iter_mut().zip(&diffs) {
                        *o -= d;
                    }
                }
                Op::GaussianNll(mu, sigma, target) => {
                    let (m, s, y) = (&self.value(mu).data, &self.value(sigma).data, &self.value(target).data);
                    let scale = g[0] / m.len() as f64;
                    let dmu: Vec<f64> = m.iter().zip(s).zip(y).map(|((m, s), y)| -scale * (y - m) / (s * s)).collect();
                    let dsig: Vec<f64> = m
                        .iter()
                        .zip(s)
                        .zip(y)
                        .map(|((m, s), y)| scale * (1.0 / s - (y - m) * (y - m) / (s * s * s)))
                        .collect();
                    for (o, d) in acc(&mut grads, mu, m.len()).iter_mut().zip(&dmu) {
                        *o += d;
                    }
                    for (o, d) in acc(&mut grads, sigma, m.len()).iter_mut().zip(&dsig) {
                        *o += d;
                    }
                    for (o, d) in acc(&mut grads, target, m.len()).iter_mut().zip(&dmu) {
                        *o -= d;
                    }
                }
            }
            grads[idx] = Some(g);
        }
        Gradients { grads }
    }
}

pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient of `v`, zero-filled if `v` did not influence the root.
    pub fn of(&self, graph: &Graph, v: Var) -> Tensor {
        let t = graph.value(v);
        let data = self.grads[v.0].clone().unwrap_or_else(|| vec![0.0; t.len()]);
        Tensor { shape: t.shape.clone(), data }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn numeric(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
        let eps = 1e-6;
        (0..x.len())
            .map(|i| {
                let mut a = x.to_vec();
                let mut b = x.to_vec();
                a[i] += eps;
                b[i] -= eps;
                (f(&a) - f(&b)) / (2.0 * eps)
            })
            .collect()
    }

    /// Loss touching every op once; `x` packs a 2x3 matrix, a 3x2 matrix and a 1x2 bias.
    fn composite(x: &[f64]) -> (Graph, Var, [Var; 3]) {
        let mut g = Graph::new();
        let a = g.leaf(Tensor::new(2, 3, x[..6].to_vec()));
        let b = g.leaf(Tensor::new(3, 2, x[6..12].to_vec()));
        let bias = g.leaf(Tensor::new(1, 2, x[12..14].to_vec()));
        let m = g.matmul(a, b);
        let m = g.add_row(m, bias);
        let s = g.sigmoid(m);
        let t = g.tanh(m);
        let r = g.relu(m);
        let sp = g.softplus(m);
        let p = g.mul(s, t);
        let q = g.add(p, r);
        let q = g.sub(q, sp);
        let q = g.affine(q, 1.7, -0.2);
        let left = g.cols(q, 0, 1);
        let right = g.cols(q, 1, 1);
        let sigma = g.softplus(right);
        let target = g.leaf(Tensor::new(2, 1, vec![0.3, -0.4]));
        let nll = g.gaussian_nll(left, sigma, target);
        let mse = g.mse(left, right);
        let loss = g.add(nll, mse);
        (g, loss, [a, b, bias])
    }

    #[test]
    fn every_op_matches_finite_differences() {
        let x: Vec<f64> = (0..14).map(|i| ((i * 7 % 11) as f64 - 5.0) / 6.0).collect();
        let (g, loss, leaves) = composite(&x);
        let grads = g.backward(loss);
        let analytic: Vec<f64> = leaves.iter().flat_map(|&v| grads.of(&g, v).data).collect();
        let f = |y: &[f64]| {
            let (g, loss, _) = composite(y);
            g.value(loss).data[0]
        };
        for (a, n) in analytic.iter().zip(numeric(f, &x)) {
            assert!((a - n).abs() < 1e-7 * (1.0 + n.abs()), "{a} vs {n}");
        }
    }

    #[test]
    fn stable_activations() {
        assert_eq!(sigmoid(-800.0), 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
        assert_eq!(softplus(800.0), 800.0);
        assert!(softplus(-800.0) >= 0.0);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn unused_nodes_get_zero_gradient() {
        let mut g = Graph::new();
        let a = g.leaf(Tensor::new(1, 1, vec![2.0]));
        let unused = g.leaf(Tensor::new(1, 2, vec![1.0, 1.0]));
        let l = g.mse(a, a);
        let grads = g.backward(l);
        assert_eq!(grads.of(&g, unused).data, vec![0.0, 0.0]);
    }
}
