//! Minimal reverse-mode automatic differentiation over 2-D f64 tensors.
//!
//! A [`Tape`] records a define-by-run graph of operations; [`Tape::backward`]
//! walks the nodes in reverse, accumulating gradients. Node evaluation order
//! is the insertion order, so gradients are bitwise deterministic.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

/// Logvar clamp bound; below the lower bound the sampling std is flushed to
/// exactly zero so the sampling path collapses onto the mean path.
pub const LOGVAR_CLAMP: f64 = 40.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TensorId(usize);

#[derive(Clone, Debug)]
enum OpKind {
    Leaf { needs_grad: bool },
    Add(TensorId, TensorId),
    Sub(TensorId, TensorId),
    Mul(TensorId, TensorId),
    MatMul(TensorId, TensorId),
    Scale(TensorId, f64),
    AddScalar(TensorId, f64),
    /// Broadcast-add a [1, cols] row vector over every row.
    AddRow(TensorId, TensorId),
    /// Broadcast-multiply by a [1, cols] row vector.
    MulRow(TensorId, TensorId),
    Transpose(TensorId),
    /// Horizontal concatenation (columns).
    ConcatCols(Vec<TensorId>),
    Reshape(TensorId),
    Relu(TensorId),
    Sin(TensorId),
    Cos(TensorId),
    Exp(TensorId),
    /// Row-wise softmax.
    Softmax(TensorId),
    /// Row-wise standardization (x - mean) / sqrt(var + eps), pre-affine.
    RowNorm(TensorId, f64),
    /// Second difference along rows divided by dt²; output has rows-2 rows.
    SecondDiffRows(TensorId, f64),
    /// std = exp(0.5·clamp(logvar)), flushed to exactly 0 below the clamp.
    StdFromLogvar(TensorId),
    MeanAll(TensorId),
    SumAll(TensorId),
}

#[derive(Clone, Debug)]
struct Node {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    grad: Vec<f64>,
    op: OpKind,
}

impl Node {
    fn len(&self) -> usize {
        self.rows * self.cols
    }
}

#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rows(&self, id: TensorId) -> usize {
        self.nodes[id.0].rows
    }

    pub fn cols(&self, id: TensorId) -> usize {
        self.nodes[id.0].cols
    }

    pub fn data(&self, id: TensorId) -> &[f64] {
        &self.nodes[id.0].data
    }

    pub fn grad(&self, id: TensorId) -> &[f64] {
        &self.nodes[id.0].grad
    }

    /// Scalar value of a [1,1] tensor.
    pub fn scalar(&self, id: TensorId) -> f64 {
        self.nodes[id.0].data[0]
    }

    fn push(&mut self, rows: usize, cols: usize, data: Vec<f64>, op: OpKind) -> TensorId {
        debug_assert_eq!(data.len(), rows * cols);
        let grad = vec![0.0; data.len()];
        self.nodes.push(Node { rows, cols, data, grad, op });
        TensorId(self.nodes.len() - 1)
    }

    /// Trainable leaf: gradients are accumulated for it.
    pub fn param(&mut self, rows: usize, cols: usize, data: Vec<f64>) -> TensorId {
        self.push(rows, cols, data, OpKind::Leaf { needs_grad: true })
    }

    /// Constant leaf: inputs, targets, noise draws.
    pub fn constant(&mut self, rows: usize, cols: usize, data: Vec<f64>) -> TensorId {
        self.push(rows, cols, data, OpKind::Leaf { needs_grad: false })
    }

    fn assert_same_shape(&self, a: TensorId, b: TensorId) {
        assert_eq!(
            (self.rows(a), self.cols(a)),
            (self.rows(b), self.cols(b)),
            "shape mismatch"
        );
    }

    pub fn add(&mut self, a: TensorId, b: TensorId) -> TensorId {
        self.assert_same_shape(a, b);
        let data =
            self.data(a).iter().zip(self.data(b)).map(|(x, y)| x + y).collect();
        self.push(self.rows(a), self.cols(a), data, OpKind::Add(a, b))
    }

    pub fn sub(&mut self, a: TensorId, b: TensorId) -> TensorId {
        self.assert_same_shape(a, b);
        let data =
            self.data(a).iter().zip(self.data(b)).map(|(x, y)| x - y).collect();
        self.push(self.rows(a), self.cols(a), data, OpKind::Sub(a, b))
    }

    pub fn mul(&mut self, a: TensorId, b: TensorId) -> TensorId {
        self.assert_same_shape(a, b);
        let data =
            self.data(a).iter().zip(self.data(b)).map(|(x, y)| x * y).collect();
        self.push(self.rows(a), self.cols(a), data, OpKind::Mul(a, b))
    }

    pub fn matmul(&mut self, a: TensorId, b: TensorId) -> TensorId {
        let (n, k) = (self.rows(a), self.cols(a));
        let (k2, m) = (self.rows(b), self.cols(b));
        assert_eq!(k, k2, "matmul inner dimension mismatch");
        let mut data = vec![0.0; n * m];
        {
            let lhs = self.data(a);
            let rhs = self.data(b);
            for i in 0..n {
                for p in 0..k {
                    let x = lhs[i * k + p];
                    if x == 0.0 {
                        continue;
                    }
                    let row = &rhs[p * m..(p + 1) * m];
                    let out = &mut data[i * m..(i + 1) * m];
                    for (o, &r) in out.iter_mut().zip(row) {
                        *o += x * r;
                    }
                }
            }
        }
        self.push(n, m, data, OpKind::MatMul(a, b))
    }

    pub fn scale(&mut self, a: TensorId, factor: f64) -> TensorId {
        let data = self.data(a).iter().map(|x| x * factor).collect();
        self.push(self.rows(a), self.cols(a), data, OpKind::Scale(a, factor))
    }

    pub fn add_scalar(&mut self, a: TensorId, value: f64) -> TensorId {
        let data = self.data(a).iter().map(|x| x + value).collect();
        self.push(self.rows(a), self.cols(a), data, OpKind::AddScalar(a, value))
    }

    pub fn add_row(&mut self, a: TensorId, row: TensorId) -> TensorId {
        assert_eq!(self.rows(row), 1);
        assert_eq!(self.cols(a), self.cols(row));
        let cols = self.cols(a);
        let data = self
            .data(a)
            .iter()
            .enumerate()
            .map(|(i, x)| x + self.data(row)[i % cols])
            .collect();
        self.push(self.rows(a), cols, data, OpKind::AddRow(a, row))
    }

    pub fn mul_row(&mut self, a: TensorId, row: TensorId) -> TensorId {
        assert_eq!(self.rows(row), 1);
        assert_eq!(self.cols(a), self.cols(row));
        let cols = self.cols(a);
        let data = self
            .data(a)
            .iter()
            .enumerate()
            .map(|(i, x)| x * self.data(row)[i % cols])
            .collect();
        self.push(self.rows(a), cols, data, OpKind::MulRow(a, row))
    }

    pub fn transpose(&mut self, a: TensorId) -> TensorId {
        let (n, m) = (self.rows(a), self.cols(a));
        let mut data = vec![0.0; n * m];
        for i in 0..n {
            for j in 0..m {
                data[j * n + i] = self.data(a)[i * m + j];
            }
        }
        self.push(m, n, data, OpKind::Transpose(a))
    }

    pub fn concat_cols(&mut self, parts: &[TensorId]) -> TensorId {
        assert!(!parts.is_empty());
        let rows = self.rows(parts[0]);
        let total_cols: usize = parts.iter().map(|&p| self.cols(p)).sum();
        let mut data = vec![0.0; rows * total_cols];
        let mut offset = 0;
        for &p in parts {
            assert_eq!(self.rows(p), rows);
            let cols = self.cols(p);
            for i in 0..rows {
                for j in 0..cols {
                    data[i * total_cols + offset + j] = self.data(p)[i * cols + j];
                }
            }
            offset += cols;
        }
        self.push(rows, total_cols, data, OpKind::ConcatCols(parts.to_vec()))
    }

    pub fn reshape(&mut self, a: TensorId, rows: usize, cols: usize) -> TensorId {
        assert_eq!(self.nodes[a.0].len(), rows * cols, "reshape size mismatch");
        let data = self.data(a).to_vec();
        self.push(rows, cols, data, OpKind::Reshape(a))
    }

    pub fn relu(&mut self, a: TensorId) -> TensorId {
        let data = self.data(a).iter().map(|&x| if x > 0.0 { x } else { 0.0 }).collect();
        self.push(self.rows(a), self.cols(a), data, OpKind::Relu(a))
    }

    pub fn sin(&mut self, a: TensorId) -> TensorId {
        let data = self.data(a).iter().map(|&x| math::sin(x)).collect();
        self.push(self.rows(a), self.cols(a), data, OpKind::Sin(a))
    }

    pub fn cos(&mut self, a: TensorId) -> TensorId {
        let data = self.data(a).iter().map(|&x| math::cos(x)).collect();
        self.push(self.rows(a), self.cols(a), data, OpKind::Cos(a))
    }

    pub fn exp(&mut self, a: TensorId) -> TensorId {
        let data = self.data(a).iter().map(|&x| math::exp(x)).collect();
        self.push(self.rows(a), self.cols(a), data, OpKind::Exp(a))
    }

    /// Row-wise softmax with the usual max-subtraction for stability. Rows
    /// sum to one.
    pub fn softmax(&mut self, a: TensorId) -> TensorId {
        let (n, m) = (self.rows(a), self.cols(a));
        let mut data = vec![0.0; n * m];
        for i in 0..n {
            let row = &self.data(a)[i * m..(i + 1) * m];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut denom = 0.0;
            for (j, &x) in row.iter().enumerate() {
                let e = math::exp(x - max);
                data[i * m + j] = e;
                denom += e;
            }
            for j in 0..m {
                data[i * m + j] /= denom;
            }
        }
        self.push(n, m, data, OpKind::Softmax(a))
    }

    /// Row-wise standardization with population variance and epsilon guard.
    pub fn row_norm(&mut self, a: TensorId, eps: f64) -> TensorId {
        let (n, m) = (self.rows(a), self.cols(a));
        let mut data = vec![0.0; n * m];
        for i in 0..n {
            let row = &self.data(a)[i * m..(i + 1) * m];
            let mean = row.iter().sum::<f64>() / m as f64;
            let var = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / m as f64;
            let inv_std = 1.0 / math::sqrt(var + eps);
            for j in 0..m {
                data[i * m + j] = (row[j] - mean) * inv_std;
            }
        }
        self.push(n, m, data, OpKind::RowNorm(a, eps))
    }

    /// (x[t+2] - 2·x[t+1] + x[t]) / dt² along the row (time) axis.
    pub fn second_diff_rows(&mut self, a: TensorId, dt: f64) -> TensorId {
        let (n, m) = (self.rows(a), self.cols(a));
        assert!(n >= 3, "second differences need at least 3 rows");
        let inv = 1.0 / (dt * dt);
        let mut data = vec![0.0; (n - 2) * m];
        for t in 0..n - 2 {
            for j in 0..m {
                let x0 = self.data(a)[t * m + j];
                let x1 = self.data(a)[(t + 1) * m + j];
                let x2 = self.data(a)[(t + 2) * m + j];
                data[t * m + j] = (x2 - 2.0 * x1 + x0) * inv;
            }
        }
        self.push(n - 2, m, data, OpKind::SecondDiffRows(a, dt))
    }

    /// Sampling std from logvar, clamped; exactly zero below the clamp.
    pub fn std_from_logvar(&mut self, logvar: TensorId) -> TensorId {
        let data = self
            .data(logvar)
            .iter()
            .map(|&lv| {
                if lv <= -LOGVAR_CLAMP {
                    0.0
                } else {
                    math::exp(0.5 * lv.min(LOGVAR_CLAMP))
                }
            })
            .collect();
        self.push(self.rows(logvar), self.cols(logvar), data, OpKind::StdFromLogvar(logvar))
    }

    pub fn mean_all(&mut self, a: TensorId) -> TensorId {
        let n = self.nodes[a.0].len();
        let mean = self.data(a).iter().sum::<f64>() / n as f64;
        self.push(1, 1, vec![mean], OpKind::MeanAll(a))
    }

    pub fn sum_all(&mut self, a: TensorId) -> TensorId {
        let sum = self.data(a).iter().sum::<f64>();
        self.push(1, 1, vec![sum], OpKind::SumAll(a))
    }

    /// Backpropagate from a scalar output node.
    pub fn backward(&mut self, output: TensorId) {
        assert_eq!(self.nodes[output.0].len(), 1, "backward starts from a scalar");
        for node in &mut self.nodes {
            node.grad.iter_mut().for_each(|g| *g = 0.0);
        }
        self.nodes[output.0].grad[0] = 1.0;

        for idx in (0..self.nodes.len()).rev() {
            let op = self.nodes[idx].op.clone();
            let grad = self.nodes[idx].grad.clone();
            if grad.iter().all(|&g| g == 0.0) {
                continue;
            }
            let (rows, cols) = (self.nodes[idx].rows, self.nodes[idx].cols);
            match op {
                OpKind::Leaf { .. } => {}
                OpKind::Add(a, b) => {
                    self.accumulate(a, &grad);
                    self.accumulate(b, &grad);
                }
                OpKind::Sub(a, b) => {
                    self.accumulate(a, &grad);
                    let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
                    self.accumulate(b, &neg);
                }
                OpKind::Mul(a, b) => {
                    let ga: Vec<f64> =
                        grad.iter().zip(self.data(b)).map(|(g, y)| g * y).collect();
                    let gb: Vec<f64> =
                        grad.iter().zip(self.data(a)).map(|(g, x)| g * x).collect();
                    self.accumulate(a, &ga);
                    self.accumulate(b, &gb);
                }
                OpKind::MatMul(a, b) => {
                    let (n, k) = (self.rows(a), self.cols(a));
                    let m = self.cols(b);
                    let mut ga = vec![0.0; n * k];
                    let mut gb = vec![0.0; k * m];
                    {
                        let bd = self.data(b);
                        let ad = self.data(a);
                        for i in 0..n {
                            for p in 0..k {
                                let mut acc = 0.0;
                                for j in 0..m {
                                    acc += grad[i * m + j] * bd[p * m + j];
                                }
                                ga[i * k + p] = acc;
                            }
                        }
                        for p in 0..k {
                            for j in 0..m {
                                let mut acc = 0.0;
                                for i in 0..n {
                                    acc += ad[i * k + p] * grad[i * m + j];
                                }
                                gb[p * m + j] = acc;
                            }
                        }
                    }
                    self.accumulate(a, &ga);
                    self.accumulate(b, &gb);
                }
                OpKind::Scale(a, factor) => {
                    let ga: Vec<f64> = grad.iter().map(|g| g * factor).collect();
                    self.accumulate(a, &ga);
                }
                OpKind::AddScalar(a, _) => self.accumulate(a, &grad),
                OpKind::AddRow(a, row) => {
                    self.accumulate(a, &grad);
                    let m = self.cols(row);
                    let mut gr = vec![0.0; m];
                    for (i, g) in grad.iter().enumerate() {
                        gr[i % m] += g;
                    }
                    self.accumulate(row, &gr);
                }
                OpKind::MulRow(a, row) => {
                    let m = self.cols(row);
                    let ga: Vec<f64> = grad
                        .iter()
                        .enumerate()
                        .map(|(i, g)| g * self.data(row)[i % m])
                        .collect();
                    let mut gr = vec![0.0; m];
                    for (i, g) in grad.iter().enumerate() {
                        gr[i % m] += g * self.data(a)[i];
                    }
                    self.accumulate(a, &ga);
                    self.accumulate(row, &gr);
                }
                OpKind::Transpose(a) => {
                    let (n, m) = (rows, cols); // output shape
                    let mut ga = vec![0.0; n * m];
                    for i in 0..n {
                        for j in 0..m {
                            ga[j * n + i] = grad[i * m + j];
                        }
                    }
                    self.accumulate(a, &ga);
                }
                OpKind::ConcatCols(parts) => {
                    let mut offset = 0;
                    for part in parts {
                        let pc = self.cols(part);
                        let pr = self.rows(part);
                        let mut gp = vec![0.0; pr * pc];
                        for i in 0..pr {
                            for j in 0..pc {
                                gp[i * pc + j] = grad[i * cols + offset + j];
                            }
                        }
                        self.accumulate(part, &gp);
                        offset += pc;
                    }
                }
                OpKind::Reshape(a) => self.accumulate(a, &grad),
                OpKind::Relu(a) => {
                    let ga: Vec<f64> = grad
                        .iter()
                        .zip(self.data(a))
                        .map(|(g, &x)| if x > 0.0 { *g } else { 0.0 })
                        .collect();
                    self.accumulate(a, &ga);
                }
                OpKind::Sin(a) => {
                    let ga: Vec<f64> = grad
                        .iter()
                        .zip(self.data(a))
                        .map(|(g, &x)| g * math::cos(x))
                        .collect();
                    self.accumulate(a, &ga);
                }
                OpKind::Cos(a) => {
                    let ga: Vec<f64> = grad
                        .iter()
                        .zip(self.data(a))
                        .map(|(g, &x)| -g * math::sin(x))
                        .collect();
                    self.accumulate(a, &ga);
                }
                OpKind::Exp(a) => {
                    let out = self.nodes[idx].data.clone();
                    let ga: Vec<f64> =
                        grad.iter().zip(&out).map(|(g, y)| g * y).collect();
                    self.accumulate(a, &ga);
                }
                OpKind::Softmax(a) => {
                    let (n, m) = (rows, cols);
                    let out = self.nodes[idx].data.clone();
                    let mut ga = vec![0.0; n * m];
                    for i in 0..n {
                        let y = &out[i * m..(i + 1) * m];
                        let g = &grad[i * m..(i + 1) * m];
                        let dot: f64 = y.iter().zip(g).map(|(yv, gv)| yv * gv).sum();
                        for j in 0..m {
                            ga[i * m + j] = y[j] * (g[j] - dot);
                        }
                    }
                    self.accumulate(a, &ga);
                }
                OpKind::RowNorm(a, eps) => {
                    let (n, m) = (rows, cols);
                    let out = self.nodes[idx].data.clone();
                    let mut ga = vec![0.0; n * m];
                    for i in 0..n {
                        let x = &self.data(a)[i * m..(i + 1) * m];
                        let mean = x.iter().sum::<f64>() / m as f64;
                        let var =
                            x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m as f64;
                        let inv_std = 1.0 / math::sqrt(var + eps);
                        let y = &out[i * m..(i + 1) * m];
                        let g = &grad[i * m..(i + 1) * m];
                        let g_mean = g.iter().sum::<f64>() / m as f64;
                        let gy_mean =
                            g.iter().zip(y).map(|(gv, yv)| gv * yv).sum::<f64>() / m as f64;
                        for j in 0..m {
                            ga[i * m + j] = inv_std * (g[j] - g_mean - y[j] * gy_mean);
                        }
                    }
                    self.accumulate(a, &ga);
                }
                OpKind::SecondDiffRows(a, dt) => {
                    let m = cols;
                    let inv = 1.0 / (dt * dt);
                    let mut ga = vec![0.0; self.nodes[a.0].len()];
                    for t in 0..rows {
                        for j in 0..m {
                            let g = grad[t * m + j] * inv;
                            ga[t * m + j] += g;
                            ga[(t + 1) * m + j] -= 2.0 * g;
                            ga[(t + 2) * m + j] += g;
                        }
                    }
                    self.accumulate(a, &ga);
                }
                OpKind::StdFromLogvar(a) => {
                    let out = self.nodes[idx].data.clone();
                    let ga: Vec<f64> = grad
                        .iter()
                        .zip(self.data(a).iter().zip(&out))
                        .map(|(g, (&lv, &std))| {
                            if lv <= -LOGVAR_CLAMP || lv >= LOGVAR_CLAMP {
                                0.0
                            } else {
                                g * 0.5 * std
                            }
                        })
                        .collect();
                    self.accumulate(a, &ga);
                }
                OpKind::MeanAll(a) => {
                    let n = self.nodes[a.0].len();
                    let g = grad[0] / n as f64;
                    let ga = vec![g; n];
                    self.accumulate(a, &ga);
                }
                OpKind::SumAll(a) => {
                    let n = self.nodes[a.0].len();
                    let ga = vec![grad[0]; n];
                    self.accumulate(a, &ga);
                }
            }
        }
    }

    fn accumulate(&mut self, id: TensorId, grad: &[f64]) {
        let node = &mut self.nodes[id.0];
        if let OpKind::Leaf { needs_grad: false } = node.op {
            return;
        }
        for (g, delta) in node.grad.iter_mut().zip(grad) {
            *g += delta;
        }
    }
}
