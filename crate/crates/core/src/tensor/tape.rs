use rand::Rng;

use super::{ParamId, ParameterStore, Real, Tensor};
use crate::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op<S> {
    Constant,
    Leaf,
    Param,
    MatMul { a: Var, b: Var, trans_b: bool },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRowBias(Var, Var),
    Scale(Var, S),
    ConcatCols(Vec<Var>),
    SliceCols { a: Var, start: usize },
    Relu(Var),
    Tanh(Var),
    Sigmoid(Var),
    Exp(Var),
    Log(Var),
    SoftmaxRows(Var),
    LogSoftmaxRows(Var),
    Lookup { table: Var, ids: Vec<usize> },
    GatherRows { a: Var, idx: Vec<usize> },
    Gather { a: Var, idx: Vec<usize> },
    Dropout { a: Var, mask: Vec<S> },
    SegmentDot { a: Var, q: Var, seg: Vec<usize> },
    SegmentLogSoftmax { a: Var, offsets: Vec<usize> },
    SegmentSum { a: Var, offsets: Vec<usize> },
    Sum(Var),
    Mean(Var),
    BceWithLogits { logits: Var, targets: Vec<S> },
}

struct Node<S> {
    value: Tensor<S>,
    op: Op<S>,
    needs_grad: bool,
}

/// Define-by-run record of tensor operations.
///
/// Nodes are appended in evaluation order, which is a topological order, so
/// the backward pass is a single reverse sweep.
pub struct Tape<S: Real = f32> {
    nodes: Vec<Node<S>>,
    params: Vec<(ParamId, Var)>,
}

impl<S: Real> Default for Tape<S> {
    fn default() -> Self {
        Self::new()
    }
}

fn same_shape(op: &'static str, a: &Tensor<impl Real>, b: &Tensor<impl Real>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Shape {
            op,
            left: a.shape().to_vec(),
            right: b.shape().to_vec(),
        });
    }
    Ok(())
}

fn matrix(op: &'static str, t: &Tensor<impl Real>) -> Result<(usize, usize)> {
    if t.rank() != 2 {
        return Err(Error::Shape {
            op,
            left: t.shape().to_vec(),
            right: vec![],
        });
    }
    Ok((t.shape()[0], t.shape()[1]))
}

fn check_offsets(op: &'static str, offsets: &[usize], len: usize) -> Result<()> {
    let ok = offsets.first() == Some(&0)
        && offsets.last() == Some(&len)
        && offsets.windows(2).all(|w| w[0] <= w[1]);
    if !ok {
        return Err(Error::Shape {
            op,
            left: vec![len],
            right: offsets.to_vec(),
        });
    }
    Ok(())
}

fn sigmoid<S: Real>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

fn log_softmax_in_place<S: Real>(xs: &mut [S]) {
    if xs.is_empty() {
        return;
    }
    let max = xs.iter().fold(S::neg_infinity(), |m, &x| m.max(x));
    let lse = max + xs.iter().map(|&x| (x - max).exp()).sum::<S>().ln();
    for x in xs.iter_mut() {
        *x -= lse;
    }
}

impl<S: Real> Tape<S> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            params: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<S> {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor<S>, op: Op<S>) -> Var {
        let needs_grad = match &op {
            Op::Constant => false,
            Op::Leaf | Op::Param => true,
            Op::MatMul { a, b, .. } | Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::AddRowBias(a, b) => {
                self.needs(*a) || self.needs(*b)
            }
            Op::SegmentDot { a, q, .. } => self.needs(*a) || self.needs(*q),
            Op::ConcatCols(parts) => parts.iter().any(|p| self.needs(*p)),
            Op::Scale(a, _)
            | Op::SliceCols { a, .. }
            | Op::Relu(a)
            | Op::Tanh(a)
            | Op::Sigmoid(a)
            | Op::Exp(a)
            | Op::Log(a)
            | Op::SoftmaxRows(a)
            | Op::LogSoftmaxRows(a)
            | Op::GatherRows { a, .. }
            | Op::Gather { a, .. }
            | Op::Dropout { a, .. }
            | Op::SegmentLogSoftmax { a, .. }
            | Op::SegmentSum { a, .. }
            | Op::Sum(a)
            | Op::Mean(a) => self.needs(*a),
            Op::Lookup { table, .. } => self.needs(*table),
            Op::BceWithLogits { logits, .. } => self.needs(*logits),
        };
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Non-differentiable input.
    pub fn constant(&mut self, t: Tensor<S>) -> Var {
        self.push(t, Op::Constant)
    }

    /// Differentiable input that is not a stored parameter (used by gradient checks).
    pub fn leaf(&mut self, t: Tensor<S>) -> Var {
        self.push(t, Op::Leaf)
    }

    /// Places a stored parameter on the tape. Repeated calls return the same node.
    pub fn param(&mut self, store: &ParameterStore<S>, id: ParamId) -> Var {
        if let Some(&(_, v)) = self.params.iter().find(|(p, _)| *p == id) {
            return v;
        }
        let v = self.push(store.value(id).clone(), Op::Param);
        self.params.push((id, v));
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = matrix("matmul", self.value(a))?;
        let (k2, n) = matrix("matmul", self.value(b))?;
        if k != k2 {
            return Err(Error::Shape {
                op: "matmul",
                left: vec![m, k],
                right: vec![k2, n],
            });
        }
        let mut out = vec![S::zero(); m * n];
        S::gemm(false, false, m, k, n, self.value(a).data(), self.value(b).data(), S::zero(), &mut out);
        Ok(self.push(Tensor::new(vec![m, n], out)?, Op::MatMul { a, b, trans_b: false }))
    }

    /// `a · bᵀ` with `b` stored as `n×k`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = matrix("matmul_t", self.value(a))?;
        let (n, k2) = matrix("matmul_t", self.value(b))?;
        if k != k2 {
            return Err(Error::Shape {
                op: "matmul_t",
                left: vec![m, k],
                right: vec![n, k2],
            });
        }
        let mut out = vec![S::zero(); m * n];
        S::gemm(false, true, m, k, n, self.value(a).data(), self.value(b).data(), S::zero(), &mut out);
        Ok(self.push(Tensor::new(vec![m, n], out)?, Op::MatMul { a, b, trans_b: true }))
    }

    fn zip(&mut self, op: &'static str, a: Var, b: Var, f: impl Fn(S, S) -> S) -> Result<Tensor<S>> {
        let (ta, tb) = (self.value(a), self.value(b));
        same_shape(op, ta, tb)?;
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(ta.shape().to_vec(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip("add", a, b, |x, y| x + y)?;
        Ok(self.push(t, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip("sub", a, b, |x, y| x - y)?;
        Ok(self.push(t, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip("mul", a, b, |x, y| x * y)?;
        Ok(self.push(t, Op::Mul(a, b)))
    }

    /// Adds the vector `bias` (length = columns of `a`) to every row of `a`.
    pub fn add_row_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(bias));
        let (_, n) = matrix("add_row_bias", ta)?;
        if tb.numel() != n {
            return Err(Error::Shape {
                op: "add_row_bias",
                left: ta.shape().to_vec(),
                right: tb.shape().to_vec(),
            });
        }
        let mut data = ta.data().to_vec();
        for row in data.chunks_mut(n) {
            for (x, &b) in row.iter_mut().zip(tb.data()) {
                *x += b;
            }
        }
        let t = Tensor::new(ta.shape().to_vec(), data)?;
        Ok(self.push(t, Op::AddRowBias(a, bias)))
    }

    pub fn scale(&mut self, a: Var, c: S) -> Var {
        let t = self.value(a).map(|x| x * c);
        self.push(t, Op::Scale(a, c))
    }

    /// Column-wise concatenation of matrices with equal row counts.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(Error::contract("concat of zero tensors"));
        };
        let (rows, _) = matrix("concat", self.value(first))?;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = matrix("concat", self.value(p))?;
            if r != rows {
                return Err(Error::Shape {
                    op: "concat",
                    left: self.value(first).shape().to_vec(),
                    right: self.value(p).shape().to_vec(),
                });
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(rows * total);
        for i in 0..rows {
            for (&p, &w) in parts.iter().zip(&widths) {
                data.extend_from_slice(&self.value(p).data()[i * w..(i + 1) * w]);
            }
        }
        let t = Tensor::new(vec![rows, total], data)?;
        Ok(self.push(t, Op::ConcatCols(parts.to_vec())))
    }

    /// Columns `start..start + width` of a matrix.
    pub fn slice_cols(&mut self, a: Var, start: usize, width: usize) -> Result<Var> {
        let (rows, cols) = matrix("slice_cols", self.value(a))?;
        if start + width > cols {
            return Err(Error::Shape {
                op: "slice_cols",
                left: vec![rows, cols],
                right: vec![start, start + width],
            });
        }
        let src = self.value(a).data();
        let mut data = Vec::with_capacity(rows * width);
        for i in 0..rows {
            data.extend_from_slice(&src[i * cols + start..i * cols + start + width]);
        }
        let t = Tensor::new(vec![rows, width], data)?;
        Ok(self.push(t, Op::SliceCols { a, start }))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let t = self.value(a).map(|x| x.max(S::zero()));
        self.push(t, Op::Relu(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let t = self.value(a).map(|x| x.tanh());
        self.push(t, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let t = self.value(a).map(sigmoid);
        self.push(t, Op::Sigmoid(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let t = self.value(a).map(|x| x.exp());
        self.push(t, Op::Exp(a))
    }

    pub fn log(&mut self, a: Var) -> Var {
        let t = self.value(a).map(|x| x.ln());
        self.push(t, Op::Log(a))
    }

    /// Softmax over each row (a vector is one row).
    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let cols = ta.cols();
        let mut data = ta.data().to_vec();
        for row in data.chunks_mut(cols.max(1)) {
            log_softmax_in_place(row);
            for x in row.iter_mut() {
                *x = x.exp();
            }
        }
        let t = Tensor::new(ta.shape().to_vec(), data).expect("shape preserved");
        self.push(t, Op::SoftmaxRows(a))
    }

    pub fn log_softmax_rows(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let cols = ta.cols();
        let mut data = ta.data().to_vec();
        for row in data.chunks_mut(cols.max(1)) {
            log_softmax_in_place(row);
        }
        let t = Tensor::new(ta.shape().to_vec(), data).expect("shape preserved");
        self.push(t, Op::LogSoftmaxRows(a))
    }

    /// Rows `ids` of an embedding table, as an `ids.len() × d` matrix.
    pub fn embedding_lookup(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let (v, d) = matrix("embedding_lookup", self.value(table))?;
        if let Some(&bad) = ids.iter().find(|&&i| i >= v) {
            return Err(Error::Shape {
                op: "embedding_lookup",
                left: vec![v, d],
                right: vec![bad],
            });
        }
        let src = self.value(table).data();
        let mut data = Vec::with_capacity(ids.len() * d);
        for &i in ids {
            data.extend_from_slice(&src[i * d..(i + 1) * d]);
        }
        let t = Tensor::new(vec![ids.len(), d], data)?;
        Ok(self.push(
            t,
            Op::Lookup {
                table,
                ids: ids.to_vec(),
            },
        ))
    }

    /// Rows `idx` of a matrix (repeats allowed).
    pub fn gather_rows(&mut self, a: Var, idx: &[usize]) -> Result<Var> {
        let (r, c) = matrix("gather_rows", self.value(a))?;
        if let Some(&bad) = idx.iter().find(|&&i| i >= r) {
            return Err(Error::Shape {
                op: "gather_rows",
                left: vec![r, c],
                right: vec![bad],
            });
        }
        let src = self.value(a).data();
        let mut data = Vec::with_capacity(idx.len() * c);
        for &i in idx {
            data.extend_from_slice(&src[i * c..(i + 1) * c]);
        }
        let t = Tensor::new(vec![idx.len(), c], data)?;
        Ok(self.push(t, Op::GatherRows { a, idx: idx.to_vec() }))
    }

    /// Flat elements `idx` of any tensor, as a vector.
    pub fn gather(&mut self, a: Var, idx: &[usize]) -> Result<Var> {
        let n = self.value(a).numel();
        if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
            return Err(Error::Shape {
                op: "gather",
                left: self.value(a).shape().to_vec(),
                right: vec![bad],
            });
        }
        let src = self.value(a).data();
        let t = Tensor::vector(idx.iter().map(|&i| src[i]).collect());
        Ok(self.push(t, Op::Gather { a, idx: idx.to_vec() }))
    }

    /// Inverted dropout: in training mode zeroes each entry with probability `p`
    /// and scales survivors by `1/(1-p)`. Identity in eval mode or when `p = 0`.
    pub fn dropout<R: Rng>(&mut self, a: Var, p: f64, train: bool, rng: &mut R) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::contract(format!("dropout rate {p} outside [0,1)")));
        }
        if !train || p == 0.0 {
            return Ok(a);
        }
        let keep = S::of(1.0 / (1.0 - p));
        let mask: Vec<S> = (0..self.value(a).numel())
            .map(|_| if rng.random::<f64>() < p { S::zero() } else { keep })
            .collect();
        let ta = self.value(a);
        let data = ta.data().iter().zip(&mask).map(|(&x, &m)| x * m).collect();
        let t = Tensor::new(ta.shape().to_vec(), data)?;
        Ok(self.push(t, Op::Dropout { a, mask }))
    }

    /// Ragged row-dot: `out[n] = a[n] · q[seg[n]]` for `a: N×k`, `q: B×k`.
    pub fn segment_dot(&mut self, a: Var, q: Var, seg: &[usize]) -> Result<Var> {
        let (n, k) = matrix("segment_dot", self.value(a))?;
        let (b, k2) = matrix("segment_dot", self.value(q))?;
        if k != k2 || seg.len() != n || seg.iter().any(|&s| s >= b) {
            return Err(Error::Shape {
                op: "segment_dot",
                left: vec![n, k],
                right: vec![b, k2],
            });
        }
        let (ad, qd) = (self.value(a).data(), self.value(q).data());
        let out = seg
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                ad[i * k..(i + 1) * k]
                    .iter()
                    .zip(&qd[s * k..(s + 1) * k])
                    .map(|(&x, &y)| x * y)
                    .sum()
            })
            .collect();
        Ok(self.push(Tensor::vector(out), Op::SegmentDot { a, q, seg: seg.to_vec() }))
    }

    /// Log-softmax within each segment `offsets[i]..offsets[i+1]` of a vector.
    pub fn segment_log_softmax(&mut self, a: Var, offsets: &[usize]) -> Result<Var> {
        let ta = self.value(a);
        check_offsets("segment_log_softmax", offsets, ta.numel())?;
        let mut data = ta.data().to_vec();
        for w in offsets.windows(2) {
            log_softmax_in_place(&mut data[w[0]..w[1]]);
        }
        let t = Tensor::vector(data);
        Ok(self.push(
            t,
            Op::SegmentLogSoftmax {
                a,
                offsets: offsets.to_vec(),
            },
        ))
    }

    /// Per-segment sums of a vector.
    pub fn segment_sum(&mut self, a: Var, offsets: &[usize]) -> Result<Var> {
        let ta = self.value(a);
        check_offsets("segment_sum", offsets, ta.numel())?;
        let out = offsets.windows(2).map(|w| ta.data()[w[0]..w[1]].iter().copied().sum()).collect();
        Ok(self.push(
            Tensor::vector(out),
            Op::SegmentSum {
                a,
                offsets: offsets.to_vec(),
            },
        ))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().copied().sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let s = t.data().iter().copied().sum::<S>() / S::of(t.numel().max(1) as f64);
        self.push(Tensor::scalar(s), Op::Mean(a))
    }

    /// Mean binary cross-entropy between `sigmoid(logits)` and `targets`.
    pub fn bce_with_logits(&mut self, logits: Var, targets: Vec<S>) -> Result<Var> {
        let tl = self.value(logits);
        if tl.numel() != targets.len() {
            return Err(Error::Shape {
                op: "bce_with_logits",
                left: tl.shape().to_vec(),
                right: vec![targets.len()],
            });
        }
        let n = S::of(targets.len().max(1) as f64);
        let loss = tl
            .data()
            .iter()
            .zip(&targets)
            .map(|(&x, &t)| x.max(S::zero()) - x * t + (S::one() + (-x.abs()).exp()).ln())
            .sum::<S>()
            / n;
        Ok(self.push(Tensor::scalar(loss), Op::BceWithLogits { logits, targets }))
    }

    /// LSTM cell with gate order (input, forget, cell, output).
    ///
    /// `x: B×in`, `h, c: B×H`, `w_ih: in×4H`, `w_hh: H×4H`, `bias: 4H`.
    pub fn lstm_cell(
        &mut self,
        x: Var,
        h: Var,
        c: Var,
        w_ih: Var,
        w_hh: Var,
        bias: Var,
    ) -> Result<(Var, Var)> {
        let hidden = self.value(h).cols();
        if self.value(w_hh).shape() != [hidden, 4 * hidden] {
            return Err(Error::Shape {
                op: "lstm_cell",
                left: self.value(h).shape().to_vec(),
                right: self.value(w_hh).shape().to_vec(),
            });
        }
        let xi = self.matmul(x, w_ih)?;
        let hh = self.matmul(h, w_hh)?;
        let gates = self.add(xi, hh)?;
        let gates = self.add_row_bias(gates, bias)?;
        let i = self.slice_cols(gates, 0, hidden)?;
        let f = self.slice_cols(gates, hidden, hidden)?;
        let g = self.slice_cols(gates, 2 * hidden, hidden)?;
        let o = self.slice_cols(gates, 3 * hidden, hidden)?;
        let i = self.sigmoid(i);
        let f = self.sigmoid(f);
        let g = self.tanh(g);
        let o = self.sigmoid(o);
        let fc = self.mul(f, c)?;
        let ig = self.mul(i, g)?;
        let c_next = self.add(fc, ig)?;
        let tc = self.tanh(c_next);
        let h_next = self.mul(o, tc)?;
        Ok((h_next, c_next))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<S>> {
        if self.value(loss).numel() != 1 {
            return Err(Error::contract(format!(
                "backward from non-scalar of shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Vec<S>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![S::one()]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            self.propagate(node, &g, &mut grads)?;
            grads[idx] = Some(g);
        }

        let params = self
            .params
            .iter()
            .map(|&(id, v)| {
                let g = grads[v.0]
                    .take()
                    .unwrap_or_else(|| vec![S::zero(); self.value(v).numel()]);
                (id, g)
            })
            .collect();
        Ok(Gradients { grads, params })
    }

    fn propagate(&self, node: &Node<S>, g: &[S], grads: &mut [Option<Vec<S>>]) -> Result<()> {
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [S])| {
            if self.nodes[v.0].needs_grad {
                let slot = grads[v.0].get_or_insert_with(|| vec![S::zero(); self.nodes[v.0].value.numel()]);
                f(slot);
            }
        };
        let out = node.value.data();
        match &node.op {
            Op::Constant | Op::Leaf | Op::Param => {}
            Op::MatMul { a, b, trans_b } => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, k) = (ta.shape()[0], ta.shape()[1]);
                let n = node.value.shape()[1];
                if *trans_b {
                    acc(*a, &mut |ga| S::gemm(false, false, m, n, k, g, tb.data(), S::one(), ga));
                    acc(*b, &mut |gb| S::gemm(true, false, n, m, k, g, ta.data(), S::one(), gb));
                } else {
                    acc(*a, &mut |ga| S::gemm(false, true, m, n, k, g, tb.data(), S::one(), ga));
                    acc(*b, &mut |gb| S::gemm(true, false, k, m, n, ta.data(), g, S::one(), gb));
                }
            }
            Op::Add(a, b) => {
                acc(*a, &mut |ga| add_into(ga, g));
                acc(*b, &mut |gb| add_into(gb, g));
            }
            Op::Sub(a, b) => {
                acc(*a, &mut |ga| add_into(ga, g));
                acc(*b, &mut |gb| gb.iter_mut().zip(g).for_each(|(x, &y)| *x -= y));
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                acc(*a, &mut |ga| {
                    for ((x, &gy), &y) in ga.iter_mut().zip(g).zip(vb) {
                        *x += gy * y;
                    }
                });
                acc(*b, &mut |gb| {
                    for ((x, &gy), &y) in gb.iter_mut().zip(g).zip(va) {
                        *x += gy * y;
                    }
                });
            }
            Op::AddRowBias(a, bias) => {
                acc(*a, &mut |ga| add_into(ga, g));
                let n = self.value(*bias).numel();
                acc(*bias, &mut |gb| {
                    for row in g.chunks(n) {
                        add_into(gb, row);
                    }
                });
            }
            Op::Scale(a, c) => acc(*a, &mut |ga| ga.iter_mut().zip(g).for_each(|(x, &y)| *x += y * *c)),
            Op::ConcatCols(parts) => {
                let total = node.value.cols();
                let mut offset = 0;
                for &p in parts {
                    let w = self.value(p).cols();
                    acc(p, &mut |gp| {
                        for (dst, src) in gp.chunks_mut(w).zip(g.chunks(total)) {
                            add_into(dst, &src[offset..offset + w]);
                        }
                    });
                    offset += w;
                }
            }
            Op::SliceCols { a, start } => {
                let cols = self.value(*a).cols();
                let w = node.value.cols();
                acc(*a, &mut |ga| {
                    for (dst, src) in ga.chunks_mut(cols).zip(g.chunks(w)) {
                        add_into(&mut dst[*start..*start + w], src);
                    }
                });
            }
            Op::Relu(a) => acc(*a, &mut |ga| {
                for ((x, &gy), &y) in ga.iter_mut().zip(g).zip(out) {
                    if y > S::zero() {
                        *x += gy;
                    }
                }
            }),
            Op::Tanh(a) => acc(*a, &mut |ga| {
                for ((x, &gy), &y) in ga.iter_mut().zip(g).zip(out) {
                    *x += gy * (S::one() - y * y);
                }
            }),
            Op::Sigmoid(a) => acc(*a, &mut |ga| {
                for ((x, &gy), &y) in ga.iter_mut().zip(g).zip(out) {
                    *x += gy * y * (S::one() - y);
                }
            }),
            Op::Exp(a) => acc(*a, &mut |ga| {
                for ((x, &gy), &y) in ga.iter_mut().zip(g).zip(out) {
                    *x += gy * y;
                }
            }),
            Op::Log(a) => {
                let va = self.value(*a).data();
                acc(*a, &mut |ga| {
                    for ((x, &gy), &y) in ga.iter_mut().zip(g).zip(va) {
                        *x += gy / y;
                    }
                });
            }
            Op::SoftmaxRows(a) => {
                let c = node.value.cols().max(1);
                acc(*a, &mut |ga| {
                    for ((dst, gy), y) in ga.chunks_mut(c).zip(g.chunks(c)).zip(out.chunks(c)) {
                        let dot: S = gy.iter().zip(y).map(|(&u, &v)| u * v).sum();
                        for ((x, &gu), &yv) in dst.iter_mut().zip(gy).zip(y) {
                            *x += yv * (gu - dot);
                        }
                    }
                });
            }
            Op::LogSoftmaxRows(a) => {
                let c = node.value.cols().max(1);
                acc(*a, &mut |ga| {
                    for ((dst, gy), y) in ga.chunks_mut(c).zip(g.chunks(c)).zip(out.chunks(c)) {
                        log_softmax_backward(dst, gy, y);
                    }
                });
            }
            Op::SegmentLogSoftmax { a, offsets } => acc(*a, &mut |ga| {
                for w in offsets.windows(2) {
                    let r = w[0]..w[1];
                    log_softmax_backward(&mut ga[r.clone()], &g[r.clone()], &out[r]);
                }
            }),
            Op::Lookup { table, ids } => {
                let d = self.value(*table).cols();
                acc(*table, &mut |gt| {
                    for (row, &i) in g.chunks(d).zip(ids) {
                        add_into(&mut gt[i * d..(i + 1) * d], row);
                    }
                });
            }
            Op::GatherRows { a, idx } => {
                let c = self.value(*a).cols();
                acc(*a, &mut |ga| {
                    for (row, &i) in g.chunks(c).zip(idx) {
                        add_into(&mut ga[i * c..(i + 1) * c], row);
                    }
                });
            }
            Op::Gather { a, idx } => acc(*a, &mut |ga| {
                for (&gy, &i) in g.iter().zip(idx) {
                    ga[i] += gy;
                }
            }),
            Op::Dropout { a, mask } => acc(*a, &mut |ga| {
                for ((x, &gy), &m) in ga.iter_mut().zip(g).zip(mask) {
                    *x += gy * m;
                }
            }),
            Op::SegmentDot { a, q, seg } => {
                let k = self.value(*a).cols();
                let (va, vq) = (self.value(*a).data(), self.value(*q).data());
                acc(*a, &mut |ga| {
                    for (i, (&gy, &s)) in g.iter().zip(seg).enumerate() {
                        for (x, &y) in ga[i * k..(i + 1) * k].iter_mut().zip(&vq[s * k..(s + 1) * k]) {
                            *x += gy * y;
                        }
                    }
                });
                acc(*q, &mut |gq| {
                    for (i, (&gy, &s)) in g.iter().zip(seg).enumerate() {
                        for (x, &y) in gq[s * k..(s + 1) * k].iter_mut().zip(&va[i * k..(i + 1) * k]) {
                            *x += gy * y;
                        }
                    }
                });
            }
            Op::SegmentSum { a, offsets } => acc(*a, &mut |ga| {
                for (w, &gy) in offsets.windows(2).zip(g) {
                    ga[w[0]..w[1]].iter_mut().for_each(|x| *x += gy);
                }
            }),
            Op::Sum(a) => acc(*a, &mut |ga| ga.iter_mut().for_each(|x| *x += g[0])),
            Op::Mean(a) => {
                let n = S::of(self.value(*a).numel().max(1) as f64);
                acc(*a, &mut |ga| ga.iter_mut().for_each(|x| *x += g[0] / n));
            }
            Op::BceWithLogits { logits, targets } => {
                let vl = self.value(*logits).data();
                let n = S::of(targets.len().max(1) as f64);
                acc(*logits, &mut |gl| {
                    for ((x, &l), &t) in gl.iter_mut().zip(vl).zip(targets) {
                        *x += g[0] * (sigmoid(l) - t) / n;
                    }
                });
            }
        }
        Ok(())
    }
}

fn add_into<S: Real>(dst: &mut [S], src: &[S]) {
    for (x, &y) in dst.iter_mut().zip(src) {
        *x += y;
    }
}

fn log_softmax_backward<S: Real>(dst: &mut [S], gy: &[S], y: &[S]) {
    let total: S = gy.iter().copied().sum();
    for ((x, &gu), &yv) in dst.iter_mut().zip(gy).zip(y) {
        *x += gu - yv.exp() * total;
    }
}

/// Result of a backward sweep.
pub struct Gradients<S> {
    grads: Vec<Option<Vec<S>>>,
    params: Vec<(ParamId, Vec<S>)>,
}

impl<S: Real> Gradients<S> {
    /// Gradient with respect to a non-parameter node, if it was reached.
    pub fn wrt(&self, v: Var) -> Option<&[S]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Gradient of a parameter placed on the tape; zeros if it was unreachable.
    pub fn param(&self, id: ParamId) -> Option<&[S]> {
        self.params.iter().find(|(p, _)| *p == id).map(|(_, g)| g.as_slice())
    }

    pub fn params(&self) -> impl Iterator<Item = (ParamId, &[S])> {
        self.params.iter().map(|(p, g)| (*p, g.as_slice()))
    }
}
