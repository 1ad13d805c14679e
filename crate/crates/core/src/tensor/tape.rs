//! Tape-based reverse-mode differentiation.
//!
//! Every operation appends a node holding its forward value. Because nodes
//! are only ever appended, the tape is already in topological order and
//! [`Tape::backward`] simply walks it in reverse.
//!
//! Sequence tensors are `[batch, channels, length]` or, for a single
//! sample, `[channels, length]`; feature tensors are `[batch, features]` or
//! `[features]`. Kernels are `[out_channels, in_channels, kernel]` and dense
//! weights `[out, in]`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::params::{ParamId, ParamStore};
use super::Tensor;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    /// `⌊(K−1)/2⌋` zeros on the left, `⌈(K−1)/2⌉` on the right.
    Same,
    /// `K−1` zeros on the left.
    Causal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Identity,
    Relu,
    /// Tanh approximation `0.5x(1 + tanh(√(2/π)(x + 0.044715x³)))`.
    Gelu,
    Sigmoid,
    Swish,
    Sin,
    Cos,
    /// Over the last axis.
    Softmax,
}

impl ActivationKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Identity => "identity",
            Self::Relu => "relu",
            Self::Gelu => "gelu",
            Self::Sigmoid => "sigmoid",
            Self::Swish => "swish",
            Self::Sin => "sin",
            Self::Cos => "cos",
            Self::Softmax => "softmax",
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "identity" | "linear" => Self::Identity,
            "relu" => Self::Relu,
            "gelu" => Self::Gelu,
            "sigmoid" => Self::Sigmoid,
            "swish" | "silu" => Self::Swish,
            "sin" | "sine" => Self::Sin,
            "cos" | "cosine" => Self::Cos,
            "softmax" => Self::Softmax,
            other => return Err(Error::Config(format!("unknown activation {other:?}"))),
        })
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // √(2/π)
const GELU_A: f64 = 0.044715;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

/// Scalar form of an elementwise activation (softmax excluded).
pub fn activate(kind: ActivationKind, x: f64) -> f64 {
    match kind {
        ActivationKind::Identity | ActivationKind::Softmax => x,
        ActivationKind::Relu => x.max(0.0),
        ActivationKind::Gelu => gelu(x),
        ActivationKind::Sigmoid => sigmoid(x),
        ActivationKind::Swish => x * sigmoid(x),
        ActivationKind::Sin => x.sin(),
        ActivationKind::Cos => x.cos(),
    }
}

fn activate_grad(kind: ActivationKind, x: f64, y: f64) -> f64 {
    match kind {
        ActivationKind::Identity | ActivationKind::Softmax => 1.0,
        ActivationKind::Relu => {
            if x > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        ActivationKind::Gelu => gelu_grad(x),
        ActivationKind::Sigmoid => y * (1.0 - y),
        ActivationKind::Swish => {
            let s = sigmoid(x);
            s + x * s * (1.0 - s)
        }
        ActivationKind::Sin => x.cos(),
        ActivationKind::Cos => -x.sin(),
    }
}

pub const PROBABILITY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(ParamId),
    Conv1d {
        x: Var,
        w: Var,
        b: Option<Var>,
        pad_left: usize,
    },
    AvgPool {
        x: Var,
        pool: usize,
        stride: usize,
    },
    GlobalAvgPool {
        x: Var,
    },
    Dense {
        x: Var,
        w: Var,
        b: Option<Var>,
    },
    Activation {
        x: Var,
        kind: ActivationKind,
    },
    Softmax {
        x: Var,
    },
    CrossEntropy {
        p: Var,
        labels: Vec<usize>,
    },
    Mse {
        pred: Var,
        target: Vec<f64>,
    },
    Add {
        a: Var,
        b: Var,
    },
    Mul {
        a: Var,
        b: Var,
    },
    Scale {
        x: Var,
        c: f64,
    },
    Sum {
        x: Var,
    },
    Concat {
        parts: Vec<Var>,
        axis: usize,
    },
    ScaleChannels {
        x: Var,
        g: Var,
    },
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Gradients of a scalar with respect to every node that required one.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }
}

/// Records a forward computation for later differentiation.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// `(batch, channels, length, had_batch_axis)` of a sequence tensor.
fn seq_dims(shape: &[usize]) -> Result<(usize, usize, usize, bool)> {
    match *shape {
        [c, l] => Ok((1, c, l, false)),
        [b, c, l] => Ok((b, c, l, true)),
        _ => Err(Error::Shape(format!("expected [C, L] or [B, C, L], got {shape:?}"))),
    }
}

/// `(batch, features, had_batch_axis)` of a feature tensor.
fn feat_dims(shape: &[usize]) -> Result<(usize, usize, bool)> {
    match *shape {
        [d] => Ok((1, d, false)),
        [b, d] => Ok((b, d, true)),
        _ => Err(Error::Shape(format!("expected [D] or [B, D], got {shape:?}"))),
    }
}

fn seq_shape(b: usize, c: usize, l: usize, batched: bool) -> Vec<usize> {
    if batched {
        vec![b, c, l]
    } else {
        vec![c, l]
    }
}

fn feat_shape(b: usize, d: usize, batched: bool) -> Vec<usize> {
    if batched {
        vec![b, d]
    } else {
        vec![d]
    }
}

fn accumulate(slot: &mut Option<Vec<f64>>, len: usize) -> &mut Vec<f64> {
    slot.get_or_insert_with(|| vec![0.0; len])
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Valid output range `[lo, hi)` for kernel tap `k` with left padding `p`.
fn tap_range(k: usize, p: usize, len: usize) -> (usize, usize) {
    let lo = p.saturating_sub(k);
    let hi = (len + p).saturating_sub(k).min(len);
    (lo, hi.max(lo))
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Constant input; no gradient is computed for it.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// Input whose gradient is reported by [`Gradients::get`].
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    /// Current value of a model parameter; backward accumulates into its
    /// gradient buffer.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.push(store.get(id).value.clone(), Op::Param(id), true)
    }

    pub fn conv1d(&mut self, x: Var, w: Var, b: Option<Var>, padding: Padding) -> Result<Var> {
        let (batch, cin, len, batched) = seq_dims(self.value(x).shape())?;
        let (cout, wcin, k) = match *self.value(w).shape() {
            [o, i, k] => (o, i, k),
            ref s => return Err(Error::Shape(format!("kernel must be [C_out, C_in, K], got {s:?}"))),
        };
        if wcin != cin {
            return Err(Error::Shape(format!("input has {cin} channels, kernel expects {wcin}")));
        }
        if k == 0 {
            return Err(Error::Shape("kernel size 0".into()));
        }
        if let Some(b) = b {
            if self.value(b).shape() != [cout] {
                return Err(Error::Shape(format!(
                    "bias shape {:?} does not match {cout} filters",
                    self.value(b).shape()
                )));
            }
        }
        let pad_left = match padding {
            Padding::Same => (k - 1) / 2,
            Padding::Causal => k - 1,
        };
        let xv = self.value(x).data();
        let wv = self.value(w).data();
        let mut out = vec![0.0; batch * cout * len];
        for bi in 0..batch {
            for co in 0..cout {
                let y = &mut out[(bi * cout + co) * len..(bi * cout + co + 1) * len];
                for ci in 0..cin {
                    let xs = &xv[(bi * cin + ci) * len..(bi * cin + ci + 1) * len];
                    let ws = &wv[(co * cin + ci) * k..(co * cin + ci + 1) * k];
                    for (tap, &wk) in ws.iter().enumerate() {
                        let (lo, hi) = tap_range(tap, pad_left, len);
                        if lo < hi {
                            let off = lo + tap - pad_left;
                            axpy(&mut y[lo..hi], wk, &xs[off..off + (hi - lo)]);
                        }
                    }
                }
            }
        }
        if let Some(b) = b {
            let bv = self.value(b).data();
            for (row, chunk) in out.chunks_mut(len).enumerate() {
                let bias = bv[row % cout];
                chunk.iter_mut().for_each(|v| *v += bias);
            }
        }
        let value = Tensor::new(seq_shape(batch, cout, len, batched), out)?;
        let mut deps = vec![x, w];
        deps.extend(b);
        let rg = self.needs(&deps);
        Ok(self.push(value, Op::Conv1d { x, w, b, pad_left }, rg))
    }

    /// Non-overlapping (or strided) window means; a trailing remainder is dropped.
    pub fn avg_pool1d(&mut self, x: Var, pool: usize, stride: usize) -> Result<Var> {
        let (batch, c, len, batched) = seq_dims(self.value(x).shape())?;
        if pool == 0 || stride == 0 || len < pool {
            return Err(Error::Shape(format!("cannot pool length {len} with window {pool}")));
        }
        let out_len = (len - pool) / stride + 1;
        let xv = self.value(x).data();
        let mut out = Vec::with_capacity(batch * c * out_len);
        for row in xv.chunks(len) {
            for j in 0..out_len {
                out.push(row[j * stride..j * stride + pool].iter().sum::<f64>() / pool as f64);
            }
        }
        let value = Tensor::new(seq_shape(batch, c, out_len, batched), out)?;
        let rg = self.needs(&[x]);
        Ok(self.push(value, Op::AvgPool { x, pool, stride }, rg))
    }

    /// Per-channel mean over the length axis: `[B, C, L] → [B, C]`.
    pub fn global_avg_pool1d(&mut self, x: Var) -> Result<Var> {
        let (batch, c, len, batched) = seq_dims(self.value(x).shape())?;
        if len == 0 {
            return Err(Error::Shape("global pooling over empty length".into()));
        }
        let out = self
            .value(x)
            .data()
            .chunks(len)
            .map(|r| r.iter().sum::<f64>() / len as f64)
            .collect();
        let value = Tensor::new(feat_shape(batch, c, batched), out)?;
        let rg = self.needs(&[x]);
        Ok(self.push(value, Op::GlobalAvgPool { x }, rg))
    }

    /// `W·x + b` for every row of `x`.
    pub fn dense(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let (batch, din, batched) = feat_dims(self.value(x).shape())?;
        let (dout, win) = match *self.value(w).shape() {
            [o, i] => (o, i),
            ref s => return Err(Error::Shape(format!("weights must be [out, in], got {s:?}"))),
        };
        if win != din {
            return Err(Error::Shape(format!("input width {din}, weights expect {win}")));
        }
        if let Some(b) = b {
            if self.value(b).shape() != [dout] {
                return Err(Error::Shape(format!("bias shape {:?}, expected [{dout}]", self.value(b).shape())));
            }
        }
        let xv = self.value(x).data();
        let wv = self.value(w).data();
        let bv = b.map(|b| self.value(b).data());
        let mut out = Vec::with_capacity(batch * dout);
        for row in xv.chunks(din) {
            for o in 0..dout {
                let bias = bv.map_or(0.0, |b| b[o]);
                out.push(bias + dot(&wv[o * din..(o + 1) * din], row));
            }
        }
        let value = Tensor::new(feat_shape(batch, dout, batched), out)?;
        let mut deps = vec![x, w];
        deps.extend(b);
        let rg = self.needs(&deps);
        Ok(self.push(value, Op::Dense { x, w, b }, rg))
    }

    pub fn activation(&mut self, kind: ActivationKind, x: Var) -> Result<Var> {
        if kind == ActivationKind::Softmax {
            return self.softmax(x);
        }
        let src = self.value(x);
        let data = src.data().iter().map(|&v| activate(kind, v)).collect();
        let value = Tensor::new(src.shape().to_vec(), data)?;
        let rg = self.needs(&[x]);
        Ok(self.push(value, Op::Activation { x, kind }, rg))
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let src = self.value(x);
        let width = *src
            .shape()
            .last()
            .ok_or_else(|| Error::Shape("softmax of a scalar".into()))?;
        let mut data = Vec::with_capacity(src.len());
        for row in src.data().chunks(width.max(1)) {
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = row.iter().map(|v| (v - m).exp()).collect();
            let s: f64 = e.iter().sum();
            data.extend(e.into_iter().map(|v| v / s));
        }
        let value = Tensor::new(src.shape().to_vec(), data)?;
        let rg = self.needs(&[x]);
        Ok(self.push(value, Op::Softmax { x }, rg))
    }

    /// Mean over rows of `−ln(max(p[label], 1e-12))`.
    pub fn cross_entropy(&mut self, p: Var, labels: &[usize]) -> Result<Var> {
        let (batch, k, _) = feat_dims(self.value(p).shape())?;
        if labels.len() != batch {
            return Err(Error::Shape(format!("{} labels for {batch} rows", labels.len())));
        }
        let pv = self.value(p).data();
        let mut loss = 0.0;
        for (row, &l) in pv.chunks(k).zip(labels) {
            if l >= k {
                return Err(Error::InvalidInput(format!("label {l} outside {k} classes")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidInput(format!("probabilities sum to {total}")));
            }
            loss -= row[l].max(PROBABILITY_FLOOR).ln();
        }
        let value = Tensor::scalar(loss / batch as f64);
        let rg = self.needs(&[p]);
        Ok(self.push(
            value,
            Op::CrossEntropy {
                p,
                labels: labels.to_vec(),
            },
            rg,
        ))
    }

    /// Mean squared error against a constant target.
    pub fn mse(&mut self, pred: Var, target: &[f64]) -> Result<Var> {
        let pv = self.value(pred).data();
        if pv.len() != target.len() || pv.is_empty() {
            return Err(Error::Shape(format!("{} predictions, {} targets", pv.len(), target.len())));
        }
        let loss = pv.iter().zip(target).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / pv.len() as f64;
        let rg = self.needs(&[pred]);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::Mse {
                pred,
                target: target.to_vec(),
            },
            rg,
        ))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(Error::Shape(format!("add {:?} + {:?}", av.shape(), bv.shape())));
        }
        let data = av.data().iter().zip(bv.data()).map(|(x, y)| x + y).collect();
        let value = Tensor::new(av.shape().to_vec(), data)?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(value, Op::Add { a, b }, rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(Error::Shape(format!("mul {:?} * {:?}", av.shape(), bv.shape())));
        }
        let data = av.data().iter().zip(bv.data()).map(|(x, y)| x * y).collect();
        let value = Tensor::new(av.shape().to_vec(), data)?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(value, Op::Mul { a, b }, rg))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let src = self.value(x);
        let value = Tensor::new(src.shape().to_vec(), src.data().iter().map(|v| v * c).collect())
            .expect("same shape");
        let rg = self.needs(&[x]);
        self.push(value, Op::Scale { x, c }, rg)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        let rg = self.needs(&[x]);
        self.push(Tensor::scalar(s), Op::Sum { x }, rg)
    }

    /// Concatenation along `axis`; all other dimensions must agree.
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Shape("concat of nothing".into()))?;
        let base = self.value(*first).shape().to_vec();
        if axis >= base.len() {
            return Err(Error::Shape(format!("axis {axis} out of range for {base:?}")));
        }
        let mut total = 0;
        for p in parts {
            let s = self.value(*p).shape();
            if s.len() != base.len() || s.iter().enumerate().any(|(i, &d)| i != axis && d != base[i]) {
                return Err(Error::Shape(format!("concat {base:?} with {s:?} on axis {axis}")));
            }
            total += s[axis];
        }
        let outer: usize = base[..axis].iter().product();
        let inner: usize = base[axis + 1..].iter().product();
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for p in parts {
                let v = self.value(*p);
                let block = v.shape()[axis] * inner;
                data.extend_from_slice(&v.data()[o * block..(o + 1) * block]);
            }
        }
        let mut shape = base;
        shape[axis] = total;
        let value = Tensor::new(shape, data)?;
        let rg = self.needs(parts);
        Ok(self.push(
            value,
            Op::Concat {
                parts: parts.to_vec(),
                axis,
            },
            rg,
        ))
    }

    /// Concatenation along the channel axis of sequence tensors.
    pub fn concat_channels(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts.first().ok_or_else(|| Error::Shape("concat of nothing".into()))?;
        let (_, _, _, batched) = seq_dims(self.value(*first).shape())?;
        self.concat(parts, usize::from(batched))
    }

    /// Concatenation along the feature axis of feature tensors.
    pub fn concat_features(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts.first().ok_or_else(|| Error::Shape("concat of nothing".into()))?;
        let (_, _, batched) = feat_dims(self.value(*first).shape())?;
        self.concat(parts, usize::from(batched))
    }

    /// `out[b, c, t] = g[b, c] · x[b, c, t]`.
    pub fn scale_channels(&mut self, x: Var, g: Var) -> Result<Var> {
        let (batch, c, len, batched) = seq_dims(self.value(x).shape())?;
        let expected = feat_shape(batch, c, batched);
        if self.value(g).shape() != expected.as_slice() {
            return Err(Error::Shape(format!(
                "gate shape {:?} does not match {expected:?}",
                self.value(g).shape()
            )));
        }
        let gv = self.value(g).data();
        let data = self
            .value(x)
            .data()
            .chunks(len)
            .zip(gv)
            .flat_map(|(row, &s)| row.iter().map(move |v| v * s))
            .collect();
        let value = Tensor::new(self.value(x).shape().to_vec(), data)?;
        let rg = self.needs(&[x, g]);
        Ok(self.push(value, Op::ScaleChannels { x, g }, rg))
    }

    /// Backpropagates from a scalar. Parameter gradients are added (`+=`)
    /// into `store`; gradients of [`Tape::leaf`] inputs are returned.
    pub fn backward(&self, loss: Var, store: &mut ParamStore) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(Error::Shape(format!(
                "backward needs a scalar, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else {
                continue;
            };
            let node = &self.nodes[i];
            if node.requires_grad {
                self.propagate(node, &g, &mut grads, store)?;
            }
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>], store: &mut ParamStore) -> Result<()> {
        match &node.op {
            Op::Leaf => {}
            Op::Param(id) => {
                for (acc, v) in store.get_mut(*id).grad.iter_mut().zip(g) {
                    *acc += v;
                }
            }
            Op::Conv1d { x, w, b, pad_left } => {
                let xt = self.value(*x);
                let wt = self.value(*w);
                let (batch, cin, len, _) = seq_dims(xt.shape())?;
                let (cout, k) = (wt.shape()[0], wt.shape()[2]);
                let p = *pad_left;
                if self.wants(*w) {
                    let dw = accumulate(&mut grads[w.0], wt.len());
                    for bi in 0..batch {
                        for co in 0..cout {
                            let dy = &g[(bi * cout + co) * len..(bi * cout + co + 1) * len];
                            for ci in 0..cin {
                                let xs = &xt.data()[(bi * cin + ci) * len..(bi * cin + ci + 1) * len];
                                for tap in 0..k {
                                    let (lo, hi) = tap_range(tap, p, len);
                                    if lo < hi {
                                        let off = lo + tap - p;
                                        dw[(co * cin + ci) * k + tap] += dot(&dy[lo..hi], &xs[off..off + (hi - lo)]);
                                    }
                                }
                            }
                        }
                    }
                }
                if self.wants(*x) {
                    let dx = accumulate(&mut grads[x.0], xt.len());
                    for bi in 0..batch {
                        for co in 0..cout {
                            let dy = &g[(bi * cout + co) * len..(bi * cout + co + 1) * len];
                            for ci in 0..cin {
                                let dxs = &mut dx[(bi * cin + ci) * len..(bi * cin + ci + 1) * len];
                                let ws = &wt.data()[(co * cin + ci) * k..(co * cin + ci + 1) * k];
                                for (tap, &wk) in ws.iter().enumerate() {
                                    let (lo, hi) = tap_range(tap, p, len);
                                    if lo < hi {
                                        let off = lo + tap - p;
                                        axpy(&mut dxs[off..off + (hi - lo)], wk, &dy[lo..hi]);
                                    }
                                }
                            }
                        }
                    }
                }
                if let Some(b) = b {
                    if self.wants(*b) {
                        let db = accumulate(&mut grads[b.0], cout);
                        for (row, chunk) in g.chunks(len).enumerate() {
                            db[row % cout] += chunk.iter().sum::<f64>();
                        }
                    }
                }
            }
            Op::AvgPool { x, pool, stride } => {
                if self.wants(*x) {
                    let xt = self.value(*x);
                    let len = *xt.shape().last().unwrap();
                    let out_len = (len - pool) / stride + 1;
                    let dx = accumulate(&mut grads[x.0], xt.len());
                    for (r, dy) in g.chunks(out_len).enumerate() {
                        let row = &mut dx[r * len..(r + 1) * len];
                        for (j, &d) in dy.iter().enumerate() {
                            for v in &mut row[j * stride..j * stride + pool] {
                                *v += d / *pool as f64;
                            }
                        }
                    }
                }
            }
            Op::GlobalAvgPool { x } => {
                if self.wants(*x) {
                    let xt = self.value(*x);
                    let len = *xt.shape().last().unwrap();
                    let dx = accumulate(&mut grads[x.0], xt.len());
                    for (row, &d) in dx.chunks_mut(len).zip(g) {
                        row.iter_mut().for_each(|v| *v += d / len as f64);
                    }
                }
            }
            Op::Dense { x, w, b } => {
                let xt = self.value(*x);
                let wt = self.value(*w);
                let (_, din, _) = feat_dims(xt.shape())?;
                let dout = wt.shape()[0];
                if self.wants(*w) {
                    let dw = accumulate(&mut grads[w.0], wt.len());
                    for (row, dy) in xt.data().chunks(din).zip(g.chunks(dout)) {
                        for (o, &d) in dy.iter().enumerate() {
                            axpy(&mut dw[o * din..(o + 1) * din], d, row);
                        }
                    }
                }
                if self.wants(*x) {
                    let dx = accumulate(&mut grads[x.0], xt.len());
                    for (dxr, dy) in dx.chunks_mut(din).zip(g.chunks(dout)) {
                        for (o, &d) in dy.iter().enumerate() {
                            axpy(dxr, d, &wt.data()[o * din..(o + 1) * din]);
                        }
                    }
                }
                if let Some(b) = b {
                    if self.wants(*b) {
                        let db = accumulate(&mut grads[b.0], dout);
                        for dy in g.chunks(dout) {
                            axpy(db, 1.0, dy);
                        }
                    }
                }
            }
            Op::Activation { x, kind } => {
                if self.wants(*x) {
                    let xt = self.value(*x);
                    let dx = accumulate(&mut grads[x.0], xt.len());
                    for (((d, &xi), &yi), &gi) in dx.iter_mut().zip(xt.data()).zip(node.value.data()).zip(g) {
                        *d += gi * activate_grad(*kind, xi, yi);
                    }
                }
            }
            Op::Softmax { x } => {
                if self.wants(*x) {
                    let width = *node.value.shape().last().unwrap();
                    let dx = accumulate(&mut grads[x.0], node.value.len());
                    for ((dxr, yr), gr) in dx.chunks_mut(width).zip(node.value.data().chunks(width)).zip(g.chunks(width)) {
                        let s = dot(yr, gr);
                        for ((d, &y), &gi) in dxr.iter_mut().zip(yr).zip(gr) {
                            *d += y * (gi - s);
                        }
                    }
                }
            }
            Op::CrossEntropy { p, labels } => {
                if self.wants(*p) {
                    let pt = self.value(*p);
                    let k = *pt.shape().last().unwrap();
                    let batch = labels.len() as f64;
                    let dp = accumulate(&mut grads[p.0], pt.len());
                    for (r, &l) in labels.iter().enumerate() {
                        let pv = pt.data()[r * k + l];
                        if pv > PROBABILITY_FLOOR {
                            dp[r * k + l] -= g[0] / (batch * pv);
                        }
                    }
                }
            }
            Op::Mse { pred, target } => {
                if self.wants(*pred) {
                    let pt = self.value(*pred);
                    let n = target.len() as f64;
                    let dp = accumulate(&mut grads[pred.0], pt.len());
                    for ((d, &a), &t) in dp.iter_mut().zip(pt.data()).zip(target) {
                        *d += g[0] * 2.0 * (a - t) / n;
                    }
                }
            }
            Op::Add { a, b } => {
                for v in [a, b] {
                    if self.wants(*v) {
                        axpy(accumulate(&mut grads[v.0], g.len()), 1.0, g);
                    }
                }
            }
            Op::Mul { a, b } => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                if self.wants(*a) {
                    let da = accumulate(&mut grads[a.0], g.len());
                    for ((d, &gi), &o) in da.iter_mut().zip(g).zip(bv) {
                        *d += gi * o;
                    }
                }
                if self.wants(*b) {
                    let db = accumulate(&mut grads[b.0], g.len());
                    for ((d, &gi), &o) in db.iter_mut().zip(g).zip(av) {
                        *d += gi * o;
                    }
                }
            }
            Op::Scale { x, c } => {
                if self.wants(*x) {
                    axpy(accumulate(&mut grads[x.0], g.len()), *c, g);
                }
            }
            Op::Sum { x } => {
                if self.wants(*x) {
                    let n = self.value(*x).len();
                    accumulate(&mut grads[x.0], n).iter_mut().for_each(|d| *d += g[0]);
                }
            }
            Op::Concat { parts, axis } => {
                let shape = node.value.shape();
                let outer: usize = shape[..*axis].iter().product();
                let inner: usize = shape[axis + 1..].iter().product();
                let total = shape[*axis] * inner;
                let mut offset = 0;
                for p in parts {
                    let pt = self.value(*p);
                    let block = pt.shape()[*axis] * inner;
                    if self.wants(*p) {
                        let dp = accumulate(&mut grads[p.0], pt.len());
                        for o in 0..outer {
                            axpy(
                                &mut dp[o * block..(o + 1) * block],
                                1.0,
                                &g[o * total + offset..o * total + offset + block],
                            );
                        }
                    }
                    offset += block;
                }
            }
            Op::ScaleChannels { x, g: gate } => {
                let xt = self.value(*x);
                let gt = self.value(*gate);
                let len = *xt.shape().last().unwrap();
                if self.wants(*x) {
                    let dx = accumulate(&mut grads[x.0], xt.len());
                    for ((dxr, gr), &s) in dx.chunks_mut(len).zip(g.chunks(len)).zip(gt.data()) {
                        axpy(dxr, s, gr);
                    }
                }
                if self.wants(*gate) {
                    let dg = accumulate(&mut grads[gate.0], gt.len());
                    for ((d, xr), gr) in dg.iter_mut().zip(xt.data().chunks(len)).zip(g.chunks(len)) {
                        *d += dot(xr, gr);
                    }
                }
            }
        }
        Ok(())
    }
}
