//! Tape-based reverse-mode differentiation.
//!
//! Every forward operation appends a node holding its output value and enough
//! context to push gradients back to its inputs. `backward` walks the tape in
//! reverse once and adds the resulting gradients into the per-leaf gradient
//! buffers, so two calls without `zero_grad` accumulate.

use std::rc::Rc;

use super::tensor::{gemm_acc, gemm_at_acc, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

enum Op {
    Leaf,
    Reshape(Var),
    MatMul {
        a: Var,
        b: Var,
        m: usize,
        k: usize,
        n: usize,
    },
    BatchMatMul {
        a: Var,
        b: Var,
        batch: usize,
        m: usize,
        k: usize,
        n: usize,
        b_transposed: bool,
    },
    Add(Var, Var),
    AddBroadcast(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Gelu(Var),
    Softmax(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Embedding {
        table: Var,
        ids: Vec<usize>,
    },
    IndexSelect {
        x: Var,
        index: Rc<[Option<usize>]>,
    },
    Concat(Vec<Var>),
    Sum(Var),
    Mean(Var),
    CrossEntropy {
        logits: Var,
        labels: Vec<usize>,
        probs: Vec<f64>,
    },
    BceWithLogits {
        logits: Var,
        targets: Vec<f64>,
        weights: Vec<f64>,
        weight_sum: f64,
    },
}

struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Recorded forward graph plus accumulated leaf gradients.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
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

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        self.grads.push(None);
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Records a leaf. Gradients are kept only for leaves with `requires_grad`.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Accumulated gradient of a `requires_grad` leaf, if `backward` has reached it.
    pub fn grad(&self, v: Var) -> Option<Tensor> {
        self.grads[v.0]
            .as_ref()
            .map(|g| Tensor::new(self.shape(v), g.clone()).expect("grad shape matches value"))
    }

    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = None);
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(x).clone().reshape(shape)?;
        let ng = self.needs(x);
        Ok(self.push(value, Op::Reshape(x), ng))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::Shape(format!("matmul {sa:?} x {sb:?}")));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        gemm_acc(
            self.value(a).data(),
            self.value(b).data(),
            &mut out,
            m,
            k,
            n,
            false,
        );
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(
            Tensor::new(&[m, n], out)?,
            Op::MatMul { a, b, m, k, n },
            ng,
        ))
    }

    /// Batched product over the leading axis: `[B,m,k]·[B,k,n]`, or
    /// `[B,m,k]·[B,n,k]ᵀ` when `b_transposed`.
    pub fn batch_matmul(&mut self, a: Var, b: Var, b_transposed: bool) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        let ok = sa.len() == 3
            && sb.len() == 3
            && sa[0] == sb[0]
            && if b_transposed {
                sa[2] == sb[2]
            } else {
                sa[2] == sb[1]
            };
        if !ok {
            return Err(Error::Shape(format!(
                "batch_matmul {sa:?} x {sb:?} (transposed: {b_transposed})"
            )));
        }
        let (batch, m, k) = (sa[0], sa[1], sa[2]);
        let n = if b_transposed { sb[1] } else { sb[2] };
        let mut out = vec![0.0; batch * m * n];
        let (ad, bd) = (self.value(a).data(), self.value(b).data());
        for i in 0..batch {
            gemm_acc(
                &ad[i * m * k..(i + 1) * m * k],
                &bd[i * k * n..(i + 1) * k * n],
                &mut out[i * m * n..(i + 1) * m * n],
                m,
                k,
                n,
                b_transposed,
            );
        }
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(
            Tensor::new(&[batch, m, n], out)?,
            Op::BatchMatMul {
                a,
                b,
                batch,
                m,
                k,
                n,
                b_transposed,
            },
            ng,
        ))
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Shape(format!(
                "{what} {:?} vs {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        let data = zip_map(self.value(a).data(), self.value(b).data(), |x, y| x + y);
        let shape = self.shape(a).to_vec();
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(Tensor::new(&shape, data)?, Op::Add(a, b), ng))
    }

    /// `x + b` where `b` repeats cyclically over `x` (e.g. a bias over rows).
    pub fn add_broadcast(&mut self, x: Var, b: Var) -> Result<Var> {
        let (nx, nb) = (self.value(x).numel(), self.value(b).numel());
        if nx % nb != 0 {
            return Err(Error::Shape(format!(
                "broadcast {:?} onto {:?}",
                self.shape(b),
                self.shape(x)
            )));
        }
        let bd = self.value(b).data();
        let data: Vec<f64> = self
            .value(x)
            .data()
            .iter()
            .enumerate()
            .map(|(i, v)| v + bd[i % nb])
            .collect();
        let shape = self.shape(x).to_vec();
        let ng = self.needs(x) || self.needs(b);
        Ok(self.push(Tensor::new(&shape, data)?, Op::AddBroadcast(x, b), ng))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        let data = zip_map(self.value(a).data(), self.value(b).data(), |x, y| x * y);
        let shape = self.shape(a).to_vec();
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(Tensor::new(&shape, data)?, Op::Mul(a, b), ng))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let value = map(self.value(x), |v| v * factor);
        let ng = self.needs(x);
        self.push(value, Op::Scale(x, factor), ng)
    }

    /// Tanh-form Gaussian error linear unit.
    pub fn gelu(&mut self, x: Var) -> Var {
        let value = map(self.value(x), |v| {
            0.5 * v * (1.0 + (GELU_C * (v + GELU_A * v * v * v)).tanh())
        });
        let ng = self.needs(x);
        self.push(value, Op::Gelu(x), ng)
    }

    pub fn softmax_lastdim(&mut self, x: Var) -> Var {
        self.masked_softmax_lastdim(x, None)
            .expect("unmasked softmax cannot fail")
    }

    /// Softmax over the last axis. Entries whose `masked` flag is set get
    /// weight exactly zero; a slice with every entry masked yields zeros.
    pub fn masked_softmax_lastdim(&mut self, x: Var, masked: Option<&[bool]>) -> Result<Var> {
        let xv = self.value(x);
        if let Some(mk) = masked {
            if mk.len() != xv.numel() {
                return Err(Error::Shape(format!(
                    "softmax mask of {} for {:?}",
                    mk.len(),
                    xv.shape()
                )));
            }
        }
        let n = xv.last_dim();
        let mut out = vec![0.0; xv.numel()];
        for (r, (src, dst)) in xv.data().chunks(n).zip(out.chunks_mut(n)).enumerate() {
            let keep = |j: usize| masked.is_none_or(|mk| !mk[r * n + j]);
            let max = (0..n)
                .filter(|&j| keep(j))
                .map(|j| src[j])
                .fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                continue;
            }
            let mut total = 0.0;
            for j in 0..n {
                if keep(j) {
                    let e = (src[j] - max).exp();
                    dst[j] = e;
                    total += e;
                }
            }
            dst.iter_mut().for_each(|v| *v /= total);
        }
        let shape = xv.shape().to_vec();
        let ng = self.needs(x);
        Ok(self.push(Tensor::new(&shape, out)?, Op::Softmax(x), ng))
    }

    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        let n = self.value(x).last_dim();
        if self.value(gain).numel() != n || self.value(bias).numel() != n {
            return Err(Error::Shape(format!(
                "layer_norm over {n} with gain {:?} and bias {:?}",
                self.shape(gain),
                self.shape(bias)
            )));
        }
        let xv = self.value(x);
        let (gd, bd) = (self.value(gain).data(), self.value(bias).data());
        let rows = xv.numel() / n;
        let mut xhat = vec![0.0; xv.numel()];
        let mut inv_std = vec![0.0; rows];
        let mut out = vec![0.0; xv.numel()];
        for r in 0..rows {
            let s = &xv.data()[r * n..(r + 1) * n];
            let mean = s.iter().sum::<f64>() / n as f64;
            let var = s.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let is = 1.0 / (var + eps).sqrt();
            inv_std[r] = is;
            for j in 0..n {
                let h = (s[j] - mean) * is;
                xhat[r * n + j] = h;
                out[r * n + j] = h * gd[j] + bd[j];
            }
        }
        let shape = xv.shape().to_vec();
        let ng = self.needs(x) || self.needs(gain) || self.needs(bias);
        Ok(self.push(
            Tensor::new(&shape, out)?,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
            ng,
        ))
    }

    /// Row lookup into a `[vocab, D]` table. Id 0 is padding: it yields a zero
    /// row and never receives gradient.
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let ts = self.shape(table);
        if ts.len() != 2 {
            return Err(Error::Shape(format!("embedding table {ts:?}")));
        }
        let (vocab, d) = (ts[0], ts[1]);
        if let Some(&bad) = ids.iter().find(|&&id| id >= vocab) {
            return Err(Error::Invalid(format!(
                "token id {bad} outside vocabulary of {vocab}"
            )));
        }
        if ids.is_empty() {
            return Err(Error::Shape("embedding of zero ids".into()));
        }
        let td = self.value(table).data();
        let mut out = vec![0.0; ids.len() * d];
        for (row, &id) in out.chunks_mut(d).zip(ids) {
            if id != 0 {
                row.copy_from_slice(&td[id * d..(id + 1) * d]);
            }
        }
        let ng = self.needs(table);
        Ok(self.push(
            Tensor::new(&[ids.len(), d], out)?,
            Op::Embedding {
                table,
                ids: ids.to_vec(),
            },
            ng,
        ))
    }

    /// Flat gather: `out[i] = x[index[i]]`, or 0 where the index is `None`.
    pub fn index_select(
        &mut self,
        x: Var,
        index: Rc<[Option<usize>]>,
        shape: &[usize],
    ) -> Result<Var> {
        let xd = self.value(x).data();
        if let Some(bad) = index.iter().flatten().find(|&&i| i >= xd.len()) {
            return Err(Error::Shape(format!(
                "gather index {bad} outside {} values",
                xd.len()
            )));
        }
        let data: Vec<f64> = index.iter().map(|i| i.map_or(0.0, |i| xd[i])).collect();
        let value = Tensor::new(shape, data)?;
        let ng = self.needs(x);
        Ok(self.push(value, Op::IndexSelect { x, index }, ng))
    }

    /// Concatenates along the leading axis; trailing extents must agree.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Shape("concat of nothing".into()))?;
        let tail = self.shape(*first)[1..].to_vec();
        let mut lead = 0;
        let mut data = Vec::new();
        for &p in parts {
            let s = self.shape(p);
            if s[1..] != tail[..] {
                return Err(Error::Shape(format!("concat {:?} with {s:?}", tail)));
            }
            lead += s[0];
            data.extend_from_slice(self.value(p).data());
        }
        let mut shape = vec![lead];
        shape.extend(tail);
        let ng = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(Tensor::new(&shape, data)?, Op::Concat(parts.to_vec()), ng))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        let ng = self.needs(x);
        self.push(Tensor::scalar(s), Op::Sum(x), ng)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let s = v.data().iter().sum::<f64>() / v.numel() as f64;
        let ng = self.needs(x);
        self.push(Tensor::scalar(s), Op::Mean(x), ng)
    }

    /// Mean softmax cross-entropy of `[B, C]` logits against `B` class indices.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let lv = self.value(logits);
        let c = lv.last_dim();
        let b = lv.numel() / c;
        if labels.len() != b {
            return Err(Error::Shape(format!(
                "{} labels for {:?} logits",
                labels.len(),
                lv.shape()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
            return Err(Error::Invalid(format!(
                "class index {bad} outside {c} classes"
            )));
        }
        let mut probs = vec![0.0; lv.numel()];
        let mut loss = 0.0;
        for (r, &label) in labels.iter().enumerate() {
            let row = lv.row(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            loss += lse - row[label];
            for j in 0..c {
                probs[r * c + j] = (row[j] - lse).exp();
            }
        }
        let ng = self.needs(logits);
        Ok(self.push(
            Tensor::scalar(loss / b as f64),
            Op::CrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
            ng,
        ))
    }

    pub fn bce_with_logits(&mut self, logits: Var, targets: &[f64]) -> Result<Var> {
        let n = self.value(logits).numel();
        self.bce_with_logits_weighted(logits, targets, &vec![1.0; n])
    }

    /// Binary cross-entropy on logits, averaged over entries with positive
    /// weight. Zero-weight entries (padded actors) contribute nothing.
    pub fn bce_with_logits_weighted(
        &mut self,
        logits: Var,
        targets: &[f64],
        weights: &[f64],
    ) -> Result<Var> {
        let lv = self.value(logits);
        if targets.len() != lv.numel() || weights.len() != lv.numel() {
            return Err(Error::Shape(format!(
                "{} targets / {} weights for {:?} logits",
                targets.len(),
                weights.len(),
                lv.shape()
            )));
        }
        if let Some(bad) = targets.iter().find(|&&t| t != 0.0 && t != 1.0) {
            return Err(Error::Invalid(format!("multi-hot target {bad} not in {{0,1}}")));
        }
        let weight_sum: f64 = weights.iter().sum();
        if weight_sum <= 0.0 {
            return Err(Error::Invalid("no weighted entries in loss".into()));
        }
        let loss: f64 = lv
            .data()
            .iter()
            .zip(targets)
            .zip(weights)
            .map(|((&z, &t), &w)| w * (z.max(0.0) - t * z + (-z.abs()).exp().ln_1p()))
            .sum();
        let ng = self.needs(logits);
        Ok(self.push(
            Tensor::scalar(loss / weight_sum),
            Op::BceWithLogits {
                logits,
                targets: targets.to_vec(),
                weights: weights.to_vec(),
                weight_sum,
            },
            ng,
        ))
    }

    /// Back-propagates from a scalar root, adding into leaf gradients.
    pub fn backward(&mut self, root: Var) -> Result<()> {
        if self.value(root).numel() != 1 {
            return Err(Error::Shape(format!(
                "backward from non-scalar {:?}",
                self.shape(root)
            )));
        }
        let mut local: Vec<Option<Vec<f64>>> = vec![None; root.0 + 1];
        local[root.0] = Some(vec![1.0]);
        for i in (0..=root.0).rev() {
            let Some(g) = local[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                match &mut self.grads[i] {
                    Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                    slot @ None => *slot = Some(g),
                }
                continue;
            }
            self.propagate(i, &g, &mut local);
        }
        Ok(())
    }

    fn propagate(&self, i: usize, g: &[f64], local: &mut [Option<Vec<f64>>]) {
        let nodes = &self.nodes;
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
            if !nodes[v.0].needs_grad {
                return;
            }
            let slot = local[v.0].get_or_insert_with(|| vec![0.0; nodes[v.0].value.numel()]);
            f(slot);
        };
        let val = |v: Var| nodes[v.0].value.data();
        let out = nodes[i].value.data();
        match &nodes[i].op {
            Op::Leaf => unreachable!(),
            Op::Reshape(x) => acc(*x, &mut |s| add_into(s, g)),
            Op::MatMul { a, b, m, k, n } => {
                let (m, k, n) = (*m, *k, *n);
                acc(*a, &mut |s| gemm_acc(g, val(*b), s, m, n, k, true));
                acc(*b, &mut |s| gemm_at_acc(val(*a), g, s, m, k, n));
            }
            Op::BatchMatMul {
                a,
                b,
                batch,
                m,
                k,
                n,
                b_transposed,
            } => {
                let (m, k, n) = (*m, *k, *n);
                let (ad, bd) = (val(*a), val(*b));
                for t in 0..*batch {
                    let gs = &g[t * m * n..(t + 1) * m * n];
                    let a_sl = t * m * k..(t + 1) * m * k;
                    let b_sl = t * k * n..(t + 1) * k * n;
                    if *b_transposed {
                        acc(*a, &mut |s| {
                            gemm_acc(gs, &bd[b_sl.clone()], &mut s[a_sl.clone()], m, n, k, false)
                        });
                        acc(*b, &mut |s| {
                            gemm_at_acc(gs, &ad[a_sl.clone()], &mut s[b_sl.clone()], m, n, k)
                        });
                    } else {
                        acc(*a, &mut |s| {
                            gemm_acc(gs, &bd[b_sl.clone()], &mut s[a_sl.clone()], m, n, k, true)
                        });
                        acc(*b, &mut |s| {
                            gemm_at_acc(&ad[a_sl.clone()], gs, &mut s[b_sl.clone()], m, k, n)
                        });
                    }
                }
            }
            Op::Add(a, b) => {
                acc(*a, &mut |s| add_into(s, g));
                acc(*b, &mut |s| add_into(s, g));
            }
            Op::AddBroadcast(x, b) => {
                acc(*x, &mut |s| add_into(s, g));
                acc(*b, &mut |s| {
                    let nb = s.len();
                    for (j, gv) in g.iter().enumerate() {
                        s[j % nb] += gv;
                    }
                });
            }
            Op::Mul(a, b) => {
                acc(*a, &mut |s| {
                    for ((o, gv), bv) in s.iter_mut().zip(g).zip(val(*b)) {
                        *o += gv * bv;
                    }
                });
                acc(*b, &mut |s| {
                    for ((o, gv), av) in s.iter_mut().zip(g).zip(val(*a)) {
                        *o += gv * av;
                    }
                });
            }
            Op::Scale(x, f) => acc(*x, &mut |s| {
                s.iter_mut().zip(g).for_each(|(o, gv)| *o += gv * f)
            }),
            Op::Gelu(x) => acc(*x, &mut |s| {
                for ((o, gv), &v) in s.iter_mut().zip(g).zip(val(*x)) {
                    let t = (GELU_C * (v + GELU_A * v * v * v)).tanh();
                    let d = 0.5 * (1.0 + t)
                        + 0.5 * v * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * v * v);
                    *o += gv * d;
                }
            }),
            Op::Softmax(x) => {
                let n = nodes[i].value.last_dim();
                acc(*x, &mut |s| {
                    for ((y, gr), sr) in out.chunks(n).zip(g.chunks(n)).zip(s.chunks_mut(n)) {
                        let dot: f64 = y.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for j in 0..n {
                            sr[j] += y[j] * (gr[j] - dot);
                        }
                    }
                });
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            } => {
                let n = nodes[i].value.last_dim();
                let gd = val(*gain);
                acc(*gain, &mut |s| {
                    for (r, gr) in g.chunks(n).enumerate() {
                        for j in 0..n {
                            s[j] += gr[j] * xhat[r * n + j];
                        }
                    }
                });
                acc(*bias, &mut |s| {
                    for gr in g.chunks(n) {
                        add_into(s, gr);
                    }
                });
                acc(*x, &mut |s| {
                    for (r, gr) in g.chunks(n).enumerate() {
                        let h = &xhat[r * n..(r + 1) * n];
                        let dh: Vec<f64> = gr.iter().zip(gd).map(|(a, b)| a * b).collect();
                        let mean_dh = dh.iter().sum::<f64>() / n as f64;
                        let mean_dh_h =
                            dh.iter().zip(h).map(|(a, b)| a * b).sum::<f64>() / n as f64;
                        for j in 0..n {
                            s[r * n + j] += inv_std[r] * (dh[j] - mean_dh - h[j] * mean_dh_h);
                        }
                    }
                });
            }
            Op::Embedding { table, ids } => {
                let d = nodes[i].value.last_dim();
                acc(*table, &mut |s| {
                    for (gr, &id) in g.chunks(d).zip(ids) {
                        if id != 0 {
                            add_into(&mut s[id * d..(id + 1) * d], gr);
                        }
                    }
                });
            }
            Op::IndexSelect { x, index } => acc(*x, &mut |s| {
                for (gv, idx) in g.iter().zip(index.iter()) {
                    if let Some(j) = idx {
                        s[*j] += gv;
                    }
                }
            }),
            Op::Concat(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let len = nodes[p.0].value.numel();
                    acc(p, &mut |s| add_into(s, &g[offset..offset + len]));
                    offset += len;
                }
            }
            Op::Sum(x) => acc(*x, &mut |s| s.iter_mut().for_each(|o| *o += g[0])),
            Op::Mean(x) => acc(*x, &mut |s| {
                let scale = g[0] / s.len() as f64;
                s.iter_mut().for_each(|o| *o += scale);
            }),
            Op::CrossEntropy {
                logits,
                labels,
                probs,
            } => {
                let c = probs.len() / labels.len();
                let scale = g[0] / labels.len() as f64;
                acc(*logits, &mut |s| {
                    for (r, &label) in labels.iter().enumerate() {
                        for j in 0..c {
                            let onehot = if j == label { 1.0 } else { 0.0 };
                            s[r * c + j] += scale * (probs[r * c + j] - onehot);
                        }
                    }
                });
            }
            Op::BceWithLogits {
                logits,
                targets,
                weights,
                weight_sum,
            } => acc(*logits, &mut |s| {
                for (j, &z) in val(*logits).iter().enumerate() {
                    let sig = sigmoid(z);
                    s[j] += g[0] * weights[j] * (sig - targets[j]) / weight_sum;
                }
            }),
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
}

fn zip_map(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}

fn map(t: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor::new(t.shape(), t.data().iter().map(|&v| f(v)).collect())
        .expect("same shape as source")
}
