use std::rc::Rc;

use super::params::BlockParams;
use crate::error::{Error, Result};
use crate::numeric::{Tape, Tensor, Var};

/// Counter-based dropout: the keep decision for element `i` of the `c`-th
/// dropout site depends only on `(seed, step, c, i)`.
#[derive(Debug, Clone)]
pub(crate) struct Dropout {
    rate: f64,
    seed: u64,
    step: u64,
    counter: u64,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Dropout {
    pub fn new(rate: f64, seed: u64, step: u64) -> Self {
        Self {
            rate,
            seed,
            step,
            counter: 0,
        }
    }

    pub fn disabled() -> Self {
        Self::new(0.0, 0, 0)
    }

    pub fn apply(&mut self, tape: &mut Tape, x: Var) -> Result<Var> {
        if self.rate <= 0.0 {
            return Ok(x);
        }
        self.counter += 1;
        let base = splitmix(splitmix(splitmix(self.seed) ^ self.step) ^ self.counter);
        let keep = 1.0 / (1.0 - self.rate);
        let shape = tape.shape(x).to_vec();
        let n = tape.value(x).numel();
        let mask: Vec<f64> = (0..n as u64)
            .map(|i| {
                let u = (splitmix(base ^ i) >> 11) as f64 / (1u64 << 53) as f64;
                if u < self.rate {
                    0.0
                } else {
                    keep
                }
            })
            .collect();
        let m = tape.constant(Tensor::new(&shape, mask)?);
        tape.mul(x, m)
    }
}

pub(crate) fn linear(tape: &mut Tape, x: Var, (w, b): (Var, Var)) -> Result<Var> {
    let y = tape.matmul(x, w)?;
    tape.add_broadcast(y, b)
}

/// Shared settings of one encoder pass.
pub(crate) struct EncoderCtx<'a> {
    pub heads: usize,
    pub eps: f64,
    pub dropout: &'a mut Dropout,
    pub attention: Option<&'a mut Vec<Tensor>>,
}

/// Index maps between `[B·S, D]` rows and `[B·H, S, dh]` head slices.
struct HeadSplit {
    split: Rc<[Option<usize>]>,
    merge: Rc<[Option<usize>]>,
}

fn head_split(batch: usize, seq: usize, d: usize, heads: usize) -> HeadSplit {
    let dh = d / heads;
    let n = batch * seq * d;
    let mut split = vec![None; n];
    let mut merge = vec![None; n];
    for b in 0..batch {
        for h in 0..heads {
            for i in 0..seq {
                for j in 0..dh {
                    let flat = (b * seq + i) * d + h * dh + j;
                    let head = ((b * heads + h) * seq + i) * dh + j;
                    split[head] = Some(flat);
                    merge[flat] = Some(head);
                }
            }
        }
    }
    HeadSplit {
        split: split.into(),
        merge: merge.into(),
    }
}

/// Scaled dot-product attention over `[G, S, dh]` slices. `key_masked` has one
/// flag per `(g, key)`; masked keys get weight exactly zero.
pub(crate) fn attention_core(
    tape: &mut Tape,
    q: Var,
    k: Var,
    v: Var,
    key_masked: &[bool],
    collect: Option<&mut Vec<Tensor>>,
) -> Result<Var> {
    let s = tape.shape(q).to_vec();
    let (g, rows, dh) = (s[0], s[1], s[2]);
    let seq = tape.shape(k)[1];
    if key_masked.len() != g * seq {
        return Err(Error::Shape(format!(
            "{} key flags for {g} groups of {seq}",
            key_masked.len()
        )));
    }
    let scores = tape.batch_matmul(q, k, true)?;
    let scores = tape.scale(scores, 1.0 / (dh as f64).sqrt());
    let mut full = Vec::with_capacity(g * rows * seq);
    for gi in 0..g {
        let row = &key_masked[gi * seq..(gi + 1) * seq];
        for _ in 0..rows {
            full.extend_from_slice(row);
        }
    }
    let probs = tape.masked_softmax_lastdim(scores, Some(&full))?;
    if let Some(out) = collect {
        out.push(tape.value(probs).clone());
    }
    tape.batch_matmul(probs, v, false)
}

/// Single-head attention on plain tensors: `q`, `k`, `v` are `[L, d]`,
/// `masked[j]` hides key `j`. Rows with every key hidden come out zero.
pub fn attention(q: &Tensor, k: &Tensor, v: &Tensor, masked: &[bool]) -> Result<(Tensor, Tensor)> {
    let mut tape = Tape::new();
    let mut as3 = |t: &Tensor| -> Result<Var> {
        let s = t.shape();
        if s.len() != 2 {
            return Err(Error::Shape(format!("attention input {s:?}")));
        }
        Ok(tape.constant(t.clone().reshape(&[1, s[0], s[1]])?))
    };
    let (qv, kv, vv) = (as3(q)?, as3(k)?, as3(v)?);
    let mut probs = Vec::new();
    let out = attention_core(&mut tape, qv, kv, vv, masked, Some(&mut probs))?;
    let out = tape.value(out).clone();
    let (l, d) = (out.shape()[1], out.shape()[2]);
    let p = probs.pop().expect("one attention map");
    let lk = p.shape()[2];
    Ok((out.reshape(&[l, d])?, p.reshape(&[l, lk])?))
}

/// Post-norm encoder over `batch` sequences of `seq` rows packed as `[B·S, D]`.
pub(crate) fn encoder(
    tape: &mut Tape,
    params: &[Var],
    blocks: &[BlockParams],
    x: Var,
    batch: usize,
    seq: usize,
    key_masked: &[bool],
    ctx: &mut EncoderCtx<'_>,
) -> Result<Var> {
    let d = tape.shape(x)[1];
    let heads = ctx.heads;
    let dh = d / heads;
    let split = head_split(batch, seq, d, heads);
    let mut head_mask = Vec::with_capacity(batch * heads * seq);
    for b in 0..batch {
        for _ in 0..heads {
            head_mask.extend_from_slice(&key_masked[b * seq..(b + 1) * seq]);
        }
    }
    let p = |(w, b): (usize, usize)| (params[w], params[b]);
    let mut h = x;
    for blk in blocks {
        let proj = |tape: &mut Tape, wb| -> Result<Var> {
            let y = linear(tape, h, wb)?;
            tape.index_select(y, split.split.clone(), &[batch * heads, seq, dh])
        };
        let q = proj(tape, p(blk.q))?;
        let k = proj(tape, p(blk.k))?;
        let v = proj(tape, p(blk.v))?;
        let ctx_heads = attention_core(tape, q, k, v, &head_mask, ctx.attention.as_deref_mut())?;
        let merged = tape.index_select(ctx_heads, split.merge.clone(), &[batch * seq, d])?;
        let attn = linear(tape, merged, p(blk.out))?;
        let attn = ctx.dropout.apply(tape, attn)?;
        let res = tape.add(h, attn)?;
        let (g, b) = p(blk.norm1);
        let h1 = tape.layer_norm(res, g, b, ctx.eps)?;
        let ff = linear(tape, h1, p(blk.ff1))?;
        let ff = tape.gelu(ff);
        let ff = linear(tape, ff, p(blk.ff2))?;
        let ff = ctx.dropout.apply(tape, ff)?;
        let res = tape.add(h1, ff)?;
        let (g, b) = p(blk.norm2);
        h = tape.layer_norm(res, g, b, ctx.eps)?;
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: &[&[f64]]) -> Tensor {
        Tensor::from_rows(rows).unwrap()
    }

    #[test]
    fn single_position_returns_value() {
        let (out, _) = attention(&t(&[&[0.3, -1.0]]), &t(&[&[2.0, 5.0]]), &t(&[&[7.0, -3.0]]), &[false])
            .unwrap();
        assert_eq!(out.data(), &[7.0, -3.0]);
    }

    #[test]
    fn identical_keys_split_evenly() {
        let k = t(&[&[1.0, 2.0], &[1.0, 2.0]]);
        let v = t(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let (_, p) = attention(&t(&[&[0.4, 0.9]]), &k, &v, &[false, false]).unwrap();
        assert_eq!(p.data(), &[0.5, 0.5]);
    }

    #[test]
    fn closed_form_weights() {
        // q·k/√1 = [0, ln 2] gives (1/3, 2/3)
        let q = t(&[&[1.0]]);
        let k = t(&[&[0.0], &[2f64.ln()]]);
        let v = t(&[&[3.0], &[6.0]]);
        let (out, p) = attention(&q, &k, &v, &[false, false]).unwrap();
        assert!((p.data()[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((p.data()[1] - 2.0 / 3.0).abs() < 1e-12);
        assert!((out.data()[0] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn masked_keys_get_zero_weight() {
        let q = t(&[&[1.0], &[2.0]]);
        let k = t(&[&[1.0], &[50.0], &[-1.0]]);
        let v = t(&[&[1.0], &[100.0], &[2.0]]);
        let (_, p) = attention(&q, &k, &v, &[false, true, false]).unwrap();
        for r in 0..2 {
            assert_eq!(p.row(r)[1], 0.0);
            assert!((p.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let (out, _) = attention(&q, &k, &v, &[true, true, true]).unwrap();
        assert!(out.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn dropout_is_counter_based() {
        let run = |seed| {
            let mut tape = Tape::new();
            let x = tape.constant(Tensor::full(&[4, 8], 1.0));
            let mut d = Dropout::new(0.5, seed, 3);
            let a = d.apply(&mut tape, x).unwrap();
            let b = d.apply(&mut tape, x).unwrap();
            (tape.value(a).clone(), tape.value(b).clone())
        };
        let (a1, b1) = run(7);
        let (a2, _) = run(7);
        let (a3, _) = run(8);
        assert_eq!(a1, a2);
        assert_ne!(a1, b1);
        assert_ne!(a1, a3);
        assert!(a1.data().iter().all(|&v| v == 0.0 || v == 2.0));
    }
}
