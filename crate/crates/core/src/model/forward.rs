use std::rc::Rc;

use super::config::{Architecture, HeadMode};
use super::layers::{encoder, linear, Dropout, EncoderCtx};
use super::params::{Layout, Model};
use crate::error::{Error, Result};
use crate::numeric::{Tape, Tensor, Var};
use crate::scene::TokenizedScene;

/// Enables dropout for one training step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DropoutKey {
    pub seed: u64,
    pub step: u64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ForwardOptions {
    /// `None` runs deterministically without dropout.
    pub dropout: Option<DropoutKey>,
    /// Keep every attention map (`[groups·heads, S, S]` per layer).
    pub collect_attention: bool,
}

/// Result of a forward pass on the tape.
#[derive(Debug)]
pub struct Forward {
    /// `[B, C]` in video mode, `[B·N, C]` in actor mode.
    pub logits: Var,
    /// Rows of `logits` that carry a prediction. Actor rows without any valid
    /// joint are `false` and must be excluded from losses and metrics.
    pub valid: Vec<bool>,
    pub attention: Vec<Tensor>,
    /// Key padding flags matching each collected attention map.
    pub attention_masks: Vec<Vec<bool>>,
}

/// Inference output detached from any tape.
#[derive(Debug, Clone, PartialEq)]
pub struct Logits {
    pub values: Tensor,
    pub valid: Vec<bool>,
}

/// Accumulates rows of a packed `[groups·S, D]` input built by gathering from
/// a source matrix.
struct Packer {
    d: usize,
    seq: usize,
    index: Vec<Option<usize>>,
    key_masked: Vec<bool>,
}

impl Packer {
    fn new(groups: usize, seq: usize, d: usize) -> Self {
        Self {
            d,
            seq,
            index: vec![None; groups * seq * d],
            key_masked: vec![true; groups * seq],
        }
    }

    fn put(&mut self, group: usize, slot: usize, src_row: usize) {
        let row = group * self.seq + slot;
        self.key_masked[row] = false;
        for j in 0..self.d {
            self.index[row * self.d + j] = Some(src_row * self.d + j);
        }
    }

    fn gather(self, tape: &mut Tape, src: Var) -> Result<(Var, Vec<bool>)> {
        let rows = self.key_masked.len();
        let x = tape.index_select(src, self.index.into(), &[rows, self.d])?;
        Ok((x, self.key_masked))
    }
}

/// Rows `(g, 0)` of a packed `[G·S, D]` matrix.
fn first_rows(tape: &mut Tape, h: Var, groups: usize, seq: usize, d: usize) -> Result<Var> {
    let idx: Rc<[Option<usize>]> = (0..groups)
        .flat_map(|g| (0..d).map(move |j| Some(g * seq * d + j)))
        .collect();
    tape.index_select(h, idx, &[groups, d])
}

struct Ids {
    position: Vec<usize>,
    token_type: Vec<usize>,
    segment: Vec<usize>,
    instance: Vec<usize>,
}

impl Ids {
    fn new() -> Self {
        Self {
            position: Vec::new(),
            token_type: Vec::new(),
            segment: Vec::new(),
            instance: Vec::new(),
        }
    }

    fn push(&mut self, t: &TokenizedScene, i: usize) {
        self.position.push(t.position[i]);
        self.token_type.push(t.token_type[i]);
        self.segment.push(t.segment[i]);
        self.instance.push(t.instance[i]);
    }

    fn len(&self) -> usize {
        self.position.len()
    }
}

/// Sum of the selected embedding lookups, or `None` when there are no ids.
fn embed_sum(tape: &mut Tape, lookups: &[(Var, &[usize])]) -> Result<Option<Var>> {
    if lookups[0].1.is_empty() {
        return Ok(None);
    }
    let mut acc = tape.embedding(lookups[0].0, lookups[0].1)?;
    for &(table, ids) in &lookups[1..] {
        let e = tape.embedding(table, ids)?;
        acc = tape.add(acc, e)?;
    }
    Ok(Some(acc))
}

/// Stacks `rows` (may be absent) above the `[D]` vector `extra`; returns the
/// source matrix and the row index of `extra`.
fn stack(tape: &mut Tape, rows: Option<Var>, extra: Var, d: usize) -> Result<(Var, usize)> {
    let extra = tape.reshape(extra, &[1, d])?;
    match rows {
        Some(r) => {
            let n = tape.shape(r)[0];
            Ok((tape.concat(&[r, extra])?, n))
        }
        None => Ok((extra, 0)),
    }
}

/// Mean-pooling matrix `[rows, cols]` from per-row member lists.
fn pooling(tape: &mut Tape, members: &[Vec<usize>], cols: usize) -> Result<Var> {
    let mut data = vec![0.0; members.len() * cols];
    for (r, m) in members.iter().enumerate() {
        for &c in m {
            data[r * cols + c] = 1.0 / m.len() as f64;
        }
    }
    Ok(tape.constant(Tensor::new(&[members.len(), cols], data)?))
}

struct Run<'a> {
    model: &'a Model,
    layout: Layout,
    params: &'a [Var],
    dropout: Dropout,
    collect: bool,
    attention: Vec<Tensor>,
    attention_masks: Vec<Vec<bool>>,
}

impl Run<'_> {
    fn encode(
        &mut self,
        tape: &mut Tape,
        stage: usize,
        x: Var,
        groups: usize,
        seq: usize,
        key_masked: &[bool],
    ) -> Result<Var> {
        let cfg = &self.model.config;
        let before = self.attention.len();
        let mut ctx = EncoderCtx {
            heads: cfg.heads,
            eps: cfg.layer_norm_eps,
            dropout: &mut self.dropout,
            attention: if self.collect {
                Some(&mut self.attention)
            } else {
                None
            },
        };
        let h = encoder(
            tape,
            self.params,
            &self.layout.encoders[stage],
            x,
            groups,
            seq,
            key_masked,
            &mut ctx,
        )?;
        for _ in before..self.attention.len() {
            let mut m = Vec::with_capacity(groups * cfg.heads * seq);
            for g in 0..groups {
                for _ in 0..cfg.heads {
                    m.extend_from_slice(&key_masked[g * seq..(g + 1) * seq]);
                }
            }
            self.attention_masks.push(m);
        }
        Ok(h)
    }

    fn p(&self, i: usize) -> Var {
        self.params[i]
    }

    fn head(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let (w, b) = self.layout.head;
        linear(tape, x, (self.p(w), self.p(b)))
    }

    fn flat(&mut self, tape: &mut Tape, batch: &[TokenizedScene]) -> Result<(Var, Vec<bool>)> {
        let cfg = &self.model.config;
        let (d, sc) = (cfg.hidden, &cfg.scene);
        let mut ids = Ids::new();
        let mut counts = Vec::with_capacity(batch.len());
        // person slot of each packed token, `None` for object tokens
        let block = sc.frames * sc.joints;
        let human_len = sc.persons * block;
        let mut owner = Vec::new();
        for t in batch {
            let before = ids.len();
            for i in (0..t.len()).filter(|&i| t.mask[i]) {
                ids.push(t, i);
                owner.push((i < human_len).then(|| i / block));
            }
            counts.push(ids.len() - before);
        }
        let l = &self.layout;
        let e = embed_sum(
            tape,
            &[
                (self.p(l.position), &ids.position),
                (self.p(l.token_type), &ids.token_type),
                (self.p(l.segment), &ids.segment),
                (self.p(l.instance), &ids.instance),
            ],
        )?;
        let (src, cls_row) = stack(tape, e, self.p(l.cls[0]), d)?;
        let seq = 1 + counts.iter().copied().max().unwrap_or(0);
        let b = batch.len();
        let mut pack = Packer::new(b, seq, d);
        let mut offset = 0;
        for (g, &c) in counts.iter().enumerate() {
            pack.put(g, 0, cls_row);
            for i in 0..c {
                pack.put(g, 1 + i, offset + i);
            }
            offset += c;
        }
        let (x, key_masked) = pack.gather(tape, src)?;
        let h = self.encode(tape, 0, x, b, seq, &key_masked)?;
        match cfg.head {
            HeadMode::Video => {
                let cls = first_rows(tape, h, b, seq, d)?;
                Ok((self.head(tape, cls)?, vec![true; b]))
            }
            HeadMode::Actor => {
                // mean of the encoder outputs of each person slot's tokens
                let n = sc.persons;
                let mut members = vec![Vec::new(); b * n];
                let mut offset = 0;
                for (g, &c) in counts.iter().enumerate() {
                    for i in 0..c {
                        if let Some(p) = owner[offset + i] {
                            members[g * n + p].push(g * seq + 1 + i);
                        }
                    }
                    offset += c;
                }
                let valid = members.iter().map(|m| !m.is_empty()).collect();
                let pool = pooling(tape, &members, b * seq)?;
                let pooled = tape.matmul(pool, h)?;
                Ok((self.head(tape, pooled)?, valid))
            }
        }
    }

    fn hierarchical(
        &mut self,
        tape: &mut Tape,
        batch: &[TokenizedScene],
    ) -> Result<(Var, Vec<bool>)> {
        let cfg = &self.model.config;
        let (d, sc) = (cfg.hidden, &cfg.scene);
        let (n_p, t_f, k_h) = (sc.persons, sc.frames, sc.joints);
        let human_len = n_p * t_f * k_h;

        // stage 1: one group per (person, frame) and per object with valid tokens
        struct Group {
            sample: usize,
            person: Option<usize>,
            len: usize,
            instance: usize,
            segment: usize,
        }
        let mut ids = Ids::new();
        let mut groups: Vec<Group> = Vec::new();
        let mut add_group = |ids: &mut Ids,
                             t: &TokenizedScene,
                             b: usize,
                             person: Option<usize>,
                             range: std::ops::Range<usize>| {
            let before = ids.len();
            let mut first = None;
            for i in range.filter(|&i| t.mask[i]) {
                first.get_or_insert(i);
                ids.push(t, i);
            }
            if let Some(i) = first {
                groups.push(Group {
                    sample: b,
                    person,
                    len: ids.len() - before,
                    instance: t.instance[i],
                    segment: t.segment[i],
                });
            }
        };
        for (b, t) in batch.iter().enumerate() {
            for n in 0..n_p {
                for f in 0..t_f {
                    let start = (n * t_f + f) * k_h;
                    add_group(&mut ids, t, b, Some(n), start..start + k_h);
                }
            }
            for j in 0..sc.objects {
                let start = human_len + j * sc.object_points;
                add_group(&mut ids, t, b, None, start..start + sc.object_points);
            }
        }
        let bsz = batch.len();
        let rows = match cfg.head {
            HeadMode::Video => bsz,
            HeadMode::Actor => bsz * n_p,
        };
        if groups.is_empty() {
            let z = tape.constant(Tensor::zeros(&[rows, cfg.classes]));
            return Ok((z, vec![false; rows]));
        }
        let l = self.layout.clone();
        let e = embed_sum(
            tape,
            &[
                (self.p(l.position), &ids.position),
                (self.p(l.token_type), &ids.token_type),
            ],
        )?;
        let (src, cls_row) = stack(tape, e, self.p(l.cls[0]), d)?;
        let seq1 = 1 + groups.iter().map(|g| g.len).max().unwrap_or(0);
        let mut pack = Packer::new(groups.len(), seq1, d);
        let mut offset = 0;
        for (gi, g) in groups.iter().enumerate() {
            pack.put(gi, 0, cls_row);
            for i in 0..g.len {
                pack.put(gi, 1 + i, offset + i);
            }
            offset += g.len;
        }
        let (x1, mask1) = pack.gather(tape, src)?;
        let h1 = self.encode(tape, 0, x1, groups.len(), seq1, &mask1)?;
        let hg = first_rows(tape, h1, groups.len(), seq1, d)?;

        // stage 2: one sequence per actor: its frames, then the clip's objects
        let mut actors: Vec<(usize, usize, Vec<usize>)> = Vec::new();
        for (gi, g) in groups.iter().enumerate() {
            if let Some(n) = g.person {
                match actors.last_mut() {
                    Some((b, an, members)) if *b == g.sample && *an == n => members.push(gi),
                    _ => actors.push((g.sample, n, vec![gi])),
                }
            }
        }
        let objects_of = |b: usize| {
            groups
                .iter()
                .enumerate()
                .filter(move |(_, g)| g.sample == b && g.person.is_none())
                .map(|(gi, _)| gi)
        };
        let seq2 = 1 + actors
            .iter()
            .map(|(b, _, m)| m.len() + objects_of(*b).count())
            .max()
            .unwrap_or(0);
        let (src2, cls2_row) = stack(tape, Some(hg), self.p(l.cls[1]), d)?;
        let mut pack = Packer::new(actors.len().max(1), seq2, d);
        let mut inst_ids = vec![0; actors.len().max(1) * seq2];
        let mut seg_ids = vec![0; actors.len().max(1) * seq2];
        for (a, (b, _, members)) in actors.iter().enumerate() {
            pack.put(a, 0, cls2_row);
            for (s, gi) in members.iter().copied().chain(objects_of(*b)).enumerate() {
                pack.put(a, 1 + s, gi);
                inst_ids[a * seq2 + 1 + s] = groups[gi].instance;
                seg_ids[a * seq2 + 1 + s] = groups[gi].segment;
            }
        }
        if actors.is_empty() {
            let z = tape.constant(Tensor::zeros(&[rows, cfg.classes]));
            return Ok((z, vec![false; rows]));
        }
        let (base, mask2) = pack.gather(tape, src2)?;
        let extra = embed_sum(
            tape,
            &[
                (self.p(l.instance), &inst_ids),
                (self.p(l.segment), &seg_ids),
            ],
        )?
        .expect("non-empty id lists");
        let x2 = tape.add(base, extra)?;
        let h2 = self.encode(tape, 1, x2, actors.len(), seq2, &mask2)?;
        let dn = first_rows(tape, h2, actors.len(), seq2, d)?;
        match cfg.head {
            HeadMode::Video => {
                let mut members = vec![Vec::new(); bsz];
                for (a, (b, _, _)) in actors.iter().enumerate() {
                    members[*b].push(a);
                }
                let valid = members.iter().map(|m| !m.is_empty()).collect();
                let pool = pooling(tape, &members, actors.len())?;
                let pooled = tape.matmul(pool, dn)?;
                Ok((self.head(tape, pooled)?, valid))
            }
            HeadMode::Actor => {
                let logits = self.head(tape, dn)?;
                let c = cfg.classes;
                let mut index = vec![None; rows * c];
                let mut valid = vec![false; rows];
                for (a, (b, n, _)) in actors.iter().enumerate() {
                    let r = b * n_p + n;
                    valid[r] = true;
                    for j in 0..c {
                        index[r * c + j] = Some(a * c + j);
                    }
                }
                let out = tape.index_select(logits, index.into(), &[rows, c])?;
                Ok((out, valid))
            }
        }
    }
}

impl Model {
    /// Records the forward pass of `batch` on `tape`. `params` are the
    /// variables returned by [`Model::bind`] (or frozen equivalents).
    pub fn forward(
        &self,
        tape: &mut Tape,
        params: &[Var],
        batch: &[TokenizedScene],
        opts: &ForwardOptions,
    ) -> Result<Forward> {
        if batch.is_empty() {
            return Err(Error::Invalid("empty batch".into()));
        }
        if params.len() != self.params().len() {
            return Err(Error::Invalid(format!(
                "{} parameter variables for {} parameters",
                params.len(),
                self.params().len()
            )));
        }
        let want = self.config.scene.sequence_len();
        if let Some(t) = batch.iter().find(|t| t.len() != want) {
            return Err(Error::Shape(format!(
                "token sequence of {} for a model expecting {want}",
                t.len()
            )));
        }
        let dropout = match opts.dropout {
            Some(k) if self.config.dropout > 0.0 => Dropout::new(self.config.dropout, k.seed, k.step),
            _ => Dropout::disabled(),
        };
        let mut run = Run {
            model: self,
            layout: self.layout().clone(),
            params,
            dropout,
            collect: opts.collect_attention,
            attention: Vec::new(),
            attention_masks: Vec::new(),
        };
        let (logits, valid) = match self.config.architecture {
            Architecture::Flat => run.flat(tape, batch)?,
            Architecture::Hierarchical => run.hierarchical(tape, batch)?,
        };
        Ok(Forward {
            logits,
            valid,
            attention: run.attention,
            attention_masks: run.attention_masks,
        })
    }

    /// Deterministic inference without gradient tracking.
    pub fn predict(&self, batch: &[TokenizedScene]) -> Result<Logits> {
        let mut tape = Tape::new();
        let params: Vec<Var> = self
            .params()
            .iter()
            .map(|p| tape.constant(p.clone()))
            .collect();
        let out = self.forward(&mut tape, &params, batch, &ForwardOptions::default())?;
        Ok(Logits {
            values: tape.value(out.logits).clone(),
            valid: out.valid,
        })
    }

    /// Per-token sum of the four embedding rows, `[L, D]`. Padding maps to zero.
    pub fn embed(&self, tokens: &TokenizedScene) -> Result<Tensor> {
        let l = self.layout();
        let mut tape = Tape::new();
        let mut acc: Option<Var> = None;
        for (table, ids) in [
            (l.position, &tokens.position),
            (l.token_type, &tokens.token_type),
            (l.segment, &tokens.segment),
            (l.instance, &tokens.instance),
        ] {
            let t = tape.constant(self.params()[table].clone());
            let e = tape.embedding(t, ids)?;
            acc = Some(match acc {
                Some(a) => tape.add(a, e)?,
                None => e,
            });
        }
        let v = acc.ok_or_else(|| Error::Invalid("no tokens".into()))?;
        Ok(tape.value(v).clone())
    }
}
