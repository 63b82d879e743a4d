//! Attentional GRU encoder-decoder.
//!
//! Encoder: bidirectional GRU over source embeddings; the annotation of
//! position `i` is `[fwd_i; bwd_i]`. Decoder state starts at
//! `tanh(mean(annotations) W_init + b_init)`. Each decoder step with state
//! `s` and previous target token `y`:
//!
//! ```text
//! e_i   = v · tanh(s W_att + ann_i U_att)
//! a     = softmax(e)
//! c     = Σ_i a_i ann_i
//! s'    = GRU([emb(y); c], s)
//! p(·)  = softmax([s'; c; emb(y)] W_out + b_out)
//! ```
//!
//! The same computation exists twice: on a [`Tape`] for training and eagerly
//! on plain tensors for decoding. Tests keep the two paths in agreement.

use rand::Rng;

use crate::error::{Error, Result};
use crate::params::{ParamId, ParamStore};
use crate::scalar::Scalar;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;
use crate::vocab::BOS;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelConfig {
    pub src_vocab: usize,
    pub tgt_vocab: usize,
    pub emb_dim: usize,
    pub hidden_dim: usize,
    /// Parameters start uniform in `[-init_scale, init_scale]`.
    pub init_scale: f64,
}

impl ModelConfig {
    pub fn new(src_vocab: usize, tgt_vocab: usize) -> Self {
        Self {
            src_vocab,
            tgt_vocab,
            emb_dim: 32,
            hidden_dim: 64,
            init_scale: 0.08,
        }
    }

    pub fn with_dims(mut self, emb_dim: usize, hidden_dim: usize) -> Self {
        self.emb_dim = emb_dim;
        self.hidden_dim = hidden_dim;
        self
    }

    fn annotation_dim(&self) -> usize {
        2 * self.hidden_dim
    }

    fn attention_dim(&self) -> usize {
        self.hidden_dim
    }

    fn output_features(&self) -> usize {
        self.hidden_dim + self.annotation_dim() + self.emb_dim
    }
}

#[derive(Clone, Copy, Debug)]
struct GruIds {
    w: [ParamId; 3],
    u: [ParamId; 3],
    b: [ParamId; 3],
}

#[derive(Clone, Copy, Debug)]
struct ModelIds {
    src_emb: ParamId,
    tgt_emb: ParamId,
    enc_fwd: GruIds,
    enc_bwd: GruIds,
    init_w: ParamId,
    init_b: ParamId,
    att_w: ParamId,
    att_u: ParamId,
    att_v: ParamId,
    dec: GruIds,
    out_w: ParamId,
    out_b: ParamId,
}

const GATES: [&str; 3] = ["z", "r", "n"];

fn param_shapes(cfg: &ModelConfig) -> Vec<(String, usize, usize)> {
    let (e, h, a, ann) = (
        cfg.emb_dim,
        cfg.hidden_dim,
        cfg.attention_dim(),
        cfg.annotation_dim(),
    );
    let mut shapes = vec![
        ("src_emb".to_string(), cfg.src_vocab, e),
        ("tgt_emb".to_string(), cfg.tgt_vocab, e),
    ];
    let gru = |prefix: &str, input: usize, shapes: &mut Vec<(String, usize, usize)>| {
        for g in GATES {
            shapes.push((format!("{prefix}.w_{g}"), input, h));
            shapes.push((format!("{prefix}.u_{g}"), h, h));
            shapes.push((format!("{prefix}.b_{g}"), 1, h));
        }
    };
    gru("enc_fwd", e, &mut shapes);
    gru("enc_bwd", e, &mut shapes);
    shapes.push(("init.w".into(), ann, h));
    shapes.push(("init.b".into(), 1, h));
    shapes.push(("att.w".into(), h, a));
    shapes.push(("att.u".into(), ann, a));
    shapes.push(("att.v".into(), a, 1));
    gru("dec", e + ann, &mut shapes);
    shapes.push(("out.w".into(), cfg.output_features(), cfg.tgt_vocab));
    shapes.push(("out.b".into(), 1, cfg.tgt_vocab));
    shapes
}

fn gru_ids<T: Scalar>(params: &ParamStore<T>, prefix: &str) -> Result<GruIds> {
    let get = |kind: &str, g: &str| params.id(&format!("{prefix}.{kind}_{g}"));
    Ok(GruIds {
        w: [get("w", "z")?, get("w", "r")?, get("w", "n")?],
        u: [get("u", "z")?, get("u", "r")?, get("u", "n")?],
        b: [get("b", "z")?, get("b", "r")?, get("b", "n")?],
    })
}

/// Encoder-decoder defining `π(y | x) = Π_j π(y_j | y_<j, x)`.
#[derive(Clone, Debug)]
pub struct Seq2Seq<T> {
    config: ModelConfig,
    ids: ModelIds,
    params: ParamStore<T>,
}

impl<T: Scalar> Seq2Seq<T> {
    pub fn new<R: Rng>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        if config.src_vocab == 0
            || config.tgt_vocab == 0
            || config.emb_dim == 0
            || config.hidden_dim == 0
        {
            return Err(Error::Invalid("model dimensions must be positive".into()));
        }
        let mut params = ParamStore::new();
        for (name, r, c) in param_shapes(&config) {
            params.insert_uniform(name, r, c, config.init_scale, rng)?;
        }
        Self::from_params(params)
    }

    /// Wraps a loaded parameter set, inferring dimensions from its shapes.
    pub fn from_params(params: ParamStore<T>) -> Result<Self> {
        let shape = |name: &str| -> Result<(usize, usize)> {
            let t = params.value(params.id(name)?);
            Ok((t.rows(), t.cols()))
        };
        let (src_vocab, emb_dim) = shape("src_emb")?;
        let (tgt_vocab, _) = shape("tgt_emb")?;
        let (_, hidden_dim) = shape("init.b")?;
        let config = ModelConfig {
            src_vocab,
            tgt_vocab,
            emb_dim,
            hidden_dim,
            init_scale: 0.08,
        };
        let expected = param_shapes(&config);
        if expected.len() != params.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameters, found {}",
                expected.len(),
                params.len()
            )));
        }
        for (name, r, c) in &expected {
            let got = shape(name)?;
            if got != (*r, *c) {
                return Err(Error::Checkpoint(format!(
                    "parameter `{name}` has shape {got:?}, expected ({r}, {c})"
                )));
            }
        }
        let ids = ModelIds {
            src_emb: params.id("src_emb")?,
            tgt_emb: params.id("tgt_emb")?,
            enc_fwd: gru_ids(&params, "enc_fwd")?,
            enc_bwd: gru_ids(&params, "enc_bwd")?,
            init_w: params.id("init.w")?,
            init_b: params.id("init.b")?,
            att_w: params.id("att.w")?,
            att_u: params.id("att.u")?,
            att_v: params.id("att.v")?,
            dec: gru_ids(&params, "dec")?,
            out_w: params.id("out.w")?,
            out_b: params.id("out.b")?,
        };
        Ok(Self {
            config,
            ids,
            params,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    pub fn into_params(self) -> ParamStore<T> {
        self.params
    }

    pub fn tgt_vocab(&self) -> usize {
        self.config.tgt_vocab
    }

    /// Zeroes the output projection so every next-token distribution is uniform.
    pub fn zero_output_layer(&mut self) {
        for id in [self.ids.out_w, self.ids.out_b] {
            let p = self.params.get_mut(id);
            p.value.data_mut().iter_mut().for_each(|v| *v = T::zero());
        }
    }

    pub(crate) fn check_ids(ids: &[usize], size: usize) -> Result<()> {
        if ids.is_empty() {
            return Err(Error::EmptySequence);
        }
        match ids.iter().find(|&&id| id >= size) {
            Some(&id) => Err(Error::OutOfVocab { id, size }),
            None => Ok(()),
        }
    }

    fn v(&self, id: ParamId) -> &Tensor<T> {
        self.params.value(id)
    }

    // ---- eager path --------------------------------------------------------

    fn gru(&self, cell: &GruIds, x: &Tensor<T>, h: &Tensor<T>) -> Result<Tensor<T>> {
        let gate = |k: usize, hh: &Tensor<T>| -> Result<Tensor<T>> {
            Ok(x.matmul(self.v(cell.w[k]))?
                .add(&hh.matmul(self.v(cell.u[k]))?)?
                .add(self.v(cell.b[k]))?)
        };
        let z = gate(0, h)?.sigmoid();
        let r = gate(1, h)?.sigmoid();
        let n = gate(2, &r.mul(h)?)?.tanh();
        Ok(h.add(&z.mul(&n.sub(h)?)?)?)
    }

    pub fn encode(&self, x: &[usize]) -> Result<Encoded<T>> {
        Self::check_ids(x, self.config.src_vocab)?;
        let h = self.config.hidden_dim;
        let emb = self.v(self.ids.src_emb);
        let rows: Vec<Tensor<T>> = x
            .iter()
            .map(|&id| emb.gather_rows(&[id]))
            .collect::<Result<_, _>>()?;
        let mut fwd = Vec::with_capacity(x.len());
        let mut state = Tensor::zeros(1, h);
        for e in &rows {
            state = self.gru(&self.ids.enc_fwd, e, &state)?;
            fwd.push(state.clone());
        }
        let mut bwd = vec![Tensor::zeros(1, h); x.len()];
        let mut state = Tensor::zeros(1, h);
        for (i, e) in rows.iter().enumerate().rev() {
            state = self.gru(&self.ids.enc_bwd, e, &state)?;
            bwd[i] = state.clone();
        }
        let ann_rows: Vec<Tensor<T>> = fwd
            .iter()
            .zip(&bwd)
            .map(|(f, b)| Tensor::concat_cols(&[f, b]))
            .collect::<Result<_, _>>()?;
        let ann_refs: Vec<&Tensor<T>> = ann_rows.iter().collect();
        let annotations = Tensor::concat_rows(&ann_refs)?;
        let mean = Tensor::filled(1, x.len(), T::one() / T::of(x.len() as f64));
        let init_state = mean
            .matmul(&annotations)?
            .matmul(self.v(self.ids.init_w))?
            .add(self.v(self.ids.init_b))?
            .tanh();
        let projected = annotations.matmul(self.v(self.ids.att_u))?;
        Ok(Encoded {
            annotations,
            projected,
            init_state,
        })
    }

    /// One decoder step from `state` after emitting `prev`. Returns the next
    /// state and the log-probabilities of every target token.
    pub fn step(
        &self,
        enc: &Encoded<T>,
        state: &Tensor<T>,
        prev: usize,
    ) -> Result<(Tensor<T>, Vec<T>)> {
        if prev >= self.config.tgt_vocab {
            return Err(Error::OutOfVocab {
                id: prev,
                size: self.config.tgt_vocab,
            });
        }
        let e = self.v(self.ids.tgt_emb).gather_rows(&[prev])?;
        let q = state.matmul(self.v(self.ids.att_w))?;
        let scores = enc
            .projected
            .add_row(&q)?
            .tanh()
            .matmul(self.v(self.ids.att_v))?;
        let weights = scores.reshape(vec![1, scores.rows()])?.softmax();
        let context = weights.matmul(&enc.annotations)?;
        let input = Tensor::concat_cols(&[&e, &context])?;
        let next = self.gru(&self.ids.dec, &input, state)?;
        let features = Tensor::concat_cols(&[&next, &context, &e])?;
        let log_probs = features
            .matmul(self.v(self.ids.out_w))?
            .add(self.v(self.ids.out_b))?
            .log_softmax();
        Ok((next, log_probs.into_data()))
    }

    /// Teacher-forced log π(y_j | y_<j, x) for every position of `y`.
    pub fn score_sequence(&self, x: &[usize], y: &[usize]) -> Result<Vec<T>> {
        Self::check_ids(y, self.config.tgt_vocab)?;
        let enc = self.encode(x)?;
        let mut state = enc.init_state.clone();
        let mut prev = BOS;
        let mut out = Vec::with_capacity(y.len());
        for &tok in y {
            let (next, lp) = self.step(&enc, &state, prev)?;
            out.push(lp[tok]);
            state = next;
            prev = tok;
        }
        Ok(out)
    }

    // ---- tape path ---------------------------------------------------------

    /// Places every parameter on `tape` as a leaf.
    pub fn bind(&self, tape: &mut Tape<'_, T>) -> Bound {
        let gru = |tape: &mut Tape<'_, T>, g: &GruIds| GruVars {
            w: g.w.map(|id| tape.param(id)),
            u: g.u.map(|id| tape.param(id)),
            b: g.b.map(|id| tape.param(id)),
        };
        Bound {
            src_emb: tape.param(self.ids.src_emb),
            tgt_emb: tape.param(self.ids.tgt_emb),
            enc_fwd: gru(tape, &self.ids.enc_fwd),
            enc_bwd: gru(tape, &self.ids.enc_bwd),
            init_w: tape.param(self.ids.init_w),
            init_b: tape.param(self.ids.init_b),
            att_w: tape.param(self.ids.att_w),
            att_u: tape.param(self.ids.att_u),
            att_v: tape.param(self.ids.att_v),
            dec: gru(tape, &self.ids.dec),
            out_w: tape.param(self.ids.out_w),
            out_b: tape.param(self.ids.out_b),
        }
    }

    fn gru_on(tape: &mut Tape<'_, T>, cell: &GruVars, x: Var, h: Var) -> Result<Var> {
        let gate = |tape: &mut Tape<'_, T>, k: usize, hh: Var| -> Result<Var> {
            let xw = tape.matmul(x, cell.w[k])?;
            let hu = tape.matmul(hh, cell.u[k])?;
            let s = tape.add(xw, hu)?;
            Ok(tape.add(s, cell.b[k])?)
        };
        let z = gate(tape, 0, h)?;
        let z = tape.sigmoid(z);
        let r = gate(tape, 1, h)?;
        let r = tape.sigmoid(r);
        let rh = tape.mul(r, h)?;
        let n = gate(tape, 2, rh)?;
        let n = tape.tanh(n);
        let diff = tape.sub(n, h)?;
        let upd = tape.mul(z, diff)?;
        Ok(tape.add(h, upd)?)
    }

    pub fn encode_on(&self, tape: &mut Tape<'_, T>, b: &Bound, x: &[usize]) -> Result<EncodedVars> {
        Self::check_ids(x, self.config.src_vocab)?;
        let h = self.config.hidden_dim;
        let rows: Vec<Var> = x
            .iter()
            .map(|&id| tape.gather_rows(b.src_emb, &[id]))
            .collect::<Result<_, _>>()?;
        let zero = tape.constant(Tensor::zeros(1, h));
        let mut fwd = Vec::with_capacity(x.len());
        let mut state = zero;
        for &e in &rows {
            state = Self::gru_on(tape, &b.enc_fwd, e, state)?;
            fwd.push(state);
        }
        let mut bwd = vec![zero; x.len()];
        let mut state = zero;
        for (i, &e) in rows.iter().enumerate().rev() {
            state = Self::gru_on(tape, &b.enc_bwd, e, state)?;
            bwd[i] = state;
        }
        let ann_rows: Vec<Var> = fwd
            .iter()
            .zip(&bwd)
            .map(|(&f, &bk)| tape.concat_cols(&[f, bk]))
            .collect::<Result<_, _>>()?;
        let annotations = tape.concat_rows(&ann_rows)?;
        let mean = tape.constant(Tensor::filled(1, x.len(), T::one() / T::of(x.len() as f64)));
        let pooled = tape.matmul(mean, annotations)?;
        let pre = tape.matmul(pooled, b.init_w)?;
        let pre = tape.add(pre, b.init_b)?;
        let init_state = tape.tanh(pre);
        let projected = tape.matmul(annotations, b.att_u)?;
        Ok(EncodedVars {
            annotations,
            projected,
            init_state,
            len: x.len(),
        })
    }

    fn step_on(
        &self,
        tape: &mut Tape<'_, T>,
        b: &Bound,
        enc: &EncodedVars,
        state: Var,
        prev: usize,
    ) -> Result<(Var, Var)> {
        let e = tape.gather_rows(b.tgt_emb, &[prev])?;
        let q = tape.matmul(state, b.att_w)?;
        let pre = tape.add_row(enc.projected, q)?;
        let act = tape.tanh(pre);
        let scores = tape.matmul(act, b.att_v)?;
        let scores = tape.reshape(scores, 1, enc.len)?;
        let weights = tape.softmax(scores);
        let context = tape.matmul(weights, enc.annotations)?;
        let input = tape.concat_cols(&[e, context])?;
        let next = Self::gru_on(tape, &b.dec, input, state)?;
        let features = tape.concat_cols(&[next, context, e])?;
        let logits = tape.matmul(features, b.out_w)?;
        let logits = tape.add(logits, b.out_b)?;
        Ok((next, tape.log_softmax(logits)))
    }

    /// Per-position `[1, 1]` log-probability nodes of `y` under teacher
    /// forcing on its own prefix.
    pub fn log_probs_on(
        &self,
        tape: &mut Tape<'_, T>,
        b: &Bound,
        enc: &EncodedVars,
        y: &[usize],
    ) -> Result<Vec<Var>> {
        Self::check_ids(y, self.config.tgt_vocab)?;
        let mut state = enc.init_state;
        let mut prev = BOS;
        let mut out = Vec::with_capacity(y.len());
        for &tok in y {
            let (next, lp) = self.step_on(tape, b, enc, state, prev)?;
            out.push(tape.pick(lp, 0, tok)?);
            state = next;
            prev = tok;
        }
        Ok(out)
    }

    /// `log π(y | x)` as a single scalar node.
    pub fn sequence_log_prob_on(
        &self,
        tape: &mut Tape<'_, T>,
        b: &Bound,
        enc: &EncodedVars,
        y: &[usize],
    ) -> Result<Var> {
        let terms = self.log_probs_on(tape, b, enc, y)?;
        Ok(tape.add_all(&terms)?.expect("non-empty sequence"))
    }
}

/// Source-side quantities reused by every decoder step.
#[derive(Clone, Debug)]
pub struct Encoded<T> {
    pub annotations: Tensor<T>,
    pub projected: Tensor<T>,
    pub init_state: Tensor<T>,
}

#[derive(Clone, Copy, Debug)]
pub struct EncodedVars {
    pub annotations: Var,
    pub projected: Var,
    pub init_state: Var,
    len: usize,
}

#[derive(Clone, Copy, Debug)]
struct GruVars {
    w: [Var; 3],
    u: [Var; 3],
    b: [Var; 3],
}

/// Parameter leaves of one tape.
#[derive(Clone, Copy, Debug)]
pub struct Bound {
    src_emb: Var,
    tgt_emb: Var,
    enc_fwd: GruVars,
    enc_bwd: GruVars,
    init_w: Var,
    init_b: Var,
    att_w: Var,
    att_u: Var,
    att_v: Var,
    dec: GruVars,
    out_w: Var,
    out_b: Var,
}
