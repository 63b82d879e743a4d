//! Beam-search k-best decoding, ancestral sampling and greedy decoding over a
//! frozen [`Seq2Seq`].

use std::cmp::Ordering;
use std::collections::HashSet;

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::Seq2Seq;
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::vocab::{BOS, EOS};

/// A decoded output sequence. `tokens` ends with EOS for decoder output;
/// sequences taken from data (e.g. a reference) may be wrapped as well.
#[derive(Clone, Debug, PartialEq)]
pub struct Hypothesis {
    pub tokens: Vec<usize>,
    pub token_log_probs: Vec<f64>,
    pub log_prob: f64,
}

impl Hypothesis {
    pub fn new(tokens: Vec<usize>, token_log_probs: Vec<f64>) -> Self {
        let log_prob = token_log_probs.iter().sum();
        Self {
            tokens,
            token_log_probs,
            log_prob,
        }
    }

    /// Scores `tokens` under `model` by teacher forcing.
    pub fn scored<T: Scalar>(model: &Seq2Seq<T>, x: &[usize], tokens: Vec<usize>) -> Result<Self> {
        let lps = model
            .score_sequence(x, &tokens)?
            .into_iter()
            .map(Scalar::as_f64)
            .collect();
        Ok(Self::new(tokens, lps))
    }

    /// Tokens without the trailing EOS.
    pub fn content(&self) -> &[usize] {
        match self.tokens.last() {
            Some(&EOS) => &self.tokens[..self.tokens.len() - 1],
            _ => &self.tokens,
        }
    }
}

/// Best-first ordering: higher log-probability first, then token sequence.
fn rank_order(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.log_prob
        .partial_cmp(&a.log_prob)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.tokens.cmp(&b.tokens))
}

/// Sorted, duplicate-free k-best list `K(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct KBestList {
    pub input_id: usize,
    pub hyps: Vec<Hypothesis>,
}

impl KBestList {
    pub fn len(&self) -> usize {
        self.hyps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hyps.is_empty()
    }

    /// The most likely output `ŷ`.
    pub fn best(&self) -> Option<&Hypothesis> {
        self.hyps.first()
    }

    /// Checks ordering, distinctness and length bound.
    pub fn check(&self, k: usize) -> Result<()> {
        if self.hyps.len() > k {
            return Err(Error::Invalid(format!(
                "{} hypotheses exceed k={k}",
                self.hyps.len()
            )));
        }
        if self.hyps.windows(2).any(|w| w[0].log_prob < w[1].log_prob) {
            return Err(Error::Invalid("k-best list not sorted".into()));
        }
        let distinct: HashSet<&[usize]> = self.hyps.iter().map(|h| h.tokens.as_slice()).collect();
        if distinct.len() != self.hyps.len() {
            return Err(Error::Invalid("k-best list has duplicates".into()));
        }
        Ok(())
    }
}

struct Live<T> {
    state: Tensor<T>,
    tokens: Vec<usize>,
    lps: Vec<f64>,
    total: f64,
}

/// Beam search returning up to `k` complete hypotheses.
///
/// Each step expands every live prefix by every target token, keeps the
/// `beam_size` best expansions, and retires those ending in EOS. At step
/// `max_len` only EOS is allowed. Scores are raw summed log-probabilities.
/// Search stops early once no live prefix can beat the `k`-th finished score.
pub fn beam_search<T: Scalar>(
    model: &Seq2Seq<T>,
    input_id: usize,
    x: &[usize],
    beam_size: usize,
    k: usize,
    max_len: usize,
) -> Result<KBestList> {
    if k == 0 || beam_size < k {
        return Err(Error::Invalid(format!(
            "beam search needs beam_size >= k >= 1 (beam_size={beam_size}, k={k})"
        )));
    }
    if max_len == 0 {
        return Err(Error::Invalid("max_len must be positive".into()));
    }
    let enc = model.encode(x)?;
    let vocab = model.tgt_vocab();
    let mut live = vec![Live {
        state: enc.init_state.clone(),
        tokens: Vec::new(),
        lps: Vec::new(),
        total: 0.0,
    }];
    let mut finished: Vec<Hypothesis> = Vec::new();

    for t in 1..=max_len {
        if live.is_empty() {
            break;
        }
        if finished.len() >= k {
            let kth = finished[k - 1].log_prob;
            if live.iter().all(|l| l.total < kth) {
                break;
            }
        }
        // (parent, token, token log-prob, new total)
        let mut cands: Vec<(usize, usize, f64, f64)> = Vec::new();
        let mut next_states = Vec::with_capacity(live.len());
        for (pi, l) in live.iter().enumerate() {
            let prev = l.tokens.last().copied().unwrap_or(BOS);
            let (next, lp) = model.step(&enc, &l.state, prev)?;
            next_states.push(next);
            if t == max_len {
                let v = lp[EOS].as_f64();
                cands.push((pi, EOS, v, l.total + v));
            } else {
                for (tok, &v) in lp.iter().enumerate().take(vocab) {
                    let v = v.as_f64();
                    cands.push((pi, tok, v, l.total + v));
                }
            }
        }
        cands.sort_by(|a, b| {
            b.3.partial_cmp(&a.3)
                .unwrap_or(Ordering::Equal)
                .then_with(|| (a.0, a.1).cmp(&(b.0, b.1)))
        });
        cands.truncate(beam_size);

        let mut new_live = Vec::new();
        for (pi, tok, v, total) in cands {
            let parent = &live[pi];
            let mut tokens = parent.tokens.clone();
            tokens.push(tok);
            let mut lps = parent.lps.clone();
            lps.push(v);
            if tok == EOS {
                finished.push(Hypothesis {
                    tokens,
                    token_log_probs: lps,
                    log_prob: total,
                });
            } else {
                new_live.push(Live {
                    state: next_states[pi].clone(),
                    tokens,
                    lps,
                    total,
                });
            }
        }
        finished.sort_by(rank_order);
        live = new_live;
    }

    finished.truncate(k);
    Ok(KBestList {
        input_id,
        hyps: finished,
    })
}

/// Most likely next token at every step.
pub fn greedy<T: Scalar>(model: &Seq2Seq<T>, x: &[usize], max_len: usize) -> Result<Hypothesis> {
    let enc = model.encode(x)?;
    let mut state = enc.init_state.clone();
    let mut tokens = Vec::new();
    let mut lps = Vec::new();
    let mut prev = BOS;
    for t in 1..=max_len {
        let (next, lp) = model.step(&enc, &state, prev)?;
        let tok = if t == max_len { EOS } else { argmax(&lp) };
        tokens.push(tok);
        lps.push(lp[tok].as_f64());
        if tok == EOS {
            break;
        }
        state = next;
        prev = tok;
    }
    Ok(Hypothesis::new(tokens, lps))
}

fn argmax<T: Scalar>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Draws `count` sequences token by token from the model distribution. With
/// `dedup`, repeated token sequences are dropped (first occurrence kept), so
/// the result may be shorter than `count`.
pub fn sample<T: Scalar, R: Rng>(
    model: &Seq2Seq<T>,
    x: &[usize],
    count: usize,
    dedup: bool,
    max_len: usize,
    rng: &mut R,
) -> Result<Vec<Hypothesis>> {
    if count == 0 {
        return Err(Error::Invalid("sample count must be at least 1".into()));
    }
    let enc = model.encode(x)?;
    let mut out: Vec<Hypothesis> = Vec::with_capacity(count);
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    for _ in 0..count {
        let mut state = enc.init_state.clone();
        let mut tokens = Vec::new();
        let mut lps = Vec::new();
        let mut prev = BOS;
        for t in 1..=max_len {
            let (next, lp) = model.step(&enc, &state, prev)?;
            let tok = if t == max_len { EOS } else { draw(&lp, rng) };
            tokens.push(tok);
            lps.push(lp[tok].as_f64());
            if tok == EOS {
                break;
            }
            state = next;
            prev = tok;
        }
        if dedup && !seen.insert(tokens.clone()) {
            continue;
        }
        out.push(Hypothesis::new(tokens, lps));
    }
    Ok(out)
}

fn draw<T: Scalar, R: Rng>(log_probs: &[T], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &lp) in log_probs.iter().enumerate() {
        acc += lp.as_f64().exp();
        if u < acc {
            return i;
        }
    }
    // rounding left `acc` just below 1
    log_probs.len() - 1
}
