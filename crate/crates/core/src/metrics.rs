//! Reward and evaluation metrics.
//!
//! * [`answer_feedback`]: binary reward comparing an executed answer to the
//!   gold answer.
//! * [`delta1`] / [`delta2`]: document-match rewards for translations when no
//!   reference exists. `delta1` is the mean n-gram precision of a hypothesis
//!   against the n-gram *set* of a document, times an input-length brevity
//!   penalty; `delta2` contrasts a relevant and an irrelevant document.
//! * [`bleu_plus1`]: per-sentence BLEU with add-one smoothing for n > 1.
//! * [`corpus_bleu`]: standard corpus BLEU (as a percentage).
//! * [`answer_f1`]: recall over all questions, precision over non-empty
//!   answers.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::hash::Hash;

use crate::error::{Error, Result};

/// Canonical answer: a finite set of strings. Order and duplicates of the
/// raw values do not matter.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Answer(BTreeSet<String>);

impl Answer {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Serialised form: values joined by `|`, sorted.
    pub fn to_field(&self) -> String {
        self.0.iter().cloned().collect::<Vec<_>>().join("|")
    }

    pub fn from_field(field: &str) -> Self {
        field.split('|').filter(|s| !s.is_empty()).collect()
    }
}

impl<S: Into<String>> FromIterator<S> for Answer {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self(iter.into_iter().map(Into::into).collect())
    }
}

/// 1 if the answers are equal after canonicalisation, else 0.
pub fn answer_feedback(answer: &Answer, gold: &Answer) -> f64 {
    if answer == gold {
        1.0
    } else {
        0.0
    }
}

/// Distinct n-grams of a document for orders `1..=max_order`. N-grams never
/// span sentence boundaries, so sentence order is irrelevant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NGramIndex<Tok: Eq + Hash> {
    orders: Vec<HashSet<Vec<Tok>>>,
}

impl<Tok: Eq + Hash + Clone> NGramIndex<Tok> {
    pub fn new<S: AsRef<[Tok]>>(sentences: &[S], max_order: usize) -> Self {
        let mut orders = vec![HashSet::new(); max_order];
        for s in sentences {
            let s = s.as_ref();
            for (n, set) in orders.iter_mut().enumerate() {
                set.extend(s.windows(n + 1).map(<[Tok]>::to_vec));
            }
        }
        Self { orders }
    }

    pub fn max_order(&self) -> usize {
        self.orders.len()
    }

    pub fn contains(&self, ngram: &[Tok]) -> bool {
        match ngram.len() {
            0 => false,
            n if n <= self.orders.len() => self.orders[n - 1].contains(ngram),
            _ => false,
        }
    }

    /// Number of distinct n-grams of order `n`.
    pub fn count(&self, n: usize) -> usize {
        self.orders.get(n.wrapping_sub(1)).map_or(0, HashSet::len)
    }
}

/// Input-length brevity penalty `min(1, r·|y| / |x|)`.
pub fn input_brevity_penalty(hyp_len: usize, src_len: usize, length_ratio: f64) -> f64 {
    if src_len == 0 {
        return 1.0;
    }
    (length_ratio * hyp_len as f64 / src_len as f64).min(1.0)
}

/// Mean n-gram precision of `y` against the n-gram set of a document, times
/// the input-length brevity penalty. Orders with no n-grams in `y` contribute
/// precision 0.
pub fn delta1<Tok: Eq + Hash + Clone>(
    y: &[Tok],
    doc: &NGramIndex<Tok>,
    src_len: usize,
    length_ratio: f64,
    max_order: usize,
) -> f64 {
    if y.is_empty() || max_order == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for n in 1..=max_order {
        if y.len() < n {
            continue;
        }
        let grams = y.len() - n + 1;
        let hits = y.windows(n).filter(|g| doc.contains(g)).count();
        total += hits as f64 / grams as f64;
    }
    total / max_order as f64 * input_brevity_penalty(y.len(), src_len, length_ratio)
}

/// `0.5 · (δ1(y, d⁺) − δ1(y, d⁻) + 1)`.
///
/// Evaluated so that swapping the two documents gives exactly `1 − value`.
pub fn delta2_from(d1_relevant: f64, d1_irrelevant: f64) -> f64 {
    let diff = d1_relevant - d1_irrelevant;
    if diff >= 0.0 {
        0.5 + 0.5 * diff
    } else {
        1.0 - (0.5 + 0.5 * -diff)
    }
}

pub fn delta2<Tok: Eq + Hash + Clone>(
    y: &[Tok],
    relevant: &NGramIndex<Tok>,
    irrelevant: &NGramIndex<Tok>,
    src_len: usize,
    length_ratio: f64,
    max_order: usize,
) -> f64 {
    delta2_from(
        delta1(y, relevant, src_len, length_ratio, max_order),
        delta1(y, irrelevant, src_len, length_ratio, max_order),
    )
}

fn ngram_counts<Tok: Eq + Hash + Clone>(s: &[Tok], n: usize) -> HashMap<&[Tok], usize> {
    let mut m = HashMap::new();
    for g in s.windows(n) {
        *m.entry(g).or_insert(0) += 1;
    }
    m
}

/// Clipped n-gram matches and hypothesis n-gram count for each order.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct BleuStats {
    pub matches: Vec<usize>,
    pub totals: Vec<usize>,
    pub hyp_len: usize,
    pub ref_len: usize,
}

impl BleuStats {
    pub fn new<Tok: Eq + Hash + Clone>(hyp: &[Tok], reference: &[Tok], max_order: usize) -> Self {
        let mut matches = Vec::with_capacity(max_order);
        let mut totals = Vec::with_capacity(max_order);
        for n in 1..=max_order {
            let h = ngram_counts(hyp, n);
            let r = ngram_counts(reference, n);
            matches.push(
                h.iter()
                    .map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0)))
                    .sum(),
            );
            totals.push(hyp.len().saturating_sub(n - 1));
        }
        Self {
            matches,
            totals,
            hyp_len: hyp.len(),
            ref_len: reference.len(),
        }
    }

    pub fn add(&mut self, other: &Self) {
        if self.matches.is_empty() {
            *self = other.clone();
            return;
        }
        for (a, b) in self.matches.iter_mut().zip(&other.matches) {
            *a += b;
        }
        for (a, b) in self.totals.iter_mut().zip(&other.totals) {
            *a += b;
        }
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
    }

    /// BLEU in `[0, 1]` from these statistics. With `smooth`, orders `n > 1`
    /// use `(matches + 1) / (total + 1)`.
    pub fn score(&self, smooth: bool) -> f64 {
        if self.hyp_len == 0 || self.matches.is_empty() {
            return 0.0;
        }
        let n_orders = self.matches.len();
        let mut log_sum = 0.0;
        for (i, (&m, &t)) in self.matches.iter().zip(&self.totals).enumerate() {
            let p = if smooth && i > 0 {
                (m as f64 + 1.0) / (t as f64 + 1.0)
            } else if t == 0 {
                0.0
            } else {
                m as f64 / t as f64
            };
            if p == 0.0 {
                return 0.0;
            }
            log_sum += p.ln();
        }
        let bp = (1.0 - self.ref_len as f64 / self.hyp_len as f64)
            .min(0.0)
            .exp();
        (log_sum / n_orders as f64).exp() * bp
    }
}

/// Sentence BLEU; `smooth` selects add-one smoothing for orders above 1.
pub fn sentence_bleu<Tok: Eq + Hash + Clone>(
    y: &[Tok],
    reference: &[Tok],
    max_order: usize,
    smooth: bool,
) -> f64 {
    if y.is_empty() {
        return 0.0;
    }
    BleuStats::new(y, reference, max_order).score(smooth)
}

/// Smoothed per-sentence BLEU used as a reward.
pub fn bleu_plus1<Tok: Eq + Hash + Clone>(y: &[Tok], reference: &[Tok], max_order: usize) -> f64 {
    sentence_bleu(y, reference, max_order, true)
}

/// Corpus BLEU ×100 from aggregated clipped counts.
pub fn corpus_bleu<Tok: Eq + Hash + Clone, H: AsRef<[Tok]>, R: AsRef<[Tok]>>(
    hyps: &[H],
    refs: &[R],
    max_order: usize,
) -> Result<f64> {
    if hyps.len() != refs.len() {
        return Err(Error::Invalid(format!(
            "{} hypotheses vs {} references",
            hyps.len(),
            refs.len()
        )));
    }
    if hyps.is_empty() {
        return Err(Error::Invalid("corpus BLEU of an empty set".into()));
    }
    let mut stats = BleuStats::default();
    for (h, r) in hyps.iter().zip(refs) {
        stats.add(&BleuStats::new(h.as_ref(), r.as_ref(), max_order));
    }
    Ok(100.0 * stats.score(false))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct F1Score {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub correct: usize,
    pub non_empty: usize,
    pub total: usize,
}

impl F1Score {
    pub fn from_counts(correct: usize, non_empty: usize, total: usize) -> Self {
        let recall = if total == 0 {
            0.0
        } else {
            correct as f64 / total as f64
        };
        let precision = if non_empty == 0 {
            0.0
        } else {
            correct as f64 / non_empty as f64
        };
        let f1 = if recall + precision == 0.0 {
            0.0
        } else {
            2.0 * recall * precision / (recall + precision)
        };
        Self {
            recall,
            precision,
            f1,
            correct,
            non_empty,
            total,
        }
    }
}

/// Answer recall, precision and F1 over `(answer, gold)` pairs. An answer is
/// correct when it is non-empty and equals the gold answer.
pub fn answer_f1(results: &[(Answer, Answer)]) -> F1Score {
    let correct = results
        .iter()
        .filter(|(a, g)| !a.is_empty() && answer_feedback(a, g) == 1.0)
        .count();
    let non_empty = results.iter().filter(|(a, _)| !a.is_empty()).count();
    F1Score::from_counts(correct, non_empty, results.len())
}
