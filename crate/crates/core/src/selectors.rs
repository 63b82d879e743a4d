//! Hope/fear selection over k-best lists and token-level polarities.
//!
//! Model scores are log-probabilities. For weak and full MT the hope
//! maximises `score − α(1 − δ)` and the fear maximises `score + α(1 − δ)`.
//! Ties go to the higher model score, then to the lower rank.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::hash::Hash;
use std::str::FromStr;

use crate::decode::{Hypothesis, KBestList};
use crate::error::{Error, Result};
use crate::metrics::{delta1, delta2_from, NGramIndex};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    Ramp,
    Ramp1,
    Ramp2,
    RampMinus,
    Ramp1Minus,
    RampDelta2,
    Perc1,
    Perc2,
}

impl Variant {
    pub const ALL: [Variant; 8] = [
        Variant::Ramp,
        Variant::Ramp1,
        Variant::Ramp2,
        Variant::RampMinus,
        Variant::Ramp1Minus,
        Variant::RampDelta2,
        Variant::Perc1,
        Variant::Perc2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Ramp => "RAMP",
            Variant::Ramp1 => "RAMP1",
            Variant::Ramp2 => "RAMP2",
            Variant::RampMinus => "RAMP-",
            Variant::Ramp1Minus => "RAMP1-",
            Variant::RampDelta2 => "RAMP_D2",
            Variant::Perc1 => "PERC1",
            Variant::Perc2 => "PERC2",
        }
    }

    /// Whether the variant needs an irrelevant document.
    pub fn needs_irrelevant(self) -> bool {
        matches!(
            self,
            Variant::RampMinus | Variant::Ramp1Minus | Variant::RampDelta2
        )
    }

    pub fn valid_for_parsing(self) -> bool {
        matches!(self, Variant::Ramp | Variant::Ramp1 | Variant::Ramp2)
    }

    pub fn valid_for_weak_mt(self) -> bool {
        matches!(
            self,
            Variant::Ramp
                | Variant::RampMinus
                | Variant::Ramp1Minus
                | Variant::Ramp2
                | Variant::RampDelta2
        )
    }

    pub fn valid_for_full_mt(self) -> bool {
        matches!(
            self,
            Variant::Ramp | Variant::Ramp1 | Variant::Ramp2 | Variant::Perc1 | Variant::Perc2
        )
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('⁻', "-");
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == norm)
            .or(match norm.as_str() {
                "RAMP_DELTA2" | "RAMPD2" => Some(Variant::RampDelta2),
                "RAMP_MINUS" => Some(Variant::RampMinus),
                "RAMP1_MINUS" => Some(Variant::Ramp1Minus),
                _ => None,
            })
            .ok_or_else(|| Error::Invalid(format!("unknown selector variant {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SelectorConfig {
    pub variant: Variant,
    pub alpha_ramp: f64,
    pub token_level: bool,
}

impl SelectorConfig {
    pub fn new(variant: Variant, alpha_ramp: f64) -> Self {
        Self {
            variant,
            alpha_ramp,
            token_level: false,
        }
    }

    pub fn token_level(mut self, on: bool) -> Self {
        self.token_level = on;
        self
    }
}

/// Per-token polarities: `hope` values in {0, 1}, `fear` values in {0, −1}.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Polarity {
    pub hope: Vec<i8>,
    pub fear: Vec<i8>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HopeFearPair {
    pub hope: Hypothesis,
    pub fear: Hypothesis,
    pub polarity: Option<Polarity>,
}

impl HopeFearPair {
    pub fn new(hope: Hypothesis, fear: Hypothesis) -> Self {
        Self {
            hope,
            fear,
            polarity: None,
        }
    }

    /// Attaches token polarities computed over the full token sequences.
    pub fn with_polarity(mut self) -> Self {
        let (hope, fear) = token_polarity(&self.hope.tokens, &self.fear.tokens);
        self.polarity = Some(Polarity { hope, fear });
        self
    }

    pub fn is_degenerate(&self) -> bool {
        self.hope.tokens == self.fear.tokens
    }
}

/// `τ⁺_j = 0` if `hope[j]` occurs anywhere in `fear`, else 1; `τ⁻_j = 0` if
/// `fear[j]` occurs anywhere in `hope`, else −1.
pub fn token_polarity<Tok: Eq + Hash>(hope: &[Tok], fear: &[Tok]) -> (Vec<i8>, Vec<i8>) {
    let in_hope: HashSet<&Tok> = hope.iter().collect();
    let in_fear: HashSet<&Tok> = fear.iter().collect();
    let tp = hope
        .iter()
        .map(|t| if in_fear.contains(t) { 0 } else { 1 })
        .collect();
    let tm = fear
        .iter()
        .map(|t| if in_hope.contains(t) { 0 } else { -1 })
        .collect();
    (tp, tm)
}

/// Index maximising `objective[i]`, ties to higher `scores[i]`, then lower
/// index. Only indices where `allowed` holds are considered.
pub fn argmax_tiebreak(
    objective: &[f64],
    scores: &[f64],
    allowed: impl Fn(usize) -> bool,
) -> Option<usize> {
    let mut best: Option<usize> = None;
    for i in 0..objective.len() {
        if !allowed(i) {
            continue;
        }
        best = match best {
            None => Some(i),
            Some(b) => {
                let better = objective[i] > objective[b]
                    || (objective[i] == objective[b] && scores[i] > scores[b]);
                Some(if better { i } else { b })
            }
        };
    }
    best
}

/// `argmax score(y) − α(1 − δ(y))`.
pub fn hope_index(scores: &[f64], deltas: &[f64], alpha: f64) -> usize {
    let obj: Vec<f64> = scores
        .iter()
        .zip(deltas)
        .map(|(&s, &d)| s - alpha * (1.0 - d))
        .collect();
    argmax_tiebreak(&obj, scores, |_| true).expect("non-empty k-best list")
}

/// `argmax score(y) + α(1 − δ(y))`.
pub fn fear_index(scores: &[f64], deltas: &[f64], alpha: f64) -> usize {
    let obj: Vec<f64> = scores
        .iter()
        .zip(deltas)
        .map(|(&s, &d)| s + alpha * (1.0 - d))
        .collect();
    argmax_tiebreak(&obj, scores, |_| true).expect("non-empty k-best list")
}

/// Where a selected output comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pick {
    /// Position in the k-best list (0 is `ŷ`).
    Rank(usize),
    /// The reference translation.
    Reference,
}

/// Hope and fear picks for weak MT. `d_plus`/`d_minus` are δ1 against the
/// relevant and irrelevant document, aligned with `scores`.
pub fn weak_mt_picks(
    variant: Variant,
    alpha: f64,
    scores: &[f64],
    d_plus: &[f64],
    d_minus: Option<&[f64]>,
) -> Result<(Pick, Pick)> {
    if scores.is_empty() {
        return Err(Error::Invalid("empty k-best list".into()));
    }
    if !variant.valid_for_weak_mt() {
        return Err(Error::Invalid(format!(
            "{variant} is not a weak-MT variant"
        )));
    }
    let need_minus =
        || d_minus.ok_or_else(|| Error::Invalid(format!("{variant} needs an irrelevant document")));
    let (hope, fear) = match variant {
        Variant::Ramp => (
            hope_index(scores, d_plus, alpha),
            fear_index(scores, d_plus, alpha),
        ),
        Variant::RampMinus => (
            hope_index(scores, d_plus, alpha),
            hope_index(scores, need_minus()?, alpha),
        ),
        Variant::Ramp1Minus => (0, hope_index(scores, need_minus()?, alpha)),
        Variant::Ramp2 => (hope_index(scores, d_plus, alpha), 0),
        Variant::RampDelta2 => {
            let dm = need_minus()?;
            let d2: Vec<f64> = d_plus
                .iter()
                .zip(dm)
                .map(|(&p, &m)| delta2_from(p, m))
                .collect();
            (
                hope_index(scores, &d2, alpha),
                fear_index(scores, &d2, alpha),
            )
        }
        _ => unreachable!(),
    };
    Ok((Pick::Rank(hope), Pick::Rank(fear)))
}

/// Hope and fear picks for fully supervised MT; `bleu` is BLEU+1 against the
/// reference.
pub fn full_mt_picks(
    variant: Variant,
    alpha: f64,
    scores: &[f64],
    bleu: &[f64],
) -> Result<(Pick, Pick)> {
    if scores.is_empty() {
        return Err(Error::Invalid("empty k-best list".into()));
    }
    let r = Pick::Rank;
    Ok(match variant {
        Variant::Ramp => (
            r(hope_index(scores, bleu, alpha)),
            r(fear_index(scores, bleu, alpha)),
        ),
        Variant::Ramp1 => (r(0), r(fear_index(scores, bleu, alpha))),
        Variant::Ramp2 => (r(hope_index(scores, bleu, alpha)), r(0)),
        Variant::Perc1 => (Pick::Reference, r(0)),
        Variant::Perc2 => (
            r(argmax_tiebreak(bleu, scores, |_| true).expect("non-empty")),
            r(0),
        ),
        _ => {
            return Err(Error::Invalid(format!(
                "{variant} is not a full-MT variant"
            )))
        }
    })
}

/// Reward inputs for weak MT: the n-gram sets of the relevant and (optional)
/// irrelevant documents plus the brevity-penalty parameters.
#[derive(Clone, Debug)]
pub struct WeakMtContext<'a> {
    pub relevant: &'a NGramIndex<usize>,
    pub irrelevant: Option<&'a NGramIndex<usize>>,
    pub src_len: usize,
    pub length_ratio: f64,
    pub max_order: usize,
}

impl WeakMtContext<'_> {
    pub fn delta1_relevant(&self, y: &[usize]) -> f64 {
        delta1(
            y,
            self.relevant,
            self.src_len,
            self.length_ratio,
            self.max_order,
        )
    }

    pub fn delta1_irrelevant(&self, y: &[usize]) -> Option<f64> {
        self.irrelevant
            .map(|d| delta1(y, d, self.src_len, self.length_ratio, self.max_order))
    }

    pub fn delta2(&self, y: &[usize]) -> Option<f64> {
        self.delta1_irrelevant(y)
            .map(|m| delta2_from(self.delta1_relevant(y), m))
    }
}

fn finish(pair: HopeFearPair, cfg: &SelectorConfig) -> HopeFearPair {
    if cfg.token_level {
        pair.with_polarity()
    } else {
        pair
    }
}

fn scores_of(kbest: &KBestList) -> Vec<f64> {
    kbest.hyps.iter().map(|h| h.log_prob).collect()
}

pub fn select_weak_mt(
    kbest: &KBestList,
    ctx: &WeakMtContext<'_>,
    cfg: &SelectorConfig,
) -> Result<HopeFearPair> {
    if cfg.variant.needs_irrelevant() && ctx.irrelevant.is_none() {
        return Err(Error::Invalid(format!(
            "{} needs an irrelevant document",
            cfg.variant
        )));
    }
    let scores = scores_of(kbest);
    let d_plus: Vec<f64> = kbest
        .hyps
        .iter()
        .map(|h| ctx.delta1_relevant(h.content()))
        .collect();
    let d_minus: Option<Vec<f64>> = ctx.irrelevant.map(|_| {
        kbest
            .hyps
            .iter()
            .map(|h| ctx.delta1_irrelevant(h.content()).unwrap_or(0.0))
            .collect()
    });
    let (hp, fp) = weak_mt_picks(
        cfg.variant,
        cfg.alpha_ramp,
        &scores,
        &d_plus,
        d_minus.as_deref(),
    )?;
    let get = |p: Pick| match p {
        Pick::Rank(i) => kbest.hyps[i].clone(),
        Pick::Reference => unreachable!(),
    };
    Ok(finish(HopeFearPair::new(get(hp), get(fp)), cfg))
}

/// `reference` is the teacher-forced reference, used only by PERC1.
pub fn select_full_mt(
    kbest: &KBestList,
    reference: &Hypothesis,
    cfg: &SelectorConfig,
    max_order: usize,
) -> Result<HopeFearPair> {
    let scores = scores_of(kbest);
    let bleu: Vec<f64> = kbest
        .hyps
        .iter()
        .map(|h| crate::metrics::bleu_plus1(h.content(), reference.content(), max_order))
        .collect();
    let (hp, fp) = full_mt_picks(cfg.variant, cfg.alpha_ramp, &scores, &bleu)?;
    let get = |p: Pick| match p {
        Pick::Rank(i) => kbest.hyps[i].clone(),
        Pick::Reference => reference.clone(),
    };
    Ok(finish(HopeFearPair::new(get(hp), get(fp)), cfg))
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CacheEntry {
    pub hope: Option<Hypothesis>,
    pub fear: Option<Hypothesis>,
}

/// Last hope and fear found for each input. Entries are overwritten by newer
/// finds and never removed.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct HopeFearCache {
    entries: BTreeMap<usize, CacheEntry>,
}

impl HopeFearCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, input_id: usize) -> Option<&CacheEntry> {
        self.entries.get(&input_id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn store_hope(&mut self, input_id: usize, h: &Hypothesis) {
        self.entries.entry(input_id).or_default().hope = Some(h.clone());
    }

    pub fn store_fear(&mut self, input_id: usize, h: &Hypothesis) {
        self.entries.entry(input_id).or_default().fear = Some(h.clone());
    }

    /// Text form: `input_id<TAB>hope|fear<TAB>log_prob<TAB>space-separated ids`.
    /// Per-token log-probabilities are not kept; the loaded hypothesis has
    /// an empty `token_log_probs` and is re-scored when used.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (id, e) in &self.entries {
            for (side, h) in [("hope", &e.hope), ("fear", &e.fear)] {
                if let Some(h) = h {
                    let toks: Vec<String> = h.tokens.iter().map(usize::to_string).collect();
                    s.push_str(&format!(
                        "{id}\t{side}\t{:e}\t{}\n",
                        h.log_prob,
                        toks.join(" ")
                    ));
                }
            }
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cache = Self::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            let bad = |what: &str| Error::Invalid(format!("cache line {}: {what}", n + 1));
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 4 {
                return Err(bad("expected 4 tab-separated fields"));
            }
            let id: usize = f[0].parse().map_err(|_| bad("bad input id"))?;
            let log_prob: f64 = f[2].parse().map_err(|_| bad("bad log-probability"))?;
            let tokens: Vec<usize> = f[3]
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad("bad token id"))?;
            if tokens.is_empty() {
                return Err(bad("empty hypothesis"));
            }
            let h = Hypothesis {
                tokens,
                token_log_probs: Vec::new(),
                log_prob,
            };
            match f[1] {
                "hope" => cache.store_hope(id, &h),
                "fear" => cache.store_fear(id, &h),
                _ => return Err(bad("side must be hope or fear")),
            }
        }
        Ok(cache)
    }
}

/// Parsing selection. `rewards[i]` is the answer feedback (0 or 1) of
/// `kbest.hyps[i]`. Sides found in the list overwrite the cache; a missing
/// side falls back to the cache; `None` means the instance is skipped.
pub fn select_parsing(
    kbest: &KBestList,
    rewards: &[f64],
    cache: Option<&mut HopeFearCache>,
    cfg: &SelectorConfig,
) -> Result<Option<HopeFearPair>> {
    if !cfg.variant.valid_for_parsing() {
        return Err(Error::Invalid(format!(
            "{} is not a parsing variant",
            cfg.variant
        )));
    }
    if kbest.is_empty() {
        return Err(Error::Invalid("empty k-best list".into()));
    }
    if rewards.len() != kbest.len() {
        return Err(Error::Invalid(format!(
            "{} rewards for {} hypotheses",
            rewards.len(),
            kbest.len()
        )));
    }
    // the list is sorted, so the first match is the most probable
    let positive = rewards
        .iter()
        .position(|&r| r == 1.0)
        .map(|i| &kbest.hyps[i]);
    let negative = rewards
        .iter()
        .position(|&r| r == 0.0)
        .map(|i| &kbest.hyps[i]);
    let best = &kbest.hyps[0];
    let id = kbest.input_id;

    let mut cache = cache;
    let mut resolve = |found: Option<&Hypothesis>, hope_side: bool| -> Option<Hypothesis> {
        match (found, cache.as_deref_mut()) {
            (Some(h), Some(c)) => {
                if hope_side {
                    c.store_hope(id, h);
                } else {
                    c.store_fear(id, h);
                }
                Some(h.clone())
            }
            (Some(h), None) => Some(h.clone()),
            (None, Some(c)) => c.get(id).and_then(|e| {
                if hope_side {
                    e.hope.clone()
                } else {
                    e.fear.clone()
                }
            }),
            (None, None) => None,
        }
    };
    let (hope, fear) = match cfg.variant {
        Variant::Ramp => (resolve(positive, true), resolve(negative, false)),
        Variant::Ramp1 => (Some(best.clone()), resolve(negative, false)),
        Variant::Ramp2 => (resolve(positive, true), Some(best.clone())),
        _ => unreachable!(),
    };
    Ok(match (hope, fear) {
        (Some(h), Some(f)) => Some(finish(HopeFearPair::new(h, f), cfg)),
        _ => None,
    })
}
