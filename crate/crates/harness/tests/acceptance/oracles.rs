//! Criteria checked against independent oracles on toy models and random
//! data.

use std::cmp::Ordering;
use std::collections::HashMap;

use rampkit_core::metrics::{bleu_plus1, delta1, delta2, NGramIndex};
use rampkit_core::objectives::{
    instance_loss, instance_loss_value, mrt_baseline, token_ramp_from_log_probs, MrtConfig,
    Objective,
};
use rampkit_core::rng::substream;
use rampkit_core::selectors::{
    select_full_mt, select_parsing, select_weak_mt, token_polarity, HopeFearPair, SelectorConfig,
    Variant, WeakMtContext,
};
use rampkit_core::vocab::EOS;
use rampkit_core::{beam_search, sample, Hypothesis, KBestList, ModelConfig, Seq2Seq, Tape};
use rand::Rng;

use crate::Verdict;

const FD_STEP: f64 = 1e-5;
const FD_TOL: f64 = 1e-4;
const FD_FLOOR: f64 = 1e-5;

fn toy_model(
    seed: u64,
    src: usize,
    tgt: usize,
    emb: usize,
    hidden: usize,
    scale: f64,
) -> Seq2Seq<f64> {
    let cfg = ModelConfig {
        init_scale: scale,
        ..ModelConfig::new(src, tgt).with_dims(emb, hidden)
    };
    Seq2Seq::new(cfg, &mut substream(seed, "init", 0)).unwrap()
}

fn hyp(tokens: &[usize]) -> Hypothesis {
    Hypothesis::new(tokens.to_vec(), Vec::new())
}

fn random_seq(rng: &mut impl Rng, vocab: usize, max: usize) -> Vec<usize> {
    let n = rng.gen_range(1..=max);
    let mut y: Vec<usize> = (0..n).map(|_| rng.gen_range(3..vocab)).collect();
    y.push(EOS);
    y
}

/// Largest relative error of the analytic gradient against central
/// differences over every parameter.
fn fd_error(model: &mut Seq2Seq<f64>, x: &[usize], objective: &Objective<'_>) -> f64 {
    let l = instance_loss(model, x, objective).unwrap();
    let mut store = model.params().clone();
    store.zero_grads();
    store.accumulate(&l.grads, 1.0).unwrap();
    let analytic = store.flat_grads();
    let mut worst: f64 = 0.0;
    for (k, &a) in analytic.iter().enumerate() {
        let orig = *model.params_mut().flat_value_mut(k);
        *model.params_mut().flat_value_mut(k) = orig + FD_STEP;
        let up = instance_loss_value(model, x, objective).unwrap();
        *model.params_mut().flat_value_mut(k) = orig - FD_STEP;
        let down = instance_loss_value(model, x, objective).unwrap();
        *model.params_mut().flat_value_mut(k) = orig;
        let n = (up - down) / (2.0 * FD_STEP);
        worst = worst.max((a - n).abs() / a.abs().max(n.abs()).max(FD_FLOOR));
    }
    worst
}

pub fn gradients() -> Verdict {
    const VOCAB: usize = 7;
    let start = std::time::Instant::now();
    let mut worst: Vec<(&str, f64)> = Vec::new();
    let mut params = 0;
    for name in ["MLE", "MRT", "MRT_neg", "RAMP", "RAMP-T"] {
        let mut w: f64 = 0.0;
        for seed in 0..20u64 {
            let mut m = toy_model(seed, 6, VOCAB, 3, 4, 0.5);
            params = m.params().numel();
            let rng = &mut substream(seed, name, 0);
            let x: Vec<usize> = (0..rng.gen_range(1..4))
                .map(|_| rng.gen_range(3..6))
                .collect();
            let err = match name {
                "MLE" => fd_error(
                    &mut m,
                    &x,
                    &Objective::Mle {
                        reference: &random_seq(rng, VOCAB, 3),
                    },
                ),
                "MRT" | "MRT_neg" => {
                    let mut samples: Vec<Hypothesis> =
                        (0..4).map(|_| hyp(&random_seq(rng, VOCAB, 3))).collect();
                    samples.sort_by(|a, b| a.tokens.cmp(&b.tokens));
                    samples.dedup_by(|a, b| a.tokens == b.tokens);
                    let cfg = MrtConfig {
                        neg_reward: name == "MRT_neg",
                        ..MrtConfig::default()
                    };
                    let rewards: Vec<f64> = samples
                        .iter()
                        .map(|_| cfg.shape_reward(f64::from(u8::from(rng.gen_bool(0.4)))))
                        .collect();
                    let base: Vec<f64> = (0..10)
                        .map(|_| cfg.shape_reward(f64::from(u8::from(rng.gen_bool(0.4)))))
                        .collect();
                    let mut e: f64 = 0.0;
                    for temperature in [1.0, 0.005] {
                        let obj = Objective::Mrt {
                            samples: &samples,
                            rewards: &rewards,
                            baseline: mrt_baseline(&base),
                            temperature,
                        };
                        e = e.max(fd_error(&mut m, &x, &obj));
                    }
                    e
                }
                "RAMP" => {
                    let hope = random_seq(rng, VOCAB, 2);
                    let mut fear = random_seq(rng, VOCAB, 2);
                    if fear == hope {
                        fear.insert(0, 3);
                    }
                    let pair = HopeFearPair::new(hyp(&hope), hyp(&fear));
                    fd_error(&mut m, &x, &Objective::Ramp { pair: &pair })
                }
                _ => {
                    let pair = HopeFearPair::new(
                        hyp(&random_seq(rng, VOCAB, 4)),
                        hyp(&random_seq(rng, VOCAB, 4)),
                    )
                    .with_polarity();
                    fd_error(&mut m, &x, &Objective::RampToken { pair: &pair })
                }
            };
            w = w.max(err);
        }
        worst.push((name, w));
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst.iter().all(|&(_, e)| e <= FD_TOL) && params <= 2000 && secs < 120.0;
    let detail = worst
        .iter()
        .map(|(n, e)| format!("{n} {e:.1e}"))
        .collect::<Vec<_>>()
        .join(", ");
    Verdict::new(
        pass,
        format!("max rel. error over 20 seeds, {params} params, vocab {VOCAB}: {detail}"),
    )
}

/// δ1 by scanning every sentence of the document for every n-gram of `y`.
fn delta1_oracle(y: &[u32], doc: &[Vec<u32>], src_len: usize, r: f64, n_max: usize) -> f64 {
    if y.is_empty() {
        return 0.0;
    }
    let mut sum = 0.0;
    for n in 1..=n_max {
        if y.len() < n {
            continue;
        }
        let (mut hit, mut all) = (0usize, 0usize);
        for i in 0..=y.len() - n {
            all += 1;
            let g = &y[i..i + n];
            if doc
                .iter()
                .any(|s| s.len() >= n && (0..=s.len() - n).any(|j| &s[j..j + n] == g))
            {
                hit += 1;
            }
        }
        sum += hit as f64 / all as f64;
    }
    sum / n_max as f64 * f64::min(1.0, r * y.len() as f64 / src_len as f64)
}

fn tokens(rng: &mut impl Rng, vocab: u32, min: usize, max: usize) -> Vec<u32> {
    let n = rng.gen_range(min..=max);
    (0..n).map(|_| rng.gen_range(0..vocab)).collect()
}

pub fn metrics() -> Verdict {
    let rng = &mut substream(2, "accept-metrics", 0);
    let mut d1_exact = 0;
    for _ in 0..200 {
        let y = tokens(rng, 8, 1, 9);
        let doc: Vec<Vec<u32>> = (0..rng.gen_range(1..4))
            .map(|_| tokens(rng, 8, 1, 12))
            .collect();
        let (len, r) = (rng.gen_range(1..12), rng.gen_range(0.5..1.5));
        let got = delta1(&y, &NGramIndex::new(&doc, 4), len, r, 4);
        d1_exact += usize::from(got == delta1_oracle(&y, &doc, len, r, 4));
    }
    let mut d2_exact = 0;
    for _ in 0..200 {
        let y = tokens(rng, 6, 1, 8);
        let dp = NGramIndex::new(&[tokens(rng, 6, 1, 10)], 4);
        let dm = NGramIndex::new(&[tokens(rng, 6, 1, 10)], 4);
        let (len, r) = (rng.gen_range(1..10), rng.gen_range(0.3..2.0));
        d2_exact +=
            usize::from(delta2(&y, &dp, &dm, len, r, 4) + delta2(&y, &dm, &dp, len, r, 4) == 1.0);
    }
    let r = ["a", "b", "c", "d"];
    let worked = bleu_plus1(&r, &r, 4) == 1.0
        && (bleu_plus1(&["a", "b"], &r, 4) - (-1.0f64).exp()).abs() <= 1e-15
        && bleu_plus1(&["x", "y"], &r, 4) == 0.0;
    // distinct-token sequences of length >= 4, half of them identical
    let mut iff = 0;
    for i in 0..200 {
        let mut pool: Vec<u32> = (0..12).collect();
        let n = rng.gen_range(4..=8);
        let reference: Vec<u32> = (0..n)
            .map(|_| pool.swap_remove(rng.gen_range(0..pool.len())))
            .collect();
        let y = if i % 2 == 0 {
            reference.clone()
        } else {
            let mut y = reference.clone();
            match rng.gen_range(0..3) {
                0 => y.swap(0, n - 1),
                1 => y[rng.gen_range(0..n)] = pool[0],
                _ => y.truncate(n - 1),
            }
            y
        };
        iff += usize::from((bleu_plus1(&y, &reference, 4) == 1.0) == (y == reference));
    }
    Verdict::new(
        d1_exact == 200 && d2_exact == 200 && worked && iff == 200,
        format!(
            "δ1 exact {d1_exact}/200, δ2 antisymmetric {d2_exact}/200, worked examples {}, BLEU+1 iff {iff}/200",
            if worked { "ok" } else { "wrong" }
        ),
    )
}

pub fn polarity() -> Verdict {
    let fig =
        token_polarity(&["a", "small", "house"], &["the", "house"]) == (vec![1, 1, 0], vec![-1, 0]);
    let (sp, sm) = token_polarity(&[4, 5, 6], &[6, 4, 5]);
    let shared = sp.iter().chain(&sm).all(|&t| t == 0);
    let disjoint = token_polarity(&[4, 5], &[6, 7, 8]) == (vec![1, 1], vec![-1, -1, -1]);

    // gradient of the loss with respect to each token log-probability is −τ
    let mut zero_ok = true;
    let mut zeros = 0;
    for seed in 0..10u64 {
        let m = toy_model(seed, 6, 9, 3, 4, 0.5);
        let rng = &mut substream(seed, "tau", 0);
        let pair = HopeFearPair::new(hyp(&random_seq(rng, 9, 5)), hyp(&random_seq(rng, 9, 5)))
            .with_polarity();
        let pol = pair.polarity.clone().unwrap();
        let mut tape = Tape::new(m.params());
        let b = m.bind(&mut tape);
        let enc = m.encode_on(&mut tape, &b, &[4, 5, 3]).unwrap();
        let hl = m
            .log_probs_on(&mut tape, &b, &enc, &pair.hope.tokens)
            .unwrap();
        let fl = m
            .log_probs_on(&mut tape, &b, &enc, &pair.fear.tokens)
            .unwrap();
        let Some(loss) =
            token_ramp_from_log_probs(&mut tape, &hl, &pol.hope, &fl, &pol.fear).unwrap()
        else {
            continue;
        };
        let back = tape.backward(loss).unwrap();
        for (lps, tau) in [(&hl, &pol.hope), (&fl, &pol.fear)] {
            for (&lp, &t) in lps.iter().zip(tau.iter()) {
                let g = back.grad(lp).map_or(0.0, |g| g.item());
                if t == 0 {
                    zeros += 1;
                    zero_ok &= g == 0.0;
                } else {
                    zero_ok &= g == -f64::from(t);
                }
            }
        }
    }
    Verdict::new(
        fig && shared && disjoint && zero_ok && zeros > 0,
        format!(
            "figure example {}, all-shared {}, all-disjoint {}, {zeros} τ=0 positions with zero gradient: {}",
            ok(fig),
            ok(shared),
            ok(disjoint),
            ok(zero_ok)
        ),
    )
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "wrong"
    }
}

/// Rank maximising `(objective, score)`, first rank on ties.
fn argmax(objective: &[f64], scores: &[f64], allowed: impl Fn(usize) -> bool) -> Option<usize> {
    let mut idx: Vec<usize> = (0..objective.len()).filter(|&i| allowed(i)).collect();
    idx.sort_by(|&a, &b| {
        objective[b]
            .partial_cmp(&objective[a])
            .unwrap_or(Ordering::Equal)
            .then(scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal))
            .then(a.cmp(&b))
    });
    idx.first().copied()
}

fn hope_obj(s: &[f64], d: &[f64], a: f64) -> Vec<f64> {
    s.iter().zip(d).map(|(s, d)| s - a * (1.0 - d)).collect()
}

fn fear_obj(s: &[f64], d: &[f64], a: f64) -> Vec<f64> {
    s.iter().zip(d).map(|(s, d)| s + a * (1.0 - d)).collect()
}

/// Sorted list of distinct outputs; log-probabilities on a coarse grid so
/// that score ties occur.
fn random_kbest(rng: &mut impl Rng, n: usize) -> KBestList {
    let mut hyps: Vec<Hypothesis> = Vec::new();
    while hyps.len() < n {
        let mut t: Vec<usize> = (0..rng.gen_range(1..5))
            .map(|_| rng.gen_range(3..8))
            .collect();
        t.push(EOS);
        if hyps.iter().any(|h| h.tokens == t) {
            continue;
        }
        let lp = -(rng.gen_range(0..8) as f64) * 0.5;
        let mut lps = vec![0.0; t.len()];
        lps[0] = lp;
        hyps.push(Hypothesis::new(t, lps));
    }
    hyps.sort_by(|a, b| {
        b.log_prob
            .partial_cmp(&a.log_prob)
            .unwrap()
            .then(a.tokens.cmp(&b.tokens))
    });
    KBestList { input_id: 0, hyps }
}

fn bleu_oracle(y: &[usize], r: &[usize]) -> f64 {
    if y.is_empty() {
        return 0.0;
    }
    let count = |s: &[usize], g: &[usize]| {
        if s.len() < g.len() {
            0
        } else {
            (0..=s.len() - g.len())
                .filter(|&i| &s[i..i + g.len()] == g)
                .count()
        }
    };
    let mut prod = 1.0f64;
    for n in 1..=4 {
        let (mut m, mut t) = (0usize, 0usize);
        if y.len() >= n {
            let mut seen: Vec<&[usize]> = Vec::new();
            for i in 0..=y.len() - n {
                let g = &y[i..i + n];
                t += 1;
                if !seen.contains(&g) {
                    seen.push(g);
                    m += count(y, g).min(count(r, g));
                }
            }
        }
        prod *= if n > 1 {
            (m as f64 + 1.0) / (t as f64 + 1.0)
        } else {
            m as f64 / t as f64
        };
    }
    let bp = if y.len() < r.len() {
        (1.0 - r.len() as f64 / y.len() as f64).exp()
    } else {
        1.0
    };
    prod.powf(0.25) * bp
}

pub fn selectors() -> Verdict {
    let rng = &mut substream(4, "accept-select", 0);
    let (mut checked, mut agree) = (0usize, 0usize);
    let mut check = |same: bool| {
        checked += 1;
        agree += usize::from(same);
    };
    for _ in 0..100 {
        let n = rng.gen_range(1..=8);
        let kb = random_kbest(rng, n);
        let s: Vec<f64> = kb.hyps.iter().map(|h| h.log_prob).collect();
        let pos = |i: usize| &kb.hyps[i];

        // parsing: binary rewards, no cache
        let rewards: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_bool(0.4) as u8)).collect();
        let p = argmax(&s, &s, |i| rewards[i] == 1.0);
        let q = argmax(&s, &s, |i| rewards[i] == 0.0);
        for (v, want) in [
            (Variant::Ramp, p.zip(q)),
            (Variant::Ramp1, q.map(|q| (0, q))),
            (Variant::Ramp2, p.map(|p| (p, 0))),
        ] {
            let got = select_parsing(&kb, &rewards, None, &SelectorConfig::new(v, 1.0)).unwrap();
            check(match (got, want) {
                (Some(g), Some((h, f))) => g.hope == *pos(h) && g.fear == *pos(f),
                (None, None) => true,
                _ => false,
            });
        }

        // weak MT: document rewards recomputed by scanning
        let vocab = 8u32;
        let doc_p: Vec<Vec<u32>> = (0..2).map(|_| tokens(rng, vocab, 2, 6)).collect();
        let doc_m: Vec<Vec<u32>> = (0..2).map(|_| tokens(rng, vocab, 2, 6)).collect();
        let as_u32 = |h: &Hypothesis| h.content().iter().map(|&t| t as u32).collect::<Vec<u32>>();
        let (len, r) = (rng.gen_range(1..6), rng.gen_range(0.5..1.5));
        let dp: Vec<f64> = kb
            .hyps
            .iter()
            .map(|h| delta1_oracle(&as_u32(h), &doc_p, len, r, 4))
            .collect();
        let dm: Vec<f64> = kb
            .hyps
            .iter()
            .map(|h| delta1_oracle(&as_u32(h), &doc_m, len, r, 4))
            .collect();
        let d2: Vec<f64> = dp
            .iter()
            .zip(&dm)
            .map(|(p, m)| 0.5 * (p - m + 1.0))
            .collect();
        let alpha = [0.0, 0.5, 2.0, 10.0][rng.gen_range(0..4)];
        let to_usize = |d: &[Vec<u32>]| {
            d.iter()
                .map(|s| s.iter().map(|&t| t as usize).collect())
                .collect::<Vec<Vec<usize>>>()
        };
        let (ip, im) = (
            NGramIndex::new(&to_usize(&doc_p), 4),
            NGramIndex::new(&to_usize(&doc_m), 4),
        );
        let ctx = WeakMtContext {
            relevant: &ip,
            irrelevant: Some(&im),
            src_len: len,
            length_ratio: r,
            max_order: 4,
        };
        let all = |_| true;
        let hp = argmax(&hope_obj(&s, &dp, alpha), &s, all).unwrap();
        for (v, (h, f)) in [
            (
                Variant::Ramp,
                (hp, argmax(&fear_obj(&s, &dp, alpha), &s, all).unwrap()),
            ),
            (
                Variant::RampMinus,
                (hp, argmax(&hope_obj(&s, &dm, alpha), &s, all).unwrap()),
            ),
            (
                Variant::Ramp1Minus,
                (0, argmax(&hope_obj(&s, &dm, alpha), &s, all).unwrap()),
            ),
            (Variant::Ramp2, (hp, 0)),
            (
                Variant::RampDelta2,
                (
                    argmax(&hope_obj(&s, &d2, alpha), &s, all).unwrap(),
                    argmax(&fear_obj(&s, &d2, alpha), &s, all).unwrap(),
                ),
            ),
        ] {
            let g = select_weak_mt(&kb, &ctx, &SelectorConfig::new(v, alpha)).unwrap();
            check(g.hope == *pos(h) && g.fear == *pos(f));
        }

        // full MT: BLEU+1 against a reference
        let mut rt: Vec<usize> = (0..rng.gen_range(1..5))
            .map(|_| rng.gen_range(3..8))
            .collect();
        rt.push(EOS);
        let reference = Hypothesis::new(rt, vec![-1.0; 1]);
        let b: Vec<f64> = kb
            .hyps
            .iter()
            .map(|h| bleu_oracle(h.content(), reference.content()))
            .collect();
        let hb = argmax(&hope_obj(&s, &b, alpha), &s, all).unwrap();
        let fb = argmax(&fear_obj(&s, &b, alpha), &s, all).unwrap();
        for (v, (h, f)) in [
            (Variant::Ramp, (Some(hb), fb)),
            (Variant::Ramp1, (Some(0), fb)),
            (Variant::Ramp2, (Some(hb), 0)),
            (Variant::Perc1, (None, 0)),
            (Variant::Perc2, (Some(argmax(&b, &s, all).unwrap()), 0)),
        ] {
            let g = select_full_mt(&kb, &reference, &SelectorConfig::new(v, alpha), 4).unwrap();
            let hope = h.map_or(&reference, pos);
            check(g.hope == *hope && g.fear == *pos(f));
        }
    }
    Verdict::new(
        agree == checked,
        format!("{agree}/{checked} selections match exhaustive argmax (100 lists, k ≤ 8)"),
    )
}

pub fn mrt_bipolarity() -> Verdict {
    let mut equal_zero = true;
    let mut neg_positive = true;
    let mut plain_ignores = true;
    for seed in 0..10u64 {
        let m = toy_model(seed, 6, 7, 3, 4, 0.5);
        let rng = &mut substream(seed, "bipolar", 0);
        let x = [4, 5];
        let mut samples: Vec<Hypothesis> = (0..6).map(|_| hyp(&random_seq(rng, 7, 3))).collect();
        samples.sort_by(|a, b| a.tokens.cmp(&b.tokens));
        samples.dedup_by(|a, b| a.tokens == b.tokens);
        let k = samples.len();
        for c in [0.0, 1.0, 0.37] {
            let rewards = vec![c; k];
            let l = instance_loss(
                &m,
                &x,
                &Objective::Mrt {
                    samples: &samples,
                    rewards: &rewards,
                    baseline: mrt_baseline(&[c; 10]),
                    temperature: 0.005,
                },
            )
            .unwrap();
            equal_zero &= l.value == 0.0 && l.grads.is_zero();
        }
        let neg = MrtConfig {
            neg_reward: true,
            ..MrtConfig::default()
        };
        for (cfg, baseline_raw) in [(neg, vec![]), (neg, vec![1.0, 0.0, 0.0])] {
            let rewards = vec![cfg.shape_reward(0.0); k];
            let base: Vec<f64> = baseline_raw.iter().map(|&r| cfg.shape_reward(r)).collect();
            let l = instance_loss(
                &m,
                &x,
                &Objective::Mrt {
                    samples: &samples,
                    rewards: &rewards,
                    baseline: mrt_baseline(&base),
                    temperature: 0.005,
                },
            )
            .unwrap();
            neg_positive &= l.value > 0.0;
        }
        let plain = MrtConfig::default();
        let rewards = vec![plain.shape_reward(0.0); k];
        let l = instance_loss(
            &m,
            &x,
            &Objective::Mrt {
                samples: &samples,
                rewards: &rewards,
                baseline: 0.0,
                temperature: 0.005,
            },
        )
        .unwrap();
        plain_ignores &= l.value == 0.0 && l.grads.is_zero();
    }
    Verdict::new(
        equal_zero && neg_positive && plain_ignores,
        format!(
            "equal rewards with baseline give zero loss and gradient: {}; all-wrong with neg reward gives positive loss: {}; \
             all-wrong without neg reward is ignored: {}",
            ok(equal_zero),
            ok(neg_positive),
            ok(plain_ignores)
        ),
    )
}

const VT: usize = 4;
const L: usize = 3;

fn all_outputs() -> Vec<Vec<usize>> {
    let content: Vec<usize> = (0..VT).filter(|&t| t != EOS).collect();
    let mut out = vec![vec![EOS]];
    let mut frontier = vec![Vec::new()];
    for _ in 1..L {
        let mut next = Vec::new();
        for p in &frontier {
            for &t in &content {
                let mut q: Vec<usize> = p.clone();
                q.push(t);
                let mut done = q.clone();
                done.push(EOS);
                out.push(done);
                next.push(q);
            }
        }
        frontier = next;
    }
    out
}

pub fn decoder() -> Verdict {
    let outputs = all_outputs();
    let (mut lists, mut exact) = (0, 0);
    for seed in 0..10u64 {
        let m = toy_model(seed, 6, VT, 3, 5, 1.5);
        let x = [4, 5, 4];
        let mut ranked: Vec<(f64, Vec<usize>)> = outputs
            .iter()
            .map(|y| (m.score_sequence(&x, y).unwrap().iter().sum(), y.clone()))
            .collect();
        ranked.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(Ordering::Equal)
                .then(a.1.cmp(&b.1))
        });
        for k in 1..=outputs.len() {
            let kb = beam_search(&m, 0, &x, VT.pow(L as u32), k, L).unwrap();
            lists += 1;
            exact += usize::from(
                kb.len() == k
                    && kb
                        .hyps
                        .iter()
                        .zip(&ranked)
                        .all(|(h, (s, y))| &h.tokens == y && (h.log_prob - s).abs() <= 1e-12),
            );
        }
    }

    let m = toy_model(7, 6, VT, 3, 5, 1.0);
    let x = [4, 5];
    // the final EOS at step L is forced, not drawn
    let probs: HashMap<Vec<usize>, f64> = outputs
        .iter()
        .map(|y| {
            let lps = m.score_sequence(&x, y).unwrap();
            let drawn = if y.len() == L {
                &lps[..L - 1]
            } else {
                &lps[..]
            };
            (y.clone(), drawn.iter().sum::<f64>().exp())
        })
        .collect();
    let n = 100_000;
    let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
    for d in sample(&m, &x, n, false, L, &mut substream(11, "accept-sample", 0)).unwrap() {
        *counts.entry(d.tokens).or_default() += 1;
    }
    let mut worst: f64 = 0.0;
    for (y, &p) in &probs {
        let f = counts.get(y).copied().unwrap_or(0) as f64 / n as f64;
        worst = worst.max((f - p).abs() / (p * (1.0 - p) / n as f64).sqrt());
    }
    let unknown = counts.keys().filter(|y| !probs.contains_key(*y)).count();
    Verdict::new(
        exact == lists && worst <= 3.0 && unknown == 0,
        format!(
            "beam = enumeration on {exact}/{lists} lists ({} outputs); max sampling deviation {worst:.2} SE over 1e5 draws",
            outputs.len()
        ),
    )
}
