mod common;

use common::{hyp, toy_model};
use rampkit_core::objectives::{
    instance_loss, instance_loss_value, mle_batch, mrt_baseline, token_ramp_from_log_probs,
    LossBatch, MrtConfig, Objective,
};
use rampkit_core::selectors::HopeFearPair;
use rampkit_core::vocab::EOS;
use rampkit_core::{Seq2Seq, Sgd, Tape, Vocab};

fn seq_lp(m: &Seq2Seq<f64>, x: &[usize], y: &[usize]) -> f64 {
    m.score_sequence(x, y).unwrap().iter().sum()
}

#[test]
fn mle_decreases_every_step_on_a_memorisable_pair() {
    let mut m = toy_model(0, 8, 10, 8, 12, 0.1);
    let x: &[usize] = &[4, 5, 6];
    let y: &[usize] = &[7, 8, 9, EOS];
    let opt = Sgd::new(0.5, 1.0);
    let mut prev = f64::INFINITY;
    for step in 0..50 {
        let loss = mle_batch(&mut m, &[(x, y)]).unwrap();
        assert!(loss < prev, "step {step}: {loss} >= {prev}");
        prev = loss;
        opt.step(m.params_mut());
    }
}

#[test]
fn mrt_two_sample_substitution() {
    let m = toy_model(1, 6, 7, 3, 4, 0.5);
    let x = [4, 5];
    let (a, b) = (vec![4, EOS], vec![5, 6, EOS]);
    let (la, lb) = (seq_lp(&m, &x, &a), seq_lp(&m, &x, &b));
    let (hi, lo, r) = if la > lb {
        (a, b, la - lb)
    } else {
        (b, a, lb - la)
    };
    // softmax(T·[l_hi, l_lo]) = [0.6, 0.4] when T·(l_hi − l_lo) = ln 1.5
    let temperature = 1.5f64.ln() / r;
    let samples = [hyp(&hi), hyp(&lo)];
    let obj = Objective::Mrt {
        samples: &samples,
        rewards: &[1.0, 0.0],
        baseline: 0.0,
        temperature,
    };
    assert!((instance_loss_value(&m, &x, &obj).unwrap() + 0.6).abs() <= 1e-12);
}

#[test]
fn mrt_baseline_and_neg_reward() {
    assert_eq!(mrt_baseline(&[]), 0.0);
    assert_eq!(mrt_baseline(&[1.0, 0.0, 0.5]), -0.5);
    let cfg = MrtConfig {
        neg_reward: true,
        ..MrtConfig::default()
    };
    assert_eq!(cfg.shape_reward(0.0), -1.0);
    assert_eq!(cfg.shape_reward(1.0), 1.0);
    assert_eq!(MrtConfig::default().shape_reward(0.0), 0.0);
    assert!(MrtConfig {
        temperature: 0.0,
        ..cfg
    }
    .validate()
    .is_err());
    assert!(MrtConfig { samples: 0, ..cfg }.validate().is_err());

    let m = toy_model(2, 6, 7, 3, 4, 0.5);
    let samples = [hyp(&[4, EOS]), hyp(&[5, EOS]), hyp(&[EOS])];
    let wrong: Vec<f64> = [0.0; 3].iter().map(|&r| cfg.shape_reward(r)).collect();
    let loss = |rewards: &[f64], baseline| {
        instance_loss_value(
            &m,
            &[4],
            &Objective::Mrt {
                samples: &samples,
                rewards,
                baseline,
                temperature: 0.005,
            },
        )
        .unwrap()
    };
    assert!((loss(&wrong, 0.0) - 1.0).abs() <= 1e-12);
    assert_eq!(loss(&[0.0; 3], 0.0), 0.0);
    assert!(instance_loss(
        &m,
        &[4],
        &Objective::Mrt {
            samples: &[],
            rewards: &[],
            baseline: 0.0,
            temperature: 1.0
        }
    )
    .is_err());
}

fn ramp_step(seed: u64, lr: f64) -> (Seq2Seq<f64>, Seq2Seq<f64>, HopeFearPair) {
    let before = toy_model(seed, 6, 7, 3, 4, 0.5);
    let mut after = before.clone();
    let pair = HopeFearPair::new(hyp(&[4, 5, EOS]), hyp(&[6, EOS]));
    let mut batch = LossBatch::new();
    batch.push(instance_loss(&after, &[4, 5], &Objective::Ramp { pair: &pair }).unwrap());
    batch.apply(after.params_mut()).unwrap();
    Sgd::new(lr, 1e9).step(after.params_mut());
    (before, after, pair)
}

#[test]
fn seeded_ramp_step_moves_hope_up_and_fear_down() {
    let (m0, m1, pair) = ramp_step(0, 0.05);
    let x = [4, 5];
    assert!(seq_lp(&m1, &x, &pair.hope.tokens) > seq_lp(&m0, &x, &pair.hope.tokens));
    assert!(seq_lp(&m1, &x, &pair.fear.tokens) < seq_lp(&m0, &x, &pair.fear.tokens));
}

/// Flat gradient of `log π(y | x)`.
fn grad_log_prob(m: &Seq2Seq<f64>, x: &[usize], y: &[usize]) -> Vec<f64> {
    let l = instance_loss(m, x, &Objective::Mle { reference: y }).unwrap();
    common::flatten(m.params(), &l.grads)
        .iter()
        .map(|g| -g)
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn ramp_step_follows_first_order_prediction() {
    // hope and fear share parameters, so a confident fear can drag the hope
    // down; the sign of each change is what the linearisation says
    let lr = 1e-3;
    for seed in 0..20 {
        let (m0, m1, pair) = ramp_step(seed, lr);
        let x = [4, 5];
        let (hp, fp) = (&pair.hope.tokens, &pair.fear.tokens);
        let (gh, gf) = (grad_log_prob(&m0, &x, hp), grad_log_prob(&m0, &x, fp));
        let (ph, pf) = (seq_lp(&m0, &x, hp).exp(), seq_lp(&m0, &x, fp).exp());
        // update direction is −∇(π⁻ − π⁺) = π⁺ g⁺ − π⁻ g⁻
        let dir: Vec<f64> = gh.iter().zip(&gf).map(|(a, b)| ph * a - pf * b).collect();
        let pred_h = lr * dot(&gh, &dir);
        let pred_f = lr * dot(&gf, &dir);
        let dh = seq_lp(&m1, &x, hp) - seq_lp(&m0, &x, hp);
        let df = seq_lp(&m1, &x, fp) - seq_lp(&m0, &x, fp);
        assert!(
            (dh - pred_h).abs() <= 0.05 * pred_h.abs() + 1e-12,
            "seed {seed}: {dh} vs {pred_h}"
        );
        assert!(
            (df - pred_f).abs() <= 0.05 * pred_f.abs() + 1e-12,
            "seed {seed}: {df} vs {pred_f}"
        );
        let loss = |m: &Seq2Seq<f64>| {
            instance_loss_value(m, &x, &Objective::Ramp { pair: &pair }).unwrap()
        };
        assert!(loss(&m1) < loss(&m0), "seed {seed}");
    }
}

#[test]
fn token_ramp_figure_one_structure() {
    let v = Vocab::from_tokens(["a", "small", "house", "the"]);
    let m = toy_model(3, 6, v.len(), 3, 4, 0.5);
    let x = [4, 5];
    let mut hope = v.encode(&["a", "small", "house"]);
    hope.push(EOS);
    let mut fear = v.encode(&["the", "house"]);
    fear.push(EOS);
    let pair = HopeFearPair::new(hyp(&hope), hyp(&fear)).with_polarity();
    let pol = pair.polarity.clone().unwrap();
    assert_eq!(pol.hope, vec![1, 1, 0, 0]);
    assert_eq!(pol.fear, vec![-1, 0, 0]);
    let hp = m.score_sequence(&x, &hope).unwrap();
    let fp = m.score_sequence(&x, &fear).unwrap();
    let want = -(hp[0] + hp[1]) - (-fp[0]);
    let got = instance_loss_value(&m, &x, &Objective::RampToken { pair: &pair }).unwrap();
    assert!((got - want).abs() <= 1e-12);
}

#[test]
fn zero_polarity_positions_get_no_gradient() {
    let m = toy_model(4, 6, 9, 3, 4, 0.5);
    let x = [4, 5, 3];
    let pair = HopeFearPair::new(hyp(&[4, 5, 6, 7, EOS]), hyp(&[6, 8, 4, EOS])).with_polarity();
    let pol = pair.polarity.clone().unwrap();
    let mut tape = Tape::new(m.params());
    let b = m.bind(&mut tape);
    let enc = m.encode_on(&mut tape, &b, &x).unwrap();
    let hl = m
        .log_probs_on(&mut tape, &b, &enc, &pair.hope.tokens)
        .unwrap();
    let fl = m
        .log_probs_on(&mut tape, &b, &enc, &pair.fear.tokens)
        .unwrap();
    let loss = token_ramp_from_log_probs(&mut tape, &hl, &pol.hope, &fl, &pol.fear)
        .unwrap()
        .unwrap();
    let back = tape.backward(loss).unwrap();
    for (lps, tau) in [(&hl, &pol.hope), (&fl, &pol.fear)] {
        for (&lp, &t) in lps.iter().zip(tau.iter()) {
            let g = back.grad(lp).map_or(0.0, |g| g.item());
            assert_eq!(g, -f64::from(t));
        }
    }
}

#[test]
fn identical_hope_and_fear_contribute_nothing() {
    let m = toy_model(5, 6, 7, 3, 4, 0.5);
    let pair = HopeFearPair::new(hyp(&[4, 6, EOS]), hyp(&[4, 6, EOS])).with_polarity();
    for obj in [
        Objective::Ramp { pair: &pair },
        Objective::RampToken { pair: &pair },
    ] {
        let l = instance_loss(&m, &[4], &obj).unwrap();
        assert_eq!(l.value, 0.0);
        assert!(l.grads.is_zero());
    }
}

#[test]
fn batch_mean_counts_contributing_instances() {
    let m = toy_model(6, 6, 7, 3, 4, 0.5);
    let pair = HopeFearPair::new(hyp(&[4, EOS]), hyp(&[5, EOS]));
    let a = instance_loss(&m, &[4], &Objective::Ramp { pair: &pair }).unwrap();
    let mut one = LossBatch::new();
    one.push(a.clone());
    let mut two = LossBatch::new();
    two.push(a.clone());
    two.push(a);
    assert_eq!(one.mean_loss(), two.mean_loss());
    let mut empty = LossBatch::<f64>::new();
    let mut p = m.params().clone();
    assert_eq!(empty.apply(&mut p).unwrap(), None);
    assert!(p.flat_grads().iter().all(|&g| g == 0.0));
    empty.push(instance_loss(&m, &[4], &Objective::Mle { reference: &[EOS] }).unwrap());
    assert_eq!(empty.len(), 1);
}
