mod common;

use common::*;
use rampkit_core::objectives::{instance_loss, Objective};
use rampkit_core::rng::substream;
use rampkit_core::selectors::HopeFearPair;
use rampkit_core::vocab::EOS;
use rampkit_core::{ParamStore, Tape, Tensor};
use rand::Rng;

const SEEDS: u64 = 20;

fn random_store(seed: u64) -> ParamStore<f64> {
    let mut rng = substream(seed, "ops", 0);
    let mut s = ParamStore::new();
    s.insert_uniform("emb", 5, 3, 1.0, &mut rng).unwrap();
    s.insert_uniform("w1", 3, 4, 1.0, &mut rng).unwrap();
    s.insert_uniform("b1", 1, 4, 1.0, &mut rng).unwrap();
    s.insert_uniform("w2", 4, 3, 1.0, &mut rng).unwrap();
    s.insert_uniform("w3", 6, 2, 1.0, &mut rng).unwrap();
    s.insert_uniform("unused", 2, 2, 1.0, &mut rng).unwrap();
    s
}

/// A small net that routes through every differentiable tape op.
fn net(tape: &mut Tape<'_, f64>) -> rampkit_core::Var {
    let p = tape.params();
    let [emb, w1, b1, w2, w3] = ["emb", "w1", "b1", "w2", "w3"].map(|n| p.id(n).unwrap());
    let [emb, w1, b1, w2, w3] = [emb, w1, b1, w2, w3].map(|id| tape.param(id));
    let x = tape.gather_rows(emb, &[1, 3, 0]).unwrap();
    let xw = tape.matmul(x, w1).unwrap();
    let pre = tape.add_row(xw, b1).unwrap();
    let h = tape.tanh(pre);
    let g = tape.sigmoid(xw);
    let m = tape.mul(h, g).unwrap();
    let s = tape.sub(m, h).unwrap();
    let s = tape.add(s, g).unwrap();
    let z = tape.matmul(s, w2).unwrap();
    let sm = tape.softmax(z);
    let ls = tape.log_softmax(z);
    let c = tape.concat_cols(&[sm, ls]).unwrap();
    let c2 = tape.scale(c, 0.5);
    let c2 = tape.add_scalar(c2, 0.1);
    let r = tape.concat_rows(&[c, c2]).unwrap();
    let o = tape.matmul(r, w3).unwrap();
    let o = tape.reshape(o, 3, 4).unwrap();
    let picked = tape.pick(o, 1, 2).unwrap();
    let e = tape.scale(o, 0.3);
    let e = tape.exp(e);
    let total = tape.sum(e);
    tape.add_all(&[picked, total]).unwrap().unwrap()
}

fn net_value(store: &ParamStore<f64>) -> f64 {
    let mut tape = Tape::new(store);
    let l = net(&mut tape);
    tape.value(l).item()
}

#[test]
fn every_tape_op_matches_central_differences() {
    for seed in 0..SEEDS {
        let mut store = random_store(seed);
        let analytic = {
            let mut tape = Tape::new(&store);
            let l = net(&mut tape);
            flatten(&store, tape.backward(l).unwrap().param_grads())
        };
        let mut worst: f64 = 0.0;
        for (k, &a) in analytic.iter().enumerate() {
            let orig = *store.flat_value_mut(k);
            *store.flat_value_mut(k) = orig + FD_STEP;
            let up = net_value(&store);
            *store.flat_value_mut(k) = orig - FD_STEP;
            let down = net_value(&store);
            *store.flat_value_mut(k) = orig;
            worst = worst.max(rel_err(a, (up - down) / (2.0 * FD_STEP)));
        }
        assert!(worst <= FD_TOL, "seed {seed}: max relative error {worst:e}");
        // the unused parameter is the last one and must get exactly zero
        let unused = store.value(store.id("unused").unwrap()).len();
        assert!(analytic[analytic.len() - unused..]
            .iter()
            .all(|&g| g == 0.0));
    }
}

#[test]
fn softmax_row_backward_with_one_hot_upstream() {
    let mut rng = substream(3, "softmax", 0);
    let mut store = ParamStore::<f64>::new();
    let id = store.insert_uniform("v", 1, 5, 2.0, &mut rng).unwrap();
    for j in 0..5 {
        let mut tape = Tape::new(&store);
        let v = tape.param(id);
        let p = tape.softmax(v);
        let out = tape.pick(p, 0, j).unwrap();
        let b = tape.backward(out).unwrap();
        let g = b.param_grads().get(id).unwrap();
        let probs = tape.value(p).clone();
        for i in 0..5 {
            let delta = if i == j { 1.0 } else { 0.0 };
            let expect = probs.get(0, j) * (delta - probs.get(0, i));
            assert!((g.get(0, i) - expect).abs() <= 1e-10);
        }
    }
}

#[test]
fn tape_replay_is_bitwise_deterministic() {
    let a = random_store(11);
    let b = random_store(11);
    let run = |s: &ParamStore<f64>| {
        let mut tape = Tape::new(s);
        let l = net(&mut tape);
        let v = tape.value(l).item();
        (
            v.to_bits(),
            flatten(s, tape.backward(l).unwrap().param_grads()),
        )
    };
    let (va, ga) = run(&a);
    let (vb, gb) = run(&b);
    assert_eq!(va, vb);
    assert!(ga.iter().zip(&gb).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn log_softmax_matches_log_of_softmax() {
    let mut rng = substream(0, "ls", 0);
    for _ in 0..50 {
        let vals: Vec<f64> = (0..12).map(|_| rng.gen_range(-20.0..20.0)).collect();
        let t = Tensor::new(vec![3, 4], vals).unwrap();
        let ls = t.log_softmax();
        let sm = t.softmax();
        for (a, b) in ls.data().iter().zip(sm.data()) {
            assert!((a - b.ln()).abs() <= 1e-12);
        }
        for r in 0..3 {
            let s: f64 = sm.row_slice(r).iter().sum();
            assert!((s - 1.0).abs() <= 1e-12);
        }
    }
}

fn random_seq(rng: &mut impl Rng, vocab: usize, max: usize) -> Vec<usize> {
    let n = rng.gen_range(1..=max);
    let mut y: Vec<usize> = (0..n).map(|_| rng.gen_range(3..vocab)).collect();
    y.push(EOS);
    y
}

fn fd_case(
    seed: u64,
    check: impl Fn(&mut rampkit_core::Seq2Seq<f64>, &[usize], &mut rand_chacha::ChaCha8Rng) -> f64,
) {
    let mut model = toy_model(seed, 6, 7, 3, 4, 0.5);
    assert!(model.params().numel() <= 2000);
    let mut rng = substream(seed, "fd-data", 0);
    let x: Vec<usize> = (0..rng.gen_range(1..4))
        .map(|_| rng.gen_range(3..6))
        .collect();
    let worst = check(&mut model, &x, &mut rng);
    assert!(worst <= FD_TOL, "seed {seed}: max relative error {worst:e}");
}

#[test]
fn mle_gradient_matches_central_differences() {
    for seed in 0..SEEDS {
        fd_case(seed, |m, x, rng| {
            let y = random_seq(rng, 7, 3);
            objective_fd_error(m, x, &Objective::Mle { reference: &y })
        });
    }
}

#[test]
fn mrt_gradient_matches_central_differences() {
    for seed in 0..SEEDS {
        for temperature in [0.5, 0.005] {
            fd_case(seed, |m, x, rng| {
                let mut samples: Vec<_> = (0..4).map(|_| hyp(&random_seq(rng, 7, 3))).collect();
                samples.dedup_by(|a, b| a.tokens == b.tokens);
                let rewards: Vec<f64> = samples.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
                let obj = Objective::Mrt {
                    samples: &samples,
                    rewards: &rewards,
                    baseline: rng.gen_range(-0.5..0.0),
                    temperature,
                };
                objective_fd_error(m, x, &obj)
            });
        }
    }
}

#[test]
fn ramp_gradient_matches_central_differences() {
    for seed in 0..SEEDS {
        fd_case(seed, |m, x, rng| {
            let hope = random_seq(rng, 7, 2);
            let mut fear = random_seq(rng, 7, 2);
            if fear == hope {
                fear.insert(0, 3);
            }
            let pair = HopeFearPair::new(hyp(&hope), hyp(&fear));
            objective_fd_error(m, x, &Objective::Ramp { pair: &pair })
        });
    }
}

#[test]
fn token_ramp_gradient_matches_central_differences() {
    for seed in 0..SEEDS {
        fd_case(seed, |m, x, rng| {
            let hope = random_seq(rng, 7, 4);
            let fear = random_seq(rng, 7, 4);
            let pair = HopeFearPair::new(hyp(&hope), hyp(&fear)).with_polarity();
            objective_fd_error(m, x, &Objective::RampToken { pair: &pair })
        });
    }
}

#[test]
fn instance_gradients_are_finite() {
    let m = toy_model(1, 6, 7, 3, 4, 0.5);
    let l = instance_loss(
        &m,
        &[4, 5],
        &Objective::Mle {
            reference: &[4, 5, EOS],
        },
    )
    .unwrap();
    assert!(l.value.is_finite() && l.value > 0.0);
    assert!(flatten(m.params(), &l.grads).iter().all(|g| g.is_finite()));
}
