#![allow(dead_code)]

use rampkit_core::objectives::{instance_loss, instance_loss_value, Objective};
use rampkit_core::rng::substream;
use rampkit_core::{Gradients, Hypothesis, ModelConfig, ParamStore, Seq2Seq};

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-4;
/// Gradients smaller than this are compared on an absolute scale.
pub const FD_FLOOR: f64 = 1e-5;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FD_FLOOR)
}

pub fn flatten(store: &ParamStore<f64>, grads: &Gradients<f64>) -> Vec<f64> {
    let mut s = store.clone();
    s.zero_grads();
    s.accumulate(grads, 1.0).unwrap();
    s.flat_grads()
}

pub fn toy_model(
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

pub fn hyp(tokens: &[usize]) -> Hypothesis {
    Hypothesis::new(tokens.to_vec(), Vec::new())
}

/// Largest relative error between the analytic gradient of `objective` and
/// central differences over every parameter.
pub fn objective_fd_error(model: &mut Seq2Seq<f64>, x: &[usize], objective: &Objective<'_>) -> f64 {
    let analytic = {
        let l = instance_loss(model, x, objective).unwrap();
        flatten(model.params(), &l.grads)
    };
    let mut worst: f64 = 0.0;
    for (k, &a) in analytic.iter().enumerate() {
        let orig = *model.params_mut().flat_value_mut(k);
        *model.params_mut().flat_value_mut(k) = orig + FD_STEP;
        let up = instance_loss_value(model, x, objective).unwrap();
        *model.params_mut().flat_value_mut(k) = orig - FD_STEP;
        let down = instance_loss_value(model, x, objective).unwrap();
        *model.params_mut().flat_value_mut(k) = orig;
        worst = worst.max(rel_err(a, (up - down) / (2.0 * FD_STEP)));
    }
    worst
}
