//! Training objectives. Each instance gets its own tape; [`LossBatch`]
//! averages the instance gradients over the instances that contributed.

use crate::decode::Hypothesis;
use crate::error::{Error, Result};
use crate::model::{Bound, EncodedVars, Seq2Seq};
use crate::params::{Gradients, ParamStore};
use crate::scalar::Scalar;
use crate::selectors::HopeFearPair;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MrtConfig {
    /// Samples drawn per input (before de-duplication).
    pub samples: usize,
    /// Independent samples used for the baseline; 0 disables it.
    pub baseline_samples: usize,
    /// Sharpness of the sample distribution `Q ∝ π^temperature`.
    pub temperature: f64,
    /// Map a parsing reward of 0 to −1.
    pub neg_reward: bool,
}

impl Default for MrtConfig {
    fn default() -> Self {
        Self {
            samples: 10,
            baseline_samples: 10,
            temperature: 0.005,
            neg_reward: false,
        }
    }
}

impl MrtConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::Invalid("MRT needs at least one sample".into()));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::Invalid("MRT temperature must be positive".into()));
        }
        Ok(())
    }

    pub fn shape_reward(&self, r: f64) -> f64 {
        if self.neg_reward && r == 0.0 {
            -1.0
        } else {
            r
        }
    }
}

/// `b(x) = −mean(rewards)`, or 0 for an empty baseline set. Equal rewards
/// give exactly `−r`, so that `r + b` cancels.
pub fn mrt_baseline(rewards: &[f64]) -> f64 {
    match rewards.first() {
        None => 0.0,
        Some(&r) if rewards.iter().all(|&x| x == r) => -r,
        Some(_) => -rewards.iter().sum::<f64>() / rewards.len() as f64,
    }
}

/// What to compute for one input.
#[derive(Clone, Copy, Debug)]
pub enum Objective<'a> {
    /// Negative log-likelihood of the reference (EOS-terminated).
    Mle { reference: &'a [usize] },
    /// `−Σ_s Q(y_s)(δ(y_s) + b)` over de-duplicated samples.
    Mrt {
        samples: &'a [Hypothesis],
        rewards: &'a [f64],
        baseline: f64,
        temperature: f64,
    },
    /// `π(y⁻) − π(y⁺)`.
    Ramp { pair: &'a HopeFearPair },
    /// `−Σ τ⁺ log p(y⁺_j) − Σ τ⁻ log p(y⁻_j)`; fear-only tokens are pushed down.
    RampToken { pair: &'a HopeFearPair },
}

/// Loss node for one instance on `tape`. `None` means the loss is exactly
/// zero with no dependence on the parameters (e.g. `y⁺ == y⁻`).
pub fn build_loss<T: Scalar>(
    model: &Seq2Seq<T>,
    tape: &mut Tape<'_, T>,
    b: &Bound,
    x: &[usize],
    objective: &Objective<'_>,
) -> Result<Option<Var>> {
    match *objective {
        Objective::Mle { reference } => {
            let enc = model.encode_on(tape, b, x)?;
            let lp = model.sequence_log_prob_on(tape, b, &enc, nonempty(reference)?)?;
            Ok(Some(tape.scale(lp, -T::one())))
        }
        Objective::Mrt {
            samples,
            rewards,
            baseline,
            temperature,
        } => {
            if samples.is_empty() {
                return Err(Error::Invalid("MRT needs a non-empty sample set".into()));
            }
            if samples.len() != rewards.len() {
                return Err(Error::Invalid(format!(
                    "{} rewards for {} samples",
                    rewards.len(),
                    samples.len()
                )));
            }
            let enc = model.encode_on(tape, b, x)?;
            let lps: Vec<Var> = samples
                .iter()
                .map(|s| model.sequence_log_prob_on(tape, b, &enc, nonempty(&s.tokens)?))
                .collect::<Result<_>>()?;
            let row = tape.concat_cols(&lps)?;
            let sharp = tape.scale(row, T::of(temperature));
            let q = tape.softmax(sharp);
            let shifted = Tensor::new(
                vec![rewards.len(), 1],
                rewards.iter().map(|&r| T::of(r + baseline)).collect(),
            )?;
            let shifted = tape.constant(shifted);
            let expected = tape.matmul(q, shifted)?;
            Ok(Some(tape.scale(expected, -T::one())))
        }
        Objective::Ramp { pair } => {
            if pair.is_degenerate() {
                return Ok(None);
            }
            let enc = model.encode_on(tape, b, x)?;
            let lp_hope =
                model.sequence_log_prob_on(tape, b, &enc, nonempty(&pair.hope.tokens)?)?;
            let lp_fear =
                model.sequence_log_prob_on(tape, b, &enc, nonempty(&pair.fear.tokens)?)?;
            let p_hope = tape.exp(lp_hope);
            let p_fear = tape.exp(lp_fear);
            Ok(Some(tape.sub(p_fear, p_hope)?))
        }
        Objective::RampToken { pair } => {
            let pol = pair
                .polarity
                .as_ref()
                .ok_or_else(|| Error::Invalid("token-level ramp needs polarities".into()))?;
            if pol.hope.len() != pair.hope.tokens.len() || pol.fear.len() != pair.fear.tokens.len()
            {
                return Err(Error::Invalid(format!(
                    "polarity lengths {}/{} do not match sequence lengths {}/{}",
                    pol.hope.len(),
                    pol.fear.len(),
                    pair.hope.tokens.len(),
                    pair.fear.tokens.len()
                )));
            }
            if pol.hope.iter().chain(&pol.fear).all(|&t| t == 0) {
                return Ok(None);
            }
            let enc = model.encode_on(tape, b, x)?;
            let hope = token_terms(model, tape, b, &enc, &pair.hope.tokens, &pol.hope)?;
            let fear = token_terms(model, tape, b, &enc, &pair.fear.tokens, &pol.fear)?;
            token_ramp_from_log_probs(tape, &hope, &pol.hope, &fear, &pol.fear)
        }
    }
}

/// Per-position log-probabilities of `y` up to its last token with `τ ≠ 0`.
fn token_terms<T: Scalar>(
    model: &Seq2Seq<T>,
    tape: &mut Tape<'_, T>,
    b: &Bound,
    enc: &EncodedVars,
    y: &[usize],
    tau: &[i8],
) -> Result<Vec<Var>> {
    match tau.iter().rposition(|&t| t != 0) {
        None => Ok(Vec::new()),
        Some(last) => model.log_probs_on(tape, b, enc, &y[..=last]),
    }
}

/// `−Σ_j τ⁺_j·hope_lps[j] − Σ_j τ⁻_j·fear_lps[j]`, skipping `τ = 0` positions.
/// The log-probability lists may stop early as long as every dropped
/// position has `τ = 0`.
pub fn token_ramp_from_log_probs<T: Scalar>(
    tape: &mut Tape<'_, T>,
    hope_lps: &[Var],
    hope_tau: &[i8],
    fear_lps: &[Var],
    fear_tau: &[i8],
) -> Result<Option<Var>> {
    let mut terms = Vec::new();
    for (lps, tau) in [(hope_lps, hope_tau), (fear_lps, fear_tau)] {
        if tau.iter().skip(lps.len()).any(|&t| t != 0) {
            return Err(Error::Invalid(
                "missing log-probability for a weighted token".into(),
            ));
        }
        for (&lp, &t) in lps.iter().zip(tau) {
            if t != 0 {
                terms.push(tape.scale(lp, T::of(-f64::from(t))));
            }
        }
    }
    Ok(tape.add_all(&terms)?)
}

fn nonempty(y: &[usize]) -> Result<&[usize]> {
    if y.is_empty() {
        Err(Error::EmptySequence)
    } else {
        Ok(y)
    }
}

/// Loss value and parameter gradients of one instance.
#[derive(Clone, Debug)]
pub struct InstanceLoss<T> {
    pub value: f64,
    pub grads: Gradients<T>,
}

/// Forward and backward for a single instance on a fresh tape.
pub fn instance_loss<T: Scalar>(
    model: &Seq2Seq<T>,
    x: &[usize],
    objective: &Objective<'_>,
) -> Result<InstanceLoss<T>> {
    let mut tape = Tape::new(model.params());
    let b = model.bind(&mut tape);
    match build_loss(model, &mut tape, &b, x, objective)? {
        None => Ok(InstanceLoss {
            value: 0.0,
            grads: Gradients::none(model.params().len()),
        }),
        Some(loss) => {
            let value = tape.value(loss).item().as_f64();
            let grads = tape.backward(loss)?.into_param_grads();
            Ok(InstanceLoss { value, grads })
        }
    }
}

/// Loss value only; no backward pass.
pub fn instance_loss_value<T: Scalar>(
    model: &Seq2Seq<T>,
    x: &[usize],
    objective: &Objective<'_>,
) -> Result<f64> {
    let mut tape = Tape::new(model.params());
    let b = model.bind(&mut tape);
    Ok(build_loss(model, &mut tape, &b, x, objective)?
        .map_or(0.0, |l| tape.value(l).item().as_f64()))
}

/// Per-instance terms of one minibatch. The batch loss is their mean, so
/// gradients are applied with weight `1 / M` where `M` counts contributing
/// instances.
#[derive(Clone, Debug, Default)]
pub struct LossBatch<T> {
    terms: Vec<InstanceLoss<T>>,
}

impl<T: Scalar> LossBatch<T> {
    pub fn new() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn push(&mut self, term: InstanceLoss<T>) {
        self.terms.push(term);
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Mean instance loss, or `None` for an empty batch.
    pub fn mean_loss(&self) -> Option<f64> {
        if self.terms.is_empty() {
            None
        } else {
            Some(self.terms.iter().map(|t| t.value).sum::<f64>() / self.terms.len() as f64)
        }
    }

    /// Adds the mean gradient into the parameter accumulators and returns the
    /// mean loss. An empty batch leaves the parameters untouched.
    pub fn apply(&self, params: &mut ParamStore<T>) -> Result<Option<f64>> {
        let Some(mean) = self.mean_loss() else {
            return Ok(None);
        };
        let w = T::one() / T::of(self.terms.len() as f64);
        for t in &self.terms {
            params.accumulate(&t.grads, w)?;
        }
        Ok(Some(mean))
    }
}

/// Mean MLE loss and accumulated gradient over `(x, y)` pairs.
pub fn mle_batch<T: Scalar>(model: &mut Seq2Seq<T>, batch: &[(&[usize], &[usize])]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Invalid("empty batch".into()));
    }
    let mut lb = LossBatch::new();
    for (x, y) in batch {
        lb.push(instance_loss(model, x, &Objective::Mle { reference: y })?);
    }
    Ok(lb.apply(model.params_mut())?.expect("non-empty"))
}
