//! Training loop: decode, select, build the loss, take an SGD step, and
//! validate at a fixed number of seen inputs.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rampkit_core::checkpoint;
use rampkit_core::decode::Hypothesis;
use rampkit_core::metrics::{answer_feedback, bleu_plus1, delta1, delta2_from};
use rampkit_core::objectives::{
    instance_loss, mrt_baseline, InstanceLoss, LossBatch, MrtConfig, Objective,
};
use rampkit_core::rng::substream;
use rampkit_core::selectors::{
    select_full_mt, select_parsing, select_weak_mt, HopeFearCache, HopeFearPair, SelectorConfig,
    Variant, WeakMtContext,
};
use rampkit_core::{beam_search, sample, Model64, ModelConfig, Seq2Seq, Sgd};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::config::{ExperimentConfig, MrtReward, ObjectiveKind};
use crate::data::{Example, Target, TaskData};
use crate::error::{HarnessError, Result};
use crate::evaluate::{answer_of, evaluate, EvalReport};
use crate::runlog::RunLog;

/// Scores a model on held-out data; higher is better.
pub trait Validator {
    fn validate(&mut self, model: &Model64) -> Result<f64>;
}

/// F1 or corpus BLEU of 1-best beam output on a dev split.
pub struct DevValidator<'a> {
    pub data: &'a TaskData,
    pub examples: &'a [Example],
    pub beam: usize,
    pub max_len: usize,
}

impl Validator for DevValidator<'_> {
    fn validate(&mut self, model: &Model64) -> Result<f64> {
        Ok(evaluate(model, self.data, self.examples, self.beam, self.max_len)?.score())
    }
}

/// Position in the input stream. Saved at every validation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TrainState {
    pub epoch: usize,
    pub cursor: usize,
    pub updates: usize,
    pub inputs: usize,
}

impl TrainState {
    fn to_text(self) -> String {
        format!(
            "epoch={}\ncursor={}\nupdates={}\ninputs={}\n",
            self.epoch, self.cursor, self.updates, self.inputs
        )
    }

    fn parse(text: &str) -> Result<Self> {
        let mut s = Self::default();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let bad = || HarnessError::Data(format!("trainer state: bad line `{line}`"));
            let (k, v) = line.split_once('=').ok_or_else(bad)?;
            let v: usize = v.trim().parse().map_err(|_| bad())?;
            match k.trim() {
                "epoch" => s.epoch = v,
                "cursor" => s.cursor = v,
                "updates" => s.updates = v,
                "inputs" => s.inputs = v,
                _ => return Err(bad()),
            }
        }
        Ok(s)
    }
}

pub struct Outcome {
    pub log: RunLog,
    pub best: Model64,
    pub last: Model64,
}

pub struct Trainer<'a> {
    pub cfg: &'a ExperimentConfig,
    pub data: &'a TaskData,
    examples: &'a [Example],
    sgd: Sgd,
    mrt: MrtConfig,
    selector: Option<SelectorConfig>,
}

fn dims_match(m: &Model64, data: &TaskData) -> Result<()> {
    let c = m.config();
    if c.src_vocab != data.src_vocab.len() || c.tgt_vocab != data.tgt_vocab.len() {
        return Err(HarnessError::Data(format!(
            "checkpoint vocabularies {}/{} do not match the data ({}/{})",
            c.src_vocab,
            c.tgt_vocab,
            data.src_vocab.len(),
            data.tgt_vocab.len()
        )));
    }
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>, data: &TaskData) -> Result<Model64> {
    let path = path.as_ref();
    let params = checkpoint::load(path).map_err(|e| {
        HarnessError::Data(format!("cannot load checkpoint {}: {e}", path.display()))
    })?;
    let m = Seq2Seq::from_params(params)?;
    dims_match(&m, data)?;
    Ok(m)
}

impl<'a> Trainer<'a> {
    pub fn new(cfg: &'a ExperimentConfig, data: &'a TaskData) -> Result<Self> {
        cfg.validate()?;
        if data.kind != cfg.task {
            return Err(HarnessError::Usage(format!(
                "config is for {} but data is {}",
                cfg.task, data.kind
            )));
        }
        let examples = data.split(&cfg.train_split)?;
        if examples.is_empty() {
            return Err(HarnessError::Data(format!(
                "split {} is empty",
                cfg.train_split
            )));
        }
        if cfg.objective == ObjectiveKind::Mle && examples.iter().any(|e| e.gold().is_none()) {
            return Err(HarnessError::Usage(format!(
                "MLE needs gold outputs but split {} has none",
                cfg.train_split
            )));
        }
        let mrt = MrtConfig {
            samples: cfg.mrt_samples,
            baseline_samples: cfg.mrt_baseline_samples,
            temperature: cfg.mrt_temperature,
            neg_reward: matches!(
                cfg.objective,
                ObjectiveKind::Mrt {
                    neg_reward: true,
                    ..
                }
            ),
        };
        mrt.validate()?;
        let selector = match cfg.objective {
            ObjectiveKind::Ramp {
                variant,
                token_level,
            } => Some(SelectorConfig::new(variant, cfg.alpha_ramp).token_level(token_level)),
            _ => None,
        };
        Ok(Self {
            cfg,
            data,
            examples,
            sgd: Sgd::new(cfg.learning_rate, cfg.clip_norm),
            mrt,
            selector,
        })
    }

    fn out(&self, name: &str) -> PathBuf {
        self.cfg.out_dir.join(name)
    }

    /// The pretrained model, or a fresh one for MLE without `init`.
    pub fn initial_model(&self) -> Result<Model64> {
        match &self.cfg.init {
            Some(p) => load_model(p, self.data),
            None if self.cfg.objective == ObjectiveKind::Mle => {
                let mut mc = ModelConfig::new(self.data.src_vocab.len(), self.data.tgt_vocab.len())
                    .with_dims(self.cfg.emb_dim, self.cfg.hidden_dim);
                mc.init_scale = self.cfg.init_scale;
                Ok(Seq2Seq::new(mc, &mut substream(self.cfg.seed, "init", 0))?)
            }
            None => Err(HarnessError::Usage(format!(
                "objective {} needs a pretrained checkpoint (init=...)",
                self.cfg.objective
            ))),
        }
    }

    /// Trains from the initial model.
    pub fn run(&self, validator: &mut dyn Validator) -> Result<Outcome> {
        fs::create_dir_all(&self.cfg.out_dir)?;
        fs::write(self.out("config.txt"), self.cfg.to_text())?;
        self.data.src_vocab.save(self.out("src.vocab"))?;
        self.data.tgt_vocab.save(self.out("tgt.vocab"))?;
        let model = self.initial_model()?;
        let best = model.clone();
        self.run_from(
            model,
            best,
            TrainState::default(),
            RunLog::default(),
            HopeFearCache::new(),
            validator,
        )
    }

    /// Continues from the latest saved validation in `out_dir`.
    pub fn resume(&self, validator: &mut dyn Validator) -> Result<Outcome> {
        let model = load_model(self.out("latest.ckpt"), self.data)?;
        let best = load_model(self.out("best.ckpt"), self.data)?;
        let state = TrainState::parse(&fs::read_to_string(self.out("latest.state"))?)?;
        let mut log = RunLog::load(self.out("runlog.tsv"))?;
        log.test_metric = None;
        let cache = HopeFearCache::parse(&fs::read_to_string(self.out("latest.cache"))?)?;
        self.run_from(model, best, state, log, cache, validator)
    }

    fn order(&self, epoch: usize) -> Vec<usize> {
        let mut o: Vec<usize> = (0..self.examples.len()).collect();
        o.shuffle(&mut substream(self.cfg.seed, "shuffle", epoch as u64));
        o
    }

    fn run_from(
        &self,
        mut model: Model64,
        mut best: Model64,
        mut st: TrainState,
        mut log: RunLog,
        mut cache: HopeFearCache,
        validator: &mut dyn Validator,
    ) -> Result<Outcome> {
        let mut mark = Instant::now();
        let update_size = self.cfg.update_size();
        let every = self.cfg.inputs_per_validation();
        let mut order = self.order(st.epoch);
        let mut batch: LossBatch<f64> = LossBatch::new();
        let mut pending = 0usize;
        while log.records.len() < self.cfg.max_validations {
            if st.cursor == order.len() {
                st.epoch += 1;
                st.cursor = 0;
                order = self.order(st.epoch);
            }
            let ex = &self.examples[order[st.cursor]];
            if let Some(term) = self.instance_term(&model, ex, &mut cache, st.inputs as u64)? {
                batch.push(term);
            }
            st.cursor += 1;
            st.inputs += 1;
            pending += 1;
            if pending == update_size {
                if batch.apply(model.params_mut())?.is_some() {
                    self.sgd.step(model.params_mut());
                    st.updates += 1;
                }
                batch = LossBatch::new();
                pending = 0;
            }
            if st.inputs.is_multiple_of(every) {
                let metric = validator.validate(&model)?;
                let improved = log.best().is_none_or(|b| metric > b.metric);
                log.push(st.updates, st.inputs, metric);
                if improved {
                    best = model.clone();
                    checkpoint::save(best.params(), self.out("best.ckpt"))?;
                    fs::write(self.out("best.cache"), cache.to_text())?;
                }
                checkpoint::save(model.params(), self.out("latest.ckpt"))?;
                fs::write(self.out("latest.cache"), cache.to_text())?;
                fs::write(self.out("latest.state"), st.to_text())?;
                log.wall_clock_secs += mark.elapsed().as_secs_f64();
                mark = Instant::now();
                log.save(self.out("runlog.tsv"))?;
            }
        }
        Ok(Outcome {
            log,
            best,
            last: model,
        })
    }

    /// Loss term of one input, or `None` when it contributes nothing.
    pub fn instance_term(
        &self,
        model: &Model64,
        ex: &Example,
        cache: &mut HopeFearCache,
        stream: u64,
    ) -> Result<Option<InstanceLoss<f64>>> {
        let cfg = self.cfg;
        let x = &ex.src;
        match cfg.objective {
            ObjectiveKind::Mle => {
                let gold = ex.gold().unwrap();
                Ok(Some(instance_loss(
                    model,
                    x,
                    &Objective::Mle { reference: gold },
                )?))
            }
            ObjectiveKind::Mrt { reward, .. } => {
                let rng = &mut substream(cfg.seed, "mrt", stream);
                let samples = sample(model, x, self.mrt.samples, true, cfg.max_len, rng)?;
                let base = sample(model, x, self.mrt.baseline_samples, false, cfg.max_len, rng)?;
                let dminus = self.irrelevant_draw(ex, stream);
                let r = |h: &Hypothesis| self.mrt.shape_reward(self.reward(ex, h, reward, dminus));
                let rewards: Vec<f64> = samples.iter().map(r).collect();
                let base_rewards: Vec<f64> = base.iter().map(r).collect();
                let obj = Objective::Mrt {
                    samples: &samples,
                    rewards: &rewards,
                    baseline: mrt_baseline(&base_rewards),
                    temperature: self.mrt.temperature,
                };
                Ok(Some(instance_loss(model, x, &obj)?))
            }
            ObjectiveKind::Ramp { token_level, .. } => {
                let Some(pair) = self.select(model, ex, cache, stream)? else {
                    return Ok(None);
                };
                if pair.is_degenerate() {
                    return Ok(None);
                }
                let obj = if token_level {
                    Objective::RampToken { pair: &pair }
                } else {
                    Objective::Ramp { pair: &pair }
                };
                Ok(Some(instance_loss(model, x, &obj)?))
            }
        }
    }

    /// Index of the irrelevant document drawn for this input.
    fn irrelevant_draw(&self, ex: &Example, stream: u64) -> Option<usize> {
        match &ex.target {
            Target::Linked { pool, .. } => {
                let n = self.data.pools[pool].len();
                Some(substream(self.cfg.seed, "irrelevant", stream).gen_range(0..n))
            }
            _ => None,
        }
    }

    fn reward(&self, ex: &Example, h: &Hypothesis, kind: MrtReward, dminus: Option<usize>) -> f64 {
        let y = h.content();
        match &ex.target {
            Target::Parse { answer, .. } => answer_feedback(&answer_of(self.data, y), answer),
            Target::Reference { ids, .. } => {
                bleu_plus1(y, &ids[..ids.len() - 1], self.cfg.max_order)
            }
            Target::Linked { relevant, pool, .. } => {
                let (r, n) = (self.data.length_ratio, self.cfg.max_order);
                let dp = delta1(y, relevant, ex.src.len(), r, n);
                match kind {
                    MrtReward::Delta2 => {
                        let d = &self.data.pools[pool][dminus.unwrap()];
                        delta2_from(dp, delta1(y, d, ex.src.len(), r, n))
                    }
                    _ => dp,
                }
            }
        }
    }

    fn select(
        &self,
        model: &Model64,
        ex: &Example,
        cache: &mut HopeFearCache,
        stream: u64,
    ) -> Result<Option<HopeFearPair>> {
        let cfg = self.cfg;
        let sel = self.selector.as_ref().unwrap();
        let kb = beam_search(
            model,
            ex.id,
            &ex.src,
            cfg.train_beam,
            cfg.kbest,
            cfg.max_len,
        )?;
        match &ex.target {
            Target::Parse { answer, .. } => {
                let rewards: Vec<f64> = kb
                    .hyps
                    .iter()
                    .map(|h| answer_feedback(&answer_of(self.data, h.content()), answer))
                    .collect();
                Ok(select_parsing(&kb, &rewards, Some(cache), sel)?)
            }
            Target::Linked { relevant, pool, .. } => {
                let d = self.irrelevant_draw(ex, stream).unwrap();
                let ctx = WeakMtContext {
                    relevant,
                    irrelevant: Some(&self.data.pools[pool][d]),
                    src_len: ex.src.len(),
                    length_ratio: self.data.length_ratio,
                    max_order: cfg.max_order,
                };
                Ok(Some(select_weak_mt(&kb, &ctx, sel)?))
            }
            Target::Reference { ids, .. } => {
                let reference = if sel.variant == Variant::Perc1 {
                    Hypothesis::scored(model, &ex.src, ids.clone())?
                } else {
                    Hypothesis::new(ids.clone(), vec![0.0; ids.len()])
                };
                Ok(Some(select_full_mt(&kb, &reference, sel, cfg.max_order)?))
            }
        }
    }
}

/// Full protocol: train, restore the best-dev model, score it on the test
/// split and write `runlog.tsv`, `best.ckpt` and `test.tsv` to `out_dir`.
pub fn train(
    cfg: &ExperimentConfig,
    data: &TaskData,
    resume: bool,
) -> Result<(Outcome, EvalReport)> {
    let trainer = Trainer::new(cfg, data)?;
    let dev = data.split(&cfg.dev_split)?;
    let mut validator = DevValidator {
        data,
        examples: dev,
        beam: cfg.test_beam,
        max_len: cfg.max_len,
    };
    let mut outcome = if resume {
        trainer.resume(&mut validator)?
    } else {
        trainer.run(&mut validator)?
    };
    let test = evaluate(
        &outcome.best,
        data,
        data.split(&cfg.test_split)?,
        cfg.test_beam,
        cfg.max_len,
    )?;
    outcome.log.test_metric = Some(test.score());
    outcome.log.save(cfg.out_dir.join("runlog.tsv"))?;
    test.save(cfg.out_dir.join("test.tsv"))?;
    Ok((outcome, test))
}
