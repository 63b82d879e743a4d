//! Experiment configuration: a flat `key=value` file plus `--key=value`
//! overrides.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rampkit_core::selectors::Variant;

use crate::error::{HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaskKind {
    Parsing,
    WeakMt,
    FullMt,
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Parsing => "parsing",
            Self::WeakMt => "weakmt",
            Self::FullMt => "fullmt",
        })
    }
}

impl FromStr for TaskKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "parsing" => Ok(Self::Parsing),
            "weakmt" | "weak-mt" => Ok(Self::WeakMt),
            "fullmt" | "full-mt" => Ok(Self::FullMt),
            _ => Err(HarnessError::Usage(format!("unknown task `{s}`"))),
        }
    }
}

/// Reward used by minimum risk training.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MrtReward {
    /// Answer feedback (parsing) or BLEU+1 (full MT).
    Task,
    Delta1,
    Delta2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObjectiveKind {
    Mle,
    Mrt { reward: MrtReward, neg_reward: bool },
    Ramp { variant: Variant, token_level: bool },
}

impl ObjectiveKind {
    pub fn is_mrt(&self) -> bool {
        matches!(self, Self::Mrt { .. })
    }

    pub fn check_task(&self, task: TaskKind) -> Result<()> {
        let ok = match (*self, task) {
            (Self::Mle, _) => true,
            (Self::Mrt { reward, neg_reward }, t) => match t {
                TaskKind::Parsing => reward == MrtReward::Task,
                TaskKind::WeakMt => reward != MrtReward::Task && !neg_reward,
                TaskKind::FullMt => reward == MrtReward::Task && !neg_reward,
            },
            (Self::Ramp { variant, .. }, TaskKind::Parsing) => variant.valid_for_parsing(),
            (Self::Ramp { variant, .. }, TaskKind::WeakMt) => variant.valid_for_weak_mt(),
            (Self::Ramp { variant, .. }, TaskKind::FullMt) => variant.valid_for_full_mt(),
        };
        if ok {
            Ok(())
        } else {
            Err(HarnessError::Usage(format!(
                "objective {self} is not available for task {task}"
            )))
        }
    }
}

impl fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Mle => f.write_str("MLE"),
            Self::Mrt { reward, neg_reward } => {
                f.write_str("MRT")?;
                if *neg_reward {
                    f.write_str("_neg")?;
                }
                match reward {
                    MrtReward::Task => Ok(()),
                    MrtReward::Delta1 => f.write_str("_d1"),
                    MrtReward::Delta2 => f.write_str("_d2"),
                }
            }
            Self::Ramp {
                variant,
                token_level,
            } => {
                write!(f, "{variant}")?;
                if *token_level {
                    f.write_str("-T")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for ObjectiveKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || HarnessError::Usage(format!("unknown objective `{s}`"));
        match s {
            "MLE" => return Ok(Self::Mle),
            "MRT" | "MRT_neg" | "MRT_d1" | "MRT_δ1" | "MRT_d2" | "MRT_δ2" => {
                let reward = if s.ends_with('1') {
                    MrtReward::Delta1
                } else if s.ends_with('2') {
                    MrtReward::Delta2
                } else {
                    MrtReward::Task
                };
                return Ok(Self::Mrt {
                    reward,
                    neg_reward: s == "MRT_neg",
                });
            }
            _ => {}
        }
        let (name, token_level) = match s.strip_suffix("-T") {
            Some(rest) => (rest, true),
            None => (s, false),
        };
        let variant: Variant = name.parse().map_err(|_| bad())?;
        Ok(Self::Ramp {
            variant,
            token_level,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub task: TaskKind,
    pub objective: ObjectiveKind,
    /// Inputs per update (M) and per validation-interval unit.
    pub batch_size: usize,
    /// Update after every input. Always on for MRT.
    pub per_input_updates: bool,
    pub kbest: usize,
    pub train_beam: usize,
    pub test_beam: usize,
    pub mrt_samples: usize,
    pub mrt_baseline_samples: usize,
    pub mrt_temperature: f64,
    pub alpha_ramp: f64,
    pub learning_rate: f64,
    pub clip_norm: f64,
    /// Validation every `validation_interval` batches of `batch_size` inputs.
    pub validation_interval: usize,
    pub max_validations: usize,
    pub seed: u64,
    pub emb_dim: usize,
    pub hidden_dim: usize,
    pub init_scale: f64,
    pub max_len: usize,
    pub max_order: usize,
    pub train_split: String,
    pub dev_split: String,
    pub test_split: String,
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    /// Pretrained checkpoint; required for everything but MLE.
    pub init: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Defaults for `task` and `objective`. Batch size, k-best size, test
    /// beam, sample counts, α and learning rates follow the published setups
    /// for the respective scenario.
    pub fn new(task: TaskKind, objective: ObjectiveKind) -> Self {
        let mrt = objective.is_mrt();
        let (batch_size, kbest, mrt_samples, alpha_ramp, learning_rate) = match task {
            TaskKind::Parsing => (80, 10, 10, 1.0, 0.1),
            TaskKind::WeakMt => (80, 16, 16, 10.0, if mrt { 0.05 } else { 0.005 }),
            TaskKind::FullMt => (80, 16, 16, 10.0, if mrt { 0.01 } else { 0.001 }),
        };
        let (train_split, dev_split) = match (task, objective) {
            (TaskKind::Parsing, ObjectiveKind::Mle) => ("supervised", "dev"),
            (TaskKind::Parsing, _) => ("weak", "dev"),
            (TaskKind::WeakMt, ObjectiveKind::Mle) => ("pretrain", "pretrain_dev"),
            (TaskKind::WeakMt, _) => ("weak", "dev"),
            (TaskKind::FullMt, _) => ("train", "dev"),
        };
        Self {
            task,
            objective,
            batch_size,
            per_input_updates: false,
            kbest,
            train_beam: kbest,
            test_beam: 12,
            mrt_samples,
            mrt_baseline_samples: 10,
            mrt_temperature: 0.005,
            alpha_ramp,
            learning_rate,
            clip_norm: 1.0,
            validation_interval: 50,
            max_validations: 30,
            seed: 1,
            emb_dim: 16,
            hidden_dim: 32,
            init_scale: 0.1,
            max_len: if task == TaskKind::Parsing { 12 } else { 24 },
            max_order: 4,
            train_split: train_split.into(),
            dev_split: dev_split.into(),
            test_split: "test".into(),
            data_dir: PathBuf::from("data"),
            out_dir: PathBuf::from("runs"),
            init: None,
        }
    }

    /// Inputs per parameter update.
    pub fn update_size(&self) -> usize {
        if self.per_input_updates || self.objective.is_mrt() {
            1
        } else {
            self.batch_size
        }
    }

    /// Inputs between validations; equal for every objective with the same
    /// `batch_size` and `validation_interval`.
    pub fn inputs_per_validation(&self) -> usize {
        self.batch_size * self.validation_interval
    }

    pub fn validate(&self) -> Result<()> {
        self.objective.check_task(self.task)?;
        let counts = [
            ("batch_size", self.batch_size),
            ("kbest", self.kbest),
            ("train_beam", self.train_beam),
            ("test_beam", self.test_beam),
            ("mrt_samples", self.mrt_samples),
            ("mrt_baseline_samples", self.mrt_baseline_samples),
            ("validation_interval", self.validation_interval),
            ("max_validations", self.max_validations),
            ("emb_dim", self.emb_dim),
            ("hidden_dim", self.hidden_dim),
            ("max_len", self.max_len),
            ("max_order", self.max_order),
        ];
        for (k, v) in counts {
            if v == 0 {
                return Err(HarnessError::Usage(format!("{k} must be positive")));
            }
        }
        for (k, v) in [
            ("learning_rate", self.learning_rate),
            ("clip_norm", self.clip_norm),
            ("mrt_temperature", self.mrt_temperature),
            ("alpha_ramp", self.alpha_ramp),
            ("init_scale", self.init_scale),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(HarnessError::Usage(format!(
                    "{k} must be positive, got {v}"
                )));
            }
        }
        if self.train_beam < self.kbest {
            return Err(HarnessError::Usage(
                "train_beam must be at least kbest".into(),
            ));
        }
        Ok(())
    }

    /// Sets one key. Unknown keys and unparsable values are usage errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| HarnessError::Usage(format!("invalid value `{v}` for {key}")))
        }
        let v = value.trim();
        match key.trim() {
            "task" => {
                let t: TaskKind = v.parse()?;
                if t != self.task {
                    *self = Self::new(t, self.objective);
                }
            }
            "objective" => {
                let o: ObjectiveKind = v.parse()?;
                if o != self.objective {
                    *self = Self::new(self.task, o);
                }
            }
            "batch_size" | "M" => self.batch_size = num(key, v)?,
            "per_input_updates" => self.per_input_updates = num(key, v)?,
            "kbest" | "k" => self.kbest = num(key, v)?,
            "train_beam" => self.train_beam = num(key, v)?,
            "test_beam" => self.test_beam = num(key, v)?,
            "mrt_samples" | "S" => self.mrt_samples = num(key, v)?,
            "mrt_baseline_samples" => self.mrt_baseline_samples = num(key, v)?,
            "mrt_temperature" => self.mrt_temperature = num(key, v)?,
            "alpha_ramp" => self.alpha_ramp = num(key, v)?,
            "learning_rate" => self.learning_rate = num(key, v)?,
            "clip_norm" => self.clip_norm = num(key, v)?,
            "validation_interval" => self.validation_interval = num(key, v)?,
            "max_validations" => self.max_validations = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "emb_dim" => self.emb_dim = num(key, v)?,
            "hidden_dim" => self.hidden_dim = num(key, v)?,
            "init_scale" => self.init_scale = num(key, v)?,
            "max_len" => self.max_len = num(key, v)?,
            "max_order" => self.max_order = num(key, v)?,
            "train_split" => self.train_split = v.to_string(),
            "dev_split" => self.dev_split = v.to_string(),
            "test_split" => self.test_split = v.to_string(),
            "data_dir" => self.data_dir = PathBuf::from(v),
            "out_dir" => self.out_dir = PathBuf::from(v),
            "init" => self.init = (!v.is_empty()).then(|| PathBuf::from(v)),
            k => return Err(HarnessError::Usage(format!("unknown config key `{k}`"))),
        }
        Ok(())
    }

    /// Parses `key=value` lines. `task` and `objective` are applied first
    /// because the other defaults depend on them.
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_pairs(&read_pairs(text)?)
    }

    /// Builds a config from pairs; later pairs override earlier ones.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self> {
        let find = |key: &str| {
            pairs
                .iter()
                .rev()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.as_str())
        };
        let task: TaskKind = find("task")
            .ok_or_else(|| HarnessError::Usage("config needs `task`".into()))?
            .parse()?;
        let objective: ObjectiveKind = find("objective")
            .ok_or_else(|| HarnessError::Usage("config needs `objective`".into()))?
            .parse()?;
        let mut cfg = Self::new(task, objective);
        for (k, v) in pairs {
            if k != "task" && k != "objective" {
                cfg.set(k, v)?;
            }
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| {
            HarnessError::Usage(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| s.push_str(&format!("{k}={v}\n"));
        put("task", self.task.to_string());
        put("objective", self.objective.to_string());
        put("batch_size", self.batch_size.to_string());
        put("per_input_updates", self.per_input_updates.to_string());
        put("kbest", self.kbest.to_string());
        put("train_beam", self.train_beam.to_string());
        put("test_beam", self.test_beam.to_string());
        put("mrt_samples", self.mrt_samples.to_string());
        put(
            "mrt_baseline_samples",
            self.mrt_baseline_samples.to_string(),
        );
        put("mrt_temperature", format!("{:?}", self.mrt_temperature));
        put("alpha_ramp", format!("{:?}", self.alpha_ramp));
        put("learning_rate", format!("{:?}", self.learning_rate));
        put("clip_norm", format!("{:?}", self.clip_norm));
        put("validation_interval", self.validation_interval.to_string());
        put("max_validations", self.max_validations.to_string());
        put("seed", self.seed.to_string());
        put("emb_dim", self.emb_dim.to_string());
        put("hidden_dim", self.hidden_dim.to_string());
        put("init_scale", format!("{:?}", self.init_scale));
        put("max_len", self.max_len.to_string());
        put("max_order", self.max_order.to_string());
        put("train_split", self.train_split.clone());
        put("dev_split", self.dev_split.clone());
        put("test_split", self.test_split.clone());
        put("data_dir", self.data_dir.display().to_string());
        put("out_dir", self.out_dir.display().to_string());
        put(
            "init",
            self.init
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
        );
        s
    }
}

/// `key=value` lines of a config file; blank lines and `#` comments are
/// skipped.
pub fn read_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            HarnessError::Usage(format!("config line {}: expected key=value", i + 1))
        })?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

/// Splits `--key=value` arguments into pairs.
pub fn parse_overrides(args: &[String]) -> Result<Vec<(String, String)>> {
    args.iter()
        .map(|a| {
            a.strip_prefix("--")
                .and_then(|kv| kv.split_once('='))
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| HarnessError::Usage(format!("expected --key=value, got `{a}`")))
        })
        .collect()
}
