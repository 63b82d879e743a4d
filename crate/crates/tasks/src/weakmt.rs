//! Synthetic translation with a domain shift.
//!
//! Sentences are drawn from topic vocabularies and translated monotonically
//! word by word; some words become two target tokens. A fifth of the source
//! vocabulary is ambiguous: each such word has two target senses, chosen by
//! the class of the preceding source word. In-domain text flips that choice,
//! so a model trained out of domain gets exactly those words wrong.
//!
//! Every in-domain instance links to one relevant document built from
//! in-domain translations of fragments of the instance, and to a pool of
//! out-of-domain documents on the same topic.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use rampkit_core::rng::substream;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::{self, SupervisedPair, Tokens, WeakMtInstance};
use crate::documents::DocumentCollection;
use crate::error::{DataError, Result};
use crate::manifest::{length_ratio, Manifest};

const N_FUNCTION: usize = 8;
const N_TOPICS: usize = 4;
const TOPIC_WORDS: usize = 10;
const AMBIGUOUS_FRACTION: f64 = 0.2;
const COMPOUND_RATE: f64 = 0.15;
const FUNCTION_RATE: f64 = 0.3;
const MIN_LEN: usize = 4;
const MAX_LEN: usize = 9;
const POOL_DOCS: usize = 25;
const DOC_SENTENCES: usize = 4;
const RELEVANT_SENTENCES: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    Out,
    In,
}

/// Bilingual lexicon with context-dependent senses.
#[derive(Clone, Debug)]
pub struct Lexicon {
    pub function_words: Vec<String>,
    pub topics: Vec<Vec<String>>,
    class: BTreeMap<String, usize>,
    plain: BTreeMap<String, Tokens>,
    senses: BTreeMap<String, [String; 2]>,
}

fn pseudo_words<R: Rng>(
    rng: &mut R,
    n: usize,
    shape: &str,
    taken: &mut HashSet<String>,
) -> Vec<String> {
    const C: &[u8] = b"bdfgklmnprstvz";
    const V: &[u8] = b"aeiou";
    let mut out = Vec::new();
    while out.len() < n {
        let w: String = shape
            .bytes()
            .map(|s| *if s == b'C' { C } else { V }.choose(rng).unwrap() as char)
            .collect();
        if taken.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

impl Lexicon {
    pub fn generate(seed: u64) -> Self {
        let rng = &mut substream(seed, "weakmt/lexicon", 0);
        let mut taken = HashSet::new();
        let src = pseudo_words(rng, N_FUNCTION + N_TOPICS * TOPIC_WORDS, "CVCV", &mut taken);
        let function_words = src[..N_FUNCTION].to_vec();
        let topics: Vec<Vec<String>> = src[N_FUNCTION..]
            .chunks(TOPIC_WORDS)
            .map(<[_]>::to_vec)
            .collect();

        let mut classes: Vec<usize> = (0..src.len()).map(|i| i % 2).collect();
        classes.shuffle(rng);
        let class = src.iter().cloned().zip(classes).collect();

        let n_amb = (AMBIGUOUS_FRACTION * src.len() as f64).round() as usize;
        let mut topic_words: Vec<&String> = src[N_FUNCTION..].iter().collect();
        topic_words.shuffle(rng);
        let ambiguous: HashSet<&String> = topic_words[..n_amb].iter().copied().collect();

        let mut plain = BTreeMap::new();
        let mut senses = BTreeMap::new();
        for w in &src {
            if ambiguous.contains(w) {
                let s = pseudo_words(rng, 2, "CVC", &mut taken);
                senses.insert(w.clone(), [s[0].clone(), s[1].clone()]);
            } else {
                let n = if !function_words.contains(w) && rng.gen_bool(COMPOUND_RATE) {
                    2
                } else {
                    1
                };
                plain.insert(w.clone(), pseudo_words(rng, n, "CVC", &mut taken));
            }
        }
        Self {
            function_words,
            topics,
            class,
            plain,
            senses,
        }
    }

    pub fn is_ambiguous(&self, w: &str) -> bool {
        self.senses.contains_key(w)
    }

    pub fn ambiguous_words(&self) -> impl Iterator<Item = &str> {
        self.senses.keys().map(String::as_str)
    }

    pub fn senses(&self, w: &str) -> Option<&[String; 2]> {
        self.senses.get(w)
    }

    /// Sense index selected after `prev` (`None` at sentence start).
    pub fn sense_index(&self, prev: Option<&str>, domain: Domain) -> usize {
        let c = prev.map_or(0, |p| self.class[p]);
        match domain {
            Domain::Out => c,
            Domain::In => 1 - c,
        }
    }

    /// Target tokens per source word.
    pub fn translate_words<S: AsRef<str>>(&self, src: &[S], domain: Domain) -> Vec<Tokens> {
        let mut out = Vec::with_capacity(src.len());
        for (i, w) in src.iter().enumerate() {
            let w = w.as_ref();
            let prev = i.checked_sub(1).map(|j| src[j].as_ref());
            let t = match self.senses.get(w) {
                Some(s) => vec![s[self.sense_index(prev, domain)].clone()],
                None => self
                    .plain
                    .get(w)
                    .cloned()
                    .unwrap_or_else(|| vec![w.to_string()]),
            };
            out.push(t);
        }
        out
    }

    pub fn translate<S: AsRef<str>>(&self, src: &[S], domain: Domain) -> Tokens {
        self.translate_words(src, domain).concat()
    }

    fn word<R: Rng>(&self, topic: usize, rng: &mut R) -> String {
        if rng.gen_bool(FUNCTION_RATE) {
            self.function_words.choose(rng).unwrap().clone()
        } else {
            self.topics[topic].choose(rng).unwrap().clone()
        }
    }

    pub fn sentence<R: Rng>(&self, topic: usize, rng: &mut R) -> Tokens {
        let n = rng.gen_range(MIN_LEN..=MAX_LEN);
        (0..n).map(|_| self.word(topic, rng)).collect()
    }

    fn topic_of(&self, src: &[String]) -> usize {
        (0..self.topics.len())
            .max_by_key(|&t| {
                (
                    src.iter().filter(|w| self.topics[t].contains(w)).count(),
                    usize::MAX - t,
                )
            })
            .unwrap()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WeakMtSizes {
    pub pretrain: usize,
    pub pretrain_dev: usize,
    pub weak: usize,
    pub dev: usize,
    pub test: usize,
}

impl Default for WeakMtSizes {
    fn default() -> Self {
        Self {
            pretrain: 2000,
            pretrain_dev: 300,
            weak: 1000,
            dev: 300,
            test: 300,
        }
    }
}

impl WeakMtSizes {
    pub fn validate(&self) -> Result<()> {
        if [
            self.pretrain,
            self.pretrain_dev,
            self.weak,
            self.dev,
            self.test,
        ]
        .contains(&0)
        {
            return Err(DataError::Sizes(format!(
                "all split sizes must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeakMtTask {
    pub seed: u64,
    /// Out-of-domain parallel data.
    pub pretrain: Vec<SupervisedPair>,
    pub pretrain_dev: Vec<SupervisedPair>,
    pub weak: Vec<WeakMtInstance>,
    pub dev: Vec<WeakMtInstance>,
    pub test: Vec<WeakMtInstance>,
    pub documents: DocumentCollection,
    pub length_ratio: f64,
}

pub fn pool_name(topic: usize) -> String {
    format!("ood/t{topic}")
}

/// In-domain translations of short fragments of `src`, each padded with
/// random words of the same topic.
fn relevant_document<R: Rng>(
    lex: &Lexicon,
    src: &[String],
    topic: usize,
    rng: &mut R,
) -> Vec<Tokens> {
    (0..RELEVANT_SENTENCES)
        .map(|_| {
            let w = rng.gen_range(2..=src.len().min(4));
            let start = rng.gen_range(0..=src.len() - w);
            let mut s: Tokens = (0..rng.gen_range(0..=2))
                .map(|_| lex.word(topic, rng))
                .collect();
            s.extend_from_slice(&src[start..start + w]);
            s.extend((0..rng.gen_range(0..=2)).map(|_| lex.word(topic, rng)));
            lex.translate(&s, Domain::In)
        })
        .collect()
}

/// A sentence not drawn before in this task.
fn fresh<R: Rng>(lex: &Lexicon, seen: &mut HashSet<Tokens>, rng: &mut R) -> Tokens {
    loop {
        let s = lex.sentence(rng.gen_range(0..N_TOPICS), rng);
        if seen.insert(s.clone()) {
            return s;
        }
    }
}

pub fn generate_weakmt_task(seed: u64, sizes: WeakMtSizes) -> Result<WeakMtTask> {
    sizes.validate()?;
    let lex = Lexicon::generate(seed);
    let mut docs = DocumentCollection::new();
    for t in 0..N_TOPICS {
        let rng = &mut substream(seed, "weakmt/pool", t as u64);
        for j in 0..POOL_DOCS {
            let sents = (0..DOC_SENTENCES)
                .map(|_| lex.translate(&lex.sentence(t, rng), Domain::Out))
                .collect();
            docs.insert(format!("{}/{j}", pool_name(t)), sents)?;
        }
    }

    let mut seen = HashSet::new();
    let mut pairs = |name: &str, n: usize| -> Vec<SupervisedPair> {
        let rng = &mut substream(seed, name, 0);
        (0..n)
            .map(|_| {
                let src = fresh(&lex, &mut seen, rng);
                let tgt = lex.translate(&src, Domain::Out);
                SupervisedPair { src, tgt }
            })
            .collect()
    };
    let pretrain = pairs("weakmt/pretrain", sizes.pretrain);
    let pretrain_dev = pairs("weakmt/pretrain_dev", sizes.pretrain_dev);

    let mut in_domain = |name: &str, n: usize| -> Result<Vec<WeakMtInstance>> {
        let rng = &mut substream(seed, &format!("weakmt/{name}"), 0);
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let src = fresh(&lex, &mut seen, rng);
            let topic = lex.topic_of(&src);
            let id = format!("in/{name}/{i}");
            docs.insert(id.clone(), relevant_document(&lex, &src, topic, rng))?;
            out.push(WeakMtInstance {
                reference: lex.translate(&src, Domain::In),
                src,
                relevant: vec![id],
                irrelevant_pool: pool_name(topic),
            });
        }
        Ok(out)
    };
    let weak = in_domain("weak", sizes.weak)?;
    let dev = in_domain("dev", sizes.dev)?;
    let test = in_domain("test", sizes.test)?;

    let length_ratio = length_ratio(
        pretrain
            .iter()
            .map(|p| (p.src.as_slice(), p.tgt.as_slice())),
    );
    Ok(WeakMtTask {
        seed,
        pretrain,
        pretrain_dev,
        weak,
        dev,
        test,
        documents: docs,
        length_ratio,
    })
}

pub const SUPERVISED_SPLITS: [&str; 2] = ["pretrain", "pretrain_dev"];
pub const WEAK_SPLITS: [&str; 3] = ["weak", "dev", "test"];

impl WeakMtTask {
    pub fn supervised_split(&self, name: &str) -> Option<&[SupervisedPair]> {
        match name {
            "pretrain" => Some(&self.pretrain),
            "pretrain_dev" => Some(&self.pretrain_dev),
            _ => None,
        }
    }

    pub fn weak_split(&self, name: &str) -> Option<&[WeakMtInstance]> {
        match name {
            "weak" => Some(&self.weak),
            "dev" => Some(&self.dev),
            "test" => Some(&self.test),
            _ => None,
        }
    }

    pub fn manifest(&self) -> Manifest {
        let mut sizes: Vec<(String, usize)> = SUPERVISED_SPLITS
            .iter()
            .map(|s| (s.to_string(), self.supervised_split(s).unwrap().len()))
            .collect();
        sizes.extend(
            WEAK_SPLITS
                .iter()
                .map(|s| (s.to_string(), self.weak_split(s).unwrap().len())),
        );
        Manifest {
            task: "weakmt".into(),
            seed: self.seed,
            sizes,
            length_ratio: self.length_ratio,
        }
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        for s in SUPERVISED_SPLITS {
            corpus::save(
                dir.join(format!("{s}.tsv")),
                self.supervised_split(s).unwrap(),
            )?;
        }
        for s in WEAK_SPLITS {
            corpus::save(dir.join(format!("{s}.tsv")), self.weak_split(s).unwrap())?;
        }
        self.documents.save(dir.join("documents.tsv"))?;
        self.manifest().save(dir.join("manifest.txt"))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let m = Manifest::load(dir.join("manifest.txt"))?;
        if m.task != "weakmt" {
            return Err(DataError::Invalid(format!(
                "{} holds a {} task",
                dir.display(),
                m.task
            )));
        }
        let sup = |s: &str| corpus::load::<SupervisedPair>(dir.join(format!("{s}.tsv")));
        let weak = |s: &str| corpus::load::<WeakMtInstance>(dir.join(format!("{s}.tsv")));
        let task = Self {
            seed: m.seed,
            pretrain: sup("pretrain")?,
            pretrain_dev: sup("pretrain_dev")?,
            weak: weak("weak")?,
            dev: weak("dev")?,
            test: weak("test")?,
            documents: DocumentCollection::load(dir.join("documents.tsv"))?,
            length_ratio: m.length_ratio,
        };
        for s in WEAK_SPLITS {
            task.documents
                .check_references(task.weak_split(s).unwrap())?;
        }
        Ok(task)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FullMtSizes {
    pub train: usize,
    pub dev: usize,
    pub test: usize,
}

impl Default for FullMtSizes {
    fn default() -> Self {
        Self {
            train: 2000,
            dev: 300,
            test: 300,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FullMtTask {
    pub seed: u64,
    pub train: Vec<SupervisedPair>,
    pub dev: Vec<SupervisedPair>,
    pub test: Vec<SupervisedPair>,
}

/// In-domain parallel data over the same lexicon as the weak task.
pub fn generate_fullmt_task(seed: u64, sizes: FullMtSizes) -> Result<FullMtTask> {
    if [sizes.train, sizes.dev, sizes.test].contains(&0) {
        return Err(DataError::Sizes(format!(
            "all split sizes must be positive: {sizes:?}"
        )));
    }
    let lex = Lexicon::generate(seed);
    let mut seen = HashSet::new();
    let mut split = |name: &str, n: usize| {
        let rng = &mut substream(seed, name, 0);
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let src = lex.sentence(rng.gen_range(0..N_TOPICS), rng);
            if seen.insert(src.clone()) {
                out.push(SupervisedPair {
                    tgt: lex.translate(&src, Domain::In),
                    src,
                });
            }
        }
        out
    };
    Ok(FullMtTask {
        seed,
        train: split("fullmt/train", sizes.train),
        dev: split("fullmt/dev", sizes.dev),
        test: split("fullmt/test", sizes.test),
    })
}

impl FullMtTask {
    pub fn split(&self, name: &str) -> Option<&[SupervisedPair]> {
        match name {
            "train" => Some(&self.train),
            "dev" => Some(&self.dev),
            "test" => Some(&self.test),
            _ => None,
        }
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            task: "fullmt".into(),
            seed: self.seed,
            sizes: ["train", "dev", "test"]
                .iter()
                .map(|s| (s.to_string(), self.split(s).unwrap().len()))
                .collect(),
            length_ratio: length_ratio(
                self.train
                    .iter()
                    .map(|p| (p.src.as_slice(), p.tgt.as_slice())),
            ),
        }
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        for s in ["train", "dev", "test"] {
            corpus::save(dir.join(format!("{s}.tsv")), self.split(s).unwrap())?;
        }
        self.manifest().save(dir.join("manifest.txt"))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let m = Manifest::load(dir.join("manifest.txt"))?;
        if m.task != "fullmt" {
            return Err(DataError::Invalid(format!(
                "{} holds a {} task",
                dir.display(),
                m.task
            )));
        }
        let load = |s: &str| corpus::load::<SupervisedPair>(dir.join(format!("{s}.tsv")));
        Ok(Self {
            seed: m.seed,
            train: load("train")?,
            dev: load("dev")?,
            test: load("test")?,
        })
    }
}
