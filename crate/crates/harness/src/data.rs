//! Task data mapped to vocabulary ids.

use std::collections::BTreeMap;
use std::path::Path;

use rampkit_core::metrics::{Answer, NGramIndex};
use rampkit_core::vocab::EOS;
use rampkit_core::Vocab;
use rampkit_tasks::parsing::{AND, FILTER, LOOKUP};
use rampkit_tasks::{
    generate_fullmt_task, generate_parsing_task, generate_weakmt_task, FullMtSizes, FullMtTask,
    ParsingSizes, ParsingTask, SupervisedPair, Tokens, ToyDatabase, WeakMtInstance, WeakMtSizes,
    WeakMtTask,
};

use crate::config::TaskKind;
use crate::error::{HarnessError, Result};

/// What an example is scored against.
#[derive(Clone, Debug)]
pub enum Target {
    /// Parsing: gold parse ids with EOS, if the split has them.
    Parse {
        gold: Option<Vec<usize>>,
        answer: Answer,
    },
    /// Parallel data: reference ids with EOS.
    Reference { ids: Vec<usize>, words: Tokens },
    /// Document-linked data. The reference is for evaluation only.
    Linked {
        relevant: NGramIndex<usize>,
        pool: String,
        reference: Tokens,
    },
}

#[derive(Clone, Debug)]
pub struct Example {
    pub id: usize,
    pub src: Vec<usize>,
    pub src_words: Tokens,
    pub target: Target,
    /// Grouping key for bucketed reports.
    pub group: String,
}

impl Example {
    /// Gold output ids with EOS, when the example has one.
    pub fn gold(&self) -> Option<&[usize]> {
        match &self.target {
            Target::Parse { gold, .. } => gold.as_deref(),
            Target::Reference { ids, .. } => Some(ids),
            Target::Linked { .. } => None,
        }
    }

    /// Reference words for BLEU evaluation.
    pub fn reference_words(&self) -> Option<&[String]> {
        match &self.target {
            Target::Reference { words, .. } => Some(words),
            Target::Linked { reference, .. } => Some(reference),
            Target::Parse { .. } => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TaskData {
    pub kind: TaskKind,
    pub src_vocab: Vocab,
    pub tgt_vocab: Vocab,
    pub splits: BTreeMap<String, Vec<Example>>,
    pub db: Option<ToyDatabase>,
    /// Document indices by pool name.
    pub pools: BTreeMap<String, Vec<NGramIndex<usize>>>,
    pub length_ratio: f64,
    pub max_order: usize,
}

fn with_eos(v: &Vocab, t: &[String]) -> Vec<usize> {
    let mut ids = v.encode(t);
    ids.push(EOS);
    ids
}

/// Generates a task with default split sizes overridden by `sizes` (split
/// name, count) and writes it to `dir`.
pub fn generate(
    kind: TaskKind,
    seed: u64,
    sizes: &[(String, usize)],
    dir: impl AsRef<Path>,
) -> Result<()> {
    fn apply(fields: &mut [(&str, &mut usize)], sizes: &[(String, usize)]) -> Result<()> {
        for (name, n) in sizes {
            let slot = fields
                .iter_mut()
                .find(|(f, _)| f == name)
                .ok_or_else(|| HarnessError::Usage(format!("unknown split `{name}`")))?;
            *slot.1 = *n;
        }
        Ok(())
    }
    let dir = dir.as_ref();
    match kind {
        TaskKind::Parsing => {
            let mut s = ParsingSizes::default();
            apply(
                &mut [
                    ("supervised", &mut s.supervised),
                    ("weak", &mut s.weak),
                    ("dev", &mut s.dev),
                    ("test", &mut s.test),
                ],
                sizes,
            )?;
            s.validate()
                .map_err(|e| HarnessError::Usage(e.to_string()))?;
            generate_parsing_task(seed, s)?.save(dir)?;
        }
        TaskKind::WeakMt => {
            let mut s = WeakMtSizes::default();
            apply(
                &mut [
                    ("pretrain", &mut s.pretrain),
                    ("pretrain_dev", &mut s.pretrain_dev),
                    ("weak", &mut s.weak),
                    ("dev", &mut s.dev),
                    ("test", &mut s.test),
                ],
                sizes,
            )?;
            s.validate()
                .map_err(|e| HarnessError::Usage(e.to_string()))?;
            generate_weakmt_task(seed, s)?.save(dir)?;
        }
        TaskKind::FullMt => {
            let mut s = FullMtSizes::default();
            apply(
                &mut [
                    ("train", &mut s.train),
                    ("dev", &mut s.dev),
                    ("test", &mut s.test),
                ],
                sizes,
            )?;
            if [s.train, s.dev, s.test].contains(&0) {
                return Err(HarnessError::Usage(
                    "all split sizes must be positive".into(),
                ));
            }
            generate_fullmt_task(seed, s)?.save(dir)?;
        }
    }
    Ok(())
}

impl TaskData {
    pub fn load(kind: TaskKind, dir: impl AsRef<Path>, max_order: usize) -> Result<Self> {
        let dir = dir.as_ref();
        match kind {
            TaskKind::Parsing => Ok(Self::parsing(&ParsingTask::load(dir)?)),
            TaskKind::WeakMt => Self::weakmt(&WeakMtTask::load(dir)?, max_order),
            TaskKind::FullMt => Ok(Self::fullmt(&FullMtTask::load(dir)?, max_order)),
        }
    }

    /// Source vocabulary from the training questions; target vocabulary from
    /// the query grammar and the database.
    pub fn parsing(task: &ParsingTask) -> Self {
        let src_vocab = Vocab::from_corpus(
            task.supervised
                .iter()
                .chain(&task.weak)
                .map(|x| x.question.as_slice()),
        );
        let mut tgt: Vec<String> = [LOOKUP, FILTER, AND]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let mut rest: Vec<&str> = task.db.triples().flat_map(|(e, a, v)| [e, a, v]).collect();
        rest.sort_unstable();
        rest.dedup();
        tgt.extend(rest.into_iter().map(str::to_string));
        let tgt_vocab = Vocab::from_tokens(tgt);
        let mut splits = BTreeMap::new();
        for name in rampkit_tasks::parsing::SPLITS {
            let xs = task.split(name).unwrap();
            let ex = xs
                .iter()
                .enumerate()
                .map(|(id, x)| Example {
                    id,
                    src: src_vocab.encode(&x.question),
                    src_words: x.question.clone(),
                    target: Target::Parse {
                        gold: x.parse.as_ref().map(|p| with_eos(&tgt_vocab, p)),
                        answer: x.answer.clone(),
                    },
                    group: x.parse.as_ref().map_or("-".into(), |p| query_form(p)),
                })
                .collect();
            splits.insert(name.to_string(), ex);
        }
        Self {
            kind: TaskKind::Parsing,
            src_vocab,
            tgt_vocab,
            splits,
            db: Some(task.db.clone()),
            pools: BTreeMap::new(),
            length_ratio: task.manifest().length_ratio,
            max_order: 4,
        }
    }

    pub fn weakmt(task: &WeakMtTask, max_order: usize) -> Result<Self> {
        let src_vocab = Vocab::from_corpus(
            task.pretrain
                .iter()
                .map(|p| p.src.as_slice())
                .chain(task.weak.iter().map(|x| x.src.as_slice())),
        );
        let doc_sents: Vec<&[String]> = task
            .documents
            .ids()
            .flat_map(|id| task.documents.get(id).unwrap().iter().map(Vec::as_slice))
            .collect();
        let tgt_vocab = Vocab::from_corpus(
            task.pretrain
                .iter()
                .map(|p| p.tgt.as_slice())
                .chain(doc_sents),
        );
        let index = |ids: &[String]| -> Result<NGramIndex<usize>> {
            let sents: Vec<Vec<usize>> = task
                .documents
                .sentences(ids)?
                .into_iter()
                .map(|s| tgt_vocab.encode(s))
                .collect();
            Ok(NGramIndex::new(&sents, max_order))
        };
        let mut pools = BTreeMap::new();
        let mut splits = BTreeMap::new();
        for name in rampkit_tasks::weakmt::SUPERVISED_SPLITS {
            splits.insert(
                name.to_string(),
                parallel(task.supervised_split(name).unwrap(), &src_vocab, &tgt_vocab),
            );
        }
        for name in rampkit_tasks::weakmt::WEAK_SPLITS {
            let xs: &[WeakMtInstance] = task.weak_split(name).unwrap();
            let mut ex = Vec::with_capacity(xs.len());
            for (id, x) in xs.iter().enumerate() {
                if !pools.contains_key(&x.irrelevant_pool) {
                    let members: Vec<String> = task
                        .documents
                        .pool(&x.irrelevant_pool)
                        .into_iter()
                        .map(str::to_string)
                        .collect();
                    if members.is_empty() {
                        return Err(HarnessError::Data(format!(
                            "empty document pool {}",
                            x.irrelevant_pool
                        )));
                    }
                    let idx = members
                        .iter()
                        .map(|m| index(std::slice::from_ref(m)))
                        .collect::<Result<Vec<_>>>()?;
                    pools.insert(x.irrelevant_pool.clone(), idx);
                }
                ex.push(Example {
                    id,
                    src: src_vocab.encode(&x.src),
                    src_words: x.src.clone(),
                    target: Target::Linked {
                        relevant: index(&x.relevant)?,
                        pool: x.irrelevant_pool.clone(),
                        reference: x.reference.clone(),
                    },
                    group: x.irrelevant_pool.clone(),
                });
            }
            splits.insert(name.to_string(), ex);
        }
        Ok(Self {
            kind: TaskKind::WeakMt,
            src_vocab,
            tgt_vocab,
            splits,
            db: None,
            pools,
            length_ratio: task.length_ratio,
            max_order,
        })
    }

    pub fn fullmt(task: &FullMtTask, max_order: usize) -> Self {
        let src_vocab = Vocab::from_corpus(task.train.iter().map(|p| p.src.as_slice()));
        let tgt_vocab = Vocab::from_corpus(task.train.iter().map(|p| p.tgt.as_slice()));
        let splits = ["train", "dev", "test"]
            .iter()
            .map(|s| {
                (
                    s.to_string(),
                    parallel(task.split(s).unwrap(), &src_vocab, &tgt_vocab),
                )
            })
            .collect();
        Self {
            kind: TaskKind::FullMt,
            src_vocab,
            tgt_vocab,
            splits,
            db: None,
            pools: BTreeMap::new(),
            length_ratio: task.manifest().length_ratio,
            max_order,
        }
    }

    pub fn split(&self, name: &str) -> Result<&[Example]> {
        self.splits
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| HarnessError::Usage(format!("task {} has no split `{name}`", self.kind)))
    }
}

fn parallel(pairs: &[SupervisedPair], src: &Vocab, tgt: &Vocab) -> Vec<Example> {
    pairs
        .iter()
        .enumerate()
        .map(|(id, p)| Example {
            id,
            src: src.encode(&p.src),
            src_words: p.src.clone(),
            target: Target::Reference {
                ids: with_eos(tgt, &p.tgt),
                words: p.tgt.clone(),
            },
            group: "-".into(),
        })
        .collect()
}

/// Coarse query shape used as a report group.
fn query_form(parse: &[String]) -> String {
    match parse.first().map(String::as_str) {
        Some(LOOKUP) if parse.get(2).map(String::as_str) == Some(FILTER) => "lookup-set".into(),
        Some(t) => t.to_string(),
        None => "-".into(),
    }
}
