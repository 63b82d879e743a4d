//! Test-time decoding and per-instance reports.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rampkit_core::metrics::{Answer, BleuStats, F1Score};
use rampkit_core::{beam_search, Model64};
use rampkit_tasks::execute;

use crate::config::TaskKind;
use crate::data::{Example, Target, TaskData};
use crate::error::{HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    F1,
    Bleu,
}

impl Metric {
    pub fn for_task(task: TaskKind) -> Self {
        match task {
            TaskKind::Parsing => Self::F1,
            _ => Self::Bleu,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::F1 => "f1",
            Self::Bleu => "bleu",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "f1" => Ok(Self::F1),
            "bleu" => Ok(Self::Bleu),
            _ => Err(HarnessError::Usage(format!("unknown metric `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Stats {
    Answer { non_empty: bool, correct: bool },
    Bleu(BleuStats),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstanceRecord {
    pub id: usize,
    pub src_len: usize,
    pub group: String,
    pub stats: Stats,
    pub source: String,
    pub hypothesis: String,
    pub reference: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalReport {
    pub metric: Metric,
    pub records: Vec<InstanceRecord>,
}

/// Corpus-level score of `records`: F1 in `[0, 1]` or BLEU in `[0, 100]`.
pub fn score_records<'a>(
    metric: Metric,
    records: impl IntoIterator<Item = &'a InstanceRecord>,
) -> f64 {
    match metric {
        Metric::F1 => {
            let (mut c, mut n, mut t) = (0, 0, 0);
            for r in records {
                if let Stats::Answer { non_empty, correct } = r.stats {
                    c += usize::from(correct);
                    n += usize::from(non_empty);
                }
                t += 1;
            }
            F1Score::from_counts(c, n, t).f1
        }
        Metric::Bleu => {
            let mut s = BleuStats::default();
            for r in records {
                if let Stats::Bleu(b) = &r.stats {
                    s.add(b);
                }
            }
            100.0 * s.score(false)
        }
    }
}

const F1_HEADER: &str = "id\tsrc_len\tgroup\tnon_empty\tcorrect\tsource\thypothesis\tgold";
const BLEU_HEADER: &str =
    "id\tsrc_len\tgroup\thyp_len\tref_len\tmatches\ttotals\tsource\thypothesis\treference";

fn join(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

impl EvalReport {
    pub fn score(&self) -> f64 {
        score_records(self.metric, &self.records)
    }

    pub fn summary(&self) -> String {
        match self.metric {
            Metric::F1 => {
                let (mut c, mut n) = (0, 0);
                for r in &self.records {
                    if let Stats::Answer { non_empty, correct } = r.stats {
                        c += usize::from(correct);
                        n += usize::from(non_empty);
                    }
                }
                let s = F1Score::from_counts(c, n, self.records.len());
                format!(
                    "f1={:.4}\tprecision={:.4}\trecall={:.4}\tinstances={}",
                    s.f1, s.precision, s.recall, s.total
                )
            }
            Metric::Bleu => format!("bleu={:.2}\tinstances={}", self.score(), self.records.len()),
        }
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        s.push_str(match self.metric {
            Metric::F1 => F1_HEADER,
            Metric::Bleu => BLEU_HEADER,
        });
        s.push('\n');
        for r in &self.records {
            let _ = write!(s, "{}\t{}\t{}\t", r.id, r.src_len, r.group);
            match &r.stats {
                Stats::Answer { non_empty, correct } => {
                    let _ = write!(s, "{}\t{}\t", u8::from(*non_empty), u8::from(*correct));
                }
                Stats::Bleu(b) => {
                    let _ = write!(
                        s,
                        "{}\t{}\t{}\t{}\t",
                        b.hyp_len,
                        b.ref_len,
                        join(&b.matches),
                        join(&b.totals)
                    );
                }
            }
            let _ = writeln!(s, "{}\t{}\t{}", r.source, r.hypothesis, r.reference);
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(|l| l.strip_suffix('\r').unwrap_or(l));
        let metric = match lines.next() {
            Some(F1_HEADER) => Metric::F1,
            Some(BLEU_HEADER) => Metric::Bleu,
            _ => return Err(HarnessError::Data("report: unrecognised header".into())),
        };
        let mut records = Vec::new();
        for (i, line) in lines.enumerate() {
            let bad = |m: &str| HarnessError::Data(format!("report line {}: {m}", i + 2));
            let f: Vec<&str> = line.split('\t').collect();
            let want = if metric == Metric::F1 { 8 } else { 10 };
            if f.len() != want {
                return Err(bad(&format!("expected {want} fields, found {}", f.len())));
            }
            let int = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| bad(&format!("bad number `{s}`")))
            };
            let list = |s: &str| -> Result<Vec<usize>> {
                if s.is_empty() {
                    Ok(Vec::new())
                } else {
                    s.split(',').map(int).collect()
                }
            };
            let flag = |s: &str| match s {
                "0" => Ok(false),
                "1" => Ok(true),
                _ => Err(bad(&format!("bad flag `{s}`"))),
            };
            let (stats, rest) = match metric {
                Metric::F1 => (
                    Stats::Answer {
                        non_empty: flag(f[3])?,
                        correct: flag(f[4])?,
                    },
                    &f[5..],
                ),
                Metric::Bleu => (
                    Stats::Bleu(BleuStats {
                        hyp_len: int(f[3])?,
                        ref_len: int(f[4])?,
                        matches: list(f[5])?,
                        totals: list(f[6])?,
                    }),
                    &f[7..],
                ),
            };
            records.push(InstanceRecord {
                id: int(f[0])?,
                src_len: int(f[1])?,
                group: f[2].to_string(),
                stats,
                source: rest[0].to_string(),
                hypothesis: rest[1].to_string(),
                reference: rest[2].to_string(),
            });
        }
        Ok(Self { metric, records })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| HarnessError::Data(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_tsv())?;
        Ok(())
    }
}

/// Scores one decoded output (target ids, EOS allowed) against `ex`.
pub fn record_for(data: &TaskData, ex: &Example, output: &[usize]) -> Result<InstanceRecord> {
    let words = data.tgt_vocab.decode(output);
    let stats = match &ex.target {
        Target::Parse { answer, .. } => {
            let db = data
                .db
                .as_ref()
                .ok_or_else(|| HarnessError::Data("parsing data without a database".into()))?;
            let got = execute(&words, db);
            Stats::Answer {
                non_empty: !got.is_empty(),
                correct: !got.is_empty() && &got == answer,
            }
        }
        _ => {
            let r = ex.reference_words().unwrap();
            Stats::Bleu(BleuStats::new(&words, r, data.max_order))
        }
    };
    let reference = match &ex.target {
        Target::Parse { answer, .. } => answer.to_field(),
        _ => ex.reference_words().unwrap().join(" "),
    };
    Ok(InstanceRecord {
        id: ex.id,
        src_len: ex.src.len(),
        group: ex.group.clone(),
        stats,
        source: ex.src_words.join(" "),
        hypothesis: words.join(" "),
        reference,
    })
}

/// Decodes every example with beam search (1-best) and scores it.
pub fn evaluate(
    model: &Model64,
    data: &TaskData,
    examples: &[Example],
    beam: usize,
    max_len: usize,
) -> Result<EvalReport> {
    let mut records = Vec::with_capacity(examples.len());
    for ex in examples {
        let kb = beam_search(model, ex.id, &ex.src, beam, 1, max_len)?;
        records.push(record_for(data, ex, &kb.hyps[0].tokens)?);
    }
    Ok(EvalReport {
        metric: Metric::for_task(data.kind),
        records,
    })
}

/// Answer of a parse given as target ids.
pub fn answer_of(data: &TaskData, output: &[usize]) -> Answer {
    match &data.db {
        Some(db) => execute(&data.tgt_vocab.decode(output), db),
        None => Answer::empty(),
    }
}
