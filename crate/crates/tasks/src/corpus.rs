//! Tab-separated corpus files.
//!
//! | format     | fields                                   |
//! |------------|------------------------------------------|
//! | supervised | `src  tgt`                               |
//! | parsing    | `question  parse  answer` (parse may be empty) |
//! | weak       | `src  ref  relevant-ids  irrelevant-pool` |
//!
//! Token sequences are space separated, answers are `|`-joined and document
//! ids are `,`-joined. CRLF line endings are accepted.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rampkit_core::metrics::Answer;

use crate::error::{DataError, Result};

/// Longest sequence accepted on either side of a pair.
pub const MAX_LEN: usize = 64;

pub type Tokens = Vec<String>;

pub fn tokens(s: &str) -> Tokens {
    s.split_whitespace().map(str::to_string).collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SupervisedPair {
    pub src: Tokens,
    pub tgt: Tokens,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParsingInstance {
    pub question: Tokens,
    /// Pre-order parse; `None` on weakly supervised splits.
    pub parse: Option<Tokens>,
    pub answer: Answer,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeakMtInstance {
    pub src: Tokens,
    /// Held out for evaluation.
    pub reference: Tokens,
    pub relevant: Vec<String>,
    pub irrelevant_pool: String,
}

/// One line of a corpus file.
pub trait Record: Sized {
    const FIELDS: usize;
    fn to_fields(&self) -> Vec<String>;
    fn from_fields(fields: &[&str]) -> Result<Self, String>;
}

fn bounded(side: &str, t: Tokens) -> Result<Tokens, String> {
    if t.is_empty() {
        return Err(format!("empty {side}"));
    }
    if t.len() > MAX_LEN {
        return Err(format!("{side} longer than {MAX_LEN} tokens"));
    }
    Ok(t)
}

impl Record for SupervisedPair {
    const FIELDS: usize = 2;

    fn to_fields(&self) -> Vec<String> {
        vec![self.src.join(" "), self.tgt.join(" ")]
    }

    fn from_fields(f: &[&str]) -> Result<Self, String> {
        Ok(Self {
            src: bounded("source", tokens(f[0]))?,
            tgt: bounded("target", tokens(f[1]))?,
        })
    }
}

impl Record for ParsingInstance {
    const FIELDS: usize = 3;

    fn to_fields(&self) -> Vec<String> {
        vec![
            self.question.join(" "),
            self.parse.as_ref().map(|p| p.join(" ")).unwrap_or_default(),
            self.answer.to_field(),
        ]
    }

    fn from_fields(f: &[&str]) -> Result<Self, String> {
        let parse = tokens(f[1]);
        Ok(Self {
            question: bounded("question", tokens(f[0]))?,
            parse: (!parse.is_empty()).then_some(parse),
            answer: Answer::from_field(f[2].trim()),
        })
    }
}

impl Record for WeakMtInstance {
    const FIELDS: usize = 4;

    fn to_fields(&self) -> Vec<String> {
        vec![
            self.src.join(" "),
            self.reference.join(" "),
            self.relevant.join(","),
            self.irrelevant_pool.clone(),
        ]
    }

    fn from_fields(f: &[&str]) -> Result<Self, String> {
        let relevant: Vec<String> = f[2]
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect();
        if relevant.is_empty() {
            return Err("no relevant document ids".into());
        }
        let pool = f[3].trim();
        if pool.is_empty() {
            return Err("empty irrelevant pool".into());
        }
        Ok(Self {
            src: bounded("source", tokens(f[0]))?,
            reference: bounded("reference", tokens(f[1]))?,
            relevant,
            irrelevant_pool: pool.to_string(),
        })
    }
}

/// Parses `text`; `origin` names the input in error messages.
pub fn parse_records<R: Record>(text: &str, origin: &str) -> Result<Vec<R>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != R::FIELDS {
            return Err(DataError::line(
                origin,
                i + 1,
                format!(
                    "expected {} tab-separated fields, found {}",
                    R::FIELDS,
                    fields.len()
                ),
            ));
        }
        out.push(R::from_fields(&fields).map_err(|m| DataError::line(origin, i + 1, m))?);
    }
    Ok(out)
}

pub fn format_records<R: Record>(records: &[R]) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&r.to_fields().join("\t"));
        s.push('\n');
    }
    s
}

pub fn load<R: Record>(path: impl AsRef<Path>) -> Result<Vec<R>> {
    let path = path.as_ref();
    parse_records(&fs::read_to_string(path)?, &path.display().to_string())
}

pub fn save<R: Record>(path: impl AsRef<Path>, records: &[R]) -> Result<()> {
    fs::write(path, format_records(records))?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Supervised,
    Parsing,
    WeakMt,
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Supervised => "supervised",
            Self::Parsing => "parsing",
            Self::WeakMt => "weak",
        })
    }
}

impl FromStr for Format {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "supervised" => Ok(Self::Supervised),
            "parsing" => Ok(Self::Parsing),
            "weak" | "weakmt" => Ok(Self::WeakMt),
            _ => Err(DataError::Invalid(format!("unknown corpus format `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Corpus {
    Supervised(Vec<SupervisedPair>),
    Parsing(Vec<ParsingInstance>),
    WeakMt(Vec<WeakMtInstance>),
}

impl Corpus {
    pub fn len(&self) -> usize {
        match self {
            Self::Supervised(v) => v.len(),
            Self::Parsing(v) => v.len(),
            Self::WeakMt(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn load_corpus(path: impl AsRef<Path>, format: Format) -> Result<Corpus> {
    Ok(match format {
        Format::Supervised => Corpus::Supervised(load(path)?),
        Format::Parsing => Corpus::Parsing(load(path)?),
        Format::WeakMt => Corpus::WeakMt(load(path)?),
    })
}
