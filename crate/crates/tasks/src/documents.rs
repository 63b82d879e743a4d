//! Document collections for document-match rewards.
//!
//! One document per line: `id<TAB>tokens`, sentences separated by a `|||`
//! token. A document belongs to pool `p` when its id starts with `p/`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::corpus::{Tokens, WeakMtInstance};
use crate::error::{DataError, Result};

pub const SENTENCE_SEP: &str = "|||";

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DocumentCollection {
    docs: BTreeMap<String, Vec<Tokens>>,
}

impl DocumentCollection {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: impl Into<String>, sentences: Vec<Tokens>) -> Result<()> {
        let id = id.into();
        if id.is_empty() || id.contains(char::is_whitespace) || id.contains(',') {
            return Err(DataError::Invalid(format!("invalid document id {id:?}")));
        }
        if sentences.iter().any(|s| s.is_empty()) {
            return Err(DataError::Invalid(format!(
                "document {id} has an empty sentence"
            )));
        }
        if self.docs.insert(id.clone(), sentences).is_some() {
            return Err(DataError::Invalid(format!("duplicate document id {id}")));
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&[Tokens]> {
        self.docs.get(id).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.docs.keys().map(String::as_str)
    }

    /// Ids in pool `name`, sorted.
    pub fn pool(&self, name: &str) -> Vec<&str> {
        let prefix = format!("{name}/");
        self.docs
            .range(prefix.clone()..)
            .take_while(|(k, _)| k.starts_with(&prefix))
            .map(|(k, _)| k.as_str())
            .collect()
    }

    /// Sentences of all `ids`, in order.
    pub fn sentences(&self, ids: &[String]) -> Result<Vec<&Tokens>> {
        let mut out = Vec::new();
        for id in ids {
            let d = self
                .docs
                .get(id)
                .ok_or_else(|| DataError::Invalid(format!("unknown document id {id}")))?;
            out.extend(d.iter());
        }
        Ok(out)
    }

    /// Checks that every referenced id and pool exists.
    pub fn check_references(&self, instances: &[WeakMtInstance]) -> Result<()> {
        for (i, x) in instances.iter().enumerate() {
            for id in &x.relevant {
                if !self.docs.contains_key(id) {
                    return Err(DataError::Invalid(format!(
                        "instance {}: unknown document {id}",
                        i + 1
                    )));
                }
            }
            if self.pool(&x.irrelevant_pool).is_empty() {
                return Err(DataError::Invalid(format!(
                    "instance {}: empty pool {}",
                    i + 1,
                    x.irrelevant_pool
                )));
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (id, sents) in &self.docs {
            let body: Vec<String> = sents.iter().map(|t| t.join(" ")).collect();
            s.push_str(id);
            s.push('\t');
            s.push_str(&body.join(&format!(" {SENTENCE_SEP} ")));
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut c = Self::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.strip_suffix('\r').unwrap_or(line);
            let (id, body) = line
                .split_once('\t')
                .ok_or_else(|| DataError::line(origin, i + 1, "expected `id<TAB>tokens`"))?;
            let mut sents = vec![Vec::new()];
            for t in body.split_whitespace() {
                if t == SENTENCE_SEP {
                    sents.push(Vec::new());
                } else {
                    sents.last_mut().unwrap().push(t.to_string());
                }
            }
            sents.retain(|s| !s.is_empty());
            if sents.is_empty() {
                return Err(DataError::line(origin, i + 1, "empty document"));
            }
            c.insert(id, sents)
                .map_err(|e| DataError::line(origin, i + 1, e.to_string()))?;
        }
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&fs::read_to_string(path)?, &path.display().to_string())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }
}
