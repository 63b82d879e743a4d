//! Per-task manifest: a flat `key=value` file.

use std::fs;
use std::path::Path;

use crate::error::{DataError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub task: String,
    pub seed: u64,
    /// Split name and instance count, in file order.
    pub sizes: Vec<(String, usize)>,
    /// Mean target length over mean source length of the supervised data.
    pub length_ratio: f64,
}

impl Manifest {
    pub fn size(&self, split: &str) -> Option<usize> {
        self.sizes.iter().find(|(s, _)| s == split).map(|&(_, n)| n)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("task={}\nseed={}\n", self.task, self.seed);
        for (name, n) in &self.sizes {
            s.push_str(&format!("size.{name}={n}\n"));
        }
        // `{:?}` prints the shortest string that round-trips
        s.push_str(&format!("length_ratio={:?}\n", self.length_ratio));
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (mut task, mut seed, mut ratio) = (None, None, None);
        let mut sizes = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |m: &str| DataError::line("manifest", i + 1, m);
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad("expected key=value"))?;
            match k.trim() {
                "task" => task = Some(v.trim().to_string()),
                "seed" => seed = Some(v.trim().parse().map_err(|_| bad("bad seed"))?),
                "length_ratio" => {
                    ratio = Some(v.trim().parse().map_err(|_| bad("bad length_ratio"))?)
                }
                k => match k.strip_prefix("size.") {
                    Some(name) => sizes.push((
                        name.to_string(),
                        v.trim().parse().map_err(|_| bad("bad size"))?,
                    )),
                    None => return Err(bad(&format!("unknown key `{k}`"))),
                },
            }
        }
        let missing = |k: &str| DataError::Invalid(format!("manifest: missing `{k}`"));
        Ok(Self {
            task: task.ok_or_else(|| missing("task"))?,
            seed: seed.ok_or_else(|| missing("seed"))?,
            sizes,
            length_ratio: ratio.ok_or_else(|| missing("length_ratio"))?,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Mean target length divided by mean source length.
pub fn length_ratio<'a>(pairs: impl IntoIterator<Item = (&'a [String], &'a [String])>) -> f64 {
    let (mut s, mut t) = (0usize, 0usize);
    for (a, b) in pairs {
        s += a.len();
        t += b.len();
    }
    if s == 0 {
        1.0
    } else {
        t as f64 / s as f64
    }
}
