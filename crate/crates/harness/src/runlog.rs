//! Append-only record of validations and the final test score.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{HarnessError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationRecord {
    /// 1-based validation number.
    pub index: usize,
    pub updates: usize,
    pub inputs: usize,
    pub metric: f64,
    pub checkpoint: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunLog {
    pub records: Vec<ValidationRecord>,
    pub test_metric: Option<f64>,
    pub wall_clock_secs: f64,
}

const HEADER: &str = "kind\tindex\tupdates\tinputs\tmetric\tcheckpoint";

impl RunLog {
    pub fn push(&mut self, updates: usize, inputs: usize, metric: f64) -> &ValidationRecord {
        let index = self.records.len() + 1;
        self.records.push(ValidationRecord {
            index,
            updates,
            inputs,
            metric,
            checkpoint: format!("v{index}"),
        });
        self.records.last().unwrap()
    }

    /// First validation with the highest metric.
    pub fn best(&self) -> Option<&ValidationRecord> {
        self.records
            .iter()
            .fold(None, |acc: Option<&ValidationRecord>, r| match acc {
                Some(b) if b.metric >= r.metric => Some(b),
                _ => Some(r),
            })
    }

    /// Equal up to `tol` in every metric, ignoring wall-clock time.
    pub fn matches(&self, other: &Self, tol: f64) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= tol;
        self.records.len() == other.records.len()
            && self.records.iter().zip(&other.records).all(|(a, b)| {
                a.index == b.index
                    && a.updates == b.updates
                    && a.inputs == b.inputs
                    && a.checkpoint == b.checkpoint
                    && close(a.metric, b.metric)
            })
            && match (self.test_metric, other.test_metric) {
                (Some(a), Some(b)) => close(a, b),
                (None, None) => true,
                _ => false,
            }
    }

    pub fn to_tsv(&self) -> String {
        let mut s = format!("{HEADER}\n");
        for r in &self.records {
            let _ = writeln!(
                s,
                "validation\t{}\t{}\t{}\t{:?}\t{}",
                r.index, r.updates, r.inputs, r.metric, r.checkpoint
            );
        }
        if let Some(t) = self.test_metric {
            let best = self.best().map_or("-".into(), |b| b.checkpoint.clone());
            let _ = writeln!(s, "test\t-\t-\t-\t{t:?}\t{best}");
        }
        let _ = writeln!(s, "wall_clock\t-\t-\t-\t{:.3}\t-", self.wall_clock_secs);
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(HEADER) {
            return Err(HarnessError::Data("run log: bad header".into()));
        }
        let mut log = Self::default();
        for (i, line) in lines.enumerate() {
            let bad = || HarnessError::Data(format!("run log line {}: malformed", i + 2));
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 6 {
                return Err(bad());
            }
            let metric: f64 = f[4].parse().map_err(|_| bad())?;
            match f[0] {
                "validation" => log.records.push(ValidationRecord {
                    index: f[1].parse().map_err(|_| bad())?,
                    updates: f[2].parse().map_err(|_| bad())?,
                    inputs: f[3].parse().map_err(|_| bad())?,
                    metric,
                    checkpoint: f[5].to_string(),
                }),
                "test" => log.test_metric = Some(metric),
                "wall_clock" => log.wall_clock_secs = metric,
                _ => return Err(bad()),
            }
        }
        Ok(log)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_tsv())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }
}
