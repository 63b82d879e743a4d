//! Bucketed breakdowns of an evaluation report.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::evaluate::{score_records, EvalReport, InstanceRecord, Metric, Stats};

#[derive(Clone, Debug, PartialEq)]
pub struct Bucket {
    pub label: String,
    pub count: usize,
    pub score: f64,
    /// Total hypothesis length over total reference length (BLEU reports).
    pub length_ratio: Option<f64>,
}

fn bucket(label: String, metric: Metric, rs: &[&InstanceRecord]) -> Bucket {
    let length_ratio = (metric == Metric::Bleu).then(|| {
        let (mut h, mut r) = (0, 0);
        for x in rs {
            if let Stats::Bleu(b) = &x.stats {
                h += b.hyp_len;
                r += b.ref_len;
            }
        }
        if r == 0 {
            0.0
        } else {
            h as f64 / r as f64
        }
    });
    Bucket {
        label,
        count: rs.len(),
        score: score_records(metric, rs.iter().copied()),
        length_ratio,
    }
}

/// Upper bounds of `n` source-length buckets holding about equally many
/// instances (nearest-rank quantiles).
pub fn quantile_bounds(lengths: &[usize], n: usize) -> Vec<usize> {
    let mut s = lengths.to_vec();
    s.sort_unstable();
    if s.is_empty() || n == 0 {
        return Vec::new();
    }
    let mut b: Vec<usize> = (1..n)
        .map(|q| s[((q * s.len()).div_ceil(n)).max(1) - 1])
        .collect();
    b.push(*s.last().unwrap());
    b.dedup();
    b
}

/// Per-bucket scores over source-length quantiles.
pub fn length_bucket_report(report: &EvalReport, n: usize) -> Vec<Bucket> {
    let lens: Vec<usize> = report.records.iter().map(|r| r.src_len).collect();
    let bounds = quantile_bounds(&lens, n);
    let mut lo = 0;
    let mut out = Vec::new();
    for &hi in &bounds {
        let rs: Vec<&InstanceRecord> = report
            .records
            .iter()
            .filter(|r| r.src_len > lo && r.src_len <= hi)
            .collect();
        out.push(bucket(format!("{}-{hi}", lo + 1), report.metric, &rs));
        lo = hi;
    }
    out
}

/// Per-group scores, groups in sorted order.
pub fn group_report(report: &EvalReport) -> Vec<Bucket> {
    let mut groups: BTreeMap<&str, Vec<&InstanceRecord>> = BTreeMap::new();
    for r in &report.records {
        groups.entry(&r.group).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(g, rs)| bucket(g.to_string(), report.metric, &rs))
        .collect()
}

pub fn buckets_to_tsv(metric: Metric, buckets: &[Bucket]) -> String {
    let mut s = format!("bucket\tcount\t{}\tlength_ratio\n", metric.name());
    for b in buckets {
        let ratio = b
            .length_ratio
            .map_or("-".to_string(), |r| format!("{r:.4}"));
        let _ = writeln!(s, "{}\t{}\t{:.4}\t{ratio}", b.label, b.count, b.score);
    }
    s
}
