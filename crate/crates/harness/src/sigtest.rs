//! Approximate randomization test for paired system outputs.

use rampkit_core::rng::substream;
use rand::Rng;

use crate::error::{HarnessError, Result};
use crate::evaluate::{score_records, EvalReport};

/// Two-sided approximate randomization. Each iteration swaps the paired
/// outputs of every instance with probability 1/2 and recomputes the metric
/// difference; the p-value is `(count(|Δ| ≥ |Δ_obs|) + 1) / (iterations + 1)`.
pub fn significance(a: &EvalReport, b: &EvalReport, iterations: usize, seed: u64) -> Result<f64> {
    if iterations == 0 {
        return Err(HarnessError::Usage("iterations must be positive".into()));
    }
    check_aligned(a, b)?;
    let metric = a.metric;
    let observed = (score_records(metric, &a.records) - score_records(metric, &b.records)).abs();
    let rng = &mut substream(seed, "sigtest", 0);
    let mut hits = 0usize;
    let (mut pa, mut pb) = (
        Vec::with_capacity(a.records.len()),
        Vec::with_capacity(a.records.len()),
    );
    for _ in 0..iterations {
        pa.clear();
        pb.clear();
        for (x, y) in a.records.iter().zip(&b.records) {
            if rng.gen_bool(0.5) {
                pa.push(y);
                pb.push(x);
            } else {
                pa.push(x);
                pb.push(y);
            }
        }
        let d = (score_records(metric, pa.iter().copied())
            - score_records(metric, pb.iter().copied()))
        .abs();
        // tolerance for summation-order round-off in the recomputed scores
        if d >= observed - 1e-12 {
            hits += 1;
        }
    }
    Ok((hits + 1) as f64 / (iterations + 1) as f64)
}

pub fn check_aligned(a: &EvalReport, b: &EvalReport) -> Result<()> {
    if a.metric != b.metric {
        return Err(HarnessError::Data("reports use different metrics".into()));
    }
    if a.records.len() != b.records.len() {
        return Err(HarnessError::Data(format!(
            "reports have {} and {} instances",
            a.records.len(),
            b.records.len()
        )));
    }
    for (x, y) in a.records.iter().zip(&b.records) {
        if x.id != y.id || x.reference != y.reference {
            return Err(HarnessError::Data(format!(
                "reports disagree at instance {}",
                x.id
            )));
        }
    }
    Ok(())
}
