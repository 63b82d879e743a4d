//! Determinism, model selection and the significance test.

use rampkit::evaluate::{InstanceRecord, Stats};
use rampkit::train::load_model;
use rampkit::{
    data, significance, train, EvalReport, ExperimentConfig, Metric, TaskData, TaskKind, Trainer,
    Validator,
};
use rampkit_core::rng::substream;
use rampkit_core::Model64;
use rand::Rng;

use crate::Verdict;

struct Scripted {
    values: Vec<f64>,
    snapshots: Vec<Model64>,
}

impl Validator for Scripted {
    fn validate(&mut self, model: &Model64) -> rampkit::Result<f64> {
        self.snapshots.push(model.clone());
        Ok(self.values[self.snapshots.len() - 1])
    }
}

fn small_config(
    objective: &str,
    data_dir: &std::path::Path,
    out: &std::path::Path,
) -> ExperimentConfig {
    let pairs: Vec<(String, String)> = [
        ("task", "parsing"),
        ("objective", objective),
        ("batch_size", "10"),
        ("learning_rate", "1.0"),
        ("validation_interval", "3"),
        ("max_validations", "3"),
    ]
    .iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .chain([
        ("data_dir".into(), data_dir.display().to_string()),
        ("out_dir".into(), out.display().to_string()),
    ])
    .collect();
    ExperimentConfig::from_pairs(&pairs).unwrap()
}

fn record(id: usize, correct: bool) -> InstanceRecord {
    InstanceRecord {
        id,
        src_len: 3,
        group: "-".into(),
        stats: Stats::Answer {
            non_empty: true,
            correct,
        },
        source: format!("q{id}"),
        hypothesis: "h".into(),
        reference: format!("a{id}"),
    }
}

fn report(correct: &[bool]) -> EvalReport {
    EvalReport {
        metric: Metric::F1,
        records: correct
            .iter()
            .enumerate()
            .map(|(i, &c)| record(i, c))
            .collect(),
    }
}

/// p-value over all 2^n swap assignments.
fn exact_p(a: &[bool], b: &[bool]) -> f64 {
    let acc = |v: &[bool]| v.iter().filter(|&&c| c).count() as f64 / v.len() as f64;
    let observed = (acc(a) - acc(b)).abs();
    let n = a.len();
    let mut hits = 0usize;
    for mask in 0..1usize << n {
        let (mut pa, mut pb) = (Vec::new(), Vec::new());
        for i in 0..n {
            let (x, y) = if mask >> i & 1 == 1 {
                (b[i], a[i])
            } else {
                (a[i], b[i])
            };
            pa.push(x);
            pb.push(y);
        }
        hits += usize::from((acc(&pa) - acc(&pb)).abs() >= observed - 1e-12);
    }
    hits as f64 / (1usize << n) as f64
}

pub fn protocol() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("data");
    let sizes: Vec<(String, usize)> = [("supervised", 60), ("weak", 60), ("dev", 30), ("test", 30)]
        .map(|(k, n)| (k.to_string(), n))
        .to_vec();
    data::generate(TaskKind::Parsing, 5, &sizes, &dir).unwrap();
    let data = TaskData::load(TaskKind::Parsing, &dir, 4).unwrap();

    // same config and seed twice, for supervised and weak training
    let a = train(
        &small_config("MLE", &dir, &tmp.path().join("a")),
        &data,
        false,
    )
    .unwrap()
    .0;
    let b = train(
        &small_config("MLE", &dir, &tmp.path().join("b")),
        &data,
        false,
    )
    .unwrap()
    .0;
    let mut weak = small_config("RAMP", &dir, &tmp.path().join("c"));
    weak.init = Some(tmp.path().join("a/best.ckpt"));
    let c = train(&weak, &data, false).unwrap().0;
    weak.out_dir = tmp.path().join("d");
    let d = train(&weak, &data, false).unwrap().0;
    let same = a.log.matches(&b.log, 0.0)
        && c.log.matches(&d.log, 0.0)
        && a.best.params() == b.best.params();

    // scripted dev metrics pick the second validation
    let mut cfg = small_config("MLE", &dir, &tmp.path().join("e"));
    cfg.max_validations = 3;
    let mut v = Scripted {
        values: vec![1.0, 3.0, 2.0],
        snapshots: Vec::new(),
    };
    let out = Trainer::new(&cfg, &data).unwrap().run(&mut v).unwrap();
    let on_disk = load_model(tmp.path().join("e/best.ckpt"), &data).unwrap();
    let picked = out.log.best().map(|r| r.index) == Some(out.log.records[1].index)
        && out.best.params() == v.snapshots[1].params()
        && on_disk.params() == v.snapshots[1].params()
        && out.best.params() != v.snapshots[2].params();

    let rng = &mut substream(8, "accept-sig", 0);
    let r: Vec<bool> = (0..300).map(|_| rng.gen_bool(0.5)).collect();
    let self_p = significance(&report(&r), &report(&r), 10_000, 1).unwrap();
    let win_p = significance(&report(&[true; 300]), &report(&[false; 300]), 10_000, 1).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let x: Vec<bool> = (0..10).map(|_| rng.gen_bool(0.6)).collect();
        let y: Vec<bool> = (0..10).map(|_| rng.gen_bool(0.4)).collect();
        let approx = significance(&report(&x), &report(&y), 10_000, 2).unwrap();
        worst = worst.max((approx - exact_p(&x, &y)).abs());
    }
    Verdict::new(
        same && picked && self_p == 1.0 && win_p < 0.01 && worst <= 0.02,
        format!(
            "identical run logs {}; dev [1,3,2] restores validation 2 {}; p(A,A) {self_p}; unanimous p {win_p:.5}; \
             max |approx − exact| on 10 instances {worst:.4}",
            yes(same),
            yes(picked)
        ),
    )
}

fn yes(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}
