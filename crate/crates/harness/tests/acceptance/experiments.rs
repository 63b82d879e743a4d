//! End-to-end runs from the shipped configs on generated data.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rampkit::config::read_pairs;
use rampkit::{data, significance, train, EvalReport, ExperimentConfig, TaskData, TaskKind};

use crate::Verdict;

const SEED: u64 = 1;
const TIME_LIMIT_SECS: f64 = 600.0;

fn config_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn config(file: &str, overrides: &[(&str, String)]) -> ExperimentConfig {
    let text = std::fs::read_to_string(config_dir().join(file)).unwrap();
    let mut pairs = read_pairs(&text).unwrap();
    pairs.extend(overrides.iter().map(|(k, v)| (k.to_string(), v.clone())));
    ExperimentConfig::from_pairs(&pairs).unwrap()
}

struct Run {
    name: String,
    dev: f64,
    test: EvalReport,
}

fn run(cfg: &ExperimentConfig, data: &TaskData, name: &str) -> Run {
    let t = Instant::now();
    let (outcome, test) = train(cfg, data, false).unwrap();
    let dev = outcome.log.best().map_or(f64::NAN, |b| b.metric);
    println!(
        "    {name:<10} dev {dev:8.4}  test {:8.4}  ({} validations, {:.0}s)",
        test.score(),
        outcome.log.records.len(),
        t.elapsed().as_secs_f64()
    );
    Run {
        name: name.to_string(),
        dev,
        test,
    }
}

fn table(runs: &[Run], baseline: &Run, scale: f64) {
    println!(
        "    {:<10} {:>8} {:>8} {:>8} {:>8}",
        "system", "dev", "test", "gain", "p"
    );
    for r in runs {
        let p = significance(&r.test, &baseline.test, 10_000, SEED).unwrap();
        println!(
            "    {:<10} {:>8.2} {:>8.2} {:>+8.2} {:>8.4}",
            r.name,
            r.dev * scale,
            r.test.score() * scale,
            (r.test.score() - baseline.test.score()) * scale,
            p
        );
    }
}

pub fn parsing() -> Verdict {
    let start = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("data");
    data::generate(TaskKind::Parsing, SEED, &[], &dir).unwrap();
    let data = TaskData::load(TaskKind::Parsing, &dir, 4).unwrap();
    let dd = ("data_dir", dir.display().to_string());
    let out = |n: &str| ("out_dir", tmp.path().join(n).display().to_string());

    let mle = run(
        &config("parsing-mle.conf", &[dd.clone(), out("mle")]),
        &data,
        "MLE",
    );
    let init = (
        "init",
        tmp.path().join("mle/best.ckpt").display().to_string(),
    );
    let mut runs = Vec::new();
    for (name, objective, extra) in [
        ("MRT", "MRT", vec![]),
        ("MRT_neg", "MRT_neg", vec![]),
        ("RAMP1", "RAMP1", vec![]),
        ("RAMP2", "RAMP2", vec![]),
        ("RAMP", "RAMP", vec![]),
        ("RAMP-T", "RAMP-T", vec![]),
        (
            "RAMP M=1",
            "RAMP",
            vec![
                ("batch_size", "1".to_string()),
                ("validation_interval", "400".to_string()),
            ],
        ),
    ] {
        let mut o = vec![
            dd.clone(),
            out(name),
            init.clone(),
            ("objective", objective.to_string()),
        ];
        o.extend(extra);
        runs.push(run(&config("parsing-weak.conf", &o), &data, name));
    }
    table(&runs, &mle, 100.0);

    let gain = |n: &str| {
        100.0 * (runs.iter().find(|r| r.name == n).unwrap().test.score() - mle.test.score())
    };
    let secs = start.elapsed().as_secs_f64();
    let pass = mle.dev >= 0.6
        && gain("RAMP") >= 5.0
        && gain("RAMP-T") >= 5.0
        && gain("MRT") >= 2.0
        && secs < TIME_LIMIT_SECS;
    Verdict::new(
        pass,
        format!(
            "MLE dev F1 {:.3} (≥ 0.6); gains over MLE test {:.2}: RAMP {:+.1}, RAMP-T {:+.1} (≥ +5), MRT {:+.1} (≥ +2); {secs:.0}s",
            mle.dev,
            100.0 * mle.test.score(),
            gain("RAMP"),
            gain("RAMP-T"),
            gain("MRT")
        ),
    )
}

pub fn weak_mt() -> Verdict {
    let start = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("data");
    data::generate(TaskKind::WeakMt, SEED, &[], &dir).unwrap();
    let data = TaskData::load(TaskKind::WeakMt, &dir, 4).unwrap();
    let dd = ("data_dir", dir.display().to_string());
    let out = |n: &str| ("out_dir", tmp.path().join(n).display().to_string());

    let mle = run(
        &config("weakmt-mle.conf", &[dd.clone(), out("mle")]),
        &data,
        "MLE",
    );
    let init = (
        "init",
        tmp.path().join("mle/best.ckpt").display().to_string(),
    );
    let runs: Vec<Run> = ["RAMP-", "RAMP_D2", "RAMP--T", "RAMP"]
        .into_iter()
        .map(|o| {
            let cfg = config(
                "weakmt-weak.conf",
                &[
                    dd.clone(),
                    out(o),
                    init.clone(),
                    ("objective", o.to_string()),
                ],
            );
            run(&cfg, &data, o)
        })
        .collect();
    table(&runs, &mle, 1.0);

    let gain = |n: &str| runs.iter().find(|r| r.name == n).unwrap().test.score() - mle.test.score();
    let bipolar = ["RAMP-", "RAMP_D2", "RAMP--T"];
    let best_bipolar = bipolar.iter().map(|n| gain(n)).fold(f64::MIN, f64::max);
    let secs = start.elapsed().as_secs_f64();
    let pass = bipolar.iter().all(|n| gain(n) >= 1.0)
        && gain("RAMP") <= best_bipolar
        && secs < TIME_LIMIT_SECS;
    Verdict::new(
        pass,
        format!(
            "BLEU gains over MLE {:.2}: RAMP- {:+.2}, RAMP_D2 {:+.2}, RAMP--T {:+.2} (each ≥ +1.0); RAMP {:+.2} (≤ {:+.2}); {secs:.0}s",
            mle.test.score(),
            gain("RAMP-"),
            gain("RAMP_D2"),
            gain("RAMP--T"),
            gain("RAMP"),
            best_bipolar
        ),
    )
}
