use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rampkit::config::{parse_overrides, read_pairs};
use rampkit::data::generate;
use rampkit::report::{buckets_to_tsv, group_report, length_bucket_report};
use rampkit::train::load_model;
use rampkit::{
    evaluate, significance, train, EvalReport, ExperimentConfig, HarnessError, Metric, Result,
    TaskData, TaskKind,
};

#[derive(Parser)]
#[command(
    name = "rampkit",
    version,
    about = "Weakly supervised sequence-to-sequence training"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic task into a directory.
    GenData {
        #[arg(long)]
        task: TaskKind,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Split size override, e.g. `--size weak=500`.
        #[arg(long = "size", value_name = "SPLIT=N")]
        sizes: Vec<String>,
    },
    /// Train a model; extra `--key=value` arguments override the config.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Continue from the latest validation in out_dir.
        #[arg(long)]
        resume: bool,
        #[arg(
            trailing_var_arg = true,
            allow_hyphen_values = true,
            value_name = "--KEY=VALUE"
        )]
        overrides: Vec<String>,
    },
    /// Print 1-best outputs for a split.
    Decode {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Score a split and write the per-instance report.
    Evaluate {
        #[command(flatten)]
        model: ModelArgs,
        /// Expected metric (f1 or bleu); must fit the task.
        #[arg(long)]
        metric: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Approximate randomization test between two reports.
    Sigtest {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        iterations: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Source-length or group breakdown of a report.
    Report {
        report: PathBuf,
        #[arg(long, default_value_t = 4)]
        buckets: usize,
        /// Break down by instance group instead of source length.
        #[arg(long)]
        groups: bool,
    },
}

#[derive(clap::Args)]
struct ModelArgs {
    #[arg(long)]
    task: TaskKind,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value = "test")]
    split: String,
    #[arg(long, default_value_t = 12)]
    beam: usize,
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long, default_value_t = 4)]
    max_order: usize,
}

impl ModelArgs {
    fn report(&self) -> Result<EvalReport> {
        if self.beam == 0 {
            return Err(HarnessError::Usage("beam must be positive".into()));
        }
        let data = TaskData::load(self.task, &self.data, self.max_order)?;
        let model = load_model(&self.checkpoint, &data)?;
        let max_len = self.max_len.unwrap_or(match self.task {
            TaskKind::Parsing => 12,
            _ => 24,
        });
        evaluate(&model, &data, data.split(&self.split)?, self.beam, max_len)
    }
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::GenData {
            task,
            seed,
            out,
            sizes,
        } => {
            let sizes = sizes
                .iter()
                .map(|s| {
                    s.split_once('=')
                        .and_then(|(k, v)| Some((k.to_string(), v.parse().ok()?)))
                        .ok_or_else(|| HarnessError::Usage(format!("expected SPLIT=N, got `{s}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            generate(task, seed, &sizes, &out)?;
            println!("wrote {task} task to {}", out.display());
        }
        Cmd::Train {
            config,
            seed,
            resume,
            overrides,
        } => {
            let mut pairs = match &config {
                Some(p) => read_pairs(&fs::read_to_string(p).map_err(|e| {
                    HarnessError::Usage(format!("cannot read {}: {e}", p.display()))
                })?)?,
                None => Vec::new(),
            };
            pairs.extend(parse_overrides(&overrides)?);
            if let Some(s) = seed {
                pairs.push(("seed".into(), s.to_string()));
            }
            let cfg = ExperimentConfig::from_pairs(&pairs)?;
            let data = TaskData::load(cfg.task, &cfg.data_dir, cfg.max_order)?;
            let (outcome, test) = train(&cfg, &data, resume)?;
            let best = outcome.log.best().expect("at least one validation");
            println!(
                "best {} dev={:.4} updates={}\ttest {}",
                best.checkpoint,
                best.metric,
                best.updates,
                test.summary()
            );
        }
        Cmd::Decode { model } => {
            for r in model.report()?.records {
                println!("{}\t{}", r.id, r.hypothesis);
            }
        }
        Cmd::Evaluate { model, metric, out } => {
            if let Some(m) = metric {
                let m = Metric::parse(&m)?;
                if m != Metric::for_task(model.task) {
                    return Err(HarnessError::Usage(format!(
                        "metric {} does not apply to {}",
                        m.name(),
                        model.task
                    )));
                }
            }
            let report = model.report()?;
            match out {
                Some(p) => report.save(p)?,
                None => print!("{}", report.to_tsv()),
            }
            eprintln!("{}", report.summary());
        }
        Cmd::Sigtest {
            a,
            b,
            iterations,
            seed,
        } => {
            let (a, b) = (EvalReport::load(a)?, EvalReport::load(b)?);
            let p = significance(&a, &b, iterations, seed)?;
            println!("a={:.4}\tb={:.4}\tp={p:.6}", a.score(), b.score());
        }
        Cmd::Report {
            report,
            buckets,
            groups,
        } => {
            let r = EvalReport::load(report)?;
            if buckets == 0 {
                return Err(HarnessError::Usage("buckets must be positive".into()));
            }
            let rows = if groups {
                group_report(&r)
            } else {
                length_bucket_report(&r, buckets)
            };
            print!("{}", buckets_to_tsv(r.metric, &rows));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
