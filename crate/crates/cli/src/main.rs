//! `entlab` — generate datasets, train, evaluate, and compare the six
//! abstraction strategies, plus a self-check runner for the invariant
//! suites. Commands read a sectioned key-value config; any key can be
//! overridden on the command line as `--section.key value`.

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use entlab_core::config::RunConfig;
use entlab_core::data::{self, Task};
use entlab_core::harness::{self, EvalConfig};
use entlab_core::model::{load_checkpoint, save_checkpoint, ModelParams};
use entlab_core::rng::substream;
use entlab_core::{checks, kinship, rules};
use std::collections::BTreeMap;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "entlab", version, about = "entity-abstraction laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Config file; falls back to $ENTLAB_CONFIG, then to built-in defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides as `--section.key value` pairs.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate dataset splits, vocabulary, and manifest.
    Generate(RunArgs),
    /// Train one strategy on a generated dataset.
    Train(RunArgs),
    /// Evaluate a checkpoint on the test split.
    Eval(RunArgs),
    /// Merge per-strategy evaluation reports into comparison tables.
    Report {
        /// Report JSON files produced by `eval`.
        paths: Vec<PathBuf>,
        /// Write the combined tables here as well as printing them.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the invariant suites (gradient checks, oracles, round trips).
    Check {
        /// Trimmed case counts for a quick pass.
        #[arg(long)]
        fast: bool,
    },
}

fn parse_overrides(raw: &[String]) -> anyhow::Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut it = raw.iter();
    while let Some(key) = it.next() {
        let Some(key) = key.strip_prefix("--") else {
            bail!("override `{key}` must start with `--section.key`");
        };
        let Some(value) = it.next() else {
            bail!("override `--{key}` is missing a value");
        };
        out.push((key.to_string(), value.to_string()));
    }
    Ok(out)
}

fn load_config(args: &RunArgs) -> anyhow::Result<RunConfig> {
    let overrides = parse_overrides(&args.overrides)?;
    let path = args
        .config
        .clone()
        .or_else(|| std::env::var("ENTLAB_CONFIG").ok().map(PathBuf::from));
    let config = match path {
        Some(p) => RunConfig::load(&p, &overrides)
            .with_context(|| format!("loading config {}", p.display()))?,
        None => {
            let mut map = BTreeMap::new();
            entlab_core::config::apply_overrides(&mut map, &overrides);
            RunConfig::from_map(map)?
        }
    };
    Ok(config)
}

fn cmd_generate(config: &RunConfig) -> anyhow::Result<()> {
    let dir = config.task_data_dir();
    std::fs::create_dir_all(&dir)?;

    let (counts, stats_json, corpus): ((usize, usize, usize), serde_json::Value, Vec<String>) =
        match config.task {
            Task::Kinship => {
                let splits = kinship::build_splits(&config.kinship)?;
                let (train, valid, test) = data::kinship_records(&splits);
                data::write_jsonl(&train, &dir.join("train.jsonl"))?;
                data::write_jsonl(&valid, &dir.join("valid.jsonl"))?;
                data::write_jsonl(&test, &dir.join("test.jsonl"))?;
                let corpus = train
                    .iter()
                    .map(|r| (&r.input, &r.target))
                    .chain(valid.iter().map(|r| (&r.input, &r.target)))
                    .chain(test.iter().map(|r| (&r.input, &r.target)))
                    .flat_map(|(i, t)| [i.clone(), t.clone()])
                    .collect();
                (
                    (train.len(), valid.len(), test.len()),
                    serde_json::to_value(&splits.stats)?,
                    corpus,
                )
            }
            Task::Rules => {
                let splits = rules::build_splits(&config.rules)?;
                let (train, valid, test) = data::rules_records(&splits, config.seed);
                data::write_jsonl(&train, &dir.join("train.jsonl"))?;
                data::write_jsonl(&valid, &dir.join("valid.jsonl"))?;
                data::write_jsonl(&test, &dir.join("test.jsonl"))?;
                let corpus = train
                    .iter()
                    .map(|r| (&r.input, &r.target))
                    .chain(valid.iter().map(|r| (&r.input, &r.target)))
                    .chain(test.iter().map(|r| (&r.input, &r.target)))
                    .flat_map(|(i, t)| [i.clone(), t.clone()])
                    .collect();
                (
                    (train.len(), valid.len(), test.len()),
                    serde_json::to_value(&splits.stats)?,
                    corpus,
                )
            }
        };

    let vocab = data::build_task_vocab(config.task, config.tag_n, corpus);
    vocab.save(&dir.join("vocab.txt"))?;

    let manifest = serde_json::json!({
        "task": config.task.name(),
        "seed": config.seed,
        "counts": { "train": counts.0, "valid": counts.1, "test": counts.2 },
        "stats": stats_json,
        "vocab": { "size": vocab.len(), "hash": format!("{:016x}", vocab.hash()) },
        "config": config.raw,
    });
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;

    println!(
        "generated {} dataset in {}: train={} valid={} test={} vocab={}",
        config.task.name(),
        dir.display(),
        counts.0,
        counts.1,
        counts.2,
        vocab.len()
    );
    Ok(())
}

fn task_tagger(task: Task) -> entlab_core::abstraction::LexiconTagger {
    match task {
        Task::Kinship => kinship::tagger(&kinship::NamePool::shipped()),
        Task::Rules => rules::tagger(),
    }
}

fn cmd_train(config: &RunConfig) -> anyhow::Result<()> {
    let data = data::load_task_data(&config.task_data_dir(), config.task)?;
    let dims = config.dims.with_vocab(data.vocab.len())?;
    let params = ModelParams::init(
        dims,
        config.strategy,
        &mut substream(config.seed, "model-init", 0),
    );
    println!(
        "training {} / {} on {} examples ({} parameters)",
        config.task.name(),
        config.strategy.name(),
        data.train.len(),
        params.param_count()
    );
    let tagger = task_tagger(config.task);
    let outcome =
        harness::train(params, &data.train, &data.valid, &data.vocab, &tagger, &config.train)?;

    std::fs::create_dir_all(&config.checkpoint_dir)?;
    save_checkpoint(&outcome.params, data.vocab.hash(), &config.checkpoint_path())?;
    harness::write_train_log(&outcome.log, &config.train_log_path())?;

    for row in &outcome.log {
        match row.abs_loss {
            Some(abs) => println!(
                "epoch {:>3}  train {:.4}  valid {:.4}  abs {:.4}",
                row.epoch, row.train_loss, row.valid_loss, abs
            ),
            None => println!(
                "epoch {:>3}  train {:.4}  valid {:.4}",
                row.epoch, row.train_loss, row.valid_loss
            ),
        }
    }
    println!(
        "best epoch {} (valid {:.4}){}; checkpoint: {}",
        outcome.best_epoch,
        outcome.best_valid_loss,
        if outcome.stopped_early { ", stopped early" } else { "" },
        config.checkpoint_path().display()
    );
    Ok(())
}

fn cmd_eval(config: &RunConfig) -> anyhow::Result<()> {
    let data = data::load_task_data(&config.task_data_dir(), config.task)?;
    let params = load_checkpoint(&config.checkpoint_path(), data.vocab.hash())?;
    let tagger = task_tagger(config.task);
    let train_buckets = match config.task {
        Task::Kinship => config.kinship.train_levels.clone(),
        Task::Rules => config.rules.train_buckets.clone(),
    };
    let eval_config = EvalConfig {
        mode: config.eval.mode,
        max_new: config.eval.max_new,
        train_buckets,
        seed: config.seed,
    };
    let report =
        harness::evaluate(&params, &data.test, &data.vocab, &tagger, config.task, &eval_config)?;

    std::fs::create_dir_all(&config.report_dir)?;
    std::fs::write(
        config.report_json_path(),
        serde_json::to_string_pretty(&report)? + "\n",
    )?;
    let table = harness::render_table(&report);
    std::fs::write(config.report_text_path(), &table)?;
    print!("{table}");
    println!("report: {}", config.report_json_path().display());
    Ok(())
}

fn cmd_report(paths: &[PathBuf], out: Option<&PathBuf>) -> anyhow::Result<()> {
    if paths.is_empty() {
        bail!("no report files given");
    }
    let mut by_task: BTreeMap<String, Vec<harness::EvalReport>> = BTreeMap::new();
    for p in paths {
        let report: harness::EvalReport = serde_json::from_str(&std::fs::read_to_string(p)?)
            .with_context(|| format!("parsing report {}", p.display()))?;
        by_task.entry(report.task.clone()).or_default().push(report);
    }
    let mut combined = String::new();
    for reports in by_task.values() {
        combined.push_str(&harness::comparison_table(reports));
        combined.push('\n');
    }
    print!("{combined}");
    if let Some(path) = out {
        std::fs::write(path, &combined)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_check(fast: bool) -> anyhow::Result<()> {
    let outcomes = checks::run_all(fast)?;
    let mut all_passed = true;
    for o in &outcomes {
        println!("{} {:<24} {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
        all_passed &= o.passed;
    }
    if !all_passed {
        bail!("one or more checks failed");
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Generate(args) => cmd_generate(&load_config(args)?),
        Command::Train(args) => cmd_train(&load_config(args)?),
        Command::Eval(args) => cmd_eval(&load_config(args)?),
        Command::Report { paths, out } => cmd_report(paths, out.as_ref()),
        Command::Check { fast } => cmd_check(*fast),
    }
}
