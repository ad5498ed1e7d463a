//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! (run with `--nocapture` to see them on success).
//!
//! The two training criteria (a08, a09) are serialized behind a mutex so
//! their wall-clock budgets are not distorted by contention. `a09` is
//! report-only by design: it archives the directional comparison table and
//! flags whether the expected ordering reproduced, but does not fail on the
//! ordering itself.

use entlab_core::abstraction::LexiconTagger;
use entlab_core::checks;
use entlab_core::data::{self, Sample, Task};
use entlab_core::harness::{evaluate, train, EvalConfig, EvalReport, TrainConfig};
use entlab_core::kinship::{self, KinshipGenConfig};
use entlab_core::model::{DecodeMode, ModelDims, ModelParams, Strategy};
use entlab_core::rng::substream;
use entlab_core::rules::RulesGenConfig;
use entlab_core::vocab::Vocabulary;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

static HEAVY: Mutex<()> = Mutex::new(());

fn announce(id: &str, passed: bool, detail: &str) {
    println!("acceptance {id}: {} — {detail}", if passed { "PASS" } else { "FAIL" });
}

fn require(id: &str, passed: bool, detail: &str) {
    announce(id, passed, detail);
    assert!(passed, "acceptance {id} failed: {detail}");
}

// ---- a01..a06: property suites --------------------------------------

#[test]
fn a01_gradient_suite() {
    let start = Instant::now();
    let ops = checks::op_gradient_suite(100).unwrap();
    let model = checks::model_gradient_suite().unwrap();
    let elapsed = start.elapsed();
    let within_budget = elapsed < Duration::from_secs(120);
    require(
        "a01 gradient-suite",
        ops.passed && model.passed && within_budget,
        &format!("{}; {}; runtime {elapsed:.2?} (budget 120s)", ops.detail, model.detail),
    );
}

#[test]
fn a02_parameter_audit() {
    let out = checks::param_audit();
    require("a02 parameter-audit", out.passed, &out.detail);
}

#[test]
fn a03_degeneracy() {
    let out = checks::degeneracy().unwrap();
    require("a03 degeneracy", out.passed, &out.detail);
}

#[test]
fn a04_prover_oracle_equivalence() {
    let start = Instant::now();
    let out = checks::prover_oracle_equivalence(500);
    let elapsed = start.elapsed();
    let within_budget = elapsed < Duration::from_secs(60);
    require(
        "a04 prover-oracle",
        out.passed && within_budget,
        &format!("{}; runtime {elapsed:.2?} (budget 60s)", out.detail),
    );
}

#[test]
fn a05_kinship_oracle_equivalence() {
    let out = checks::kinship_oracle_equivalence(1000).unwrap();
    require("a05 kinship-oracle", out.passed, &out.detail);
}

#[test]
fn a06_scoring_fidelity() {
    let out = checks::scoring_fidelity();
    require("a06 scoring-fidelity", out.passed, &out.detail);
}

// ---- a07: split fidelity ---------------------------------------------

#[test]
fn a07_split_fidelity() {
    let kconfig = KinshipGenConfig {
        train_levels: vec![2, 4, 6],
        train_per_level: 300,
        test_levels: (2..=10).collect(),
        test_per_level: 40,
        seed: 7,
        ..Default::default()
    };
    let ks = kinship::build_splits(&kconfig).unwrap();
    let train_levels: Vec<usize> = ks.stats.train_counts.keys().copied().collect();
    let test_levels: Vec<usize> = ks.stats.test_counts.keys().copied().collect();
    let kinship_ok = train_levels == vec![2, 4, 6]
        && test_levels == (2..=10).collect::<Vec<_>>()
        && ks.stats.triple_overlap <= 0.10;

    let rconfig = RulesGenConfig {
        train_buckets: vec![0, 1, 2],
        train_per_bucket: 45,
        test_buckets: vec![0, 1, 2, 3, 4, 5],
        test_per_bucket: 12,
        seed: 7,
        ..Default::default()
    };
    let rs = entlab_core::rules::build_splits(&rconfig).unwrap();
    let rules_ok = rs.stats.train_counts.keys().copied().collect::<Vec<_>>() == vec![0, 1, 2]
        && rs.stats.test_counts.keys().copied().collect::<Vec<_>>()
            == vec![0, 1, 2, 3, 4, 5];

    require(
        "a07 split-fidelity",
        kinship_ok && rules_ok,
        &format!(
            "kinship train levels {train_levels:?}, {} test buckets, overlap {:.2}% (ceiling 10%); \
             rules train D{:?} test D{:?}",
            test_levels.len(),
            ks.stats.triple_overlap * 100.0,
            rs.stats.train_counts.keys().collect::<Vec<_>>(),
            rs.stats.test_counts.keys().collect::<Vec<_>>()
        ),
    );
}

// ---- a08/a09: desk-scale training ------------------------------------

const SANITY_TRAIN: usize = 5000;
const SANITY_SEED: u64 = 42;

struct SanityData {
    train: Vec<Sample>,
    valid: Vec<Sample>,
    test: Vec<Sample>,
    vocab: Vocabulary,
    tagger: LexiconTagger,
}

/// 5000 level-2 training examples (10% carved into validation) plus
/// held-out test buckets at the requested levels.
fn sanity_dataset(test_levels: &[usize], test_per_level: usize) -> SanityData {
    let config = KinshipGenConfig {
        train_levels: vec![2],
        train_per_level: SANITY_TRAIN,
        test_levels: test_levels.to_vec(),
        test_per_level,
        seed: SANITY_SEED,
        ..Default::default()
    };
    let splits = kinship::build_splits(&config).unwrap();
    let (train_r, valid_r, test_r) = data::kinship_records(&splits);
    let corpus: Vec<String> = train_r
        .iter()
        .chain(valid_r.iter())
        .chain(test_r.iter())
        .flat_map(|r| [r.input.clone(), r.target.clone()])
        .collect();
    let vocab = data::build_task_vocab(Task::Kinship, 20, corpus);
    let conv = |rs: Vec<data::KinshipRecord>| -> Vec<Sample> {
        rs.into_iter().map(Sample::from).collect()
    };
    SanityData {
        train: conv(train_r),
        valid: conv(valid_r),
        test: conv(test_r),
        vocab,
        tagger: kinship::tagger(&kinship::NamePool::shipped()),
    }
}

fn toy_train_config(seed: u64, max_epochs: usize) -> TrainConfig {
    TrainConfig {
        batch_size: 8,
        lr: 1.2e-3,
        lr_decay: 0.90,
        patience: 4,
        max_epochs,
        dropout: 0.1,
        seed,
        ..Default::default()
    }
}

fn train_and_eval(
    data: &SanityData,
    strategy: Strategy,
    seed: u64,
    max_epochs: usize,
) -> EvalReport {
    let dims = ModelDims::toy(data.vocab.len(), 96);
    let params = ModelParams::init(dims, strategy, &mut substream(seed, "model-init", 0));
    let out = train(
        params,
        &data.train,
        &data.valid,
        &data.vocab,
        &data.tagger,
        &toy_train_config(seed, max_epochs),
    )
    .unwrap();
    let eval_config = EvalConfig {
        mode: DecodeMode::Greedy,
        max_new: 16,
        train_buckets: vec![2],
        seed,
    };
    evaluate(&out.params, &data.test, &data.vocab, &data.tagger, Task::Kinship, &eval_config)
        .unwrap()
}

#[test]
fn a08_training_sanity() {
    let _guard = HEAVY.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let data = sanity_dataset(&[2], 500);
    let report = train_and_eval(&data, Strategy::Baseline, SANITY_SEED, 28);
    let elapsed = start.elapsed();
    let accuracy = report.aggregate;
    let within_budget = elapsed < Duration::from_secs(30 * 60);
    require(
        "a08 training-sanity",
        accuracy >= 0.95 && within_budget,
        &format!(
            "baseline on {} held-out level-2 examples: {:.1}% greedy accuracy \
             (need >= 95%); runtime {elapsed:.0?} (budget 30min)",
            report.total,
            accuracy * 100.0
        ),
    );
}

#[test]
fn a09_directional_check() {
    let _guard = HEAVY.lock().unwrap_or_else(|e| e.into_inner());
    let data = sanity_dataset(&[2, 3, 4], 150);
    let strategies = [Strategy::Baseline, Strategy::EncSum, Strategy::DecLoss];
    let seeds = [1u64, 2, 3];

    // mean per-level accuracy over seeds, per strategy
    let mut table = String::from(
        "directional check: level-2 training, test levels {2,3,4}, mean of 3 seeds\n",
    );
    table.push_str(&format!(
        "{:<12}{:>9}{:>9}{:>9}{:>14}\n",
        "strategy", "2", "3", "4", "extrapolated"
    ));
    let mut extrapolated_means = Vec::new();
    for strategy in strategies {
        let mut per_level = std::collections::BTreeMap::new();
        let mut extra_correct = 0usize;
        let mut extra_total = 0usize;
        for seed in seeds {
            // the same data budget as a08 with a shorter epoch cap: the
            // sweep needs competent models, not converged ones, and nine
            // full-length runs would not fit a single-core test session
            let report = train_and_eval(&data, strategy, seed, 10);
            for row in &report.buckets {
                let e = per_level.entry(row.bucket).or_insert((0usize, 0usize));
                e.0 += row.correct;
                e.1 += row.total;
                if row.bucket > 2 {
                    extra_correct += row.correct;
                    extra_total += row.total;
                }
            }
        }
        let acc = |lvl: usize| {
            let (c, t) = per_level[&lvl];
            c as f64 / t as f64
        };
        let extra = extra_correct as f64 / extra_total as f64;
        extrapolated_means.push((strategy, extra));
        table.push_str(&format!(
            "{:<12}{:>8.1}%{:>8.1}%{:>8.1}%{:>13.1}%\n",
            strategy.name(),
            acc(2) * 100.0,
            acc(3) * 100.0,
            acc(4) * 100.0,
            extra * 100.0
        ));
    }

    let base = extrapolated_means[0].1;
    let ordering_reproduced =
        extrapolated_means[1..].iter().all(|(_, extra)| *extra >= base);
    table.push_str(&format!(
        "expected ordering (abstraction >= baseline on extrapolated levels): {}\n",
        if ordering_reproduced { "REPRODUCED" } else { "NOT REPRODUCED" }
    ));

    let archive_dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    std::fs::create_dir_all(&archive_dir).unwrap();
    let archive = archive_dir.join("directional-check.txt");
    std::fs::write(&archive, &table).unwrap();
    print!("{table}");

    // Report-only criterion: the table is archived either way.
    require(
        "a09 directional-check",
        archive.exists(),
        &format!(
            "table archived at {} (ordering {})",
            archive.display(),
            if ordering_reproduced { "reproduced" } else { "not reproduced" }
        ),
    );
}

// ---- a10: byte-level determinism of the CLI --------------------------

fn run_entlab(dir: &Path, args: &[&str]) {
    let status = std::process::Command::new(env!("CARGO_BIN_EXE_entlab"))
        .current_dir(dir)
        .args(args)
        .stdout(std::process::Stdio::null())
        .status()
        .unwrap();
    assert!(status.success(), "entlab {args:?} failed");
}

fn dir_digest(dir: &Path) -> Vec<(String, u64)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                let bytes = std::fs::read(&path).unwrap();
                out.push((rel, entlab_core::rng::fnv1a(&bytes)));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn a10_determinism() {
    let gen_args = [
        "generate",
        "--run.seed",
        "11",
        "--gen.train_per_level",
        "40",
        "--gen.test_per_level",
        "8",
    ];
    let t1 = tempfile::tempdir().unwrap();
    let t2 = tempfile::tempdir().unwrap();
    run_entlab(t1.path(), &gen_args);
    run_entlab(t2.path(), &gen_args);
    let generate_identical = dir_digest(t1.path()) == dir_digest(t2.path());

    // A deterministic checkpoint (max_epochs 0 stores the seeded init),
    // then two greedy evaluations must produce byte-identical reports.
    let train_args = ["train", "--run.seed", "11", "--train.max_epochs", "0"];
    run_entlab(t1.path(), &train_args);
    run_entlab(
        t1.path(),
        &["eval", "--run.seed", "11", "--run.report_dir", "reports-a"],
    );
    run_entlab(
        t1.path(),
        &["eval", "--run.seed", "11", "--run.report_dir", "reports-b"],
    );
    let a = std::fs::read(t1.path().join("reports-a/kinship-baseline-report.json")).unwrap();
    let b = std::fs::read(t1.path().join("reports-b/kinship-baseline-report.json")).unwrap();
    let eval_identical = a == b;

    require(
        "a10 determinism",
        generate_identical && eval_identical,
        &format!(
            "generate twice byte-identical: {generate_identical}; \
             greedy eval twice byte-identical: {eval_identical}"
        ),
    );
}
