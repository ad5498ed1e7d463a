//! End-to-end pipeline at micro scale: generate, train a few epochs,
//! evaluate, and check the report's bookkeeping.

use entlab_core::abstraction::LexiconTagger;
use entlab_core::data::{self, GoldMeta, GoldTriple, Sample, Task};
use entlab_core::harness::{evaluate, train, EvalConfig, TrainConfig};
use entlab_core::kinship;
use entlab_core::model::{DecodeMode, ModelDims, ModelParams, Strategy};
use entlab_core::rng::substream;
use entlab_core::rules;
use entlab_core::vocab::Vocabulary;

fn kinship_toy() -> (Vec<Sample>, Vec<Sample>, Vec<Sample>, Vocabulary, LexiconTagger) {
    let config = kinship::KinshipGenConfig {
        train_levels: vec![2],
        train_per_level: 40,
        test_levels: vec![2, 3],
        test_per_level: 8,
        names_per_gender: 12,
        seed: 1,
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
    let conv = |rs: Vec<data::KinshipRecord>| rs.into_iter().map(Sample::from).collect();
    (
        conv(train_r),
        conv(valid_r),
        conv(test_r),
        vocab,
        kinship::tagger(&kinship::NamePool::shipped()),
    )
}

#[test]
fn kinship_micro_pipeline_trains_and_reports() {
    let (train_set, valid_set, test_set, vocab, tagger) = kinship_toy();
    let dims = ModelDims::micro(vocab.len(), 96);
    let params = ModelParams::init(dims, Strategy::EmbSum, &mut substream(1, "init", 0));
    let config = TrainConfig { batch_size: 8, max_epochs: 2, seed: 1, ..Default::default() };
    let out = train(params, &train_set, &valid_set, &vocab, &tagger, &config).unwrap();
    assert_eq!(out.log.len(), 2);

    let eval_config = EvalConfig {
        mode: DecodeMode::Greedy,
        max_new: 16,
        train_buckets: vec![2],
        seed: 1,
    };
    let report =
        evaluate(&out.params, &test_set, &vocab, &tagger, Task::Kinship, &eval_config).unwrap();
    assert_eq!(report.total, test_set.len());
    // bucket counts must equal generated split counts
    let bucket_total: usize = report.buckets.iter().map(|b| b.total).sum();
    assert_eq!(bucket_total, test_set.len());
    assert_eq!(report.buckets.len(), 2);
    assert_eq!(report.buckets[0].bucket, 2);
    assert_eq!(report.buckets[0].category, "seen");
    assert_eq!(report.buckets[1].category, "extrapolation");
    // an untrained-ish model: wrong answers must be categorized, not lost
    let failures = report.failures.extraction_failed + report.failures.wrong_triple;
    assert_eq!(report.correct + failures, report.total);
}

#[test]
fn greedy_evaluation_is_reproducible() {
    let (train_set, valid_set, test_set, vocab, tagger) = kinship_toy();
    let dims = ModelDims::micro(vocab.len(), 96);
    let params = ModelParams::init(dims, Strategy::Baseline, &mut substream(2, "init", 0));
    let config = TrainConfig { batch_size: 8, max_epochs: 1, seed: 2, ..Default::default() };
    let out = train(params, &train_set, &valid_set, &vocab, &tagger, &config).unwrap();
    let eval_config = EvalConfig {
        mode: DecodeMode::Greedy,
        max_new: 16,
        train_buckets: vec![2],
        seed: 2,
    };
    let a = evaluate(&out.params, &test_set, &vocab, &tagger, Task::Kinship, &eval_config).unwrap();
    let b = evaluate(&out.params, &test_set, &vocab, &tagger, Task::Kinship, &eval_config).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn rules_micro_pipeline_trains_and_reports() {
    let config = rules::RulesGenConfig {
        train_buckets: vec![0, 1],
        train_per_bucket: 15,
        test_buckets: vec![0, 1, 2],
        test_per_bucket: 5,
        seed: 3,
        ..Default::default()
    };
    let splits = rules::build_splits(&config).unwrap();
    let (train_r, valid_r, test_r) = data::rules_records(&splits, 3);
    let corpus: Vec<String> = train_r
        .iter()
        .chain(valid_r.iter())
        .chain(test_r.iter())
        .flat_map(|r| [r.input.clone(), r.target.clone()])
        .collect();
    let vocab = data::build_task_vocab(Task::Rules, 10, corpus);
    let conv = |rs: Vec<data::RulesRecord>| -> Vec<Sample> {
        rs.into_iter().map(Sample::from).collect()
    };
    let (train_set, valid_set, test_set) = (conv(train_r), conv(valid_r), conv(test_r));

    let dims = ModelDims::micro(vocab.len(), 128);
    let params = ModelParams::init(dims, Strategy::DecLoss, &mut substream(3, "init", 0));
    let tconfig = TrainConfig { batch_size: 8, max_epochs: 2, seed: 3, ..Default::default() };
    let out = train(params, &train_set, &valid_set, &vocab, &rules::tagger(), &tconfig).unwrap();
    assert!(out.log.iter().all(|l| l.abs_loss.is_some()), "dec-loss logs the aux component");

    let eval_config = EvalConfig {
        mode: DecodeMode::Greedy,
        max_new: 8,
        train_buckets: vec![0, 1],
        seed: 3,
    };
    let report =
        evaluate(&out.params, &test_set, &vocab, &rules::tagger(), Task::Rules, &eval_config)
            .unwrap();
    assert_eq!(report.total, test_set.len());
    assert_eq!(report.buckets.len(), 3);
    assert_eq!(report.failures.wrong_triple, 0, "rules task never scores triples");
}

#[test]
fn top_p_evaluation_runs_with_fixed_seed() {
    let (train_set, valid_set, test_set, vocab, tagger) = kinship_toy();
    let dims = ModelDims::micro(vocab.len(), 96);
    let params = ModelParams::init(dims, Strategy::Baseline, &mut substream(4, "init", 0));
    let config = TrainConfig { batch_size: 8, max_epochs: 1, seed: 4, ..Default::default() };
    let out = train(params, &train_set, &valid_set, &vocab, &tagger, &config).unwrap();
    let eval_config = EvalConfig {
        mode: DecodeMode::TopP { p: 0.9, temperature: 1.0 },
        max_new: 16,
        train_buckets: vec![2],
        seed: 4,
    };
    let a = evaluate(&out.params, &test_set[..6], &vocab, &tagger, Task::Kinship, &eval_config)
        .unwrap();
    let b = evaluate(&out.params, &test_set[..6], &vocab, &tagger, Task::Kinship, &eval_config)
        .unwrap();
    // sampling is seeded per example, so even top-p reproduces
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn infeasible_overlap_is_reported_as_error() {
    // a tiny shared name pool with a zero ceiling cannot satisfy holdout:
    // training saturates every reachable answer triple
    let config = kinship::KinshipGenConfig {
        train_levels: vec![2],
        train_per_level: 4000,
        test_levels: vec![2],
        test_per_level: 60,
        names_per_gender: 3,
        overlap_ceiling: 0.0,
        seed: 5,
        ..Default::default()
    };
    match kinship::build_splits(&config) {
        Err(entlab_core::Error::InfeasibleSplit(_)) => {}
        other => panic!("expected InfeasibleSplit, got {other:?}"),
    }
}

#[test]
fn gold_meta_survives_jsonl() {
    let s = Sample::from(data::KinshipRecord {
        input: "question : How is A related to B ? context : ...".into(),
        target: "answer : A has a brother named B .".into(),
        level: 4,
        gold: GoldTriple { e1: "A".into(), rel: "brother".into(), e2: "B".into() },
        split: "test".into(),
    });
    match s.meta {
        GoldMeta::Kinship { level, ref gold } => {
            assert_eq!(level, 4);
            assert_eq!(gold.rel, "brother");
        }
        _ => panic!("wrong meta"),
    }
    assert_eq!(s.bucket(), 4);
}
