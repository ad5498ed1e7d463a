//! End-to-end exercise of the binary surface: generate → train → eval →
//! report on a tiny budget, config file + override handling, and the
//! failure exit paths.

use std::path::Path;
use std::process::Command;

fn entlab(dir: &Path, args: &[&str]) -> (bool, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_entlab"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&out.stdout).into_owned()
        + &String::from_utf8_lossy(&out.stderr);
    (out.status.success(), text)
}

#[test]
fn full_pipeline_on_a_tiny_budget() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(
        dir.join("lab.conf"),
        "[run]\nseed = 3\n\n[gen]\ntrain_per_level = 20\ntest_per_level = 4\n\n\
         [dims]\nd = 16\nheads = 2\nkv = 8\nlayers = 1\nff = 32\nmax_len = 96\n\n\
         [train]\nmax_epochs = 1\nbatch_size = 8\n",
    )
    .unwrap();

    let (ok, out) = entlab(dir, &["generate", "--config", "lab.conf"]);
    assert!(ok, "{out}");
    assert!(out.contains("generated kinship dataset"));
    assert!(dir.join("data/kinship/manifest.json").exists());
    assert!(dir.join("data/kinship/vocab.txt").exists());

    let (ok, out) = entlab(dir, &["train", "--config", "lab.conf"]);
    assert!(ok, "{out}");
    assert!(out.contains("epoch   1"));
    assert!(dir.join("runs/checkpoints/kinship-baseline.ckpt").exists());
    assert!(dir.join("runs/checkpoints/kinship-baseline-train.csv").exists());

    let (ok, out) = entlab(dir, &["eval", "--config", "lab.conf"]);
    assert!(ok, "{out}");
    assert!(out.contains("bucket"), "{out}");
    assert!(dir.join("runs/reports/kinship-baseline-report.json").exists());

    // second strategy so the comparison table has two rows
    let (ok, out) = entlab(
        dir,
        &["train", "--config", "lab.conf", "--run.strategy", "emb-sum"],
    );
    assert!(ok, "{out}");
    let (ok, out) = entlab(
        dir,
        &["eval", "--config", "lab.conf", "--run.strategy", "emb-sum"],
    );
    assert!(ok, "{out}");

    let (ok, out) = entlab(
        dir,
        &[
            "report",
            "runs/reports/kinship-baseline-report.json",
            "runs/reports/kinship-emb-sum-report.json",
            "--out",
            "combined.txt",
        ],
    );
    assert!(ok, "{out}");
    assert!(out.contains("baseline"));
    assert!(out.contains("emb-sum"));
    assert!(out.contains("avg."));
    assert!(dir.join("combined.txt").exists());
}

#[test]
fn rules_pipeline_and_env_config() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(
        dir.join("rules.conf"),
        "[run]\ntask = rules\nseed = 5\nstrategy = dec-loss\n\n\
         [gen]\ntrain_per_bucket = 9\ntest_per_bucket = 3\n\n\
         [dims]\nd = 16\nheads = 2\nkv = 8\nlayers = 1\nff = 32\nmax_len = 160\n\n\
         [train]\nmax_epochs = 1\nbatch_size = 8\n",
    )
    .unwrap();
    let conf = dir.join("rules.conf");

    let run_with_env = |args: &[&str]| {
        let out = Command::new(env!("CARGO_BIN_EXE_entlab"))
            .current_dir(dir)
            .env("ENTLAB_CONFIG", &conf)
            .args(args)
            .output()
            .unwrap();
        let text = String::from_utf8_lossy(&out.stdout).into_owned()
            + &String::from_utf8_lossy(&out.stderr);
        (out.status.success(), text)
    };

    let (ok, out) = run_with_env(&["generate"]);
    assert!(ok, "{out}");
    assert!(out.contains("generated rules dataset"));
    let (ok, out) = run_with_env(&["train"]);
    assert!(ok, "{out}");
    assert!(out.contains("abs"), "dec-loss logs the aux component: {out}");
    let (ok, out) = run_with_env(&["eval"]);
    assert!(ok, "{out}");
    assert!(dir.join("runs/reports/kinship-dec-loss-report.json").exists() == false);
    assert!(dir.join("runs/reports/rules-dec-loss-report.json").exists());
}

#[test]
fn nonzero_exit_on_contract_violations() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();

    // unknown strategy
    let (ok, out) = entlab(dir, &["generate", "--run.strategy", "enc-mul"]);
    assert!(!ok);
    assert!(out.contains("unknown strategy"), "{out}");

    // eval without a checkpoint / dataset
    let (ok, _) = entlab(dir, &["eval"]);
    assert!(!ok);

    // malformed override
    let (ok, out) = entlab(dir, &["train", "--run.seed"]);
    assert!(!ok);
    assert!(out.contains("missing a value"), "{out}");

    // unknown config key
    std::fs::write(dir.join("bad.conf"), "[run]\nbogus = 1\n").unwrap();
    let (ok, out) = entlab(dir, &["generate", "--config", "bad.conf"]);
    assert!(!ok);
    assert!(out.contains("unknown config keys"), "{out}");
}

#[test]
fn vocab_hash_guards_checkpoints() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let base = [
        "--gen.train_per_level",
        "12",
        "--gen.test_per_level",
        "3",
        "--dims.d",
        "16",
        "--dims.heads",
        "2",
        "--dims.kv",
        "8",
        "--dims.layers",
        "1",
        "--dims.ff",
        "32",
        "--train.max_epochs",
        "0",
    ];
    let with = |cmd: &str, extra: &[&str]| {
        let mut args = vec![cmd];
        args.extend_from_slice(&base);
        args.extend_from_slice(extra);
        entlab(dir, &args)
    };
    let (ok, out) = with("generate", &[]);
    assert!(ok, "{out}");
    let (ok, out) = with("train", &[]);
    assert!(ok, "{out}");
    // regenerate with a different seed: names change, vocab changes
    let (ok, out) = with("generate", &["--run.seed", "99"]);
    assert!(ok, "{out}");
    let (ok, out) = with("eval", &["--run.seed", "99"]);
    assert!(!ok, "eval must refuse a vocab mismatch");
    assert!(out.contains("hash mismatch"), "{out}");
}
