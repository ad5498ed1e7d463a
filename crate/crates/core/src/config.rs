//! Run configuration: a flat sectioned key-value file, with every key
//! overridable from the command line as `--section.key value`.
//!
//! ```text
//! [run]
//! task = kinship
//! strategy = enc-sum
//! seed = 42
//! ```

use crate::data::Task;
use crate::error::{Error, Result};
use crate::harness::TrainConfig;
use crate::kinship::KinshipGenConfig;
use crate::model::{DecodeMode, ModelDims, Strategy};
use crate::rules::RulesGenConfig;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Parse the `[section] key = value` format into `section.key` entries.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    let mut section = String::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            section = name.trim().to_string();
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!("line {}: expected `key = value`", lineno + 1)));
        };
        let full_key = if section.is_empty() {
            key.trim().to_string()
        } else {
            format!("{}.{}", section, key.trim())
        };
        map.insert(full_key, value.trim().to_string());
    }
    Ok(map)
}

pub fn load_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    parse_config_text(&std::fs::read_to_string(path)?)
}

/// Apply `--section.key value` pairs on top of the file contents.
pub fn apply_overrides(
    map: &mut BTreeMap<String, String>,
    overrides: &[(String, String)],
) {
    for (k, v) in overrides {
        map.insert(k.clone(), v.clone());
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub task: Task,
    pub strategy: Strategy,
    pub seed: u64,
    pub data_dir: PathBuf,
    pub checkpoint_dir: PathBuf,
    pub report_dir: PathBuf,
    pub tag_n: usize,
    pub kinship: KinshipGenConfig,
    pub rules: RulesGenConfig,
    pub dims: DimsConfig,
    pub train: TrainConfig,
    pub eval: EvalSettings,
    /// The fully resolved key-value view, echoed into manifests.
    pub raw: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy)]
pub struct DimsConfig {
    pub d: usize,
    pub heads: usize,
    pub kv: usize,
    pub layers: usize,
    pub ff: usize,
    pub max_len: usize,
}

impl DimsConfig {
    pub fn with_vocab(&self, vocab: usize) -> Result<ModelDims> {
        ModelDims::new(self.d, self.heads, self.kv, self.layers, self.ff, vocab, self.max_len)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EvalSettings {
    pub mode: DecodeMode,
    pub max_new: usize,
}

struct Reader {
    map: BTreeMap<String, String>,
    consumed: std::collections::BTreeSet<String>,
}

impl Reader {
    fn get(&mut self, key: &str) -> Option<String> {
        let v = self.map.get(key).cloned();
        if v.is_some() {
            self.consumed.insert(key.to_string());
        }
        v
    }

    fn string(&mut self, key: &str, default: &str) -> String {
        self.get(key).unwrap_or_else(|| default.to_string())
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse::<T>()
                .map_err(|_| Error::Config(format!("bad value `{v}` for key `{key}`"))),
        }
    }

    fn list_usize(&mut self, key: &str, default: &[usize]) -> Result<Vec<usize>> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::Config(format!("bad list value in `{key}`: `{s}`")))
                })
                .collect(),
        }
    }
}

impl RunConfig {
    pub fn from_map(map: BTreeMap<String, String>) -> Result<RunConfig> {
        let raw = map.clone();
        let mut r = Reader { map, consumed: Default::default() };

        let task = Task::from_name(&r.string("run.task", "kinship"))?;
        let strategy = Strategy::from_name(&r.string("run.strategy", "baseline"))?;
        let seed: u64 = r.parse("run.seed", 0u64)?;
        let data_dir = PathBuf::from(r.string("run.data_dir", "data"));
        let checkpoint_dir = PathBuf::from(r.string("run.checkpoint_dir", "runs/checkpoints"));
        let report_dir = PathBuf::from(r.string("run.report_dir", "runs/reports"));

        let tag_n: usize = r.parse("tags.n", task.default_n())?;
        let freeze_tags: bool = r.parse("tags.freeze", false)?;

        let kinship = KinshipGenConfig {
            train_levels: r.list_usize("gen.train_levels", &[2, 4, 6])?,
            train_per_level: r.parse("gen.train_per_level", 2000usize)?,
            test_levels: r.list_usize("gen.test_levels", &[2, 3, 4, 5, 6, 7, 8, 9, 10])?,
            test_per_level: r.parse("gen.test_per_level", 200usize)?,
            valid_fraction: r.parse("gen.valid_fraction", 0.1f64)?,
            overlap_ceiling: r.parse("gen.overlap_ceiling", 0.10f64)?,
            partition_names: r.parse("gen.partition_names", false)?,
            names_per_gender: r.parse("gen.names_per_gender", 0usize)?,
            seed,
        };
        let rules = RulesGenConfig {
            train_buckets: r.list_usize("gen.train_buckets", &[0, 1, 2])?,
            train_per_bucket: r.parse("gen.train_per_bucket", 1500usize)?,
            test_buckets: r.list_usize("gen.test_buckets", &[0, 1, 2, 3, 4, 5])?,
            test_per_bucket: r.parse("gen.test_per_bucket", 150usize)?,
            valid_fraction: r.parse("gen.valid_fraction", 0.1f64)?,
            seed,
        };

        let dims = DimsConfig {
            d: r.parse("dims.d", 64usize)?,
            heads: r.parse("dims.heads", 4usize)?,
            kv: r.parse("dims.kv", 16usize)?,
            layers: r.parse("dims.layers", 2usize)?,
            ff: r.parse("dims.ff", 256usize)?,
            max_len: r.parse("dims.max_len", 192usize)?,
        };

        let train = TrainConfig {
            batch_size: r.parse("train.batch_size", 16usize)?,
            lr: r.parse("train.lr", 1e-3f64)?,
            beta1: r.parse("train.beta1", 0.9f64)?,
            beta2: r.parse("train.beta2", 0.999f64)?,
            eps: r.parse("train.eps", 1e-8f64)?,
            weight_decay: r.parse("train.weight_decay", 0.0f64)?,
            grad_clip: r.parse("train.grad_clip", 1.0f64)?,
            patience: r.parse("train.patience", 10usize)?,
            max_epochs: r.parse("train.max_epochs", 30usize)?,
            dropout: r.parse("train.dropout", 0.1f64)?,
            lr_decay: r.parse("train.lr_decay", 1.0f64)?,
            freeze_tags,
            seed,
        };

        let mode = match r.string("eval.mode", "greedy").as_str() {
            "greedy" => DecodeMode::Greedy,
            "top-p" => DecodeMode::TopP {
                p: r.parse("eval.top_p", 0.9f64)?,
                temperature: r.parse("eval.temperature", 1.0f64)?,
            },
            other => return Err(Error::Config(format!("unknown eval.mode `{other}`"))),
        };
        // consume the sampler keys even in greedy mode so they don't
        // register as unknown
        let _ = r.parse("eval.top_p", 0.9f64)?;
        let _ = r.parse("eval.temperature", 1.0f64)?;
        let eval = EvalSettings { mode, max_new: r.parse("eval.max_new", 24usize)? };

        let unknown: Vec<String> =
            r.map.keys().filter(|k| !r.consumed.contains(*k)).cloned().collect();
        if !unknown.is_empty() {
            return Err(Error::Config(format!("unknown config keys: {}", unknown.join(", "))));
        }

        Ok(RunConfig {
            task,
            strategy,
            seed,
            data_dir,
            checkpoint_dir,
            report_dir,
            tag_n,
            kinship,
            rules,
            dims,
            train,
            eval,
            raw,
        })
    }

    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<RunConfig> {
        let mut map = load_config_file(path)?;
        apply_overrides(&mut map, overrides);
        RunConfig::from_map(map)
    }

    /// File names derived from (task, strategy).
    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint_dir
            .join(format!("{}-{}.ckpt", self.task.name(), self.strategy.name()))
    }

    pub fn train_log_path(&self) -> PathBuf {
        self.checkpoint_dir
            .join(format!("{}-{}-train.csv", self.task.name(), self.strategy.name()))
    }

    pub fn report_json_path(&self) -> PathBuf {
        self.report_dir
            .join(format!("{}-{}-report.json", self.task.name(), self.strategy.name()))
    }

    pub fn report_text_path(&self) -> PathBuf {
        self.report_dir
            .join(format!("{}-{}-report.txt", self.task.name(), self.strategy.name()))
    }

    pub fn task_data_dir(&self) -> PathBuf {
        self.data_dir.join(self.task.name())
    }
}
