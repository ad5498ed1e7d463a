//! Level-controlled split construction with answer-triple holdout.
//!
//! Train/valid cover the configured training levels; test covers its own
//! level list. The measured (e1, rel, e2) triple overlap between test and
//! the training data is steered under a configured ceiling, either by
//! rejection (shared name pool, overlapping triples capped) or by
//! partitioning the name pool outright (overlap exactly zero).

use super::graph::sample_graph;
use super::names::NamePool;
use super::render::{render, KinshipExample};
use super::schema::RelationSchema;
use crate::error::{Error, Result};
use crate::rng::{substream, Rng};
use rand::seq::SliceRandom;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone)]
pub struct KinshipGenConfig {
    pub train_levels: Vec<usize>,
    pub train_per_level: usize,
    pub test_levels: Vec<usize>,
    pub test_per_level: usize,
    pub valid_fraction: f64,
    /// Ceiling on the fraction of test triples also present in training.
    pub overlap_ceiling: f64,
    /// Use disjoint train/test name pools instead of rejection steering.
    pub partition_names: bool,
    /// Names drawn per gender from the shipped pool (0 = whole pool).
    pub names_per_gender: usize,
    pub seed: u64,
}

impl Default for KinshipGenConfig {
    fn default() -> Self {
        KinshipGenConfig {
            train_levels: vec![2, 4, 6],
            train_per_level: 2000,
            test_levels: (2..=10).collect(),
            test_per_level: 200,
            valid_fraction: 0.1,
            overlap_ceiling: 0.10,
            partition_names: false,
            names_per_gender: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct KinshipStats {
    pub train_counts: BTreeMap<usize, usize>,
    pub valid_count: usize,
    pub test_counts: BTreeMap<usize, usize>,
    pub triple_overlap: f64,
}

#[derive(Debug)]
pub struct KinshipSplits {
    pub train: Vec<KinshipExample>,
    pub valid: Vec<KinshipExample>,
    pub test: Vec<KinshipExample>,
    pub stats: KinshipStats,
}

/// Answer triple in surface form.
fn triple_of(ex: &KinshipExample) -> (String, &'static str, String) {
    (
        ex.graph.people[ex.e1].name.clone(),
        ex.gold.name(),
        ex.graph.people[ex.e2].name.clone(),
    )
}

fn gen_example(level: usize, pool: &NamePool, rng: &mut Rng) -> Result<KinshipExample> {
    let graph = sample_graph(level, pool, rng)?;
    let e1 = 0;
    let e2 = graph.people.len() - 1;
    let gold = derive_or_bug(&graph, e1, e2)?;
    let (input, target) = render(&graph, e1, e2, gold, rng);
    Ok(KinshipExample { graph, e1, e2, gold, input, target })
}

fn derive_or_bug(
    graph: &super::graph::FamilyGraph,
    e1: usize,
    e2: usize,
) -> Result<super::schema::Relation> {
    // The sampler only takes composable steps, so this cannot fail.
    super::graph::derive_relation(graph, e1, e2, &RelationSchema)
}

pub fn build_splits(config: &KinshipGenConfig) -> Result<KinshipSplits> {
    if config.train_levels.is_empty() || config.test_levels.is_empty() {
        return Err(Error::InfeasibleSplit("empty level list".into()));
    }
    if !(0.0..1.0).contains(&config.valid_fraction) {
        return Err(Error::InfeasibleSplit("valid_fraction must be in [0, 1)".into()));
    }
    if !(0.0..=1.0).contains(&config.overlap_ceiling) {
        return Err(Error::InfeasibleSplit("overlap_ceiling must be in [0, 1]".into()));
    }

    let base = if config.names_per_gender > 0 {
        NamePool::shipped_subset(config.names_per_gender)?
    } else {
        NamePool::shipped()
    };
    let (train_pool, test_pool) = if config.partition_names {
        let per = base.count(super::schema::Gender::Male) / 2;
        base.partition(per)?
    } else {
        (base.clone(), base)
    };

    // Training examples.
    let mut train = Vec::with_capacity(config.train_levels.len() * config.train_per_level);
    for (li, &level) in config.train_levels.iter().enumerate() {
        for i in 0..config.train_per_level {
            let key = (li as u64) << 40 | i as u64;
            let mut rng = substream(config.seed, "kinship-train", key);
            train.push(gen_example(level, &train_pool, &mut rng)?);
        }
    }

    // Carve the validation split from the training set.
    let mut order: Vec<usize> = (0..train.len()).collect();
    order.shuffle(&mut substream(config.seed, "kinship-valid-split", 0));
    let n_valid = (train.len() as f64 * config.valid_fraction).round() as usize;
    let valid_idx: BTreeSet<usize> = order.into_iter().take(n_valid).collect();
    let mut valid = Vec::with_capacity(n_valid);
    let mut kept_train = Vec::with_capacity(train.len() - n_valid);
    for (i, ex) in train.into_iter().enumerate() {
        if valid_idx.contains(&i) {
            valid.push(ex);
        } else {
            kept_train.push(ex);
        }
    }
    let train = kept_train;

    // Triples seen in training data (train + valid both come from it).
    let train_triples: BTreeSet<_> =
        train.iter().chain(valid.iter()).map(triple_of).collect();

    // Test examples with overlap steering. The budget keeps the measured
    // overlap strictly under the ceiling rather than at it.
    let planned = config.test_levels.len() * config.test_per_level;
    let budget = (0.9 * config.overlap_ceiling * planned as f64).floor() as usize;
    let mut overlapping = 0usize;
    let mut test = Vec::with_capacity(planned);
    const MAX_ATTEMPTS_PER_SLOT: usize = 100;
    for (li, &level) in config.test_levels.iter().enumerate() {
        for i in 0..config.test_per_level {
            let key = (li as u64) << 40 | i as u64;
            let mut rng = substream(config.seed, "kinship-test", key);
            let mut accepted = None;
            for _ in 0..MAX_ATTEMPTS_PER_SLOT {
                let ex = gen_example(level, &test_pool, &mut rng)?;
                let overlaps = train_triples.contains(&triple_of(&ex));
                if overlaps && overlapping >= budget {
                    continue;
                }
                if overlaps {
                    overlapping += 1;
                }
                accepted = Some(ex);
                break;
            }
            match accepted {
                Some(ex) => test.push(ex),
                None => {
                    return Err(Error::InfeasibleSplit(format!(
                        "could not generate a level-{level} test example under the \
                         overlap ceiling {} after {MAX_ATTEMPTS_PER_SLOT} attempts",
                        config.overlap_ceiling
                    )))
                }
            }
        }
    }

    let measured = test
        .iter()
        .filter(|ex| train_triples.contains(&triple_of(ex)))
        .count() as f64
        / test.len() as f64;
    if measured > config.overlap_ceiling {
        return Err(Error::InfeasibleSplit(format!(
            "measured triple overlap {measured:.4} exceeds ceiling {}",
            config.overlap_ceiling
        )));
    }

    let mut train_counts = BTreeMap::new();
    for ex in &train {
        *train_counts.entry(ex.graph.level()).or_insert(0) += 1;
    }
    let mut test_counts = BTreeMap::new();
    for ex in &test {
        *test_counts.entry(ex.graph.level()).or_insert(0) += 1;
    }
    let stats = KinshipStats {
        train_counts,
        valid_count: valid.len(),
        test_counts,
        triple_overlap: measured,
    };
    Ok(KinshipSplits { train, valid, test, stats })
}

/// Generalization category of a test level relative to the training levels.
pub fn level_category(level: usize, train_levels: &[usize]) -> &'static str {
    let max_train = train_levels.iter().copied().max().unwrap_or(0);
    if train_levels.contains(&level) {
        "seen"
    } else if level < max_train {
        "interpolation"
    } else {
        "extrapolation"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> KinshipGenConfig {
        KinshipGenConfig {
            train_levels: vec![2, 4, 6],
            train_per_level: 60,
            test_levels: (2..=10).collect(),
            test_per_level: 12,
            valid_fraction: 0.1,
            overlap_ceiling: 0.10,
            partition_names: false,
            names_per_gender: 0,
            seed: 7,
        }
    }

    #[test]
    fn split_shape_matches_config() {
        let s = build_splits(&small_config()).unwrap();
        assert_eq!(s.stats.train_counts.keys().copied().collect::<Vec<_>>(), vec![2, 4, 6]);
        assert_eq!(s.stats.test_counts.len(), 9);
        assert!(s.stats.test_counts.values().all(|&c| c == 12));
        let total = 3 * 60;
        assert_eq!(s.train.len() + s.valid.len(), total);
        assert_eq!(s.valid.len(), total / 10);
        assert!(s.stats.triple_overlap <= 0.10);
    }

    #[test]
    fn disjoint_name_pools_give_zero_overlap() {
        let config = KinshipGenConfig { partition_names: true, ..small_config() };
        let s = build_splits(&config).unwrap();
        assert_eq!(s.stats.triple_overlap, 0.0);
    }

    #[test]
    fn generation_is_a_pure_function_of_config() {
        let a = build_splits(&small_config()).unwrap();
        let b = build_splits(&small_config()).unwrap();
        let key = |s: &KinshipSplits| {
            s.train
                .iter()
                .chain(s.valid.iter())
                .chain(s.test.iter())
                .map(|e| format!("{}\t{}", e.input, e.target))
                .collect::<Vec<_>>()
        };
        assert_eq!(key(&a), key(&b));
    }

    #[test]
    fn level_categories() {
        let train = vec![2, 4, 6];
        assert_eq!(level_category(2, &train), "seen");
        assert_eq!(level_category(3, &train), "interpolation");
        assert_eq!(level_category(5, &train), "interpolation");
        assert_eq!(level_category(7, &train), "extrapolation");
        assert_eq!(level_category(10, &train), "extrapolation");
    }
}
