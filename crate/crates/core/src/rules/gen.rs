//! Depth-targeted theory sampling and split construction.
//!
//! Each example is built around an attribute chain on one subject: a seed
//! fact plus `d` chained rules put the target atom at proof depth exactly
//! `d`. Distractor facts and rules are layered on top, then the prover
//! verifies the depth landed where intended (and, for proved queries, that
//! every leaf fact of the recorded shallowest derivation is load-bearing);
//! examples failing verification are resampled within a budget of 200
//! attempts.

use super::prover::forward_chain;
use super::render::{ANIMALS, ATTRIBUTES, PERSONS, RELATIONS};
use super::{Atom, Condition, Label, Query, Rule, Theory, World};
use crate::error::{Error, Result};
use crate::rng::{substream, Rng};
use rand::seq::SliceRandom;
use rand::Rng as _;
use std::collections::BTreeMap;

const ATTEMPT_BUDGET: usize = 200;

#[derive(Debug, Clone)]
pub struct RulesGenConfig {
    pub train_buckets: Vec<usize>,
    pub train_per_bucket: usize,
    pub test_buckets: Vec<usize>,
    pub test_per_bucket: usize,
    pub valid_fraction: f64,
    pub seed: u64,
}

impl Default for RulesGenConfig {
    fn default() -> Self {
        RulesGenConfig {
            train_buckets: vec![0, 1, 2],
            train_per_bucket: 1500,
            test_buckets: vec![0, 1, 2, 3, 4, 5],
            test_per_bucket: 150,
            valid_fraction: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct RulesStats {
    pub train_counts: BTreeMap<usize, usize>,
    pub valid_count: usize,
    pub test_counts: BTreeMap<usize, usize>,
    pub train_labels: BTreeMap<String, usize>,
    pub test_labels: BTreeMap<String, usize>,
}

#[derive(Debug)]
pub struct RulesSplits {
    pub train: Vec<Theory>,
    pub valid: Vec<Theory>,
    pub test: Vec<Theory>,
    pub stats: RulesStats,
}

fn entity_pool(world: World) -> Vec<&'static str> {
    match world {
        World::Animal => ANIMALS.to_vec(),
        World::Person => PERSONS.to_vec(),
    }
}

/// One generation attempt; `None` means the prover rejected it.
fn attempt(bucket: usize, label: Label, rng: &mut Rng) -> Option<Theory> {
    let world = if rng.gen_bool(0.5) { World::Animal } else { World::Person };
    let mut pool = entity_pool(world);
    pool.shuffle(rng);
    let n_entities = rng.gen_range(3..=4);
    let (entities, unmentioned) = pool.split_at(n_entities);
    let subject = entities[0];

    let mut attrs: Vec<&str> = ATTRIBUTES.to_vec();
    attrs.shuffle(rng);
    let depth = bucket;

    let mut facts: Vec<Atom> = Vec::new();
    let mut rules: Vec<Rule> = Vec::new();

    // The chain: seed fact at depth 0, then one rule per depth step.
    let chain: Vec<&str> = attrs.drain(..depth + 1).collect();
    facts.push(Atom::attr(subject, chain[0]));
    let mut side_attrs: Vec<&str> = Vec::new();
    for i in 1..=depth {
        let two_body = rng.gen_bool(0.5);
        let mut body = vec![Condition::var_is(chain[i - 1])];
        if two_body {
            let use_relation = world == World::Animal && rng.gen_bool(0.5);
            if use_relation && !attrs.is_empty() {
                let rel = RELATIONS[rng.gen_range(0..RELATIONS.len())];
                let object = entities[rng.gen_range(1..entities.len())];
                body.push(Condition::var_does(rel, object));
                facts.push(Atom::rel(subject, rel, object));
            } else if let Some(side) = attrs.pop() {
                body.push(Condition::var_is(side));
                facts.push(Atom::attr(subject, side));
                side_attrs.push(side);
            }
        }
        rules.push(Rule::new(body, Condition::var_is(chain[i])));
    }

    // Distractor facts about the other entities.
    for &e in &entities[1..] {
        let n_facts = rng.gen_range(1..=2);
        for _ in 0..n_facts {
            if world == World::Animal && rng.gen_bool(0.4) {
                let rel = RELATIONS[rng.gen_range(0..RELATIONS.len())];
                let object = entities[rng.gen_range(0..entities.len())];
                if object != e {
                    facts.push(Atom::rel(e, rel, object));
                    continue;
                }
            }
            let all: Vec<&str> = chain.iter().chain(side_attrs.iter()).chain(attrs.iter()).copied().collect();
            facts.push(Atom::attr(e, all[rng.gen_range(0..all.len())]));
        }
    }
    facts.sort();
    facts.dedup();

    // Distractor rules over attributes the chain does not use.
    let n_distractor_rules = rng.gen_range(1..=2);
    for _ in 0..n_distractor_rules {
        if attrs.len() < 2 {
            break;
        }
        let head = attrs.pop().unwrap();
        let body_attr = attrs[rng.gen_range(0..attrs.len())];
        if world == World::Animal && rng.gen_bool(0.3) {
            // grounded-head distractor
            let e1 = entities[rng.gen_range(0..entities.len())];
            rules.push(Rule::new(
                vec![Condition::var_is(body_attr)],
                Condition::entity_is(e1, head),
            ));
        } else {
            rules.push(Rule::new(vec![Condition::var_is(body_attr)], Condition::var_is(head)));
        }
    }

    let closure = forward_chain(&facts, &rules);
    let target = Atom::attr(subject, chain[depth]);

    let (query, final_label, final_depth) = match label {
        Label::True | Label::False => {
            if closure.depth(&target) != Some(depth) {
                return None; // a distractor created a shortcut (or broke the chain)
            }
            // every leaf fact of the recorded derivation must be load-bearing
            for leaf in closure.leaf_facts(&target) {
                let reduced: Vec<Atom> = facts.iter().filter(|f| **f != leaf).cloned().collect();
                let re = forward_chain(&reduced, &rules);
                if matches!(re.depth(&target), Some(d) if d <= depth) {
                    return None;
                }
            }
            let negated = label == Label::False;
            (Query { atom: target, negated }, label, Some(depth))
        }
        Label::Unknown => {
            let query_atom = if rng.gen_bool(0.5) && !unmentioned.is_empty() {
                // an entity the theory never mentions
                Atom::attr(unmentioned[0], ATTRIBUTES[rng.gen_range(0..ATTRIBUTES.len())])
            } else {
                // a mentioned entity with an unprovable attribute
                let e = entities[rng.gen_range(0..entities.len())];
                let candidates: Vec<&str> = ATTRIBUTES
                    .iter()
                    .copied()
                    .filter(|a| !closure.contains(&Atom::attr(e, a)))
                    .collect();
                if candidates.is_empty() {
                    return None;
                }
                Atom::attr(e, candidates[rng.gen_range(0..candidates.len())])
            };
            if closure.contains(&query_atom) {
                return None;
            }
            let negated = rng.gen_bool(1.0 / 3.0);
            (Query { atom: query_atom, negated }, Label::Unknown, None)
        }
    };

    Some(Theory {
        facts,
        rules,
        query,
        label: final_label,
        depth: final_depth,
        bucket,
        world,
    })
}

/// Sample one theory whose query labels at exactly the target bucket.
pub fn sample_theory(bucket: usize, label: Label, rng: &mut Rng) -> Result<Theory> {
    if bucket > 5 {
        return Err(Error::Config(format!("depth bucket {bucket} outside 0..=5")));
    }
    for _ in 0..ATTEMPT_BUDGET {
        if let Some(theory) = attempt(bucket, label, rng) {
            return Ok(theory);
        }
    }
    Err(Error::SamplingBudget {
        attempts: ATTEMPT_BUDGET,
        context: format!("rules example at depth {bucket} with label {}", label.name()),
    })
}

const LABEL_CYCLE: [Label; 3] = [Label::True, Label::False, Label::Unknown];

pub fn build_splits(config: &RulesGenConfig) -> Result<RulesSplits> {
    if config.train_buckets.is_empty() || config.test_buckets.is_empty() {
        return Err(Error::InfeasibleSplit("empty bucket list".into()));
    }
    if !(0.0..1.0).contains(&config.valid_fraction) {
        return Err(Error::InfeasibleSplit("valid_fraction must be in [0, 1)".into()));
    }

    let mut train = Vec::with_capacity(config.train_buckets.len() * config.train_per_bucket);
    for (bi, &bucket) in config.train_buckets.iter().enumerate() {
        for i in 0..config.train_per_bucket {
            let key = (bi as u64) << 40 | i as u64;
            let mut rng = substream(config.seed, "rules-train", key);
            train.push(sample_theory(bucket, LABEL_CYCLE[i % 3], &mut rng)?);
        }
    }

    let mut order: Vec<usize> = (0..train.len()).collect();
    order.shuffle(&mut substream(config.seed, "rules-valid-split", 0));
    let n_valid = (train.len() as f64 * config.valid_fraction).round() as usize;
    let valid_idx: std::collections::BTreeSet<usize> = order.into_iter().take(n_valid).collect();
    let mut valid = Vec::with_capacity(n_valid);
    let mut kept = Vec::with_capacity(train.len() - n_valid);
    for (i, t) in train.into_iter().enumerate() {
        if valid_idx.contains(&i) {
            valid.push(t);
        } else {
            kept.push(t);
        }
    }
    let train = kept;

    let mut test = Vec::with_capacity(config.test_buckets.len() * config.test_per_bucket);
    for (bi, &bucket) in config.test_buckets.iter().enumerate() {
        for i in 0..config.test_per_bucket {
            let key = (bi as u64) << 40 | i as u64;
            let mut rng = substream(config.seed, "rules-test", key);
            test.push(sample_theory(bucket, LABEL_CYCLE[i % 3], &mut rng)?);
        }
    }

    let count_by =
        |set: &[Theory]| {
            let mut m = BTreeMap::new();
            for t in set {
                *m.entry(t.bucket).or_insert(0usize) += 1;
            }
            m
        };
    let labels_of = |set: &[Theory]| {
        let mut m = BTreeMap::new();
        for t in set {
            *m.entry(t.label.name().to_string()).or_insert(0usize) += 1;
        }
        m
    };
    let stats = RulesStats {
        train_counts: count_by(&train),
        valid_count: valid.len(),
        test_counts: count_by(&test),
        train_labels: labels_of(&train),
        test_labels: labels_of(&test),
    };
    Ok(RulesSplits { train, valid, test, stats })
}

#[cfg(test)]
mod tests {
    use super::super::prover::label_query;
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn sampled_depth_matches_target_exactly() {
        for bucket in 0..=5 {
            for (i, label) in LABEL_CYCLE.iter().enumerate() {
                let mut rng = seeded(100 + bucket as u64 * 10 + i as u64);
                let t = sample_theory(bucket, *label, &mut rng).unwrap();
                assert_eq!(t.label, *label);
                let closure = forward_chain(&t.facts, &t.rules);
                let (got_label, got_depth) = label_query(&closure, &t.query);
                assert_eq!(got_label, *label);
                match label {
                    Label::Unknown => assert_eq!(got_depth, None),
                    _ => assert_eq!(got_depth, Some(bucket), "bucket {bucket}"),
                }
            }
        }
    }

    #[test]
    fn depth_zero_true_query_is_a_verbatim_fact() {
        let mut rng = seeded(9);
        let t = sample_theory(0, Label::True, &mut rng).unwrap();
        assert!(t.facts.contains(&t.query.atom));
    }

    #[test]
    fn removing_any_leaf_fact_breaks_the_proof_at_that_depth() {
        for seed in 0..10 {
            let mut rng = seeded(400 + seed);
            let t = sample_theory(3, Label::True, &mut rng).unwrap();
            let closure = forward_chain(&t.facts, &t.rules);
            for leaf in closure.leaf_facts(&t.query.atom) {
                let reduced: Vec<Atom> =
                    t.facts.iter().filter(|f| **f != leaf).cloned().collect();
                let re = forward_chain(&reduced, &t.rules);
                let d = re.depth(&t.query.atom);
                assert!(
                    d.is_none() || d.unwrap() > 3,
                    "leaf {leaf:?} was not load-bearing (depth {d:?})"
                );
            }
        }
    }

    #[test]
    fn split_buckets_and_label_mix() {
        let config = RulesGenConfig {
            train_buckets: vec![0, 1, 2],
            train_per_bucket: 15,
            test_buckets: vec![0, 1, 2, 3, 4, 5],
            test_per_bucket: 6,
            valid_fraction: 0.1,
            seed: 11,
        };
        let s = build_splits(&config).unwrap();
        assert_eq!(s.stats.test_counts.keys().copied().collect::<Vec<_>>(), vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(s.stats.train_counts.keys().copied().collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(s.stats.train_labels.len(), 3, "all three labels in train");
        assert_eq!(s.stats.test_labels.len(), 3, "all three labels in test");
        assert_eq!(s.train.len() + s.valid.len(), 45);
        assert_eq!(s.valid.len(), 5);
    }

    #[test]
    fn generation_is_deterministic() {
        let config = RulesGenConfig {
            train_per_bucket: 6,
            test_per_bucket: 3,
            seed: 21,
            ..RulesGenConfig::default()
        };
        let a = build_splits(&config).unwrap();
        let b = build_splits(&config).unwrap();
        let sig = |s: &RulesSplits| {
            s.train
                .iter()
                .chain(s.test.iter())
                .map(|t| format!("{:?}|{:?}|{:?}", t.facts, t.query, t.label))
                .collect::<Vec<_>>()
        };
        assert_eq!(sig(&a), sig(&b));
    }
}
