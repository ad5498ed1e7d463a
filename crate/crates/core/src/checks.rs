//! Self-contained verification suites: finite-difference gradient checks,
//! independently implemented oracles for the two generators, scoring and
//! round-trip checks. `entlab check` runs these and the acceptance tests
//! call them directly.
//!
//! Every oracle here is a second, deliberately naive implementation —
//! layered closure recomputation instead of the prover's relaxation,
//! ground-fact genealogy instead of the composition fold — so agreement is
//! meaningful.

use crate::abstraction::AbstractedExample;
use crate::error::Result;
use crate::kinship::{
    self, derive_relation, parse_answer, render_answer, sample_graph, FamilyGraph, Gender,
    NamePool, Relation, RelationSchema, ALL_RELATIONS,
};
use crate::model::{forward_loss, Dropout, ModelDims, ModelParams, Strategy, ALL_STRATEGIES};
use crate::numkit::{Grads, NodeId, ParamId, ParamStore, Tape, Tensor};
use crate::rng::{seeded, substream, Rng};
use crate::rules::{forward_chain, Atom, Condition, Rule, Subject};
use crate::vocab::{TagSchema, Vocabulary};
use rand::Rng as _;
use std::collections::{BTreeMap, BTreeSet};

pub const FD_STEP: f64 = 1e-6;
pub const OP_GRAD_TOL: f64 = 1e-5;
pub const MODEL_GRAD_TOL: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        CheckOutcome { name: name.to_string(), passed, detail }
    }
}

/// Guarded relative error; the floor keeps finite-difference roundoff noise
/// (~1e-10 at unit scale) from registering as error on near-zero gradients.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-4)
}

/// Central finite differences against analytic gradients for every element
/// of every parameter in the store. `value` must be a pure function of the
/// store contents.
pub fn max_fd_error(
    store: &mut ParamStore,
    analytic: &Grads,
    mut value: impl FnMut(&ParamStore) -> Result<f64>,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for i in 0..store.len() {
        let pid = ParamId(i);
        for j in 0..store.get(pid).numel() {
            let orig = store.get(pid).data()[j];
            store.get_mut(pid).data_mut()[j] = orig + FD_STEP;
            let fp = value(store)?;
            store.get_mut(pid).data_mut()[j] = orig - FD_STEP;
            let fm = value(store)?;
            store.get_mut(pid).data_mut()[j] = orig;
            let fd = (fp - fm) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(analytic.get(pid).data()[j], fd));
        }
    }
    Ok(worst)
}

fn rand_shape(rng: &mut Rng) -> (usize, usize) {
    (rng.gen_range(1..5), rng.gen_range(1..5))
}

fn rand_tensor(shape: Vec<usize>, rng: &mut Rng) -> Tensor {
    Tensor::randn(shape, 1.0, rng)
}

type OpBuilder = Box<dyn Fn(&mut Tape, &[ParamId]) -> Result<NodeId>>;

/// One op case: register inputs as params, build the op's graph, reduce to
/// a scalar with fixed weights, then finite-difference every input.
fn check_op_case(build: &OpBuilder, inputs: Vec<Tensor>, rng: &mut Rng) -> Result<f64> {
    let mut store = ParamStore::new();
    let pids: Vec<ParamId> = inputs
        .into_iter()
        .enumerate()
        .map(|(i, t)| store.register(format!("in{i}"), t))
        .collect();

    let probe_numel = {
        let mut tape = Tape::new(&store);
        let out = build(&mut tape, &pids)?;
        tape.value(out).numel()
    };
    let weights: Vec<f64> = (0..probe_numel).map(|_| rng.gen_range(-1.0..1.0)).collect();

    let mut grads = Grads::zeros_like(&store);
    {
        let mut tape = Tape::new(&store);
        let out = build(&mut tape, &pids)?;
        let loss =
            if tape.value(out).is_scalar() { out } else { tape.weighted_sum(out, &weights)? };
        tape.backward(loss, &mut grads)?;
    }
    let weights_ref = &weights;
    max_fd_error(&mut store, &grads, move |store| {
        let mut tape = Tape::new(store);
        let out = build(&mut tape, &pids)?;
        let loss = if tape.value(out).is_scalar() {
            out
        } else {
            tape.weighted_sum(out, weights_ref)?
        };
        Ok(tape.value(loss).scalar_value())
    })
}

/// Gradient property suite over every differentiable op, `cases` random
/// small shapes each.
pub fn op_gradient_suite(cases: usize) -> Result<CheckOutcome> {
    type CaseGen = Box<dyn Fn(&mut Rng) -> (Vec<Tensor>, OpBuilder)>;
    let suite: Vec<(&'static str, CaseGen)> = vec![
        (
            "matmul",
            Box::new(|rng| {
                let (m, k) = rand_shape(rng);
                let n = rng.gen_range(1..5);
                (
                    vec![rand_tensor(vec![m, k], rng), rand_tensor(vec![k, n], rng)],
                    Box::new(|tape, p| {
                        let a = tape.param(p[0]);
                        let b = tape.param(p[1]);
                        tape.matmul(a, b)
                    }),
                )
            }),
        ),
        (
            "matmul_nt",
            Box::new(|rng| {
                let (m, n) = rand_shape(rng);
                let k = rng.gen_range(1..5);
                (
                    vec![rand_tensor(vec![m, n], rng), rand_tensor(vec![k, n], rng)],
                    Box::new(|tape, p| {
                        let a = tape.param(p[0]);
                        let b = tape.param(p[1]);
                        tape.matmul_nt(a, b)
                    }),
                )
            }),
        ),
        (
            "add",
            Box::new(|rng| {
                let (m, n) = rand_shape(rng);
                (
                    vec![rand_tensor(vec![m, n], rng), rand_tensor(vec![m, n], rng)],
                    Box::new(|tape, p| {
                        let a = tape.param(p[0]);
                        let b = tape.param(p[1]);
                        tape.add(a, b)
                    }),
                )
            }),
        ),
        (
            "add_bias",
            Box::new(|rng| {
                let (m, n) = rand_shape(rng);
                (
                    vec![rand_tensor(vec![m, n], rng), rand_tensor(vec![n], rng)],
                    Box::new(|tape, p| {
                        let a = tape.param(p[0]);
                        let b = tape.param(p[1]);
                        tape.add_bias(a, b)
                    }),
                )
            }),
        ),
        (
            "masked_add_rows",
            Box::new(|rng| {
                let (m, n) = rand_shape(rng);
                let mask: Vec<bool> = (0..m).map(|_| rng.gen_bool(0.5)).collect();
                (
                    vec![rand_tensor(vec![m, n], rng), rand_tensor(vec![m, n], rng)],
                    Box::new(move |tape, p| {
                        let a = tape.param(p[0]);
                        let b = tape.param(p[1]);
                        tape.masked_add_rows(a, b, &mask)
                    }),
                )
            }),
        ),
        (
            "mul",
            Box::new(|rng| {
                let (m, n) = rand_shape(rng);
                (
                    vec![rand_tensor(vec![m, n], rng), rand_tensor(vec![m, n], rng)],
                    Box::new(|tape, p| {
                        let a = tape.param(p[0]);
                        let b = tape.param(p[1]);
                        tape.mul(a, b)
                    }),
                )
            }),
        ),
        (
            "scale",
            Box::new(|rng| {
                let (m, n) = rand_shape(rng);
                let c = rng.gen_range(-2.0..2.0);
                (
                    vec![rand_tensor(vec![m, n], rng)],
                    Box::new(move |tape, p| {
                        let a = tape.param(p[0]);
                        tape.scale(a, c)
                    }),
                )
            }),
        ),
        (
            "concat_last",
            Box::new(|rng| {
                let m = rng.gen_range(1..5);
                let n1 = rng.gen_range(1..4);
                let n2 = rng.gen_range(1..4);
                (
                    vec![rand_tensor(vec![m, n1], rng), rand_tensor(vec![m, n2], rng)],
                    Box::new(|tape, p| {
                        let a = tape.param(p[0]);
                        let b = tape.param(p[1]);
                        tape.concat_last(&[a, b])
                    }),
                )
            }),
        ),
        (
            "slice_last",
            Box::new(|rng| {
                let m = rng.gen_range(1..5);
                let n = rng.gen_range(2..6);
                let start = rng.gen_range(0..n - 1);
                let len = rng.gen_range(1..=n - start);
                (
                    vec![rand_tensor(vec![m, n], rng)],
                    Box::new(move |tape, p| {
                        let a = tape.param(p[0]);
                        tape.slice_last(a, start, len)
                    }),
                )
            }),
        ),
        (
            "softmax",
            Box::new(|rng| {
                let (m, n) = rand_shape(rng);
                (
                    vec![rand_tensor(vec![m, n], rng)],
                    Box::new(|tape, p| {
                        let a = tape.param(p[0]);
                        tape.softmax(a)
                    }),
                )
            }),
        ),
        (
            "layernorm",
            Box::new(|rng| {
                let m = rng.gen_range(1..5);
                let n = rng.gen_range(2..6);
                // rows need non-degenerate variance: the normalizer's third
                // derivative grows like rstd^3, which swamps a fixed-step
                // finite difference on nearly-constant rows
                let mut x = rand_tensor(vec![m, n], rng);
                for row in x.data_mut().chunks_exact_mut(n) {
                    loop {
                        let mean = row.iter().sum::<f64>() / n as f64;
                        let var =
                            row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
                        if var >= 0.25 {
                            break;
                        }
                        for v in row.iter_mut() {
                            *v = rng.gen_range(-2.0..2.0);
                        }
                    }
                }
                (
                    vec![x, rand_tensor(vec![n], rng), rand_tensor(vec![n], rng)],
                    Box::new(|tape, p| {
                        let x = tape.param(p[0]);
                        let g = tape.param(p[1]);
                        let b = tape.param(p[2]);
                        tape.layernorm(x, g, b)
                    }),
                )
            }),
        ),
        (
            "relu",
            Box::new(|rng| {
                let (m, n) = rand_shape(rng);
                // keep pre-activations away from the kink
                let mut t = rand_tensor(vec![m, n], rng);
                for v in t.data_mut() {
                    if v.abs() < 1e-3 {
                        *v += 0.01;
                    }
                }
                (
                    vec![t],
                    Box::new(|tape, p| {
                        let a = tape.param(p[0]);
                        tape.relu(a)
                    }),
                )
            }),
        ),
        (
            "embedding",
            Box::new(|rng| {
                let v = rng.gen_range(3..8);
                let e = rng.gen_range(2..5);
                let t = rng.gen_range(1..6);
                let ids: Vec<u32> = (0..t).map(|_| rng.gen_range(0..v as u32)).collect();
                (
                    vec![rand_tensor(vec![v, e], rng)],
                    Box::new(move |tape, p| {
                        let table = tape.param(p[0]);
                        tape.embedding(table, &ids)
                    }),
                )
            }),
        ),
        (
            "cross_entropy",
            Box::new(|rng| {
                let t = rng.gen_range(1..5);
                let v = rng.gen_range(2..6);
                // strictly positive inputs; normalization is not required
                // for the gradient check to be well-defined
                let mut probs = Tensor::zeros(vec![t, v]);
                for x in probs.data_mut() {
                    *x = rng.gen_range(0.1..1.0);
                }
                let targets: Vec<u32> = (0..t).map(|_| rng.gen_range(0..v as u32)).collect();
                (
                    vec![probs],
                    Box::new(move |tape, p| {
                        let pr = tape.param(p[0]);
                        tape.cross_entropy(pr, &targets, u32::MAX)
                    }),
                )
            }),
        ),
        (
            "softmax_cross_entropy",
            Box::new(|rng| {
                let t = rng.gen_range(1..5);
                let v = rng.gen_range(2..6);
                let targets: Vec<u32> = (0..t).map(|_| rng.gen_range(0..v as u32)).collect();
                (
                    vec![rand_tensor(vec![t, v], rng)],
                    Box::new(move |tape, p| {
                        let logits = tape.param(p[0]);
                        let probs = tape.softmax(logits)?;
                        tape.cross_entropy(probs, &targets, u32::MAX)
                    }),
                )
            }),
        ),
    ];

    let mut worst: BTreeMap<&'static str, f64> = BTreeMap::new();
    for (name, case_gen) in &suite {
        for c in 0..cases {
            let mut rng = substream(0xC0FFEE, name, c as u64);
            let (inputs, build) = case_gen(&mut rng);
            let err = check_op_case(&build, inputs, &mut rng)?;
            let w = worst.entry(name).or_insert(0.0);
            *w = w.max(err);
        }
    }

    let worst_overall = worst.values().cloned().fold(0.0, f64::max);
    let passed = worst_overall <= OP_GRAD_TOL;
    let detail = worst
        .iter()
        .map(|(k, v)| format!("{k}={v:.1e}"))
        .collect::<Vec<_>>()
        .join(" ");
    Ok(CheckOutcome::new(
        "op-gradients",
        passed,
        format!("max rel err {worst_overall:.2e} (tol {OP_GRAD_TOL:.0e}), {cases} cases/op: {detail}"),
    ))
}

/// The micro example used for end-to-end gradient checks: vocab 16 with
/// ids 0..=4 reserved (pad, bos, eos, unk, grounded) and 12.. as tags.
pub fn micro_example() -> AbstractedExample {
    AbstractedExample {
        x: vec![5, 6, 7, 8, 6, 9],
        x_s: vec![12, 6, 7, 13, 6, 9],
        mask: vec![true, false, false, true, false, false],
        y: vec![5, 9, 2],
    }
}

pub fn micro_dims() -> ModelDims {
    ModelDims { d: 8, heads: 2, kv: 4, layers: 1, ff: 16, vocab: 16, max_len: 12 }
}

/// End-to-end gradient check of every parameter, all six strategies, on
/// the 1-layer d=8 v=16 micro model.
pub fn model_gradient_suite() -> Result<CheckOutcome> {
    let mut details = Vec::new();
    let mut worst_overall = 0.0f64;
    for strategy in ALL_STRATEGIES {
        let mut params = ModelParams::init(micro_dims(), strategy, &mut seeded(0xBEEF));
        let ex = micro_example();

        let mut grads = Grads::zeros_like(&params.store);
        {
            let (tape, parts) = forward_loss(&params, &ex, 1, 0, Some(4), Dropout::off())?;
            tape.backward(parts.loss, &mut grads)?;
        }

        let mut worst = 0.0f64;
        for i in 0..params.store.len() {
            let pid = ParamId(i);
            for j in 0..params.store.get(pid).numel() {
                let orig = params.store.get(pid).data()[j];
                params.store.get_mut(pid).data_mut()[j] = orig + FD_STEP;
                let fp = forward_loss(&params, &ex, 1, 0, Some(4), Dropout::off())?.1.total;
                params.store.get_mut(pid).data_mut()[j] = orig - FD_STEP;
                let fm = forward_loss(&params, &ex, 1, 0, Some(4), Dropout::off())?.1.total;
                params.store.get_mut(pid).data_mut()[j] = orig;
                let fd = (fp - fm) / (2.0 * FD_STEP);
                worst = worst.max(rel_err(grads.get(pid).data()[j], fd));
            }
        }
        worst_overall = worst_overall.max(worst);
        details.push(format!("{}={:.1e}", strategy.name(), worst));
    }
    let passed = worst_overall <= MODEL_GRAD_TOL;
    Ok(CheckOutcome::new(
        "model-gradients",
        passed,
        format!(
            "max rel err {worst_overall:.2e} (tol {MODEL_GRAD_TOL:.0e}) per strategy: {}",
            details.join(" ")
        ),
    ))
}

/// Added-parameter audit: exact integer deltas over the baseline.
pub fn param_audit() -> CheckOutcome {
    let dims = micro_dims();
    let count = |s: Strategy| ModelParams::init(dims, s, &mut seeded(1)).param_count() as i64;
    let base = count(Strategy::Baseline);
    let (d, e, v) = (dims.d as i64, dims.e() as i64, dims.vocab as i64);
    let checks = [
        ("emb-cat", count(Strategy::EmbCat) - base, 2 * e * e + e),
        ("enc-cat", count(Strategy::EncCat) - base, 2 * d * d),
        ("dec-loss", count(Strategy::DecLoss) - base, d * v),
        ("emb-sum", count(Strategy::EmbSum) - base, 0),
        ("enc-sum", count(Strategy::EncSum) - base, 0),
    ];
    let passed = checks.iter().all(|(_, got, want)| got == want);
    let detail = checks
        .iter()
        .map(|(name, got, want)| format!("{name}: +{got} (want +{want})"))
        .collect::<Vec<_>>()
        .join(", ");
    CheckOutcome::new("param-audit", passed, detail)
}

/// Degeneracy checks: zero-mask emb-sum is bitwise baseline; dec-loss heads
/// agree exactly at initialization.
pub fn degeneracy() -> Result<CheckOutcome> {
    let dims = micro_dims();
    let seed = 0xFACE;
    let base = ModelParams::init(dims, Strategy::Baseline, &mut seeded(seed));
    let sum = ModelParams::init(dims, Strategy::EmbSum, &mut seeded(seed));
    let mut ex = micro_example();
    ex.mask = vec![false; ex.x.len()];
    let (_, a) = forward_loss(&base, &ex, 1, 0, Some(4), Dropout::off())?;
    let (_, b) = forward_loss(&sum, &ex, 1, 0, Some(4), Dropout::off())?;
    let bitwise = a.total.to_bits() == b.total.to_bits()
        && a.lm_logits
            .data()
            .iter()
            .zip(b.lm_logits.data())
            .all(|(x, y)| x.to_bits() == y.to_bits());

    let dl = ModelParams::init(dims, Strategy::DecLoss, &mut seeded(seed));
    let (_, parts) = forward_loss(&dl, &micro_example(), 1, 0, Some(4), Dropout::off())?;
    let heads_equal = parts
        .lm_logits
        .data()
        .iter()
        .zip(parts.abs_logits.as_ref().unwrap().data())
        .all(|(x, y)| x.to_bits() == y.to_bits());

    Ok(CheckOutcome::new(
        "degeneracy",
        bitwise && heads_equal,
        format!(
            "zero-mask emb-sum bitwise baseline: {bitwise}; init dec-loss heads equal: {heads_equal}"
        ),
    ))
}

// ---- prover oracle ---------------------------------------------------

/// Naive layered closure: closure_{k+1} applies every grounded rule to
/// closure_k; an atom's depth is the first layer containing it.
pub fn naive_closure(facts: &[Atom], rules: &[Rule]) -> BTreeMap<Atom, usize> {
    let mut entities: BTreeSet<String> = BTreeSet::new();
    let note_atom = |a: &Atom, entities: &mut BTreeSet<String>| match a {
        Atom::Attr { subject, .. } => {
            entities.insert(subject.clone());
        }
        Atom::Rel { subject, object, .. } => {
            entities.insert(subject.clone());
            entities.insert(object.clone());
        }
    };
    for f in facts {
        note_atom(f, &mut entities);
    }
    for r in rules {
        for c in r.body.iter().chain(std::iter::once(&r.head)) {
            if let Subject::Entity(e) = &c.subject {
                entities.insert(e.clone());
            }
            if let crate::rules::Pred::Does { object, .. } = &c.pred {
                entities.insert(object.clone());
            }
        }
    }

    let bind = |c: &Condition, e: &str| -> Atom {
        let subject = match &c.subject {
            Subject::Var => e.to_string(),
            Subject::Entity(x) => x.clone(),
        };
        match &c.pred {
            crate::rules::Pred::Is(a) => Atom::Attr { subject, attr: a.clone() },
            crate::rules::Pred::Does { rel, object } => {
                Atom::Rel { subject, rel: rel.clone(), object: object.clone() }
            }
        }
    };

    let mut depth: BTreeMap<Atom, usize> = BTreeMap::new();
    let mut current: BTreeSet<Atom> = facts.iter().cloned().collect();
    for f in facts {
        depth.insert(f.clone(), 0);
    }
    let mut layer = 0usize;
    loop {
        layer += 1;
        let mut next = current.clone();
        for r in rules {
            for e in &entities {
                if r.body.iter().all(|c| current.contains(&bind(c, e))) {
                    next.insert(bind(&r.head, e));
                }
            }
        }
        if next == current {
            break;
        }
        for atom in next.difference(&current) {
            depth.entry(atom.clone()).or_insert(layer);
        }
        current = next;
    }
    depth
}

fn random_theory(rng: &mut Rng) -> (Vec<Atom>, Vec<Rule>) {
    let entities = ["cow", "lion", "rabbit"];
    let attrs = ["kind", "big", "round", "young", "rough"];
    let rels = ["sees", "needs"];
    let pick = |xs: &[&'static str], rng: &mut Rng| xs[rng.gen_range(0..xs.len())];

    let n_facts = rng.gen_range(1..=8);
    let mut facts = Vec::new();
    for _ in 0..n_facts {
        if rng.gen_bool(0.6) {
            facts.push(Atom::attr(pick(&entities, rng), pick(&attrs, rng)));
        } else {
            facts.push(Atom::rel(pick(&entities, rng), pick(&rels, rng), pick(&entities, rng)));
        }
    }
    facts.sort();
    facts.dedup();

    let n_rules = rng.gen_range(1..=6);
    let mut rules = Vec::new();
    for _ in 0..n_rules {
        let mut body = Vec::new();
        for _ in 0..rng.gen_range(1..=2) {
            let cond = if rng.gen_bool(0.7) {
                Condition::var_is(pick(&attrs, rng))
            } else {
                Condition::var_does(pick(&rels, rng), pick(&entities, rng))
            };
            body.push(cond);
        }
        let head = match rng.gen_range(0..4) {
            0 => Condition::var_is(pick(&attrs, rng)),
            1 => Condition::var_does(pick(&rels, rng), pick(&entities, rng)),
            2 => Condition::entity_is(pick(&entities, rng), pick(&attrs, rng)),
            _ => {
                Condition::entity_does(pick(&entities, rng), pick(&rels, rng), pick(&entities, rng))
            }
        };
        rules.push(Rule::new(body, head));
    }
    (facts, rules)
}

/// Prover vs naive fixed-point oracle on random theories: same closure
/// membership and identical depths.
pub fn prover_oracle_equivalence(n_theories: usize) -> CheckOutcome {
    let mut mismatches = 0usize;
    for i in 0..n_theories {
        let mut rng = substream(0x9E0, "prover-oracle", i as u64);
        let (facts, rules) = random_theory(&mut rng);
        let fast = forward_chain(&facts, &rules);
        let naive = naive_closure(&facts, &rules);
        let fast_map: BTreeMap<Atom, usize> = fast.atoms().map(|(a, d)| (a.clone(), d)).collect();
        if fast_map != naive {
            mismatches += 1;
        }
    }
    CheckOutcome::new(
        "prover-oracle",
        mismatches == 0,
        format!("{n_theories} random theories, {mismatches} closure/depth mismatches"),
    )
}

// ---- genealogy oracle ------------------------------------------------

/// Relation of `c` to `a` read directly off ground parent/sibling facts,
/// independent of the composition fold. Returns `None` unless exactly one
/// relation category matches.
pub fn genealogy_oracle(graph: &FamilyGraph, a: usize, c: usize) -> Option<Relation> {
    let n = graph.people.len();
    let mut parent_pairs: BTreeSet<(usize, usize)> = BTreeSet::new(); // (parent, child)
    let mut group: Vec<usize> = (0..n).collect();
    fn find(group: &mut Vec<usize>, x: usize) -> usize {
        if group[x] != x {
            let root = find(group, group[x]);
            group[x] = root;
        }
        group[x]
    }
    for e in &graph.edges {
        match e.rel {
            Relation::Father | Relation::Mother => {
                parent_pairs.insert((e.to, e.from));
            }
            Relation::Son | Relation::Daughter => {
                parent_pairs.insert((e.from, e.to));
            }
            Relation::Brother | Relation::Sister => {
                let (ra, rb) = (find(&mut group, e.from), find(&mut group, e.to));
                group[ra] = rb;
            }
            _ => return None, // non-basic edges are outside the oracle's scope
        }
    }
    // parents propagate across full-sibling groups
    let mut asserted: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for &(p, ch) in &parent_pairs {
        asserted[ch].insert(p);
    }
    let mut roots = vec![0usize; n];
    for x in 0..n {
        roots[x] = find(&mut group, x);
    }
    let mut group_parents: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for x in 0..n {
        group_parents.entry(roots[x]).or_default().extend(asserted[x].iter().copied());
    }
    let parents: Vec<BTreeSet<usize>> = (0..n).map(|x| group_parents[&roots[x]].clone()).collect();

    let is_parent = |x: usize, y: usize| parents[y].contains(&x);
    let is_sibling = |x: usize, y: usize| {
        x != y && (roots[x] == roots[y] || parents[x].intersection(&parents[y]).next().is_some())
    };
    let grandparent = |x: usize, y: usize| (0..n).any(|m| is_parent(x, m) && is_parent(m, y));
    let parent_sibling = |x: usize, y: usize| parents[y].iter().any(|&p| is_sibling(x, p));
    let sibling_child = |x: usize, y: usize| (0..n).any(|s| is_sibling(s, y) && is_parent(s, x));

    use Gender::*;
    let g = graph.people[c].gender;
    let mut matches: Vec<Relation> = Vec::new();
    if is_parent(c, a) {
        matches.push(if g == Male { Relation::Father } else { Relation::Mother });
    }
    if is_parent(a, c) {
        matches.push(if g == Male { Relation::Son } else { Relation::Daughter });
    }
    if is_sibling(c, a) {
        matches.push(if g == Male { Relation::Brother } else { Relation::Sister });
    }
    if grandparent(c, a) {
        matches.push(if g == Male { Relation::Grandfather } else { Relation::Grandmother });
    }
    if grandparent(a, c) {
        matches.push(if g == Male { Relation::Grandson } else { Relation::Granddaughter });
    }
    if parent_sibling(c, a) {
        matches.push(if g == Male { Relation::Uncle } else { Relation::Aunt });
    }
    if sibling_child(c, a) {
        matches.push(if g == Male { Relation::Nephew } else { Relation::Niece });
    }
    match matches.as_slice() {
        [one] => Some(*one),
        _ => None,
    }
}

/// Generator vs genealogy oracle on random chains over all levels, plus
/// template inversion of every rendered answer.
pub fn kinship_oracle_equivalence(n_graphs: usize) -> Result<CheckOutcome> {
    let schema = RelationSchema;
    let pool = NamePool::shipped();
    let mut relation_mismatches = 0usize;
    let mut inversion_failures = 0usize;
    for i in 0..n_graphs {
        let mut rng = substream(0x9E1, "kinship-oracle", i as u64);
        let level = 2 + (i % 9);
        let graph = sample_graph(level, &pool, &mut rng)?;
        let (e1, e2) = (0, graph.people.len() - 1);
        let derived = derive_relation(&graph, e1, e2, &schema)?;
        let oracle = genealogy_oracle(&graph, e1, e2);
        if oracle != Some(derived) {
            relation_mismatches += 1;
        }
        let answer = render_answer(&graph.people[e1].name, derived, &graph.people[e2].name);
        match parse_answer(&answer) {
            Some((p1, rel, p2))
                if p1 == graph.people[e1].name
                    && rel == derived
                    && p2 == graph.people[e2].name => {}
            _ => inversion_failures += 1,
        }
    }
    Ok(CheckOutcome::new(
        "kinship-oracle",
        relation_mismatches == 0 && inversion_failures == 0,
        format!(
            "{n_graphs} random graphs: {relation_mismatches} relation mismatches, \
             {inversion_failures} inversion failures"
        ),
    ))
}

/// Exhaustive scoring-rule check against the inverse table: for every
/// relation, the accepted set over all candidate triples is exactly the
/// gold triple plus its gendered flips.
pub fn scoring_fidelity() -> CheckOutcome {
    let schema = RelationSchema;
    let names = ["Alpha", "Beta"];
    let mut bad = 0usize;
    for &gold_rel in &ALL_RELATIONS {
        let gold = crate::data::GoldTriple {
            e1: names[0].to_string(),
            rel: gold_rel.name().to_string(),
            e2: names[1].to_string(),
        };
        let mut expected: BTreeSet<(String, &str, String)> = BTreeSet::new();
        expected.insert((names[0].into(), gold_rel.name(), names[1].into()));
        for g in [Gender::Male, Gender::Female] {
            let inv = schema.inverse(gold_rel, g);
            expected.insert((names[1].into(), inv.name(), names[0].into()));
        }
        for &p1 in &names {
            for &p2 in &names {
                for &rel in &ALL_RELATIONS {
                    let pred = (p1.to_string(), rel, p2.to_string());
                    let want = expected.contains(&(p1.to_string(), rel.name(), p2.to_string()));
                    let got = crate::harness::score_kinship(&pred, &gold, &schema);
                    if want != got {
                        bad += 1;
                    }
                }
            }
        }
    }
    CheckOutcome::new(
        "scoring-fidelity",
        bad == 0,
        format!("{bad} acceptance mismatches over the full schema"),
    )
}

/// Tokenizer round trip over generated corpora from both tasks.
pub fn vocab_round_trip() -> Result<CheckOutcome> {
    let kin = crate::kinship::build_splits(&crate::kinship::KinshipGenConfig {
        train_per_level: 20,
        test_per_level: 5,
        seed: 77,
        ..Default::default()
    })?;
    let rules = crate::rules::build_splits(&crate::rules::RulesGenConfig {
        train_per_bucket: 8,
        test_per_bucket: 3,
        seed: 77,
        ..Default::default()
    })?;
    let (rtrain, rvalid, rtest) = crate::data::rules_records(&rules, 77);

    let mut failures = 0usize;
    let mut total = 0usize;
    {
        let corpus: Vec<String> = kin
            .train
            .iter()
            .chain(kin.valid.iter())
            .chain(kin.test.iter())
            .flat_map(|e| [e.input.clone(), e.target.clone()])
            .collect();
        let vocab = Vocabulary::build(
            corpus.iter().map(String::as_str),
            TagSchema::new(vec!["PERSON".into()], 20).unwrap(),
            true,
        );
        for text in &corpus {
            total += 1;
            if vocab.decode(&vocab.encode(text)) != *text {
                failures += 1;
            }
        }
    }
    {
        let corpus: Vec<String> = rtrain
            .iter()
            .chain(rvalid.iter())
            .chain(rtest.iter())
            .flat_map(|r| [r.input.clone(), r.target.clone()])
            .collect();
        let vocab = crate::data::build_task_vocab(crate::data::Task::Rules, 10, corpus.clone());
        for text in &corpus {
            total += 1;
            if vocab.decode(&vocab.encode(text)) != *text {
                failures += 1;
            }
        }
    }
    Ok(CheckOutcome::new(
        "vocab-round-trip",
        failures == 0,
        format!("{failures} of {total} corpus strings failed to round-trip"),
    ))
}

/// Abstraction invariants on generated kinship text: determinism, mask
/// consistency, and seed-invariant grouping of positions into tag classes.
pub fn abstraction_invariants() -> Result<CheckOutcome> {
    let pool = NamePool::shipped();
    let tagger = kinship::tagger(&pool);
    let splits = crate::kinship::build_splits(&crate::kinship::KinshipGenConfig {
        train_per_level: 15,
        test_per_level: 5,
        seed: 31,
        ..Default::default()
    })?;
    let corpus: Vec<String> =
        splits.train.iter().flat_map(|e| [e.input.clone(), e.target.clone()]).collect();
    let vocab = Vocabulary::build(
        corpus.iter().map(String::as_str),
        TagSchema::new(vec!["PERSON".into()], 20).unwrap(),
        true,
    );
    let mut bad = 0usize;
    for (i, ex) in splits.train.iter().enumerate() {
        let tokens: Vec<&str> = ex.input.split_whitespace().collect();
        let spans = tagger.tag(&tokens);
        let x = vocab.encode(&ex.input);
        let run = |seed: u64| {
            crate::abstraction::abstract_sequence(
                &x,
                &spans,
                &vocab,
                &mut seeded(seed),
                crate::abstraction::Overflow::Error,
            )
        };
        let (xs1, mask1) = run(i as u64)?;
        let (xs2, _) = run(i as u64)?;
        let (xs3, _) = run(i as u64 + 1000)?;
        let deterministic = xs1 == xs2;
        let mask_consistent =
            (0..x.len()).all(|t| mask1[t] == (x[t] != xs1[t]) && mask1[t] == vocab.is_tag(xs1[t]));
        // the grouping of positions into same-tag classes is seed-invariant
        let partition = |xs: &[u32]| -> Vec<Vec<usize>> {
            let mut seen: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
            for (t, &id) in xs.iter().enumerate() {
                if vocab.is_tag(id) {
                    seen.entry(id).or_default().push(t);
                }
            }
            let mut groups: Vec<Vec<usize>> = seen.into_values().collect();
            groups.sort();
            groups
        };
        if !deterministic || !mask_consistent || partition(&xs1) != partition(&xs3) {
            bad += 1;
        }
    }
    Ok(CheckOutcome::new(
        "abstraction-invariants",
        bad == 0,
        format!("{bad} of {} examples violated an invariant", splits.train.len()),
    ))
}

/// Everything `entlab check` runs. `fast` trims the case counts.
pub fn run_all(fast: bool) -> Result<Vec<CheckOutcome>> {
    let (op_cases, theories, graphs) = if fast { (25, 100, 200) } else { (100, 500, 1000) };
    Ok(vec![
        op_gradient_suite(op_cases)?,
        model_gradient_suite()?,
        param_audit(),
        degeneracy()?,
        prover_oracle_equivalence(theories),
        kinship_oracle_equivalence(graphs)?,
        scoring_fidelity(),
        vocab_round_trip()?,
        abstraction_invariants()?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rel_err_guards_tiny_magnitudes() {
        assert!(rel_err(0.0, 1e-9) < 1e-4);
        assert!(rel_err(1.0, 1.1) > 0.05);
    }

    #[test]
    fn naive_closure_matches_hand_case() {
        let facts = vec![Atom::attr("cow", "kind")];
        let rules = vec![
            Rule::new(vec![Condition::var_is("kind")], Condition::var_is("big")),
            Rule::new(vec![Condition::var_is("big")], Condition::var_is("round")),
        ];
        let depths = naive_closure(&facts, &rules);
        assert_eq!(depths[&Atom::attr("cow", "kind")], 0);
        assert_eq!(depths[&Atom::attr("cow", "big")], 1);
        assert_eq!(depths[&Atom::attr("cow", "round")], 2);
    }

    #[test]
    fn genealogy_oracle_hand_cases() {
        use crate::kinship::{Edge, Person};
        let g = FamilyGraph {
            people: vec![
                Person { name: "Anne".into(), gender: Gender::Female },
                Person { name: "Brett".into(), gender: Gender::Male },
                Person { name: "Gary".into(), gender: Gender::Male },
            ],
            edges: vec![
                Edge { from: 0, to: 1, rel: Relation::Father },
                Edge { from: 1, to: 2, rel: Relation::Son },
            ],
        };
        assert_eq!(genealogy_oracle(&g, 0, 2), Some(Relation::Brother));
        assert_eq!(genealogy_oracle(&g, 2, 0), Some(Relation::Sister));
        assert_eq!(genealogy_oracle(&g, 0, 1), Some(Relation::Father));

        let g = FamilyGraph {
            people: vec![
                Person { name: "A".into(), gender: Gender::Female },
                Person { name: "B".into(), gender: Gender::Male },
                Person { name: "C".into(), gender: Gender::Male },
            ],
            edges: vec![
                Edge { from: 0, to: 1, rel: Relation::Father },
                Edge { from: 1, to: 2, rel: Relation::Brother },
            ],
        };
        assert_eq!(genealogy_oracle(&g, 0, 2), Some(Relation::Uncle));
    }

    #[test]
    fn quick_suite_subsets_pass() {
        assert!(param_audit().passed, "{}", param_audit().detail);
        let d = degeneracy().unwrap();
        assert!(d.passed, "{}", d.detail);
        let s = scoring_fidelity();
        assert!(s.passed, "{}", s.detail);
        let p = prover_oracle_equivalence(40);
        assert!(p.passed, "{}", p.detail);
        let k = kinship_oracle_equivalence(60).unwrap();
        assert!(k.passed, "{}", k.detail);
    }

    #[test]
    fn op_gradients_small_run() {
        let out = op_gradient_suite(5).unwrap();
        assert!(out.passed, "{}", out.detail);
    }

    #[test]
    fn model_gradients_run() {
        let out = model_gradient_suite().unwrap();
        assert!(out.passed, "{}", out.detail);
    }
}
