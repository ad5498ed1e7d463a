//! Forward chaining to a least fixed point, with per-atom proof depth.
//!
//! `depth(fact) = 0`; a derived atom's depth is the minimum over its
//! derivations of `1 + max(premise depths)`. Depths are computed by
//! relaxation: re-apply every grounded rule until no depth improves, which
//! terminates because depths only decrease over a finite ground-atom space.

use super::{Atom, Label, Query, Rule, Subject};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone)]
pub struct Closure {
    depth: BTreeMap<Atom, usize>,
    /// Direct premises of the recorded shallowest derivation.
    support: BTreeMap<Atom, Vec<Atom>>,
}

impl Closure {
    pub fn contains(&self, atom: &Atom) -> bool {
        self.depth.contains_key(atom)
    }

    pub fn depth(&self, atom: &Atom) -> Option<usize> {
        self.depth.get(atom).copied()
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&Atom, usize)> {
        self.depth.iter().map(|(a, d)| (a, *d))
    }

    pub fn len(&self) -> usize {
        self.depth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depth.is_empty()
    }

    /// Depth-0 facts appearing as leaves of the recorded shallowest
    /// derivation of `atom`.
    pub fn leaf_facts(&self, atom: &Atom) -> BTreeSet<Atom> {
        let mut leaves = BTreeSet::new();
        let mut stack = vec![atom.clone()];
        while let Some(a) = stack.pop() {
            match self.support.get(&a) {
                Some(premises) if !premises.is_empty() => {
                    stack.extend(premises.iter().cloned())
                }
                _ => {
                    leaves.insert(a);
                }
            }
        }
        leaves
    }
}

/// All entities a variable can range over: every constant in the theory.
fn domain(facts: &[Atom], rules: &[Rule]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut add_atom = |a: &Atom| match a {
        Atom::Attr { subject, .. } => {
            out.insert(subject.clone());
        }
        Atom::Rel { subject, object, .. } => {
            out.insert(subject.clone());
            out.insert(object.clone());
        }
    };
    for f in facts {
        add_atom(f);
    }
    for r in rules {
        for c in r.body.iter().chain(std::iter::once(&r.head)) {
            if let Subject::Entity(e) = &c.subject {
                out.insert(e.clone());
            }
            if let super::Pred::Does { object, .. } = &c.pred {
                out.insert(object.clone());
            }
        }
    }
    out
}

pub fn forward_chain(facts: &[Atom], rules: &[Rule]) -> Closure {
    let entities = domain(facts, rules);
    let mut depth: BTreeMap<Atom, usize> = BTreeMap::new();
    let mut support: BTreeMap<Atom, Vec<Atom>> = BTreeMap::new();
    for f in facts {
        depth.insert(f.clone(), 0);
    }

    // Grounded rule instantiations, computed once.
    let dummy = String::new();
    let mut grounded: Vec<(Vec<Atom>, Atom)> = Vec::new();
    for r in rules {
        if r.has_var() {
            for e in &entities {
                let body: Vec<Atom> = r.body.iter().map(|c| c.bind(e)).collect();
                grounded.push((body, r.head.bind(e)));
            }
        } else {
            let body: Vec<Atom> = r.body.iter().map(|c| c.bind(&dummy)).collect();
            grounded.push((body, r.head.bind(&dummy)));
        }
    }

    loop {
        let mut changed = false;
        for (body, head) in &grounded {
            let premise_depths: Option<Vec<usize>> =
                body.iter().map(|p| depth.get(p).copied()).collect();
            let Some(ds) = premise_depths else { continue };
            let candidate = 1 + ds.into_iter().max().unwrap_or(0);
            let better = match depth.get(head) {
                None => true,
                Some(&d) => candidate < d,
            };
            if better {
                depth.insert(head.clone(), candidate);
                support.insert(head.clone(), body.clone());
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    // Facts win over any derivation of the same atom.
    for f in facts {
        support.remove(f);
    }

    Closure { depth, support }
}

/// Open-world labeling: a provable positive query is True at its depth; a
/// negated query whose positive form is provable is False at that depth;
/// everything else is Unknown with no depth.
pub fn label_query(closure: &Closure, query: &Query) -> (Label, Option<usize>) {
    match closure.depth(&query.atom) {
        Some(d) if query.negated => (Label::False, Some(d)),
        Some(d) => (Label::True, Some(d)),
        None => (Label::Unknown, None),
    }
}

#[cfg(test)]
mod tests {
    use super::super::Condition;
    use super::*;

    #[test]
    fn verbatim_fact_is_depth_zero_true() {
        let facts = vec![Atom::rel("tiger", "visits", "rabbit")];
        let closure = forward_chain(&facts, &[]);
        let (label, depth) = label_query(
            &closure,
            &Query { atom: Atom::rel("tiger", "visits", "rabbit"), negated: false },
        );
        assert_eq!((label, depth), (Label::True, Some(0)));
    }

    #[test]
    fn single_rule_application_is_depth_one() {
        // kind + visits rabbit => young
        let facts = vec![
            Atom::attr("tiger", "kind"),
            Atom::rel("tiger", "visits", "rabbit"),
        ];
        let rules = vec![Rule::new(
            vec![Condition::var_is("kind"), Condition::var_does("visits", "rabbit")],
            Condition::var_is("young"),
        )];
        let closure = forward_chain(&facts, &rules);
        assert_eq!(closure.depth(&Atom::attr("tiger", "young")), Some(1));
    }

    #[test]
    fn negated_query_of_two_step_derivation_is_false_at_depth_two() {
        // furry => red => (red & furry) => blue, so "not blue" is False @ 2.
        let facts = vec![Atom::attr("Harry", "furry")];
        let rules = vec![
            Rule::new(vec![Condition::var_is("furry")], Condition::var_is("red")),
            Rule::new(
                vec![Condition::var_is("red"), Condition::var_is("furry")],
                Condition::var_is("blue"),
            ),
        ];
        let closure = forward_chain(&facts, &rules);
        let (label, depth) = label_query(
            &closure,
            &Query { atom: Atom::attr("Harry", "blue"), negated: true },
        );
        assert_eq!((label, depth), (Label::False, Some(2)));
    }

    #[test]
    fn unmentioned_entity_is_unknown() {
        let facts = vec![Atom::attr("Anne", "nice")];
        let closure = forward_chain(&facts, &[]);
        let (label, depth) = label_query(
            &closure,
            &Query { atom: Atom::attr("Zeke", "nice"), negated: false },
        );
        assert_eq!((label, depth), (Label::Unknown, None));
    }

    #[test]
    fn grounded_head_rules_fire() {
        // "If something visits the rabbit then the rabbit needs the lion."
        let facts = vec![Atom::rel("tiger", "visits", "rabbit")];
        let rules = vec![Rule::new(
            vec![Condition::var_does("visits", "rabbit")],
            Condition::entity_does("rabbit", "needs", "lion"),
        )];
        let closure = forward_chain(&facts, &rules);
        assert_eq!(closure.depth(&Atom::rel("rabbit", "needs", "lion")), Some(1));
    }

    #[test]
    fn shallowest_derivation_wins() {
        // Two routes to "x is young": direct rule from a fact (depth 1) and
        // a two-step chain. Depth must be 1.
        let facts = vec![Atom::attr("cat", "kind")];
        let rules = vec![
            Rule::new(vec![Condition::var_is("kind")], Condition::var_is("rough")),
            Rule::new(vec![Condition::var_is("rough")], Condition::var_is("young")),
            Rule::new(vec![Condition::var_is("kind")], Condition::var_is("young")),
        ];
        let closure = forward_chain(&facts, &rules);
        assert_eq!(closure.depth(&Atom::attr("cat", "young")), Some(1));
    }

    #[test]
    fn leaf_facts_of_min_derivation() {
        let facts = vec![Atom::attr("cow", "big"), Atom::attr("cow", "kind")];
        let rules = vec![Rule::new(
            vec![Condition::var_is("big"), Condition::var_is("kind")],
            Condition::var_is("rough"),
        )];
        let closure = forward_chain(&facts, &rules);
        let leaves = closure.leaf_facts(&Atom::attr("cow", "rough"));
        assert_eq!(leaves.len(), 2);
        assert!(leaves.contains(&Atom::attr("cow", "big")));
        assert!(leaves.contains(&Atom::attr("cow", "kind")));
    }

    #[test]
    fn monotone_under_added_facts() {
        let facts = vec![Atom::attr("dog", "kind")];
        let rules = vec![Rule::new(vec![Condition::var_is("kind")], Condition::var_is("nice"))];
        let before = forward_chain(&facts, &rules);
        let mut more = facts.clone();
        more.push(Atom::attr("cat", "kind"));
        let after = forward_chain(&more, &rules);
        for (atom, _) in before.atoms() {
            assert!(after.contains(atom), "adding a fact removed {atom:?}");
        }
    }
}
