//! Templated rendering of family graphs and exact inversion of answers.
//!
//! All text is emitted pre-tokenized (space before `'s`, `?`, `.`), one
//! sentence per edge in shuffled order. Answers come from a closed template
//! set with a deterministic relation-to-template mapping, so the scoring
//! side can invert them exactly.

use super::graph::{Edge, FamilyGraph};
use super::schema::Relation;
use crate::rng::Rng;
use rand::seq::SliceRandom;
use rand::Rng as _;

/// A kinship example ready for serialization.
#[derive(Debug, Clone)]
pub struct KinshipExample {
    pub graph: FamilyGraph,
    pub e1: usize,
    pub e2: usize,
    /// Relation of e2 to e1.
    pub gold: Relation,
    pub input: String,
    pub target: String,
}

fn edge_sentence(graph: &FamilyGraph, e: &Edge, variant: usize) -> String {
    let a = &graph.people[e.from].name;
    let b = &graph.people[e.to].name;
    let rel = e.rel.name();
    match variant % 4 {
        0 => format!("{b} is {a} 's {rel} ."),
        1 => format!("{b} is a {rel} to {a} ."),
        2 => format!("{a} has a {rel} called {b} ."),
        _ => format!("{b} is the {rel} of {a} ."),
    }
}

fn question(e1: &str, e2: &str, variant: usize) -> String {
    match variant % 2 {
        0 => format!("question : How is {e1} related to {e2} ? context :"),
        _ => format!("question : What is the family connection between {e1} and {e2} ? context :"),
    }
}

/// Relations phrased as "X has a <rel> named Y"; the rest use
/// "Y is the <rel> of X". The mapping is fixed so inversion is exact.
fn uses_has_named(rel: Relation) -> bool {
    matches!(
        rel,
        Relation::Brother | Relation::Sister | Relation::Son | Relation::Daughter
    )
}

pub fn render_answer(e1: &str, rel: Relation, e2: &str) -> String {
    if uses_has_named(rel) {
        format!("answer : {e1} has a {} named {e2} .", rel.name())
    } else {
        format!("answer : {e2} is the {} of {e1} .", rel.name())
    }
}

/// Render the input/target pair for a graph whose query is (e1, e2).
pub fn render(graph: &FamilyGraph, e1: usize, e2: usize, gold: Relation, rng: &mut Rng) -> (String, String) {
    let mut order: Vec<usize> = (0..graph.edges.len()).collect();
    order.shuffle(rng);
    let mut input = question(
        &graph.people[e1].name,
        &graph.people[e2].name,
        rng.gen_range(0..2usize),
    );
    for idx in order {
        let v = rng.gen_range(0..4usize);
        input.push(' ');
        input.push_str(&edge_sentence(graph, &graph.edges[idx], v));
    }
    let target = render_answer(&graph.people[e1].name, gold, &graph.people[e2].name);
    (input, target)
}

/// Invert an answer template. Input is the raw generated string; only the
/// first sentence (up to the first `.`) is considered. Returns
/// `(e1, rel, e2)` with `rel` meaning "e2 is the rel of e1", or `None` when
/// the text matches no template (scored as wrong, never an error).
pub fn parse_answer(text: &str) -> Option<(String, Relation, String)> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let end = tokens.iter().position(|t| *t == ".")?;
    let first = &tokens[..end];
    match first {
        ["answer", ":", e1, "has", "a", rel, "named", e2] => {
            let rel = Relation::from_name(rel)?;
            uses_has_named(rel).then(|| (e1.to_string(), rel, e2.to_string()))
        }
        ["answer", ":", e2, "is", "the", rel, "of", e1] => {
            let rel = Relation::from_name(rel)?;
            (!uses_has_named(rel)).then(|| (e1.to_string(), rel, e2.to_string()))
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinship::graph::{Edge, Person};
    use crate::kinship::schema::Gender;
    use crate::rng::seeded;

    fn demo_graph() -> FamilyGraph {
        FamilyGraph {
            people: vec![
                Person { name: "Anne".into(), gender: Gender::Female },
                Person { name: "Brett".into(), gender: Gender::Male },
                Person { name: "Gary".into(), gender: Gender::Male },
            ],
            edges: vec![
                Edge { from: 0, to: 1, rel: Relation::Father },
                Edge { from: 1, to: 2, rel: Relation::Son },
            ],
        }
    }

    #[test]
    fn renders_question_context_and_answer() {
        let g = demo_graph();
        let (input, target) = render(&g, 0, 2, Relation::Brother, &mut seeded(4));
        assert!(input.starts_with("question :"));
        assert!(input.contains("context :"));
        // one sentence per edge
        assert_eq!(input.matches(" .").count(), 2);
        assert_eq!(target, "answer : Anne has a brother named Gary .");
    }

    #[test]
    fn edge_order_changes_text_but_not_gold() {
        let g = demo_graph();
        let (i1, t1) = render(&g, 0, 2, Relation::Brother, &mut seeded(1));
        let mut found_different = false;
        for seed in 2..30 {
            let (i2, t2) = render(&g, 0, 2, Relation::Brother, &mut seeded(seed));
            assert_eq!(t1, t2);
            if i1 != i2 {
                found_different = true;
            }
        }
        assert!(found_different, "edge order / template draws should vary");
    }

    #[test]
    fn level_four_renders_four_story_sentences() {
        let pool = crate::kinship::NamePool::shipped();
        let g = crate::kinship::sample_graph(4, &pool, &mut seeded(2)).unwrap();
        let gold = crate::kinship::derive_relation(&g, 0, 4, &crate::kinship::RelationSchema)
            .unwrap();
        let (input, _) = render(&g, 0, 4, gold, &mut seeded(3));
        let context = input.split_once("context :").unwrap().1;
        assert_eq!(context.matches(" .").count(), 4);
    }

    #[test]
    fn answer_inversion_both_templates() {
        assert_eq!(
            parse_answer("answer : Anne has a brother named Gary ."),
            Some(("Anne".into(), Relation::Brother, "Gary".into()))
        );
        assert_eq!(
            parse_answer("answer : Timothy is the nephew of Patricia ."),
            Some(("Patricia".into(), Relation::Nephew, "Timothy".into()))
        );
    }

    #[test]
    fn gibberish_fails_extraction() {
        assert_eq!(parse_answer("frog frog frog"), None);
        assert_eq!(parse_answer("answer : Anne has a zebra named Gary ."), None);
        assert_eq!(parse_answer("answer : Anne is the brother of"), None);
    }

    #[test]
    fn only_first_sentence_is_parsed() {
        let got = parse_answer("answer : Rose is the aunt of Leon . extra junk .");
        assert_eq!(got, Some(("Leon".into(), Relation::Aunt, "Rose".into())));
    }

    #[test]
    fn render_parse_round_trip_all_relations() {
        for &rel in crate::kinship::schema::ALL_RELATIONS.iter() {
            let s = render_answer("Alpha", rel, "Beta");
            let (e1, r, e2) = parse_answer(&s).expect(&s);
            assert_eq!((e1.as_str(), r, e2.as_str()), ("Alpha", rel, "Beta"));
        }
    }
}
