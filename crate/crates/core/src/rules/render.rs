//! Closed grammar: lexicon, sentence templates, and per-token gold
//! abstraction tags for the rules task.
//!
//! Every generated sentence comes from the template set below, with tokens
//! space-separated, so input text round-trips through whitespace
//! tokenization and the gold tags align 1:1 with tokens.

use super::{Atom, Condition, Pred, Rule, Subject, Theory, World};
use crate::abstraction::LexiconTagger;
use crate::rng::Rng;
use rand::seq::SliceRandom;

pub const ANIMALS: [&str; 10] =
    ["cow", "lion", "rabbit", "tiger", "cat", "dog", "mouse", "squirrel", "bear", "fox"];
pub const ATTRIBUTES: [&str; 10] =
    ["round", "kind", "big", "rough", "young", "nice", "blue", "furry", "green", "red"];
pub const RELATIONS: [&str; 5] = ["needs", "sees", "visits", "likes", "chases"];
pub const PERSONS: [&str; 8] = ["Anne", "Bob", "Charlie", "Dave", "Erin", "Fiona", "Gary", "Harry"];

/// Word lists backing generation and gold tagging.
#[derive(Debug, Clone, Copy, Default)]
pub struct Lexicon;

impl Lexicon {
    pub fn type_of(&self, word: &str) -> Option<&'static str> {
        if PERSONS.contains(&word) {
            Some("PERSON")
        } else if ANIMALS.contains(&word) {
            Some("ANIMAL")
        } else if ATTRIBUTES.contains(&word) {
            Some("ATTRIBUTE")
        } else if RELATIONS.contains(&word) {
            Some("RELATION")
        } else {
            None
        }
    }
}

/// Gold tagger: exact lookup over the generating lexicon.
pub fn tagger() -> LexiconTagger {
    let lex = Lexicon;
    let words = PERSONS
        .iter()
        .chain(ANIMALS.iter())
        .chain(ATTRIBUTES.iter())
        .chain(RELATIONS.iter());
    LexiconTagger::new(words.map(|w| (w.to_string(), lex.type_of(w).unwrap().to_string())))
}

fn entity_phrase(world: World, entity: &str) -> String {
    match world {
        World::Animal => format!("the {entity}"),
        World::Person => entity.to_string(),
    }
}

fn fact_sentence(world: World, atom: &Atom) -> String {
    match atom {
        Atom::Attr { subject, attr } => {
            let e = entity_phrase(world, subject);
            let mut s = format!("{e} is {attr} .");
            capitalize(&mut s);
            s
        }
        Atom::Rel { subject, rel, object } => {
            let s1 = entity_phrase(world, subject);
            let s2 = entity_phrase(world, object);
            let mut s = format!("{s1} {rel} {s2} .");
            capitalize(&mut s);
            s
        }
    }
}

fn capitalize(s: &mut String) {
    if s.starts_with("the ") {
        s.replace_range(0..3, "The");
    }
}

fn var_condition(cond: &Condition) -> String {
    match &cond.pred {
        Pred::Is(a) => format!("is {a}"),
        Pred::Does { rel, object } => format!("{rel} the {object}"),
    }
}

fn head_phrase(world: World, head: &Condition, pronoun: &str) -> String {
    match (&head.subject, &head.pred) {
        (Subject::Var, Pred::Is(a)) => match world {
            World::Animal => format!("{pronoun} is {a}"),
            World::Person => format!("{pronoun} are {a}"),
        },
        (Subject::Var, Pred::Does { rel, object }) => format!("{pronoun} {rel} the {object}"),
        (Subject::Entity(e), Pred::Is(a)) => format!("{} is {a}", entity_phrase(world, e)),
        (Subject::Entity(e), Pred::Does { rel, object }) => {
            format!("{} {rel} {}", entity_phrase(world, e), entity_phrase(world, object))
        }
    }
}

fn rule_sentence(world: World, rule: &Rule) -> String {
    let var_conds: Vec<&Condition> =
        rule.body.iter().filter(|c| matches!(c.subject, Subject::Var)).collect();
    match world {
        World::Animal => {
            let head = head_phrase(world, &rule.head, "it");
            match var_conds.len() {
                0 => {
                    // fully grounded rule
                    let c = &rule.body[0];
                    let Subject::Entity(e) = &c.subject else { unreachable!() };
                    let subject = entity_phrase(world, e);
                    let cond = var_condition(c);
                    let mut s = format!("If {subject} {cond} then {head} .");
                    capitalize_if(&mut s);
                    s
                }
                1 => format!("If something {} then {head} .", var_condition(var_conds[0])),
                _ => format!(
                    "If something {} and it {} then {head} .",
                    var_condition(var_conds[0]),
                    var_condition(var_conds[1])
                ),
            }
        }
        World::Person => {
            match var_conds.len() {
                0 => {
                    let c = &rule.body[0];
                    let Subject::Entity(e) = &c.subject else { unreachable!() };
                    let head = head_phrase(world, &rule.head, "they");
                    format!("If {e} {} then {head} .", var_condition(c))
                }
                1 => {
                    // "All nice people are rough ."
                    let Pred::Is(a) = &var_conds[0].pred else {
                        let head = head_phrase(world, &rule.head, "they");
                        return format!("If someone {} then {head} .", var_condition(var_conds[0]));
                    };
                    let Pred::Is(b) = &rule.head.pred else { unreachable!("person heads are attributes") };
                    format!("All {a} people are {b} .")
                }
                _ => {
                    let Pred::Is(a) = &var_conds[0].pred else { unreachable!() };
                    let Pred::Is(b) = &var_conds[1].pred else { unreachable!() };
                    let head = head_phrase(world, &rule.head, "they");
                    format!("If someone is {a} and {b} then {head} .")
                }
            }
        }
    }
}

fn capitalize_if(_s: &mut str) {
    // "If the cow ..." already reads fine; nothing to do for now.
}

fn query_sentence(world: World, theory: &Theory) -> String {
    match &theory.query.atom {
        Atom::Attr { subject, attr } => {
            let e = entity_phrase(world, subject);
            let mut s = if theory.query.negated {
                format!("{e} is not {attr} .")
            } else {
                format!("{e} is {attr} .")
            };
            capitalize(&mut s);
            s
        }
        Atom::Rel { subject, rel, object } => {
            let s1 = entity_phrase(world, subject);
            let s2 = entity_phrase(world, object);
            debug_assert!(!theory.query.negated, "negated queries are attribute-only");
            let mut s = format!("{s1} {rel} {s2} .");
            capitalize(&mut s);
            s
        }
    }
}

/// Render a theory to (input, target, gold_tags). Facts are shuffled, then
/// rules, mirroring the fact-block/rule-block layout of the task; gold tags
/// are aligned 1:1 with whitespace tokens of the input.
pub fn render_theory(theory: &Theory, rng: &mut Rng) -> (String, String, Vec<String>) {
    let mut fact_idx: Vec<usize> = (0..theory.facts.len()).collect();
    fact_idx.shuffle(rng);
    let mut rule_idx: Vec<usize> = (0..theory.rules.len()).collect();
    rule_idx.shuffle(rng);

    let mut input = String::from("context :");
    for i in fact_idx {
        input.push(' ');
        input.push_str(&fact_sentence(theory.world, &theory.facts[i]));
    }
    for i in rule_idx {
        input.push(' ');
        input.push_str(&rule_sentence(theory.world, &theory.rules[i]));
    }
    input.push_str(" question : ");
    input.push_str(&query_sentence(theory.world, theory));

    let target = format!("answer : {}", theory.label.name());

    let lex = Lexicon;
    let gold_tags = input
        .split_whitespace()
        .map(|tok| lex.type_of(tok).unwrap_or("O").to_string())
        .collect();

    (input, target, gold_tags)
}

/// Parse the label out of a generated answer; `None` when the first
/// sentence is not a well-formed answer (scored wrong, never an error).
pub fn parse_label(text: &str) -> Option<super::Label> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    match tokens.as_slice() {
        ["answer", ":", label, ..] => super::Label::from_name(label),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::super::{Label, Query};
    use super::*;
    use crate::rng::seeded;

    fn animal_theory() -> Theory {
        Theory {
            facts: vec![Atom::rel("cow", "needs", "lion"), Atom::attr("cow", "round")],
            rules: vec![Rule::new(
                vec![Condition::var_is("kind"), Condition::var_does("visits", "rabbit")],
                Condition::var_is("young"),
            )],
            query: Query { atom: Atom::rel("cow", "needs", "lion"), negated: false },
            label: Label::True,
            depth: Some(0),
            bucket: 0,
            world: World::Animal,
        }
    }

    #[test]
    fn animal_sentences_and_tags() {
        let (input, target, tags) = render_theory(&animal_theory(), &mut seeded(3));
        assert!(input.contains("The cow needs the lion ."));
        assert!(input.contains("The cow is round ."));
        assert!(input.contains("If something is kind and it visits the rabbit then it is young ."));
        assert!(input.ends_with("question : The cow needs the lion ."));
        assert_eq!(target, "answer : True");

        let tokens: Vec<&str> = input.split_whitespace().collect();
        assert_eq!(tokens.len(), tags.len());
        for (tok, tag) in tokens.iter().zip(&tags) {
            match *tok {
                "cow" | "lion" | "rabbit" => assert_eq!(tag, "ANIMAL"),
                "needs" | "visits" => assert_eq!(tag, "RELATION"),
                "round" | "kind" | "young" => assert_eq!(tag, "ATTRIBUTE"),
                _ => assert_eq!(tag, "O", "token {tok}"),
            }
        }
    }

    #[test]
    fn person_world_templates() {
        let theory = Theory {
            facts: vec![Atom::attr("Anne", "nice")],
            rules: vec![
                Rule::new(vec![Condition::var_is("nice")], Condition::var_is("rough")),
                Rule::new(
                    vec![Condition::var_is("rough"), Condition::var_is("kind")],
                    Condition::var_is("furry"),
                ),
                Rule::new(
                    vec![Condition::entity_is("Charlie", "furry")],
                    Condition::entity_is("Charlie", "nice"),
                ),
            ],
            query: Query { atom: Atom::attr("Harry", "blue"), negated: true },
            label: Label::Unknown,
            depth: None,
            bucket: 2,
            world: World::Person,
        };
        let (input, target, tags) = render_theory(&theory, &mut seeded(5));
        assert!(input.contains("Anne is nice ."));
        assert!(input.contains("All nice people are rough ."));
        assert!(input.contains("If someone is rough and kind then they are furry ."));
        assert!(input.contains("If Charlie is furry then Charlie is nice ."));
        assert!(input.ends_with("question : Harry is not blue ."));
        assert_eq!(target, "answer : Unknown");
        let tokens: Vec<&str> = input.split_whitespace().collect();
        let anne = tokens.iter().position(|t| *t == "Anne").unwrap();
        assert_eq!(tags[anne], "PERSON");
    }

    #[test]
    fn grounded_head_rule_sentence() {
        let theory = Theory {
            rules: vec![Rule::new(
                vec![Condition::var_does("visits", "rabbit")],
                Condition::entity_does("rabbit", "needs", "lion"),
            )],
            ..animal_theory()
        };
        let (input, _, _) = render_theory(&theory, &mut seeded(1));
        assert!(
            input.contains("If something visits the rabbit then the rabbit needs the lion ."),
            "{input}"
        );
    }

    #[test]
    fn parse_label_variants() {
        assert_eq!(parse_label("answer : True"), Some(Label::True));
        assert_eq!(parse_label("answer : Unknown"), Some(Label::Unknown));
        assert_eq!(parse_label("answer : maybe"), None);
        assert_eq!(parse_label("nonsense"), None);
    }

    #[test]
    fn all_lexicon_words_are_typed_and_disjoint() {
        let lex = Lexicon;
        let mut seen = std::collections::BTreeSet::new();
        for w in PERSONS.iter().chain(ANIMALS.iter()).chain(ATTRIBUTES.iter()).chain(RELATIONS.iter()) {
            assert!(lex.type_of(w).is_some());
            assert!(seen.insert(*w), "word {w} appears in two lists");
        }
        assert_eq!(lex.type_of("If"), None);
        assert_eq!(lex.type_of("the"), None);
    }
}
