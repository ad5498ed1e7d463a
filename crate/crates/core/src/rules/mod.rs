//! ProofWriter-style abduction task: theories of facts and 1-hop rules, a
//! forward-chaining prover assigning proof depths, and open-world
//! True/False/Unknown query labels.

pub mod gen;
pub mod prover;
pub mod render;

pub use gen::{build_splits, RulesGenConfig, RulesSplits, RulesStats};
pub use prover::{forward_chain, label_query, Closure};
pub use render::{parse_label, render_theory, tagger, Lexicon};

use serde::{Deserialize, Serialize};

/// Ground positive atom: an attribute of an entity or a relation between two.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    Attr { subject: String, attr: String },
    Rel { subject: String, rel: String, object: String },
}

impl Atom {
    pub fn attr(subject: &str, attr: &str) -> Atom {
        Atom::Attr { subject: subject.into(), attr: attr.into() }
    }

    pub fn rel(subject: &str, rel: &str, object: &str) -> Atom {
        Atom::Rel { subject: subject.into(), rel: rel.into(), object: object.into() }
    }
}

/// Subject of a rule condition: the universally quantified variable
/// ("something" / "someone") or a named entity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Subject {
    Var,
    Entity(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pred {
    Is(String),
    Does { rel: String, object: String },
}

/// One atom schema inside a rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Condition {
    pub subject: Subject,
    pub pred: Pred,
}

impl Condition {
    pub fn var_is(attr: &str) -> Condition {
        Condition { subject: Subject::Var, pred: Pred::Is(attr.into()) }
    }

    pub fn var_does(rel: &str, object: &str) -> Condition {
        Condition { subject: Subject::Var, pred: Pred::Does { rel: rel.into(), object: object.into() } }
    }

    pub fn entity_is(subject: &str, attr: &str) -> Condition {
        Condition { subject: Subject::Entity(subject.into()), pred: Pred::Is(attr.into()) }
    }

    pub fn entity_does(subject: &str, rel: &str, object: &str) -> Condition {
        Condition {
            subject: Subject::Entity(subject.into()),
            pred: Pred::Does { rel: rel.into(), object: object.into() },
        }
    }

    fn bind(&self, entity: &str) -> Atom {
        let subject = match &self.subject {
            Subject::Var => entity.to_string(),
            Subject::Entity(e) => e.clone(),
        };
        match &self.pred {
            Pred::Is(a) => Atom::Attr { subject, attr: a.clone() },
            Pred::Does { rel, object } => {
                Atom::Rel { subject, rel: rel.clone(), object: object.clone() }
            }
        }
    }
}

/// A 1-hop inference rule: one or two positive body conditions and a head.
/// A head variable must appear in the body; applying a rule is one step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub body: Vec<Condition>,
    pub head: Condition,
}

impl Rule {
    pub fn new(body: Vec<Condition>, head: Condition) -> Rule {
        debug_assert!(!body.is_empty() && body.len() <= 2);
        debug_assert!(
            !matches!(head.subject, Subject::Var)
                || body.iter().any(|c| matches!(c.subject, Subject::Var)),
            "head variable must be bound by the body"
        );
        Rule { body, head }
    }

    fn has_var(&self) -> bool {
        self.body.iter().any(|c| matches!(c.subject, Subject::Var))
            || matches!(self.head.subject, Subject::Var)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    True,
    False,
    Unknown,
}

impl Label {
    pub fn name(self) -> &'static str {
        match self {
            Label::True => "True",
            Label::False => "False",
            Label::Unknown => "Unknown",
        }
    }

    pub fn from_name(s: &str) -> Option<Label> {
        match s {
            "True" => Some(Label::True),
            "False" => Some(Label::False),
            "Unknown" => Some(Label::Unknown),
            _ => None,
        }
    }
}

/// The unknown statement posed to the model; possibly negated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub atom: Atom,
    pub negated: bool,
}

/// World flavor controlling the rendering grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum World {
    Animal,
    Person,
}

/// A complete example: theory, query, and prover-assigned ground truth.
#[derive(Debug, Clone)]
pub struct Theory {
    pub facts: Vec<Atom>,
    pub rules: Vec<Rule>,
    pub query: Query,
    pub label: Label,
    /// Proof depth for True/False queries; `None` for Unknown.
    pub depth: Option<usize>,
    /// The D-slice this example belongs to (equals `depth` when proved).
    pub bucket: usize,
    pub world: World,
}
