//! CLUTRR-style kinship task: family-graph sampling, relation composition,
//! templated rendering, and level-controlled splits with triple holdout.

pub mod graph;
pub mod names;
pub mod render;
pub mod schema;
pub mod splits;

pub use graph::{derive_relation, is_diameter_pair, sample_graph, Edge, FamilyGraph, Person};
pub use names::NamePool;
pub use render::{parse_answer, render, render_answer, KinshipExample};
pub use schema::{Gender, Lineage, Relation, RelationSchema, Step, ALL_RELATIONS, EDGE_RELATIONS};
pub use splits::{build_splits, level_category, KinshipGenConfig, KinshipSplits, KinshipStats};

use crate::abstraction::LexiconTagger;

/// Gold tagger for kinship text: every name-pool token is a PERSON.
pub fn tagger(pool: &NamePool) -> LexiconTagger {
    LexiconTagger::new(
        pool.all_names()
            .map(|n| (n.to_string(), "PERSON".to_string())),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tagger_tags_exactly_the_names() {
        let pool = NamePool::shipped();
        let t = tagger(&pool);
        let tokens: Vec<&str> = "Brett is Anne 's father .".split_whitespace().collect();
        let spans = t.tag(&tokens);
        let got: Vec<&str> = spans.iter().map(|s| s.surface.as_str()).collect();
        assert_eq!(got, vec!["Brett", "Anne"]);
        assert!(spans.iter().all(|s| s.type_name == "PERSON"));
    }
}
