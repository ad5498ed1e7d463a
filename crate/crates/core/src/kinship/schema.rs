//! The closed family-relation schema: surface relations, the inverse table,
//! and the composition algebra used to derive the gold answer for a chain.
//!
//! Composition runs over [`Lineage`] states rather than surface relations
//! because "sibling" alone is not compositionally sound: a full sibling
//! shares both parents (so their parent is your parent) while a half
//! sibling shares one (so their other parent is a stranger). The generator
//! tracks the distinction internally; both render as brother/sister.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gender {
    Male,
    Female,
}

/// Surface family relations. `rel` in a triple `(e1, rel, e2)` always means
/// "e2 is the `rel` of e1".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Father,
    Mother,
    Son,
    Daughter,
    Brother,
    Sister,
    Grandfather,
    Grandmother,
    Grandson,
    Granddaughter,
    Uncle,
    Aunt,
    Nephew,
    Niece,
}

pub const ALL_RELATIONS: [Relation; 14] = [
    Relation::Father,
    Relation::Mother,
    Relation::Son,
    Relation::Daughter,
    Relation::Brother,
    Relation::Sister,
    Relation::Grandfather,
    Relation::Grandmother,
    Relation::Grandson,
    Relation::Granddaughter,
    Relation::Uncle,
    Relation::Aunt,
    Relation::Nephew,
    Relation::Niece,
];

/// The six relations that may label a story edge. Everything else only
/// appears in answers, as the composition of a chain of these.
pub const EDGE_RELATIONS: [Relation; 6] = [
    Relation::Father,
    Relation::Mother,
    Relation::Son,
    Relation::Daughter,
    Relation::Brother,
    Relation::Sister,
];

impl Relation {
    pub fn name(self) -> &'static str {
        match self {
            Relation::Father => "father",
            Relation::Mother => "mother",
            Relation::Son => "son",
            Relation::Daughter => "daughter",
            Relation::Brother => "brother",
            Relation::Sister => "sister",
            Relation::Grandfather => "grandfather",
            Relation::Grandmother => "grandmother",
            Relation::Grandson => "grandson",
            Relation::Granddaughter => "granddaughter",
            Relation::Uncle => "uncle",
            Relation::Aunt => "aunt",
            Relation::Nephew => "nephew",
            Relation::Niece => "niece",
        }
    }

    pub fn from_name(name: &str) -> Option<Relation> {
        ALL_RELATIONS.iter().copied().find(|r| r.name() == name)
    }

    /// Gender of the person who *is* this relation (a father is male).
    pub fn gender(self) -> Gender {
        match self {
            Relation::Father
            | Relation::Son
            | Relation::Brother
            | Relation::Grandfather
            | Relation::Grandson
            | Relation::Uncle
            | Relation::Nephew => Gender::Male,
            _ => Gender::Female,
        }
    }

    fn step(self) -> Option<Step> {
        match self {
            Relation::Father | Relation::Mother => Some(Step::Parent),
            Relation::Son | Relation::Daughter => Some(Step::Child),
            Relation::Brother | Relation::Sister => Some(Step::Sibling),
            _ => None,
        }
    }
}

/// Direction-free kind of a basic edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Parent,
    Child,
    Sibling,
}

/// Relation of the current chain node to the start node, refined enough to
/// compose soundly. "Full" means same sibling group (both parents shared).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lineage {
    Identity,
    Parent,
    Child,
    FullSibling,
    HalfSibling,
    Grandparent,
    Grandchild,
    /// Sibling of a parent, in the parent's own sibling group.
    ParentSiblingFull,
    /// Shares one parent with a parent of the start node.
    ParentSiblingHalf,
    /// Child of a sibling of the start node.
    SiblingChild,
}

impl Lineage {
    /// Extend the accumulated relation by one basic step taken toward a
    /// person *new to the family*. `None` marks compositions that leave the
    /// schema (in-laws, greats, cousins) or are ambiguous; the generator
    /// resamples on those.
    pub fn compose(self, step: Step) -> Option<Lineage> {
        use Lineage as L;
        use Step as S;
        match (self, step) {
            (L::Identity, S::Parent) => Some(L::Parent),
            (L::Identity, S::Child) => Some(L::Child),
            (L::Identity, S::Sibling) => Some(L::FullSibling),

            (L::Parent, S::Parent) => Some(L::Grandparent),
            (L::Parent, S::Child) => Some(L::HalfSibling),
            (L::Parent, S::Sibling) => Some(L::ParentSiblingFull),

            // A parent of my child is me or my partner: out of schema.
            (L::Child, S::Parent) => None,
            (L::Child, S::Child) => Some(L::Grandchild),
            (L::Child, S::Sibling) => Some(L::Child),

            (L::FullSibling, S::Parent) => Some(L::Parent),
            (L::FullSibling, S::Child) => Some(L::SiblingChild),
            (L::FullSibling, S::Sibling) => Some(L::FullSibling),

            // A half sibling's other parent is a stranger.
            (L::HalfSibling, S::Parent) => None,
            (L::HalfSibling, S::Child) => Some(L::SiblingChild),
            (L::HalfSibling, S::Sibling) => Some(L::HalfSibling),

            (L::Grandparent, S::Parent) => None, // great-grandparent
            (L::Grandparent, S::Child) => Some(L::ParentSiblingHalf),
            (L::Grandparent, S::Sibling) => None, // great-uncle/aunt

            (L::Grandchild, S::Parent) => None,
            (L::Grandchild, S::Child) => None, // great-grandchild
            (L::Grandchild, S::Sibling) => Some(L::Grandchild),

            (L::ParentSiblingFull, S::Parent) => Some(L::Grandparent),
            (L::ParentSiblingFull, S::Child) => None, // cousin
            (L::ParentSiblingFull, S::Sibling) => Some(L::ParentSiblingFull),

            (L::ParentSiblingHalf, S::Parent) => None,
            (L::ParentSiblingHalf, S::Child) => None, // cousin
            (L::ParentSiblingHalf, S::Sibling) => Some(L::ParentSiblingHalf),

            (L::SiblingChild, S::Parent) => None,
            (L::SiblingChild, S::Child) => None, // great-nephew/niece
            (L::SiblingChild, S::Sibling) => Some(L::SiblingChild),
        }
    }

    /// Surface relation for a person of the given gender standing in this
    /// lineage to the start node.
    pub fn surface(self, gender: Gender) -> Option<Relation> {
        use Gender::*;
        let rel = match (self, gender) {
            (Lineage::Identity, _) => return None,
            (Lineage::Parent, Male) => Relation::Father,
            (Lineage::Parent, Female) => Relation::Mother,
            (Lineage::Child, Male) => Relation::Son,
            (Lineage::Child, Female) => Relation::Daughter,
            (Lineage::FullSibling | Lineage::HalfSibling, Male) => Relation::Brother,
            (Lineage::FullSibling | Lineage::HalfSibling, Female) => Relation::Sister,
            (Lineage::Grandparent, Male) => Relation::Grandfather,
            (Lineage::Grandparent, Female) => Relation::Grandmother,
            (Lineage::Grandchild, Male) => Relation::Grandson,
            (Lineage::Grandchild, Female) => Relation::Granddaughter,
            (Lineage::ParentSiblingFull | Lineage::ParentSiblingHalf, Male) => Relation::Uncle,
            (Lineage::ParentSiblingFull | Lineage::ParentSiblingHalf, Female) => Relation::Aunt,
            (Lineage::SiblingChild, Male) => Relation::Nephew,
            (Lineage::SiblingChild, Female) => Relation::Niece,
        };
        Some(rel)
    }
}

/// Fixed schema: names, inverse table, composition. A unit struct so the
/// harness can pass "the schema" around per its contracts.
#[derive(Debug, Clone, Copy, Default)]
pub struct RelationSchema;

impl RelationSchema {
    pub fn relations(&self) -> &'static [Relation] {
        &ALL_RELATIONS
    }

    /// Relation of e1 to e2 given that e2 is `rel` of e1 and e1 has gender
    /// `e1_gender`.
    pub fn inverse(&self, rel: Relation, e1_gender: Gender) -> Relation {
        use Gender::*;
        use Relation::*;
        match (rel, e1_gender) {
            (Father | Mother, Male) => Son,
            (Father | Mother, Female) => Daughter,
            (Son | Daughter, Male) => Father,
            (Son | Daughter, Female) => Mother,
            (Brother | Sister, Male) => Brother,
            (Brother | Sister, Female) => Sister,
            (Grandfather | Grandmother, Male) => Grandson,
            (Grandfather | Grandmother, Female) => Granddaughter,
            (Grandson | Granddaughter, Male) => Grandfather,
            (Grandson | Granddaughter, Female) => Grandmother,
            (Uncle | Aunt, Male) => Nephew,
            (Uncle | Aunt, Female) => Niece,
            (Nephew | Niece, Male) => Uncle,
            (Nephew | Niece, Female) => Aunt,
        }
    }

    /// Both gender readings of the inverse; the scoring rule accepts either
    /// because the gold record does not carry e1's gender.
    pub fn inverse_set(&self, rel: Relation) -> [Relation; 2] {
        [self.inverse(rel, Gender::Male), self.inverse(rel, Gender::Female)]
    }

    /// Fold the composition table over a path of basic edge relations, each
    /// paired with the gender of the person it introduces. Returns the
    /// surface relation of the path's end node to its start node.
    pub fn compose_path(&self, steps: &[(Relation, Gender)]) -> Result<Relation> {
        let mut acc = Lineage::Identity;
        let mut last_gender = None;
        for (rel, gender) in steps {
            let step = rel.step().ok_or(Error::UndefinedComposition)?;
            acc = acc.compose(step).ok_or(Error::UndefinedComposition)?;
            last_gender = Some(*gender);
        }
        let gender = last_gender.ok_or(Error::NoPath)?;
        acc.surface(gender).ok_or(Error::UndefinedComposition)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn father_of_father_is_grandfather() {
        let s = RelationSchema;
        let rel = s
            .compose_path(&[(Relation::Father, Gender::Male), (Relation::Father, Gender::Male)])
            .unwrap();
        assert_eq!(rel, Relation::Grandfather);
    }

    #[test]
    fn brother_of_father_is_uncle() {
        let s = RelationSchema;
        let rel = s
            .compose_path(&[(Relation::Father, Gender::Male), (Relation::Brother, Gender::Male)])
            .unwrap();
        assert_eq!(rel, Relation::Uncle);
    }

    #[test]
    fn single_edge_is_identity_composition() {
        let s = RelationSchema;
        let rel = s.compose_path(&[(Relation::Aunt, Gender::Female)]);
        // aunt is not a basic edge relation
        assert!(rel.is_err());
        let rel = s.compose_path(&[(Relation::Sister, Gender::Female)]).unwrap();
        assert_eq!(rel, Relation::Sister);
    }

    #[test]
    fn out_of_schema_compositions_are_rejected() {
        let s = RelationSchema;
        // parent of my child = partner
        assert!(s
            .compose_path(&[(Relation::Son, Gender::Male), (Relation::Father, Gender::Male)])
            .is_err());
        // three ups = great-grandparent
        assert!(s
            .compose_path(&[
                (Relation::Father, Gender::Male),
                (Relation::Father, Gender::Male),
                (Relation::Father, Gender::Male),
            ])
            .is_err());
    }

    #[test]
    fn half_sibling_parent_is_not_my_parent() {
        // up then down gives a half sibling; their fresh parent is a
        // stranger, so the composition must refuse rather than say "mother".
        assert_eq!(
            Lineage::Identity
                .compose(Step::Parent)
                .and_then(|l| l.compose(Step::Child)),
            Some(Lineage::HalfSibling)
        );
        assert_eq!(Lineage::HalfSibling.compose(Step::Parent), None);
        // whereas a full sibling's parent is my parent
        assert_eq!(Lineage::FullSibling.compose(Step::Parent), Some(Lineage::Parent));
    }

    #[test]
    fn inverse_round_trips_for_compatible_genders() {
        let s = RelationSchema;
        for &r in &ALL_RELATIONS {
            for g1 in [Gender::Male, Gender::Female] {
                let inv = s.inverse(r, g1);
                // e2's gender is pinned by r itself
                let back = s.inverse(inv, r.gender());
                assert_eq!(back, r, "inverse(inverse({r:?}, {g1:?}), gender({r:?}))");
            }
        }
    }

    #[test]
    fn father_inverse_set_is_son_or_daughter() {
        let s = RelationSchema;
        let set = s.inverse_set(Relation::Father);
        assert!(set.contains(&Relation::Son) && set.contains(&Relation::Daughter));
    }

    #[test]
    fn relation_names_round_trip() {
        for &r in &ALL_RELATIONS {
            assert_eq!(Relation::from_name(r.name()), Some(r));
        }
        assert_eq!(Relation::from_name("cousin"), None);
    }
}
