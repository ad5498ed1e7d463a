//! Family graph sampling and gold-relation derivation.
//!
//! Graphs are relation chains: `level` edges over `level + 1` distinct
//! people, each edge introducing a person new to the family. The walk keeps
//! a small ground database (sibling groups and their parents) so every
//! generated story corresponds to a consistent family, and it only takes
//! steps whose running composition stays inside the relation schema — so
//! the end-to-end relation of the chain is always derivable.

use super::names::NamePool;
use super::schema::{Gender, Lineage, Relation, RelationSchema, EDGE_RELATIONS};
use crate::error::{Error, Result};
use crate::rng::Rng;
use rand::seq::SliceRandom;
use rand::Rng as _;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Person {
    pub name: String,
    pub gender: Gender,
}

/// Directed typed edge: `to` is the `rel` of `from`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub rel: Relation,
}

#[derive(Debug, Clone)]
pub struct FamilyGraph {
    pub people: Vec<Person>,
    pub edges: Vec<Edge>,
}

impl FamilyGraph {
    /// Number of relation edges; the difficulty level of the example.
    pub fn level(&self) -> usize {
        self.edges.len()
    }

    /// Structural invariants: connected, gender-consistent edges, and
    /// acyclic parenthood.
    pub fn validate(&self) -> Result<()> {
        let n = self.people.len();
        // gender consistency: the person named as "father" is male, etc.
        for e in &self.edges {
            if self.people[e.to].gender != e.rel.gender() {
                return Err(Error::Config(format!(
                    "edge {}-{} labels a {:?} person as {}",
                    e.from,
                    e.to,
                    self.people[e.to].gender,
                    e.rel.name()
                )));
            }
        }
        // connectivity over the undirected view
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for e in &self.edges {
                for (a, b) in [(e.from, e.to), (e.to, e.from)] {
                    if a == u && !seen[b] {
                        seen[b] = true;
                        stack.push(b);
                    }
                }
            }
        }
        if !seen.iter().all(|s| *s) {
            return Err(Error::Config("family graph is disconnected".into()));
        }
        // parenthood arcs must be acyclic
        let mut parents_of: Vec<Vec<usize>> = vec![Vec::new(); n];
        for e in &self.edges {
            match e.rel {
                Relation::Father | Relation::Mother => parents_of[e.from].push(e.to),
                Relation::Son | Relation::Daughter => parents_of[e.to].push(e.from),
                _ => {}
            }
        }
        let mut state = vec![0u8; n]; // 0 unvisited, 1 in-progress, 2 done
        fn dfs(u: usize, parents_of: &[Vec<usize>], state: &mut [u8]) -> bool {
            state[u] = 1;
            for &p in &parents_of[u] {
                match state[p] {
                    1 => return false,
                    0 => {
                        if !dfs(p, parents_of, state) {
                            return false;
                        }
                    }
                    _ => {}
                }
            }
            state[u] = 2;
            true
        }
        for u in 0..n {
            if state[u] == 0 && !dfs(u, &parents_of, &mut state) {
                return Err(Error::Config("parenthood cycle in family graph".into()));
            }
        }
        Ok(())
    }
}

/// Sibling-group ground store used while sampling. Explicit sibling edges
/// mean full siblings, so members of a group share both parent slots.
struct GroundDb {
    group_of: Vec<usize>,
    group_father: Vec<Option<usize>>,
    group_mother: Vec<Option<usize>>,
}

impl GroundDb {
    fn new() -> Self {
        GroundDb { group_of: Vec::new(), group_father: Vec::new(), group_mother: Vec::new() }
    }

    fn add_person_own_group(&mut self) -> usize {
        let pid = self.group_of.len();
        self.group_of.push(self.group_father.len());
        self.group_father.push(None);
        self.group_mother.push(None);
        pid
    }

    fn add_person_in_group(&mut self, group: usize) -> usize {
        let pid = self.group_of.len();
        self.group_of.push(group);
        pid
    }

    fn parent_slot(&mut self, person: usize, gender: Gender) -> &mut Option<usize> {
        let g = self.group_of[person];
        match gender {
            Gender::Male => &mut self.group_father[g],
            Gender::Female => &mut self.group_mother[g],
        }
    }

    fn parent_slot_free(&self, person: usize, gender: Gender) -> bool {
        let g = self.group_of[person];
        match gender {
            Gender::Male => self.group_father[g].is_none(),
            Gender::Female => self.group_mother[g].is_none(),
        }
    }
}

/// Sample a chain-structured family graph with exactly `level` edges over
/// `level + 1` people. The endpoints (indices `0` and `level`) realize the
/// graph diameter and are the query pair.
pub fn sample_graph(level: usize, pool: &NamePool, rng: &mut Rng) -> Result<FamilyGraph> {
    if level < 2 {
        return Err(Error::LevelTooLow(level));
    }
    if pool.count(Gender::Male) < level + 1 || pool.count(Gender::Female) < level + 1 {
        return Err(Error::NamePoolExhausted {
            need: level + 1,
            have: pool.count(Gender::Male).min(pool.count(Gender::Female)),
        });
    }
    let mut males = pool.draw(Gender::Male, rng);
    let mut females = pool.draw(Gender::Female, rng);
    let mut take_name = |g: Gender, rng: &mut Rng| -> Result<String> {
        let _ = rng; // names come pre-shuffled per gender
        match g {
            Gender::Male => males.take().map(str::to_string),
            Gender::Female => females.take().map(str::to_string),
        }
    };

    let mut db = GroundDb::new();
    let mut people = Vec::with_capacity(level + 1);
    let mut edges = Vec::with_capacity(level);

    let start_gender = if rng.gen_bool(0.5) { Gender::Male } else { Gender::Female };
    people.push(Person { name: take_name(start_gender, rng)?, gender: start_gender });
    db.add_person_own_group();

    let mut acc = Lineage::Identity;
    let mut current = 0usize;
    for _ in 0..level {
        let candidates: Vec<Relation> = EDGE_RELATIONS
            .iter()
            .copied()
            .filter(|rel| {
                let step = match rel {
                    Relation::Father | Relation::Mother => super::schema::Step::Parent,
                    Relation::Son | Relation::Daughter => super::schema::Step::Child,
                    _ => super::schema::Step::Sibling,
                };
                if acc.compose(step).is_none() {
                    return false;
                }
                match step {
                    super::schema::Step::Parent => db.parent_slot_free(current, rel.gender()),
                    _ => true,
                }
            })
            .collect();
        let rel = *candidates
            .choose(rng)
            .expect("every lineage state admits at least one step");
        let gender = rel.gender();
        let name = take_name(gender, rng)?;

        let fresh = match rel {
            Relation::Father | Relation::Mother => {
                let pid = db.add_person_own_group();
                *db.parent_slot(current, gender) = Some(pid);
                pid
            }
            Relation::Son | Relation::Daughter => {
                let pid = db.add_person_own_group();
                *db.parent_slot(pid, people[current].gender) = Some(current);
                pid
            }
            _ => db.add_person_in_group(db.group_of[current]),
        };
        debug_assert_eq!(fresh, people.len());
        people.push(Person { name, gender });
        edges.push(Edge { from: current, to: fresh, rel });

        acc = acc
            .compose(match rel {
                Relation::Father | Relation::Mother => super::schema::Step::Parent,
                Relation::Son | Relation::Daughter => super::schema::Step::Child,
                _ => super::schema::Step::Sibling,
            })
            .expect("filtered above");
        current = fresh;
    }

    Ok(FamilyGraph { people, edges })
}

/// Derive the relation of `e2` to `e1` by folding the composition table
/// along the (unique) path between them. `UndefinedComposition` is the
/// resample signal for chains the schema cannot label.
pub fn derive_relation(
    graph: &FamilyGraph,
    e1: usize,
    e2: usize,
    schema: &RelationSchema,
) -> Result<Relation> {
    let path = find_path(graph, e1, e2).ok_or(Error::NoPath)?;
    let mut steps = Vec::with_capacity(path.len());
    for (u, v) in path {
        let edge = graph
            .edges
            .iter()
            .find(|e| (e.from == u && e.to == v) || (e.from == v && e.to == u))
            .expect("path follows edges");
        let rel = if edge.from == u {
            edge.rel
        } else {
            // Traversing against the edge: relation of v to u, which for
            // basic relations is the gendered inverse.
            schema.inverse(edge.rel, graph.people[v].gender)
        };
        steps.push((rel, graph.people[v].gender));
    }
    schema.compose_path(&steps)
}

/// Node sequence of the unique simple path, as hops (u, v).
fn find_path(graph: &FamilyGraph, from: usize, to: usize) -> Option<Vec<(usize, usize)>> {
    let n = graph.people.len();
    let mut prev: Vec<Option<usize>> = vec![None; n];
    let mut seen = vec![false; n];
    let mut queue = std::collections::VecDeque::new();
    seen[from] = true;
    queue.push_back(from);
    while let Some(u) = queue.pop_front() {
        if u == to {
            break;
        }
        for e in &graph.edges {
            for (a, b) in [(e.from, e.to), (e.to, e.from)] {
                if a == u && !seen[b] {
                    seen[b] = true;
                    prev[b] = Some(u);
                    queue.push_back(b);
                }
            }
        }
    }
    if !seen[to] {
        return None;
    }
    let mut hops = Vec::new();
    let mut v = to;
    while let Some(u) = prev[v] {
        hops.push((u, v));
        v = u;
    }
    hops.reverse();
    if hops.is_empty() && from != to {
        return None;
    }
    Some(hops)
}

/// Undirected eccentricity check: the endpoints of a sampled chain must be
/// a diameter pair.
pub fn is_diameter_pair(graph: &FamilyGraph, a: usize, b: usize) -> bool {
    let n = graph.people.len();
    let dist = |src: usize| -> Vec<usize> {
        let mut d = vec![usize::MAX; n];
        d[src] = 0;
        let mut q = std::collections::VecDeque::from([src]);
        while let Some(u) = q.pop_front() {
            for e in &graph.edges {
                for (x, y) in [(e.from, e.to), (e.to, e.from)] {
                    if x == u && d[y] == usize::MAX {
                        d[y] = d[u] + 1;
                        q.push_back(y);
                    }
                }
            }
        }
        d
    };
    let mut diameter = 0;
    for s in 0..n {
        for &dv in dist(s).iter().filter(|&&dv| dv != usize::MAX) {
            diameter = diameter.max(dv);
        }
    }
    dist(a)[b] == diameter
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn pool() -> NamePool {
        NamePool::shipped()
    }

    #[test]
    fn level_two_has_three_people_two_edges() {
        let g = sample_graph(2, &pool(), &mut seeded(1)).unwrap();
        assert_eq!(g.people.len(), 3);
        assert_eq!(g.edges.len(), 2);
        assert_eq!(g.level(), 2);
        g.validate().unwrap();
    }

    #[test]
    fn level_ten_has_eleven_people() {
        let g = sample_graph(10, &pool(), &mut seeded(2)).unwrap();
        assert_eq!(g.people.len(), 11);
        g.validate().unwrap();
    }

    #[test]
    fn level_one_rejected() {
        assert!(matches!(sample_graph(1, &pool(), &mut seeded(3)), Err(Error::LevelTooLow(1))));
    }

    #[test]
    fn sampled_chains_always_derive_a_gold_relation() {
        let schema = RelationSchema;
        for seed in 0..200 {
            let level = 2 + (seed as usize % 9);
            let g = sample_graph(level, &pool(), &mut seeded(seed)).unwrap();
            let rel = derive_relation(&g, 0, g.people.len() - 1, &schema).unwrap();
            assert_eq!(rel.gender(), g.people[g.people.len() - 1].gender);
        }
    }

    #[test]
    fn endpoints_realize_the_diameter() {
        for seed in 0..20 {
            let g = sample_graph(2 + (seed as usize % 7), &pool(), &mut seeded(seed)).unwrap();
            assert!(is_diameter_pair(&g, 0, g.people.len() - 1));
        }
    }

    #[test]
    fn derive_on_hand_built_graph() {
        // Brett is Anne's father; Gary is a son of Brett => Gary is Anne's brother.
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
        let rel = derive_relation(&g, 0, 2, &RelationSchema).unwrap();
        assert_eq!(rel, Relation::Brother);
        // reverse query direction: Anne is Gary's sister
        let rel = derive_relation(&g, 2, 0, &RelationSchema).unwrap();
        assert_eq!(rel, Relation::Sister);
    }

    #[test]
    fn undefined_composition_is_a_resample_signal() {
        // son then father = partner: outside the schema.
        let g = FamilyGraph {
            people: vec![
                Person { name: "Mary".into(), gender: Gender::Female },
                Person { name: "Tom".into(), gender: Gender::Male },
                Person { name: "Hank".into(), gender: Gender::Male },
            ],
            edges: vec![
                Edge { from: 0, to: 1, rel: Relation::Son },
                Edge { from: 1, to: 2, rel: Relation::Father },
            ],
        };
        assert!(matches!(
            derive_relation(&g, 0, 2, &RelationSchema),
            Err(Error::UndefinedComposition)
        ));
    }

    #[test]
    fn no_path_errors() {
        let g = FamilyGraph {
            people: vec![
                Person { name: "A".into(), gender: Gender::Male },
                Person { name: "B".into(), gender: Gender::Male },
            ],
            edges: vec![],
        };
        assert!(matches!(derive_relation(&g, 0, 1, &RelationSchema), Err(Error::NoPath)));
    }
}
