use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::{Ontology, OntologyError};
use crate::ConceptId;

/// Irreflexive transitive closure of the IS-A graph plus per-concept depth.
///
/// Depth is the shortest number of IS-A steps from a parentless concept.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClosureTable {
    ancestors: BTreeMap<ConceptId, Vec<ConceptId>>,
    depth: BTreeMap<ConceptId, u32>,
}

impl ClosureTable {
    /// Proper ancestors, sorted ascending.
    pub fn ancestors(&self, concept: ConceptId) -> &[ConceptId] {
        self.ancestors.get(&concept).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn ancestors_or_self(&self, concept: ConceptId) -> impl Iterator<Item = ConceptId> + '_ {
        std::iter::once(concept).chain(self.ancestors(concept).iter().copied())
    }

    pub fn is_ancestor(&self, descendant: ConceptId, ancestor: ConceptId) -> bool {
        self.ancestors(descendant).binary_search(&ancestor).is_ok()
    }

    pub fn contains(&self, concept: ConceptId) -> bool {
        self.depth.contains_key(&concept)
    }

    pub fn depth(&self, concept: ConceptId) -> Option<u32> {
        self.depth.get(&concept).copied()
    }

    pub fn concepts(&self) -> impl Iterator<Item = ConceptId> + '_ {
        self.depth.keys().copied()
    }

    /// All (descendant, ancestor) pairs in ascending order.
    pub fn pairs(&self) -> impl Iterator<Item = (ConceptId, ConceptId)> + '_ {
        self.ancestors
            .iter()
            .flat_map(|(d, anc)| anc.iter().map(move |a| (*d, *a)))
    }

    pub fn pair_count(&self) -> usize {
        self.ancestors.values().map(Vec::len).sum()
    }
}

/// Closes the IS-A graph. Fails with a concept that lies on a cycle.
pub fn transitive_closure(ontology: &Ontology) -> Result<ClosureTable, OntologyError> {
    let mut parents: BTreeMap<ConceptId, BTreeSet<ConceptId>> = BTreeMap::new();
    let mut children: BTreeMap<ConceptId, Vec<ConceptId>> = BTreeMap::new();
    for c in ontology.concepts() {
        parents.entry(c.id).or_default();
    }
    for e in ontology.edges() {
        if parents.entry(e.child).or_default().insert(e.parent) {
            children.entry(e.parent).or_default().push(e.child);
        }
        parents.entry(e.parent).or_default();
    }

    // Kahn's algorithm, parents before children.
    let mut pending: BTreeMap<ConceptId, usize> =
        parents.iter().map(|(c, p)| (*c, p.len())).collect();
    let mut queue: VecDeque<ConceptId> = pending
        .iter()
        .filter(|(_, n)| **n == 0)
        .map(|(c, _)| *c)
        .collect();
    let mut ancestors: BTreeMap<ConceptId, Vec<ConceptId>> = BTreeMap::new();
    let mut depth: BTreeMap<ConceptId, u32> = BTreeMap::new();

    while let Some(node) = queue.pop_front() {
        let direct = &parents[&node];
        let mut anc: Vec<ConceptId> = Vec::new();
        let mut d = 0u32;
        for (i, p) in direct.iter().enumerate() {
            anc.push(*p);
            anc.extend_from_slice(&ancestors[p]);
            let pd = depth[p] + 1;
            d = if i == 0 { pd } else { d.min(pd) };
        }
        anc.sort_unstable();
        anc.dedup();
        ancestors.insert(node, anc);
        depth.insert(node, d);
        if let Some(kids) = children.get(&node) {
            for k in kids {
                let n = pending.get_mut(k).expect("child registered");
                *n -= 1;
                if *n == 0 {
                    queue.push_back(*k);
                }
            }
        }
    }

    if depth.len() != parents.len() {
        return Err(OntologyError::Cycle(find_cycle_member(&parents, &depth)));
    }

    Ok(ClosureTable { ancestors, depth })
}

// Every unprocessed node keeps at least one unprocessed parent, so walking
// parents within the unprocessed set must revisit a node, which lies on a cycle.
fn find_cycle_member(
    parents: &BTreeMap<ConceptId, BTreeSet<ConceptId>>,
    done: &BTreeMap<ConceptId, u32>,
) -> ConceptId {
    let mut node = *parents
        .keys()
        .find(|c| !done.contains_key(c))
        .expect("an unprocessed node exists");
    let mut seen = BTreeSet::new();
    while seen.insert(node) {
        node = *parents[&node]
            .iter()
            .find(|p| !done.contains_key(p))
            .expect("unprocessed node has an unprocessed parent");
    }
    node
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(n: u64) -> ConceptId {
        ConceptId(n)
    }

    #[test]
    fn chain() {
        let o = Ontology::from_edges([1, 2, 3], [(1, 2), (2, 3)]).unwrap();
        let t = transitive_closure(&o).unwrap();
        let pairs: Vec<_> = t.pairs().collect();
        assert_eq!(pairs, vec![(id(1), id(2)), (id(1), id(3)), (id(2), id(3))]);
        assert_eq!(t.depth(id(3)), Some(0));
        assert_eq!(t.depth(id(1)), Some(2));
    }

    #[test]
    fn diamond_has_five_pairs() {
        // a IS-A b, a IS-A c, b IS-A d, c IS-A d
        let o = Ontology::from_edges([1, 2, 3, 4], [(1, 2), (1, 3), (2, 4), (3, 4)]).unwrap();
        let t = transitive_closure(&o).unwrap();
        assert_eq!(t.pair_count(), 5);
        assert!(t.is_ancestor(id(1), id(4)));
        assert!(!t.is_ancestor(id(2), id(3)));
    }

    #[test]
    fn self_edge_is_a_cycle() {
        let o = Ontology::from_edges([1], [(1, 1)]).unwrap();
        match transitive_closure(&o) {
            Err(OntologyError::Cycle(c)) => assert_eq!(c, id(1)),
            other => panic!("expected cycle, got {other:?}"),
        }
    }

    #[test]
    fn cycle_member_is_on_the_cycle() {
        // 1 hangs below the 2 -> 3 -> 4 -> 2 loop
        let o = Ontology::from_edges([1, 2, 3, 4], [(1, 2), (2, 3), (3, 4), (4, 2)]).unwrap();
        match transitive_closure(&o) {
            Err(OntologyError::Cycle(c)) => assert!([2, 3, 4].contains(&c.get())),
            other => panic!("expected cycle, got {other:?}"),
        }
    }

    #[test]
    fn depth_is_shortest_path() {
        // 1 -> 2 -> 3 -> 4 and a shortcut 1 -> 4
        let o = Ontology::from_edges([1, 2, 3, 4], [(1, 2), (2, 3), (3, 4), (1, 4)]).unwrap();
        let t = transitive_closure(&o).unwrap();
        assert_eq!(t.depth(id(1)), Some(1));
        assert_eq!(t.depth(id(2)), Some(2));
    }
}
