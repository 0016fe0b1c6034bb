//! Set-semantics evaluation of conjunctive queries.
//!
//! Query nodes are processed in topological order. Anchors start as
//! singletons; every other node takes, over its incoming edges, the
//! intersection of the relation-neighborhood unions of the source sets.

use super::query::{QueryDag, QueryNodeKind};
use crate::error::Result;
use crate::kgraph::{NodeId, TypedGraph};

/// Sorted, duplicate-free set of nodes satisfying a query.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Denotation {
    members: Vec<NodeId>,
}

impl Denotation {
    pub fn from_sorted(members: Vec<NodeId>) -> Self {
        debug_assert!(members.windows(2).all(|w| w[0] < w[1]));
        Denotation { members }
    }

    pub fn members(&self) -> &[NodeId] {
        &self.members
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.members.binary_search(&v).is_ok()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn is_subset(&self, other: &Denotation) -> bool {
        self.members.iter().all(|v| other.contains(*v))
    }

    /// Members of `self` that are not in `other`.
    pub fn difference(&self, other: &Denotation) -> Vec<NodeId> {
        self.members
            .iter()
            .copied()
            .filter(|v| !other.contains(*v))
            .collect()
    }
}

#[derive(Clone, Copy)]
enum Combine {
    Intersect,
    Union,
}

/// The exact answer set of `q` on `g`.
pub fn denotation(q: &QueryDag, g: &TypedGraph) -> Result<Denotation> {
    evaluate(q, g, Combine::Intersect)
}

/// The answer set when every conjunction is relaxed to a disjunction.
pub fn denotation_disjunctive(q: &QueryDag, g: &TypedGraph) -> Result<Denotation> {
    evaluate(q, g, Combine::Union)
}

fn evaluate(q: &QueryDag, g: &TypedGraph, combine: Combine) -> Result<Denotation> {
    q.ensure_valid(g)?;
    let order = q.topological_order().expect("validated");
    let mut sets: Vec<Vec<NodeId>> = vec![Vec::new(); q.nodes.len()];
    let mut mark = vec![0u32; g.node_count()];
    for node in order {
        if let QueryNodeKind::Anchor(v) = q.nodes[node].kind {
            sets[node] = vec![v];
            continue;
        }
        let mut result: Option<Vec<NodeId>> = None;
        for e in q.incoming(node) {
            let projected = project(g, &sets[e.src], e.relation, &mut mark);
            result = Some(match (result, combine) {
                (None, _) => projected,
                (Some(acc), Combine::Intersect) => intersect_sorted(&acc, &projected),
                (Some(acc), Combine::Union) => union_sorted(&acc, &projected),
            });
        }
        sets[node] = result.unwrap_or_default();
    }
    let t = q.target().expect("validated");
    Ok(Denotation::from_sorted(std::mem::take(&mut sets[t])))
}

/// Union of `rel`-neighborhoods of `set`, sorted.
pub(crate) fn project(
    g: &TypedGraph,
    set: &[NodeId],
    rel: crate::kgraph::RelationId,
    mark: &mut [u32],
) -> Vec<NodeId> {
    let mut out = Vec::new();
    for &u in set {
        for &v in g.neighbors_unchecked(u, rel) {
            if mark[v.index()] == 0 {
                mark[v.index()] = 1;
                out.push(v);
            }
        }
    }
    for v in &out {
        mark[v.index()] = 0;
    }
    out.sort_unstable();
    out
}

fn intersect_sorted(a: &[NodeId], b: &[NodeId]) -> Vec<NodeId> {
    let (mut i, mut j, mut out) = (0, 0, Vec::new());
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

fn union_sorted(a: &[NodeId], b: &[NodeId]) -> Vec<NodeId> {
    let mut out: Vec<NodeId> = a.iter().chain(b).copied().collect();
    out.sort_unstable();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kgraph::{Edge, NodeTypeId, SchemaBuilder};
    use crate::querydag::Structure;

    /// v1 -r-> {a, b}; v2 -r-> {b, c}; v3 -r-> {b, d}; a -s-> e.
    fn graph() -> TypedGraph {
        let mut bld = SchemaBuilder::new();
        let ids: Vec<_> = ["v1", "v2", "v3", "a", "b", "c", "d", "e"]
            .iter()
            .map(|n| bld.node(n, "T").unwrap())
            .collect();
        let t = bld.node_type("T");
        let r = bld.relation("r", t, t).unwrap();
        let s = bld.relation("s", t, t).unwrap();
        let e = |h: usize, rel, tl: usize| Edge::new(ids[h], rel, ids[tl]);
        TypedGraph::from_base_edges(
            bld.build().unwrap(),
            &[e(0, r, 3), e(0, r, 4), e(1, r, 4), e(1, r, 5), e(2, r, 4), e(2, r, 6), e(3, s, 7)],
        )
        .unwrap()
    }

    fn n(g: &TypedGraph, name: &str) -> NodeId {
        g.node_by_name(name).unwrap()
    }

    fn set(g: &TypedGraph, names: &[&str]) -> Vec<NodeId> {
        let mut v: Vec<_> = names.iter().map(|x| n(g, x)).collect();
        v.sort();
        v
    }

    const T: NodeTypeId = NodeTypeId(0);

    #[test]
    fn chain1_is_neighbor_set() {
        let g = graph();
        let r = g.relation_by_name("r").unwrap();
        let q = QueryDag::from_structure(Structure::Chain1, &[n(&g, "v1")], &[r], &[T, T]);
        assert_eq!(denotation(&q, &g).unwrap().members(), set(&g, &["a", "b"]));
        assert_eq!(denotation_disjunctive(&q, &g).unwrap(), denotation(&q, &g).unwrap());
    }

    #[test]
    fn inter2_and_inter3() {
        let g = graph();
        let r = g.relation_by_name("r").unwrap();
        let q = QueryDag::from_structure(Structure::Inter2, &[n(&g, "v1"), n(&g, "v2")], &[r, r], &[T, T, T]);
        assert_eq!(denotation(&q, &g).unwrap().members(), set(&g, &["b"]));
        assert_eq!(
            denotation_disjunctive(&q, &g).unwrap().members(),
            set(&g, &["a", "b", "c"])
        );
        let q3 = QueryDag::from_structure(
            Structure::Inter3,
            &[n(&g, "v1"), n(&g, "v2"), n(&g, "v3")],
            &[r, r, r],
            &[T, T, T, T],
        );
        assert_eq!(denotation(&q3, &g).unwrap().members(), set(&g, &["b"]));
        assert_eq!(
            denotation_disjunctive(&q3, &g).unwrap().members(),
            set(&g, &["a", "b", "c", "d"])
        );
    }

    #[test]
    fn chains_compose_projections() {
        let g = graph();
        let (r, s) = (g.relation_by_name("r").unwrap(), g.relation_by_name("s").unwrap());
        let q = QueryDag::from_structure(Structure::Chain2, &[n(&g, "v1")], &[r, s], &[T, T, T]);
        assert_eq!(denotation(&q, &g).unwrap().members(), set(&g, &["e"]));
        let q = QueryDag::from_structure(Structure::Chain2, &[n(&g, "v2")], &[r, s], &[T, T, T]);
        assert!(denotation(&q, &g).unwrap().is_empty());
    }

    #[test]
    fn invalid_query_is_rejected() {
        let g = graph();
        let r = g.relation_by_name("r").unwrap();
        let mut q = QueryDag::from_structure(Structure::Chain1, &[n(&g, "v1")], &[r], &[T, T]);
        q.edges.clear();
        assert!(denotation(&q, &g).is_err());
    }
}
