//! Query dataset generation by rejection sampling.
//!
//! A query of a given structure is drawn target-first: pick a root node,
//! then walk the structure's template breadth-first from the target,
//! sampling for each node as many distinct incoming graph edges as the
//! template requires. Nodes reached with nothing left to expand become
//! anchors. The root is, by construction, a member of the query's answer set.

mod dataset;

pub use dataset::{
    build_dataset, example_from_json, example_to_json, read_dataset, read_manifest, read_part,
    write_dataset, Dataset, DatasetManifest, DatasetSpec, NegativeSource, SplitCounts, SplitPart,
    MANIFEST_FILE,
};

use rand::seq::{IteratorRandom, SliceRandom};
use rand::Rng;

use crate::error::{GqeError, Result};
use crate::kgraph::{NodeId, RelationId, TypedGraph};
use crate::querydag::{denotation, denotation_disjunctive, Denotation, QueryDag, Structure, TemplateRole};

/// Attempts per requested example before giving up.
pub const RETRY_CAP: usize = 1000;

/// A query with one known answer and its negative pools.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryExample {
    pub query: QueryDag,
    pub positive: NodeId,
    pub standard_negatives: Vec<NodeId>,
    pub hard_negatives: Vec<NodeId>,
}

/// Every `(relation, source)` pair with an edge `relation(source, v)`.
fn incoming_edges(g: &TypedGraph, v: NodeId) -> Vec<(RelationId, NodeId)> {
    let mut out = Vec::new();
    for r in g.relations_from(g.type_of(v)) {
        for &u in g.neighbors_unchecked(v, r.id) {
            out.push((r.inverse, u));
        }
    }
    out
}

/// One target-first draw; `None` when the walk hits a dead end.
fn try_sample<R: Rng>(g: &TypedGraph, s: Structure, rng: &mut R) -> Option<(QueryDag, NodeId)> {
    let root = NodeId(rng.gen_range(0..g.node_count()) as u32);
    let roles = s.roles();
    let template = s.template_edges();
    let mut bound: Vec<Option<NodeId>> = vec![None; roles.len()];
    let mut relations: Vec<Option<RelationId>> = vec![None; template.len()];
    bound[s.target_index()] = Some(root);
    for node in s.expansion_order() {
        if roles[node] == TemplateRole::Anchor {
            continue;
        }
        let here = bound[node]?;
        let slots: Vec<usize> = (0..template.len()).filter(|&i| template[i].1 == node).collect();
        let candidates = incoming_edges(g, here);
        if candidates.len() < slots.len() {
            return None;
        }
        let picked = candidates.choose_multiple(rng, slots.len());
        for (slot, &(rel, src)) in slots.iter().zip(picked) {
            relations[*slot] = Some(rel);
            bound[template[*slot].0] = Some(src);
        }
    }
    let nodes: Vec<NodeId> = bound.into_iter().collect::<Option<_>>()?;
    let anchors: Vec<NodeId> = roles
        .iter()
        .zip(&nodes)
        .filter(|(r, _)| **r == TemplateRole::Anchor)
        .map(|(_, &v)| v)
        .collect();
    let types: Vec<_> = nodes.iter().map(|&v| g.type_of(v)).collect();
    let relations: Vec<RelationId> = relations.into_iter().collect::<Option<_>>()?;
    Some((QueryDag::from_structure(s, &anchors, &relations, &types), root))
}

/// Samples a query of shape `s` together with the node it was grown from.
pub fn sample_query<R: Rng>(g: &TypedGraph, s: Structure, rng: &mut R) -> Result<(QueryDag, NodeId)> {
    if g.node_count() == 0 {
        return Err(GqeError::Argument("cannot sample from an empty graph".into()));
    }
    for _ in 0..RETRY_CAP {
        if let Some(found) = try_sample(g, s, rng) {
            return Ok(found);
        }
    }
    Err(GqeError::SamplingInfeasible {
        structure: s.name().to_string(),
        attempts: RETRY_CAP,
    })
}

/// Up to `k` distinct nodes of the target's type that are not in `members`.
pub fn standard_negatives<R: Rng>(
    q: &QueryDag,
    g: &TypedGraph,
    members: &Denotation,
    k: usize,
    rng: &mut R,
) -> Result<Vec<NodeId>> {
    let ty = q
        .target_type()
        .ok_or_else(|| GqeError::InvalidQuery(vec!["query has no target".into()]))?;
    let pool = g
        .nodes_of_type(ty)?
        .iter()
        .copied()
        .filter(|v| !members.contains(*v));
    let mut picked = pool.choose_multiple(rng, k);
    picked.sort_unstable();
    Ok(picked)
}

/// Nodes satisfying the disjunctive relaxation of `q` but not `q` itself,
/// uniformly subsampled down to `cap`.
pub fn hard_negatives<R: Rng>(
    q: &QueryDag,
    g: &TypedGraph,
    cap: usize,
    rng: &mut R,
) -> Result<Vec<NodeId>> {
    if !q.has_intersection() {
        return Err(GqeError::NotApplicable(
            "hard negatives need a query with an intersection".into(),
        ));
    }
    let conj = denotation(q, g)?;
    let disj = denotation_disjunctive(q, g)?;
    let mut pool = disj.difference(&conj);
    if pool.len() > cap {
        pool.shuffle(rng);
        pool.truncate(cap);
        pool.sort_unstable();
    }
    Ok(pool)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kgraph::synthetic::{generate, SyntheticSpec};
    use crate::kgraph::{ingest_sources, Edge, SchemaBuilder};
    use crate::querydag::structure_catalog;
    use crate::rng::{stream, Stream};

    #[test]
    fn single_edge_graph_chain1() {
        let g = ingest_sources(("e", "a\tr\tb\n"), ("t", "a\tT\nb\tT\n"), None, &Default::default())
            .unwrap();
        let mut rng = stream(1, Stream::OracleCheck);
        let (a, b) = (g.node_by_name("a").unwrap(), g.node_by_name("b").unwrap());
        let r = g.relation_by_name("r").unwrap();
        let rinv = g.relation_by_name("r_inv").unwrap();
        for _ in 0..20 {
            let (q, root) = sample_query(&g, Structure::Chain1, &mut rng).unwrap();
            let anchor = q.anchors().next().unwrap().1;
            let rel = q.edges[0].relation;
            assert!(
                (root == b && anchor == a && rel == r) || (root == a && anchor == b && rel == rinv)
            );
        }
        assert!(matches!(
            sample_query(&g, Structure::Inter2, &mut rng),
            Err(GqeError::SamplingInfeasible { .. })
        ));
    }

    #[test]
    fn sampled_queries_are_valid_and_contain_root() {
        let g = generate(&SyntheticSpec::parse("random:100,4,3,0.05").unwrap(), 2).unwrap();
        let mut rng = stream(2, Stream::OracleCheck);
        for &s in structure_catalog() {
            for _ in 0..150 {
                let (q, root) = sample_query(&g, s, &mut rng).unwrap();
                assert_eq!(q.validate(&g), vec![], "{s}");
                assert_eq!(q.structure, Some(s));
                assert!(denotation(&q, &g).unwrap().contains(root));
            }
        }
    }

    #[test]
    fn negatives_exclude_members() {
        // d1 -treats-> {a, b}; d2 -treats-> {b, c}
        let g = ingest_sources(
            ("e", "d1\ttreats\ta\nd1\ttreats\tb\nd2\ttreats\tb\nd2\ttreats\tc\n"),
            ("t", "d1\tdrug\nd2\tdrug\na\tdis\nb\tdis\nc\tdis\n"),
            None,
            &Default::default(),
        )
        .unwrap();
        let n = |x: &str| g.node_by_name(x).unwrap();
        let treats = g.relation_by_name("treats").unwrap();
        let (drug, dis) = (g.type_by_name("drug").unwrap(), g.type_by_name("dis").unwrap());
        let q = QueryDag::from_structure(
            Structure::Inter2,
            &[n("d1"), n("d2")],
            &[treats, treats],
            &[drug, drug, dis],
        );
        let members = denotation(&q, &g).unwrap();
        assert_eq!(members.members(), &[n("b")]);
        let mut rng = stream(0, Stream::OracleCheck);
        let negs = standard_negatives(&q, &g, &members, 10, &mut rng).unwrap();
        assert_eq!(negs, vec![n("a"), n("c")]);
        let one = standard_negatives(&q, &g, &members, 1, &mut rng).unwrap();
        assert!(one == vec![n("a")] || one == vec![n("c")]);
        assert_eq!(hard_negatives(&q, &g, 10, &mut rng).unwrap(), vec![n("a"), n("c")]);
        let chain = QueryDag::from_structure(Structure::Chain1, &[n("d1")], &[treats], &[drug, dis]);
        assert!(matches!(
            hard_negatives(&chain, &g, 10, &mut rng),
            Err(GqeError::NotApplicable(_))
        ));
        // identical branches: empty hard pool
        let same = QueryDag::from_structure(
            Structure::Inter2,
            &[n("d1"), n("d1")],
            &[treats, treats],
            &[drug, drug, dis],
        );
        assert!(hard_negatives(&same, &g, 10, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn treat_one_but_not_the_other() {
        // "diseases treated by d1 and d2": x is treated by both, y only by d1.
        let mut b = SchemaBuilder::new();
        let d1 = b.node("d1", "drug").unwrap();
        let d2 = b.node("d2", "drug").unwrap();
        let x = b.node("x", "disease").unwrap();
        let y = b.node("y", "disease").unwrap();
        let t = b.relation("treats", b.type_of(d1), b.type_of(x)).unwrap();
        let (drug, dis) = (b.type_of(d1), b.type_of(x));
        let g = TypedGraph::from_base_edges(
            b.build().unwrap(),
            &[Edge::new(d1, t, x), Edge::new(d2, t, x), Edge::new(d1, t, y)],
        )
        .unwrap();
        let q = QueryDag::from_structure(Structure::Inter2, &[d1, d2], &[t, t], &[drug, drug, dis]);
        let mut rng = stream(0, Stream::OracleCheck);
        assert_eq!(denotation(&q, &g).unwrap().members(), &[x]);
        assert_eq!(hard_negatives(&q, &g, 5, &mut rng).unwrap(), vec![y]);
    }
}
