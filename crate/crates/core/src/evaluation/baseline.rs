use serde::{Deserialize, Serialize};

use super::report::Scorer;
use crate::error::{GqeError, Result};
use crate::kgraph::{NodeId, TypedGraph};
use crate::model::{ModelParams, QueryEmbedding};
use crate::querydag::{QueryDag, QueryNodeKind};
use crate::sampler::QueryExample;

/// Candidate scales for the baseline's sigmoid.
pub const SCALE_GRID: [f64; 7] = [0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0];

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Score of the single edge `τ(anchor, candidate)`.
fn edge_score(
    params: &ModelParams,
    g: &TypedGraph,
    anchor: NodeId,
    rel: crate::kgraph::RelationId,
    candidate: NodeId,
) -> Result<f64> {
    let projected = params.project(&params.embed_node(g, anchor)?, rel)?;
    let emb = QueryEmbedding {
        vector: projected,
        target_type: g.type_of(candidate),
    };
    params.score(&emb, &params.embed_node(g, candidate)?)
}

/// Soft-AND of per-edge likelihoods with `candidate` substituted for the
/// target: `Π sigmoid(scale · score(P(z_a, τ), z_candidate))`.
///
/// Only queries without bound variables qualify; anything else would need
/// enumeration over the variables' assignments.
pub fn enumeration_baseline(
    params: &ModelParams,
    g: &TypedGraph,
    q: &QueryDag,
    candidate: NodeId,
    scale: f64,
) -> Result<f64> {
    q.ensure_valid(g)?;
    if q.has_bound_variables() {
        return Err(GqeError::NotApplicable(
            "enumeration baseline needs a query without bound variables".into(),
        ));
    }
    let mut product = 1.0;
    for e in &q.edges {
        let QueryNodeKind::Anchor(a) = q.nodes[e.src].kind else {
            unreachable!("no bound variables, so every edge starts at an anchor");
        };
        product *= sigmoid(scale * edge_score(params, g, a, e.relation, candidate)?);
    }
    Ok(product)
}

pub struct BaselineScorer<'a> {
    pub params: &'a ModelParams,
    pub graph: &'a TypedGraph,
    pub scale: f64,
}

impl Scorer for BaselineScorer<'_> {
    fn scores(&self, ex: &QueryExample, candidates: &[NodeId]) -> Result<Vec<f64>> {
        candidates
            .iter()
            .map(|&v| enumeration_baseline(self.params, self.graph, &ex.query, v, self.scale))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleFit {
    pub scale: f64,
    /// Mean log-likelihood of each grid point, in grid order.
    pub log_likelihoods: Vec<f64>,
}

/// Picks the grid scale maximizing the edge-classification log-likelihood
/// of single-edge examples: positives labelled 1, every pool negative 0.
pub fn fit_baseline_scale(
    params: &ModelParams,
    g: &TypedGraph,
    edge_examples: &[QueryExample],
) -> Result<ScaleFit> {
    let mut labelled = Vec::new();
    for ex in edge_examples.iter().filter(|e| e.query.edge_count() == 1) {
        let e = &ex.query.edges[0];
        let QueryNodeKind::Anchor(a) = ex.query.nodes[e.src].kind else {
            continue;
        };
        labelled.push((edge_score(params, g, a, e.relation, ex.positive)?, true));
        for &n in &ex.standard_negatives {
            labelled.push((edge_score(params, g, a, e.relation, n)?, false));
        }
    }
    if labelled.is_empty() {
        return Err(GqeError::Argument("no single-edge examples to fit the baseline scale".into()));
    }
    let log_likelihoods: Vec<f64> = SCALE_GRID
        .iter()
        .map(|&s| {
            labelled
                .iter()
                .map(|&(score, y)| {
                    let p = sigmoid(s * score).clamp(1e-300, 1.0 - 1e-16);
                    if y {
                        p.ln()
                    } else {
                        (1.0 - p).ln()
                    }
                })
                .sum::<f64>()
                / labelled.len() as f64
        })
        .collect();
    let best = (0..SCALE_GRID.len())
        .max_by(|&a, &b| log_likelihoods[a].total_cmp(&log_likelihoods[b]).then(b.cmp(&a)))
        .expect("nonempty grid");
    Ok(ScaleFit {
        scale: SCALE_GRID[best],
        log_likelihoods,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kgraph::{ingest_sources, IngestOptions};
    use crate::model::{exact_parameters, EXACT_MEMORY_BUDGET};
    use crate::querydag::Structure;

    fn graph() -> TypedGraph {
        ingest_sources(
            ("e", "d1\ttreats\tx\nd2\ttreats\tx\nd1\ttreats\ty\n"),
            ("t", "d1\tdrug\nd2\tdrug\nx\tdisease\ny\tdisease\n"),
            None,
            &IngestOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn saturates_for_members() {
        let g = graph();
        let p = exact_parameters(&g, EXACT_MEMORY_BUDGET).unwrap();
        let n = |x: &str| g.node_by_name(x).unwrap();
        let t = g.relation_by_name("treats").unwrap();
        let (drug, dis) = (g.type_of(n("d1")), g.type_of(n("x")));
        let q = QueryDag::from_structure(Structure::Chain1, &[n("d1")], &[t], &[drug, dis]);
        assert!(enumeration_baseline(&p, &g, &q, n("x"), 1e3).unwrap() > 1.0 - 1e-12);
        let q2 = QueryDag::from_structure(Structure::Inter2, &[n("d1"), n("d2")], &[t, t], &[drug, drug, dis]);
        let member = enumeration_baseline(&p, &g, &q2, n("x"), 1e3).unwrap();
        let half = enumeration_baseline(&p, &g, &q2, n("y"), 1e3).unwrap();
        assert!(member > 1.0 - 1e-12);
        assert!((half - 0.5).abs() < 1e-12);
    }

    #[test]
    fn unsatisfied_edge_with_negative_score_drives_product_to_zero() {
        assert!(sigmoid(1e3 * -0.5) < 1e-100);
        assert_eq!(sigmoid(0.0), 0.5);
    }

    #[test]
    fn rejects_bound_variables() {
        let g = graph();
        let p = exact_parameters(&g, EXACT_MEMORY_BUDGET).unwrap();
        let n = |x: &str| g.node_by_name(x).unwrap();
        let t = g.relation_by_name("treats").unwrap();
        let inv = g.relation_by_name("treats_inv").unwrap();
        let (drug, dis) = (g.type_of(n("d1")), g.type_of(n("x")));
        let q = QueryDag::from_structure(Structure::Chain2, &[n("d1")], &[t, inv], &[drug, dis, drug]);
        assert!(matches!(
            enumeration_baseline(&p, &g, &q, n("d2"), 1.0),
            Err(GqeError::NotApplicable(_))
        ));
    }
}
