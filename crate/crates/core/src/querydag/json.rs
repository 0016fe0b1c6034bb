use serde::{Deserialize, Serialize};

use super::catalog::Structure;
use super::query::{QueryDag, QueryEdge, QueryNode, QueryNodeKind};
use crate::error::{GqeError, Result};
use crate::kgraph::TypedGraph;

/// Wire form of a query; nodes, types and relations are referenced by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure: Option<String>,
    pub target_type: String,
    pub nodes: Vec<NodeJson>,
    pub edges: Vec<(usize, String, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NodeJson {
    Anchor {
        node: String,
        #[serde(rename = "type")]
        ty: String,
    },
    Variable {
        #[serde(rename = "type")]
        ty: String,
    },
    Target {
        #[serde(rename = "type")]
        ty: String,
    },
}

impl QueryJson {
    pub fn from_query(q: &QueryDag, g: &TypedGraph) -> Self {
        let tname = |t: crate::kgraph::NodeTypeId| g.node_types()[t.index()].name.clone();
        let mut order: Vec<usize> = (0..q.edges.len()).collect();
        if let Some(topo) = q.topological_order() {
            let mut rank = vec![0; q.nodes.len()];
            for (i, n) in topo.iter().enumerate() {
                rank[*n] = i;
            }
            order.sort_by_key(|&i| rank[q.edges[i].src]);
        }
        QueryJson {
            structure: q.structure.map(|s| s.name().to_string()),
            target_type: q.target_type().map(tname).unwrap_or_default(),
            nodes: q
                .nodes
                .iter()
                .map(|n| match n.kind {
                    QueryNodeKind::Anchor(v) => NodeJson::Anchor {
                        node: g.node_name(v).to_string(),
                        ty: tname(n.ty),
                    },
                    QueryNodeKind::Variable => NodeJson::Variable { ty: tname(n.ty) },
                    QueryNodeKind::Target => NodeJson::Target { ty: tname(n.ty) },
                })
                .collect(),
            edges: order
                .into_iter()
                .map(|i| {
                    let e = &q.edges[i];
                    (e.src, g.relations()[e.relation.index()].name.clone(), e.dst)
                })
                .collect(),
        }
    }

    /// Resolves names against `g` and validates the result.
    pub fn to_query(&self, g: &TypedGraph) -> Result<QueryDag> {
        let ty = |name: &str| {
            g.type_by_name(name)
                .ok_or_else(|| GqeError::InvalidQuery(vec![format!("unknown node type `{name}`")]))
        };
        let nodes = self
            .nodes
            .iter()
            .map(|n| {
                Ok(match n {
                    NodeJson::Anchor { node, ty: t } => QueryNode {
                        kind: QueryNodeKind::Anchor(g.node_by_name(node).ok_or_else(|| {
                            GqeError::InvalidQuery(vec![format!("unknown anchor node `{node}`")])
                        })?),
                        ty: ty(t)?,
                    },
                    NodeJson::Variable { ty: t } => QueryNode {
                        kind: QueryNodeKind::Variable,
                        ty: ty(t)?,
                    },
                    NodeJson::Target { ty: t } => QueryNode {
                        kind: QueryNodeKind::Target,
                        ty: ty(t)?,
                    },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let edges = self
            .edges
            .iter()
            .map(|(src, rel, dst)| {
                Ok(QueryEdge {
                    src: *src,
                    relation: g
                        .relation_by_name(rel)
                        .ok_or_else(|| GqeError::InvalidQuery(vec![format!("unknown relation `{rel}`")]))?,
                    dst: *dst,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let structure = self
            .structure
            .as_deref()
            .map(str::parse::<Structure>)
            .transpose()?;
        let q = QueryDag {
            nodes,
            edges,
            structure,
        };
        q.ensure_valid(g)?;
        if q.target_type() != Some(ty(&self.target_type)?) {
            return Err(GqeError::InvalidQuery(vec![format!(
                "target_type `{}` differs from the target node's type",
                self.target_type
            )]));
        }
        Ok(q)
    }
}

/// Parses a query document; JSON errors carry line and column.
pub fn parse_query(text: &str, g: &TypedGraph) -> Result<QueryDag> {
    let doc: QueryJson = serde_json::from_str(text)?;
    doc.to_query(g)
}

pub fn query_to_json(q: &QueryDag, g: &TypedGraph) -> String {
    serde_json::to_string(&QueryJson::from_query(q, g)).expect("query json serializes")
}
