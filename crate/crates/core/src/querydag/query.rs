use std::fmt;

use super::catalog::{Structure, TemplateRole};
use crate::error::{GqeError, Result};
use crate::kgraph::{NodeId, NodeTypeId, RelationId, TypedGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QueryNodeKind {
    Anchor(NodeId),
    Variable,
    Target,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QueryNode {
    pub kind: QueryNodeKind,
    pub ty: NodeTypeId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QueryEdge {
    pub src: usize,
    pub relation: RelationId,
    pub dst: usize,
}

/// A conjunctive query with one free target variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QueryDag {
    pub nodes: Vec<QueryNode>,
    pub edges: Vec<QueryEdge>,
    pub structure: Option<Structure>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NoEdges,
    EdgeIndexOutOfRange { edge: usize },
    UnknownRelation { edge: usize },
    UnknownType { node: usize },
    UnknownAnchorNode { node: usize },
    AnchorTypeMismatch { node: usize },
    EdgeTypeMismatch { edge: usize },
    NotADag,
    TargetCount(usize),
    SourceNotAnchor { node: usize },
    AnchorHasIncoming { node: usize },
    TargetNotUniqueSink { node: usize },
    UnreachableVariable { node: usize },
    StructureMismatch,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoEdges => write!(f, "query has no edges"),
            Violation::EdgeIndexOutOfRange { edge } => {
                write!(f, "edge {edge} references a missing query node")
            }
            Violation::UnknownRelation { edge } => write!(f, "edge {edge} has an unknown relation"),
            Violation::UnknownType { node } => write!(f, "node {node} has an unknown type"),
            Violation::UnknownAnchorNode { node } => {
                write!(f, "anchor {node} references a missing graph node")
            }
            Violation::AnchorTypeMismatch { node } => {
                write!(f, "anchor {node} type differs from its graph node's type")
            }
            Violation::EdgeTypeMismatch { edge } => {
                write!(f, "edge {edge} relation types do not match its endpoints")
            }
            Violation::NotADag => write!(f, "not a DAG: the edges contain a cycle"),
            Violation::TargetCount(n) => write!(f, "expected exactly one target, found {n}"),
            Violation::SourceNotAnchor { node } => {
                write!(f, "node {node} has no incoming edges but is not an anchor")
            }
            Violation::AnchorHasIncoming { node } => write!(f, "anchor {node} has incoming edges"),
            Violation::TargetNotUniqueSink { node } => {
                write!(f, "target not unique sink: node {node} has no outgoing edges")
            }
            Violation::UnreachableVariable { node } => {
                write!(f, "variable {node} is not on a path from an anchor to the target")
            }
            Violation::StructureMismatch => {
                write!(f, "edges do not match the declared structure")
            }
        }
    }
}

impl QueryDag {
    /// Instantiates `structure` with concrete anchors, relations and types.
    /// `relations[i]` labels template edge `i`; `anchors` fill anchor slots in order.
    pub fn from_structure(
        structure: Structure,
        anchors: &[NodeId],
        relations: &[RelationId],
        types: &[NodeTypeId],
    ) -> Self {
        let mut next_anchor = anchors.iter();
        let nodes = structure
            .roles()
            .iter()
            .zip(types)
            .map(|(role, &ty)| QueryNode {
                kind: match role {
                    TemplateRole::Anchor => QueryNodeKind::Anchor(*next_anchor.next().unwrap()),
                    TemplateRole::Variable => QueryNodeKind::Variable,
                    TemplateRole::Target => QueryNodeKind::Target,
                },
                ty,
            })
            .collect();
        let edges = structure
            .template_edges()
            .iter()
            .zip(relations)
            .map(|(&(src, dst), &relation)| QueryEdge { src, relation, dst })
            .collect();
        QueryDag {
            nodes,
            edges,
            structure: Some(structure),
        }
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn target(&self) -> Option<usize> {
        self.nodes
            .iter()
            .position(|n| n.kind == QueryNodeKind::Target)
    }

    pub fn target_type(&self) -> Option<NodeTypeId> {
        self.target().map(|t| self.nodes[t].ty)
    }

    pub fn anchors(&self) -> impl Iterator<Item = (usize, NodeId)> + '_ {
        self.nodes.iter().enumerate().filter_map(|(i, n)| match n.kind {
            QueryNodeKind::Anchor(v) => Some((i, v)),
            _ => None,
        })
    }

    pub fn has_bound_variables(&self) -> bool {
        self.nodes.iter().any(|n| n.kind == QueryNodeKind::Variable)
    }

    pub fn incoming(&self, node: usize) -> impl Iterator<Item = &QueryEdge> {
        self.edges.iter().filter(move |e| e.dst == node)
    }

    pub fn has_intersection(&self) -> bool {
        (0..self.nodes.len()).any(|n| self.incoming(n).count() > 1)
    }

    /// Kahn's algorithm; `None` on a cycle or out-of-range edge.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.nodes.len();
        let mut indeg = vec![0usize; n];
        for e in &self.edges {
            if e.src >= n || e.dst >= n {
                return None;
            }
            indeg[e.dst] += 1;
        }
        let mut queue: std::collections::VecDeque<usize> =
            (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for e in self.edges.iter().filter(|e| e.src == u) {
                indeg[e.dst] -= 1;
                if indeg[e.dst] == 0 {
                    queue.push_back(e.dst);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// Every violated invariant; empty means the query is well formed.
    pub fn validate(&self, g: &TypedGraph) -> Vec<Violation> {
        let mut out = Vec::new();
        let n = self.nodes.len();
        if self.edges.is_empty() {
            out.push(Violation::NoEdges);
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if g.node_type(node.ty).is_err() {
                out.push(Violation::UnknownType { node: i });
            }
            if let QueryNodeKind::Anchor(v) = node.kind {
                if !g.contains_node(v) {
                    out.push(Violation::UnknownAnchorNode { node: i });
                } else if g.type_of(v) != node.ty {
                    out.push(Violation::AnchorTypeMismatch { node: i });
                }
            }
        }
        let mut indices_ok = true;
        for (i, e) in self.edges.iter().enumerate() {
            if e.src >= n || e.dst >= n {
                out.push(Violation::EdgeIndexOutOfRange { edge: i });
                indices_ok = false;
                continue;
            }
            match g.relation(e.relation) {
                Err(_) => out.push(Violation::UnknownRelation { edge: i }),
                Ok(r) => {
                    if r.domain != self.nodes[e.src].ty || r.range != self.nodes[e.dst].ty {
                        out.push(Violation::EdgeTypeMismatch { edge: i });
                    }
                }
            }
        }
        let targets = self
            .nodes
            .iter()
            .filter(|q| q.kind == QueryNodeKind::Target)
            .count();
        if targets != 1 {
            out.push(Violation::TargetCount(targets));
        }
        if !indices_ok {
            return out;
        }
        if self.topological_order().is_none() {
            out.push(Violation::NotADag);
        }
        for (i, node) in self.nodes.iter().enumerate() {
            let has_in = self.edges.iter().any(|e| e.dst == i);
            let has_out = self.edges.iter().any(|e| e.src == i);
            match node.kind {
                QueryNodeKind::Anchor(_) if has_in => {
                    out.push(Violation::AnchorHasIncoming { node: i })
                }
                QueryNodeKind::Variable if !has_in => {
                    out.push(Violation::SourceNotAnchor { node: i })
                }
                QueryNodeKind::Target if !has_in && !self.edges.is_empty() => {
                    out.push(Violation::SourceNotAnchor { node: i })
                }
                _ => {}
            }
            if node.kind != QueryNodeKind::Target && !has_out {
                out.push(Violation::TargetNotUniqueSink { node: i });
            }
        }
        if let (Some(t), Some(_)) = (self.target(), self.topological_order()) {
            // every variable must reach the target
            let mut reaches = vec![false; n];
            reaches[t] = true;
            let mut changed = true;
            while changed {
                changed = false;
                for e in &self.edges {
                    if reaches[e.dst] && !reaches[e.src] {
                        reaches[e.src] = true;
                        changed = true;
                    }
                }
            }
            for (i, node) in self.nodes.iter().enumerate() {
                if node.kind == QueryNodeKind::Variable && !reaches[i] {
                    out.push(Violation::UnreachableVariable { node: i });
                }
            }
        }
        if let Some(s) = self.structure {
            let roles_match = s.roles().len() == n
                && s.roles().iter().zip(&self.nodes).all(|(r, q)| {
                    matches!(
                        (r, q.kind),
                        (TemplateRole::Anchor, QueryNodeKind::Anchor(_))
                            | (TemplateRole::Variable, QueryNodeKind::Variable)
                            | (TemplateRole::Target, QueryNodeKind::Target)
                    )
                });
            let mut ours: Vec<_> = self.edges.iter().map(|e| (e.src, e.dst)).collect();
            let mut theirs = s.template_edges().to_vec();
            ours.sort_unstable();
            theirs.sort_unstable();
            if !roles_match || ours != theirs {
                out.push(Violation::StructureMismatch);
            }
        }
        out
    }

    pub fn ensure_valid(&self, g: &TypedGraph) -> Result<()> {
        let v = self.validate(g);
        if v.is_empty() {
            Ok(())
        } else {
            Err(GqeError::InvalidQuery(v.iter().map(|x| x.to_string()).collect()))
        }
    }
}
