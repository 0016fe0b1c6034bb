use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{GqeError, Result};

/// Suffix marking a materialized inverse relation: `r` and `r_inv`.
pub const INVERSE_SUFFIX: &str = "_inv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeTypeId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RelationId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl NodeTypeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelationId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeType {
    pub id: NodeTypeId,
    pub name: String,
    /// Length of the binary feature vectors of this type's nodes.
    pub feature_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    pub id: RelationId,
    pub name: String,
    pub domain: NodeTypeId,
    pub range: NodeTypeId,
    /// The paired relation with swapped domain and range.
    pub inverse: RelationId,
    /// True for the auto-generated half of each pair.
    pub materialized: bool,
}

impl Relation {
    /// For a materialized inverse, the relation it inverts.
    pub fn inverse_of(&self) -> Option<RelationId> {
        self.materialized.then_some(self.inverse)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub head: NodeId,
    pub relation: RelationId,
    pub tail: NodeId,
}

impl Edge {
    pub fn new(head: NodeId, relation: RelationId, tail: NodeId) -> Self {
        Edge {
            head,
            relation,
            tail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct NodeInfo {
    pub ty: NodeTypeId,
    /// Position among nodes of the same type.
    pub local: usize,
    /// Sorted active feature indices.
    pub features: Vec<usize>,
}

/// Everything about a graph except its edges. Train and full graphs of a
/// split share one schema so ids line up.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    pub(crate) node_types: Vec<NodeType>,
    pub(crate) relations: Vec<Relation>,
    pub(crate) nodes: Vec<NodeInfo>,
    pub(crate) names: Vec<String>,
    pub(crate) name_index: HashMap<String, NodeId>,
    pub(crate) type_members: Vec<Vec<NodeId>>,
    pub(crate) uses_features: Vec<bool>,
}

/// Neighbor lists of one relation, indexed by the head's local index.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Csr {
    offsets: Vec<usize>,
    targets: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypedGraph {
    schema: Arc<Schema>,
    adjacency: Vec<Csr>,
}

impl Schema {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
}

impl TypedGraph {
    /// Builds a graph over `schema` from base (non-inverse) relation edges.
    /// Inverses are materialized; duplicates are dropped.
    pub fn from_base_edges(schema: Arc<Schema>, edges: &[Edge]) -> Result<Self> {
        let mut per_rel: Vec<Vec<(usize, NodeId)>> = vec![Vec::new(); schema.relations.len()];
        for e in edges {
            let rel = schema
                .relations
                .get(e.relation.index())
                .ok_or_else(|| GqeError::Argument(format!("unknown relation {}", e.relation.0)))?;
            if rel.materialized {
                return Err(GqeError::Argument(format!(
                    "edge uses materialized inverse relation {}",
                    rel.name
                )));
            }
            let (h, t) = (schema.node(e.head)?, schema.node(e.tail)?);
            if h.ty != rel.domain || t.ty != rel.range {
                return Err(GqeError::Schema(format!(
                    "edge ({}, {}, {}) joins types {} -> {} but {} is {} -> {}",
                    schema.names[e.head.index()],
                    rel.name,
                    schema.names[e.tail.index()],
                    schema.node_types[h.ty.index()].name,
                    schema.node_types[t.ty.index()].name,
                    rel.name,
                    schema.node_types[rel.domain.index()].name,
                    schema.node_types[rel.range.index()].name,
                )));
            }
            per_rel[e.relation.index()].push((h.local, e.tail));
            per_rel[rel.inverse.index()].push((t.local, e.head));
        }
        let adjacency = per_rel
            .into_iter()
            .enumerate()
            .map(|(r, mut pairs)| {
                pairs.sort_unstable();
                pairs.dedup();
                let n = schema.type_members[schema.relations[r].domain.index()].len();
                let mut offsets = vec![0usize; n + 1];
                for &(local, _) in &pairs {
                    offsets[local + 1] += 1;
                }
                for i in 0..n {
                    offsets[i + 1] += offsets[i];
                }
                Csr {
                    offsets,
                    targets: pairs.into_iter().map(|(_, t)| t).collect(),
                }
            })
            .collect();
        Ok(TypedGraph { schema, adjacency })
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn node_count(&self) -> usize {
        self.schema.nodes.len()
    }

    pub fn node_types(&self) -> &[NodeType] {
        &self.schema.node_types
    }

    pub fn relations(&self) -> &[Relation] {
        &self.schema.relations
    }

    pub fn relation(&self, id: RelationId) -> Result<&Relation> {
        self.schema
            .relations
            .get(id.index())
            .ok_or_else(|| GqeError::Argument(format!("unknown relation id {}", id.0)))
    }

    pub fn node_type(&self, id: NodeTypeId) -> Result<&NodeType> {
        self.schema
            .node_types
            .get(id.index())
            .ok_or_else(|| GqeError::Argument(format!("unknown node type id {}", id.0)))
    }

    pub fn relation_by_name(&self, name: &str) -> Option<RelationId> {
        self.schema
            .relations
            .iter()
            .find(|r| r.name == name)
            .map(|r| r.id)
    }

    pub fn type_by_name(&self, name: &str) -> Option<NodeTypeId> {
        self.schema
            .node_types
            .iter()
            .find(|t| t.name == name)
            .map(|t| t.id)
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.schema.name_index.get(name).copied()
    }

    pub fn node_name(&self, v: NodeId) -> &str {
        &self.schema.names[v.index()]
    }

    pub fn type_of(&self, v: NodeId) -> NodeTypeId {
        self.schema.nodes[v.index()].ty
    }

    /// Index of `v` among the nodes of its type.
    pub fn local_index(&self, v: NodeId) -> usize {
        self.schema.nodes[v.index()].local
    }

    pub fn features(&self, v: NodeId) -> &[usize] {
        &self.schema.nodes[v.index()].features
    }

    /// True when this type's nodes were given explicit bag-of-features vectors.
    pub fn type_uses_features(&self, ty: NodeTypeId) -> bool {
        self.schema.uses_features[ty.index()]
    }

    pub fn contains_node(&self, v: NodeId) -> bool {
        v.index() < self.schema.nodes.len()
    }

    /// Sorted τ-neighbors of `v`.
    pub fn neighbors(&self, v: NodeId, rel: RelationId) -> Result<&[NodeId]> {
        let info = self.schema.node(v)?;
        let r = self.relation(rel)?;
        if r.domain != info.ty {
            return Err(GqeError::Schema(format!(
                "node {} has type {} but relation {} starts at {}",
                self.node_name(v),
                self.schema.node_types[info.ty.index()].name,
                r.name,
                self.schema.node_types[r.domain.index()].name
            )));
        }
        Ok(self.neighbors_unchecked(v, rel))
    }

    /// Neighbor lookup without type validation; `v` must lie in `rel`'s domain.
    pub(crate) fn neighbors_unchecked(&self, v: NodeId, rel: RelationId) -> &[NodeId] {
        let csr = &self.adjacency[rel.index()];
        let local = self.schema.nodes[v.index()].local;
        &csr.targets[csr.offsets[local]..csr.offsets[local + 1]]
    }

    pub fn has_edge(&self, e: Edge) -> bool {
        let Ok(r) = self.relation(e.relation) else {
            return false;
        };
        self.contains_node(e.head)
            && self.type_of(e.head) == r.domain
            && self
                .neighbors_unchecked(e.head, e.relation)
                .binary_search(&e.tail)
                .is_ok()
    }

    pub fn nodes_of_type(&self, ty: NodeTypeId) -> Result<&[NodeId]> {
        self.schema
            .type_members
            .get(ty.index())
            .map(Vec::as_slice)
            .ok_or_else(|| GqeError::Argument(format!("unknown node type id {}", ty.0)))
    }

    /// Relations whose domain is `ty`.
    pub fn relations_from(&self, ty: NodeTypeId) -> impl Iterator<Item = &Relation> {
        self.schema.relations.iter().filter(move |r| r.domain == ty)
    }

    /// All edges including materialized inverses, ordered by (relation, head, tail).
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.schema.relations.iter().flat_map(move |r| {
            self.schema.type_members[r.domain.index()]
                .iter()
                .flat_map(move |&h| {
                    self.neighbors_unchecked(h, r.id)
                        .iter()
                        .map(move |&t| Edge::new(h, r.id, t))
                })
        })
    }

    /// Edges of non-inverse relations only.
    pub fn base_edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.edges()
            .filter(|e| !self.schema.relations[e.relation.index()].materialized)
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(|c| c.targets.len()).sum()
    }

    pub fn base_edge_count(&self) -> usize {
        self.schema
            .relations
            .iter()
            .filter(|r| !r.materialized)
            .map(|r| self.adjacency[r.id.index()].targets.len())
            .sum()
    }

    /// The mirrored edge under the paired relation.
    pub fn reverse(&self, e: Edge) -> Edge {
        Edge::new(e.tail, self.schema.relations[e.relation.index()].inverse, e.head)
    }
}

impl Schema {
    pub(crate) fn node(&self, v: NodeId) -> Result<&NodeInfo> {
        self.nodes
            .get(v.index())
            .ok_or_else(|| GqeError::Argument(format!("unknown node id {}", v.0)))
    }
}

/// Incrementally declares types, nodes and relations, then freezes them into a [`Schema`].
#[derive(Debug, Default)]
pub struct SchemaBuilder {
    node_types: Vec<NodeType>,
    relations: Vec<Relation>,
    nodes: Vec<NodeInfo>,
    names: Vec<String>,
    name_index: HashMap<String, NodeId>,
    type_members: Vec<Vec<NodeId>>,
    explicit_features: HashMap<NodeId, Vec<usize>>,
}

impl SchemaBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node_type(&mut self, name: &str) -> NodeTypeId {
        if let Some(t) = self.node_types.iter().find(|t| t.name == name) {
            return t.id;
        }
        let id = NodeTypeId(self.node_types.len() as u32);
        self.node_types.push(NodeType {
            id,
            name: name.to_string(),
            feature_dim: 0,
        });
        self.type_members.push(Vec::new());
        id
    }

    pub fn node(&mut self, name: &str, type_name: &str) -> Result<NodeId> {
        let ty = self.node_type(type_name);
        if let Some(&existing) = self.name_index.get(name) {
            let info = &self.nodes[existing.index()];
            if info.ty != ty {
                return Err(GqeError::Schema(format!(
                    "node {name} declared with types {} and {type_name}",
                    self.node_types[info.ty.index()].name
                )));
            }
            return Ok(existing);
        }
        let id = NodeId(self.nodes.len() as u32);
        let members = &mut self.type_members[ty.index()];
        self.nodes.push(NodeInfo {
            ty,
            local: members.len(),
            features: Vec::new(),
        });
        members.push(id);
        self.names.push(name.to_string());
        self.name_index.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.name_index.get(name).copied()
    }

    pub fn type_of(&self, v: NodeId) -> NodeTypeId {
        self.nodes[v.index()].ty
    }

    pub fn type_name(&self, ty: NodeTypeId) -> &str {
        &self.node_types[ty.index()].name
    }

    /// Declares base relation `name` with its inverse, or checks an existing
    /// declaration agrees on types. Returns the base relation's id.
    pub fn relation(&mut self, name: &str, domain: NodeTypeId, range: NodeTypeId) -> Result<RelationId> {
        if name.ends_with(INVERSE_SUFFIX) {
            return Err(GqeError::Schema(format!(
                "relation name {name} collides with the inverse suffix {INVERSE_SUFFIX}"
            )));
        }
        if let Some(r) = self.relations.iter().find(|r| r.name == name) {
            if r.domain != domain || r.range != range {
                return Err(GqeError::Schema(format!(
                    "relation {name} is {} -> {}, edge joins {} -> {}",
                    self.type_name(r.domain),
                    self.type_name(r.range),
                    self.type_name(domain),
                    self.type_name(range)
                )));
            }
            return Ok(r.id);
        }
        let id = RelationId(self.relations.len() as u32);
        let inv = RelationId(id.0 + 1);
        self.relations.push(Relation {
            id,
            name: name.to_string(),
            domain,
            range,
            inverse: inv,
            materialized: false,
        });
        self.relations.push(Relation {
            id: inv,
            name: format!("{name}{INVERSE_SUFFIX}"),
            domain: range,
            range: domain,
            inverse: id,
            materialized: true,
        });
        Ok(id)
    }

    pub fn relation_id(&self, name: &str) -> Option<RelationId> {
        self.relations.iter().find(|r| r.name == name).map(|r| r.id)
    }

    /// Sets explicit bag-of-features indices for `v`.
    pub fn features(&mut self, v: NodeId, mut indices: Vec<usize>) {
        indices.sort_unstable();
        indices.dedup();
        self.explicit_features.insert(v, indices);
    }

    /// Drops relations (and their inverses) listed in `drop`, renumbering the rest.
    pub(crate) fn retain_relations(&mut self, keep: impl Fn(RelationId) -> bool) -> Vec<Option<RelationId>> {
        let mut remap = vec![None; self.relations.len()];
        let mut kept = Vec::new();
        for r in &self.relations {
            if r.materialized {
                continue;
            }
            if keep(r.id) {
                let id = RelationId(kept.len() as u32);
                remap[r.id.index()] = Some(id);
                remap[r.inverse.index()] = Some(RelationId(id.0 + 1));
                let mut base = r.clone();
                let mut inv = self.relations[r.inverse.index()].clone();
                base.id = id;
                base.inverse = RelationId(id.0 + 1);
                inv.id = RelationId(id.0 + 1);
                inv.inverse = id;
                kept.push(base);
                kept.push(inv);
            }
        }
        self.relations = kept;
        remap
    }

    /// Freezes the schema. Types where any node got explicit features use
    /// feature mode, and then every node of that type must have features;
    /// other types get one-hot features over their members.
    pub fn build(mut self) -> Result<Arc<Schema>> {
        let mut uses_features = vec![false; self.node_types.len()];
        for v in self.explicit_features.keys() {
            uses_features[self.nodes[v.index()].ty.index()] = true;
        }
        for (t, ty) in self.node_types.iter_mut().enumerate() {
            let members = &self.type_members[t];
            if uses_features[t] {
                let mut dim = 0;
                for &v in members {
                    let f = self.explicit_features.remove(&v).ok_or_else(|| {
                        GqeError::Schema(format!(
                            "node {} of type {} has no feature line",
                            self.names[v.index()],
                            ty.name
                        ))
                    })?;
                    if f.is_empty() {
                        return Err(GqeError::Schema(format!(
                            "node {} has an empty feature vector",
                            self.names[v.index()]
                        )));
                    }
                    dim = dim.max(f.last().map_or(0, |&m| m + 1));
                    self.nodes[v.index()].features = f;
                }
                ty.feature_dim = dim;
            } else {
                for &v in members {
                    let local = self.nodes[v.index()].local;
                    self.nodes[v.index()].features = vec![local];
                }
                ty.feature_dim = members.len();
            }
        }
        Ok(Arc::new(Schema {
            node_types: self.node_types,
            relations: self.relations,
            nodes: self.nodes,
            names: self.names,
            name_index: self.name_index,
            type_members: self.type_members,
            uses_features,
        }))
    }
}
