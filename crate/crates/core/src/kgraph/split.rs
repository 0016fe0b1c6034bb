use std::collections::BTreeSet;

use rand::seq::SliceRandom;

use super::graph::{Edge, TypedGraph};
use crate::error::{GqeError, Result};
use crate::rng::{stream, Stream};

/// A training graph with a held-out set of deleted edges.
#[derive(Debug, Clone)]
pub struct GraphSplit {
    pub full_graph: TypedGraph,
    pub train_graph: TypedGraph,
    /// Deleted edges, each base edge together with its inverse.
    pub deleted_edges: BTreeSet<Edge>,
}

impl GraphSplit {
    /// Deleted edges of non-inverse relations, in sorted order.
    pub fn deleted_base_edges(&self) -> impl Iterator<Item = Edge> + '_ {
        let g = &self.full_graph;
        self.deleted_edges
            .iter()
            .copied()
            .filter(move |e| !g.relations()[e.relation.index()].materialized)
    }
}

/// Removes `round(fraction * base_edges)` base edges uniformly at random,
/// together with their inverses.
pub fn split_edges(g: &TypedGraph, fraction: f64, seed: u64) -> Result<GraphSplit> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(GqeError::Argument(format!(
            "split fraction {fraction} is outside (0, 1)"
        )));
    }
    let mut base: Vec<Edge> = g.base_edges().collect();
    let target = (fraction * base.len() as f64).round() as usize;
    if target == 0 {
        return Err(GqeError::Argument(format!(
            "fraction {fraction} of {} edges deletes nothing",
            base.len()
        )));
    }
    let mut rng = stream(seed, Stream::Split);
    base.shuffle(&mut rng);
    let (deleted, kept) = base.split_at(target);
    let mut deleted_edges = BTreeSet::new();
    for &e in deleted {
        deleted_edges.insert(e);
        deleted_edges.insert(g.reverse(e));
    }
    let train_graph = TypedGraph::from_base_edges(g.schema().clone(), kept)?;
    Ok(GraphSplit {
        full_graph: g.clone(),
        train_graph,
        deleted_edges,
    })
}
