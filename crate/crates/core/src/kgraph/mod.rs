//! Immutable typed multi-relational graph store.
//!
//! Every relation `r` is paired with a materialized inverse `r_inv`, so
//! `(u, r, v)` is present exactly when `(v, r_inv, u)` is.

mod graph;
mod io;
mod split;
pub mod synthetic;

pub use graph::{
    Edge, NodeId, NodeType, NodeTypeId, Relation, RelationId, Schema, SchemaBuilder, TypedGraph,
    INVERSE_SUFFIX,
};
pub use io::{
    ingest, ingest_sources, load_graph_dir, render_graph, write_graph, IngestOptions, EDGE_FILE,
    FEATURE_FILE, NODE_TYPE_FILE,
};
pub use split::{split_edges, GraphSplit};
