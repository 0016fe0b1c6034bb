//! Conjunctive queries as DAGs, the structure catalog, and the exact
//! set-semantics oracle.

mod catalog;
mod json;
mod oracle;
mod query;

pub use catalog::{structure_catalog, Structure, TemplateRole};
pub use json::{parse_query, query_to_json, NodeJson, QueryJson};
pub use oracle::{denotation, denotation_disjunctive, Denotation};
pub use query::{QueryDag, QueryEdge, QueryNode, QueryNodeKind, Violation};
