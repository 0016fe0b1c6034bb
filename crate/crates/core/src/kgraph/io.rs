use std::fmt::Write as _;
use std::path::Path;

use super::graph::{Edge, SchemaBuilder, TypedGraph, INVERSE_SUFFIX};
use crate::error::{GqeError, Result};

pub const EDGE_FILE: &str = "edges.tsv";
pub const NODE_TYPE_FILE: &str = "node_types.tsv";
pub const FEATURE_FILE: &str = "features.tsv";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestOptions {
    /// Relations with fewer base edges than this are dropped; 0 keeps all.
    pub min_relation_edges: usize,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            GqeError::MissingInput {
                path: path.to_path_buf(),
                hint: "check the path or run `gqe ingest` first".into(),
            }
        } else {
            GqeError::io(path, e)
        }
    })
}

pub fn ingest(
    edge_file: &Path,
    node_type_file: &Path,
    feature_file: Option<&Path>,
    opts: &IngestOptions,
) -> Result<TypedGraph> {
    let edges = read(edge_file)?;
    let types = read(node_type_file)?;
    let features = feature_file.map(read).transpose()?;
    ingest_sources(
        (&edge_file.display().to_string(), &edges),
        (&node_type_file.display().to_string(), &types),
        feature_file
            .map(|p| p.display().to_string())
            .as_deref()
            .zip(features.as_deref()),
        opts,
    )
}

/// Reads a graph directory written by [`write_graph`].
pub fn load_graph_dir(dir: &Path) -> Result<TypedGraph> {
    let features = dir.join(FEATURE_FILE);
    ingest(
        &dir.join(EDGE_FILE),
        &dir.join(NODE_TYPE_FILE),
        features.exists().then_some(features.as_path()),
        &IngestOptions::default(),
    )
}

/// Ingests from in-memory file contents; each source is `(label, text)`
/// where the label is used in error messages.
pub fn ingest_sources(
    edges: (&str, &str),
    node_types: (&str, &str),
    features: Option<(&str, &str)>,
    opts: &IngestOptions,
) -> Result<TypedGraph> {
    let mut b = SchemaBuilder::new();
    let perr = |path: &str, line: usize, message: String| GqeError::Parse {
        path: path.to_string(),
        line,
        message,
    };

    for (i, line) in lines(node_types.1) {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 || fields.iter().any(|f| f.is_empty()) {
            return Err(perr(node_types.0, i, "expected `node_id<TAB>type_name`".into()));
        }
        b.node(fields[0], fields[1])
            .map_err(|e| perr(node_types.0, i, e.to_string()))?;
    }

    if let Some((label, text)) = features {
        for (i, line) in lines(text) {
            let (name, rest) = line
                .split_once('\t')
                .ok_or_else(|| perr(label, i, "expected `node_id<TAB>indices`".into()))?;
            let v = b
                .node_id(name)
                .ok_or_else(|| perr(label, i, format!("undeclared node {name}")))?;
            let indices = rest
                .split_whitespace()
                .map(|s| s.parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| perr(label, i, format!("bad feature index: {e}")))?;
            b.features(v, indices);
        }
    }

    let mut raw = Vec::new();
    for (i, line) in lines(edges.1) {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 || fields.iter().any(|f| f.is_empty()) {
            return Err(perr(
                edges.0,
                i,
                "expected `head_id<TAB>relation_name<TAB>tail_id`".into(),
            ));
        }
        let lookup = |n: &str| {
            b.node_id(n)
                .ok_or_else(|| perr(edges.0, i, format!("undeclared node {n}")))
        };
        let (mut h, mut t) = (lookup(fields[0])?, lookup(fields[2])?);
        let mut rel = fields[1];
        if let Some(base) = rel.strip_suffix(INVERSE_SUFFIX) {
            rel = base;
            std::mem::swap(&mut h, &mut t);
        }
        let (dh, dt) = (b.type_of(h), b.type_of(t));
        let r = b.relation(rel, dh, dt).map_err(|e| match e {
            GqeError::Schema(m) => GqeError::Schema(format!(
                "{}:{i}: edge ({}, {}, {}): {m}",
                edges.0, fields[0], fields[1], fields[2]
            )),
            other => other,
        })?;
        raw.push(Edge::new(h, r, t));
    }

    if opts.min_relation_edges > 0 {
        let mut counts = std::collections::HashMap::new();
        for e in &raw {
            counts
                .entry(e.relation)
                .or_insert_with(std::collections::BTreeSet::new)
                .insert((e.head, e.tail));
        }
        let remap = b.retain_relations(|r| {
            counts.get(&r).map_or(0, |s| s.len()) >= opts.min_relation_edges
        });
        raw = raw
            .into_iter()
            .filter_map(|e| remap[e.relation.index()].map(|r| Edge::new(e.head, r, e.tail)))
            .collect();
    }

    let schema = b.build()?;
    TypedGraph::from_base_edges(schema, &raw)
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

/// Canonical text files for `g`: node types in id order, base edges in
/// (relation, head, tail) order, and features only for feature-mode types.
pub fn render_graph(g: &TypedGraph) -> (String, String, Option<String>) {
    let mut types = String::new();
    for v in 0..g.node_count() {
        let v = super::NodeId(v as u32);
        let _ = writeln!(types, "{}\t{}", g.node_name(v), g.node_types()[g.type_of(v).index()].name);
    }
    let mut edges = String::new();
    for e in g.base_edges() {
        let _ = writeln!(
            edges,
            "{}\t{}\t{}",
            g.node_name(e.head),
            g.relations()[e.relation.index()].name,
            g.node_name(e.tail)
        );
    }
    let any_features = g.node_types().iter().any(|t| g.type_uses_features(t.id));
    let features = any_features.then(|| {
        let mut out = String::new();
        for v in 0..g.node_count() {
            let v = super::NodeId(v as u32);
            if g.type_uses_features(g.type_of(v)) {
                let idx: Vec<String> = g.features(v).iter().map(|i| i.to_string()).collect();
                let _ = writeln!(out, "{}\t{}", g.node_name(v), idx.join(" "));
            }
        }
        out
    });
    (edges, types, features)
}

pub fn write_graph(g: &TypedGraph, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| GqeError::io(dir, e))?;
    let (edges, types, features) = render_graph(g);
    crate::fsutil::write_atomic(&dir.join(EDGE_FILE), edges.as_bytes())?;
    crate::fsutil::write_atomic(&dir.join(NODE_TYPE_FILE), types.as_bytes())?;
    if let Some(f) = features {
        crate::fsutil::write_atomic(&dir.join(FEATURE_FILE), f.as_bytes())?;
    }
    Ok(())
}
