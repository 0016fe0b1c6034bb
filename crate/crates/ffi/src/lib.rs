//! C ABI over the `gqe` library.
//!
//! Graphs and models are opaque handles created by `gqe_*_load` /
//! `gqe_*_new` style functions and released with the matching `_free`.
//! Every fallible function returns a [`GqeStatus`]; on failure the message
//! is kept per thread and can be copied out with
//! [`gqe_last_error_message`]. Strings are NUL-terminated UTF-8. Output
//! string buffers follow the size-query convention: the required length
//! (without the terminator) is always written to `needed`, and
//! `GQE_STATUS_BUFFER_TOO_SMALL` is returned when `capacity` cannot hold it.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;

use gqe::checkpoint::{load_checkpoint, save_checkpoint, CheckpointExtras};
use gqe::kgraph::synthetic::{generate, SyntheticSpec};
use gqe::kgraph::{load_graph_dir, NodeId, TypedGraph};
use gqe::model::{exact_parameters, Mode, ModelParams, EXACT_MEMORY_BUDGET};
use gqe::querydag::parse_query;
use gqe::GqeError;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GqeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Argument = 3,
    Parse = 4,
    Schema = 5,
    InvalidQuery = 6,
    Io = 7,
    VersionMismatch = 8,
    Capacity = 9,
    Numeric = 10,
    BufferTooSmall = 11,
    Other = 12,
    Panic = 13,
}

impl From<&GqeError> for GqeStatus {
    fn from(e: &GqeError) -> Self {
        match e {
            GqeError::Argument(_) | GqeError::Shape(_) | GqeError::NotApplicable(_) => GqeStatus::Argument,
            GqeError::Parse { .. } | GqeError::Json(_) => GqeStatus::Parse,
            GqeError::Schema(_) => GqeStatus::Schema,
            GqeError::InvalidQuery(_) => GqeStatus::InvalidQuery,
            GqeError::Io { .. } | GqeError::MissingInput { .. } | GqeError::Locked(_) => GqeStatus::Io,
            GqeError::VersionMismatch { .. } => GqeStatus::VersionMismatch,
            GqeError::Capacity(_) => GqeStatus::Capacity,
            GqeError::Numeric(_) | GqeError::Degenerate(_) => GqeStatus::Numeric,
            GqeError::SamplingInfeasible { .. } => GqeStatus::Other,
        }
    }
}

/// A typed knowledge graph.
pub struct GqeGraph {
    graph: Arc<TypedGraph>,
}

/// Model parameters bound to the graph they were loaded against.
pub struct GqeModel {
    params: ModelParams,
    graph: Arc<TypedGraph>,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

struct Failure(GqeStatus, String);

impl From<GqeError> for Failure {
    fn from(e: GqeError) -> Self {
        Failure(GqeStatus::from(&e), e.to_string())
    }
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> GqeStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error(String::new());
            GqeStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {msg}"));
            GqeStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(GqeStatus::NullPointer, format!("{what} is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(GqeStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn copy_out(s: &str, buf: *mut c_char, capacity: usize, needed: *mut usize) -> Result<(), Failure> {
    if needed.is_null() {
        return Err(null("needed"));
    }
    *needed = s.len();
    if buf.is_null() || capacity < s.len() + 1 {
        return Err(Failure(
            GqeStatus::BufferTooSmall,
            format!("buffer of {capacity} bytes cannot hold {} bytes plus terminator", s.len()),
        ));
    }
    std::ptr::copy_nonoverlapping(s.as_ptr(), buf as *mut u8, s.len());
    *buf.add(s.len()) = 0;
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gqe_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copies the calling thread's last error message (empty after a success).
///
/// # Safety
/// `buf` must point to `capacity` writable bytes or be null; `needed` must
/// be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gqe_last_error_message(buf: *mut c_char, capacity: usize, needed: *mut usize) -> GqeStatus {
    let msg = LAST_ERROR.with(|e| e.borrow().clone());
    match copy_out(&msg, buf, capacity, needed) {
        Ok(()) => GqeStatus::Ok,
        Err(Failure(status, _)) => status,
    }
}

/// Loads a graph directory written by `gqe ingest`.
///
/// # Safety
/// `dir` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gqe_graph_load(dir: *const c_char, out: *mut *mut GqeGraph) -> GqeStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let g = load_graph_dir(Path::new(text(dir, "dir")?))?;
        *out = Box::into_raw(Box::new(GqeGraph { graph: Arc::new(g) }));
        Ok(())
    })
}

/// Generates a synthetic graph from a spec such as `blocks:3,100,0.5`.
///
/// # Safety
/// `spec` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gqe_graph_synthetic(spec: *const c_char, seed: u64, out: *mut *mut GqeGraph) -> GqeStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let g = generate(&SyntheticSpec::parse(text(spec, "spec")?)?, seed)?;
        *out = Box::into_raw(Box::new(GqeGraph { graph: Arc::new(g) }));
        Ok(())
    })
}

/// Releases a graph. Models created from it stay valid. Null is ignored.
///
/// # Safety
/// `graph` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn gqe_graph_free(graph: *mut GqeGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Number of nodes, or 0 for a null handle.
///
/// # Safety
/// `graph` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn gqe_graph_node_count(graph: *const GqeGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.graph.node_count())
}

/// Number of materialized edges (inverses included), or 0 for a null handle.
///
/// # Safety
/// `graph` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn gqe_graph_edge_count(graph: *const GqeGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.graph.edge_count())
}

/// Looks up a node id by name.
///
/// # Safety
/// `graph` must be a live handle, `name` a NUL-terminated string and
/// `node` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gqe_graph_node_id(graph: *const GqeGraph, name: *const c_char, node: *mut u32) -> GqeStatus {
    guard(|| {
        let g = &handle(graph, "graph")?.graph;
        let name = text(name, "name")?;
        if node.is_null() {
            return Err(null("node"));
        }
        let v = g
            .node_by_name(name)
            .ok_or_else(|| Failure(GqeStatus::Argument, format!("unknown node `{name}`")))?;
        *node = v.0;
        Ok(())
    })
}

/// Copies a node's name.
///
/// # Safety
/// `graph` must be a live handle; see the module notes for buffers.
#[no_mangle]
pub unsafe extern "C" fn gqe_graph_node_name(
    graph: *const GqeGraph,
    node: u32,
    buf: *mut c_char,
    capacity: usize,
    needed: *mut usize,
) -> GqeStatus {
    guard(|| {
        let g = &handle(graph, "graph")?.graph;
        if !g.contains_node(NodeId(node)) {
            return Err(Failure(GqeStatus::Argument, format!("node id {node} out of range")));
        }
        copy_out(g.node_name(NodeId(node)), buf, capacity, needed)
    })
}

/// Loads a checkpoint written by `gqe train` against `graph`'s schema.
///
/// # Safety
/// `graph` must be a live handle, `path` a NUL-terminated string and `out`
/// a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gqe_model_load(graph: *const GqeGraph, path: *const c_char, out: *mut *mut GqeModel) -> GqeStatus {
    guard(|| {
        let g = handle(graph, "graph")?.graph.clone();
        let path = text(path, "path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let (params, _) = load_checkpoint(Path::new(path), &g)?;
        *out = Box::into_raw(Box::new(GqeModel { params, graph: g }));
        Ok(())
    })
}

/// Builds the exact one-hot parameters of `graph`.
///
/// # Safety
/// `graph` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gqe_model_exact(graph: *const GqeGraph, out: *mut *mut GqeModel) -> GqeStatus {
    guard(|| {
        let g = handle(graph, "graph")?.graph.clone();
        if out.is_null() {
            return Err(null("out"));
        }
        let params = exact_parameters(&g, EXACT_MEMORY_BUDGET)?;
        *out = Box::into_raw(Box::new(GqeModel { params, graph: g }));
        Ok(())
    })
}

/// Writes the model as a checkpoint file.
///
/// # Safety
/// `model` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn gqe_model_save(model: *const GqeModel, path: *const c_char) -> GqeStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let path = text(path, "path")?;
        save_checkpoint(Path::new(path), &m.params, &m.graph, &CheckpointExtras::default())?;
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn gqe_model_free(model: *mut GqeModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Embedding dimension, or 0 for a null handle.
///
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn gqe_model_dim(model: *const GqeModel) -> usize {
    model.as_ref().map_or(0, |m| m.params.dim)
}

/// 1 for exact-mode models, 0 otherwise (including null).
///
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn gqe_model_is_exact(model: *const GqeModel) -> i32 {
    model.as_ref().map_or(0, |m| (m.params.mode == Mode::Exact) as i32)
}

/// Encodes a query (JSON text) into `out`, which holds `capacity` doubles.
///
/// # Safety
/// `model` must be a live handle, `query_json` a NUL-terminated string and
/// `out` must point to `capacity` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn gqe_embed_query(
    model: *const GqeModel,
    query_json: *const c_char,
    out: *mut f64,
    capacity: usize,
) -> GqeStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let q = parse_query(text(query_json, "query_json")?, &m.graph)?;
        if out.is_null() {
            return Err(null("out"));
        }
        if capacity < m.params.dim {
            return Err(Failure(
                GqeStatus::BufferTooSmall,
                format!("embedding has {} entries, buffer holds {capacity}", m.params.dim),
            ));
        }
        let (emb, _) = m.params.encode_query(&m.graph, &q)?;
        std::ptr::copy_nonoverlapping(emb.vector.as_slice().as_ptr(), out, m.params.dim);
        Ok(())
    })
}

/// Ranks the nodes of the query's target type by score and writes the best
/// `top_k` node ids and scores (descending score, ties by ascending id).
/// `written` receives the number of rows filled.
///
/// # Safety
/// `model` must be a live handle, `query_json` a NUL-terminated string,
/// `nodes` and `scores` must each point to `top_k` writable elements (or
/// may be null when `top_k` is 0), and `written` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gqe_answer(
    model: *const GqeModel,
    query_json: *const c_char,
    top_k: usize,
    nodes: *mut u32,
    scores: *mut f64,
    written: *mut usize,
) -> GqeStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let q = parse_query(text(query_json, "query_json")?, &m.graph)?;
        if written.is_null() || (top_k > 0 && (nodes.is_null() || scores.is_null())) {
            return Err(null("output buffer"));
        }
        let ranked = m.params.answer(&m.graph, &q, top_k)?;
        for (i, (v, s)) in ranked.iter().enumerate() {
            *nodes.add(i) = v.0;
            *scores.add(i) = *s;
        }
        *written = ranked.len();
        Ok(())
    })
}
