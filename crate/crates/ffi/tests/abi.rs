use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use gqe::kgraph::synthetic::{generate, SyntheticSpec};
use gqe::querydag::{query_to_json, QueryDag, Structure};
use gqe_ffi::*;

const SPEC: &str = "random:30,2,2,0.1";

fn last_error() -> String {
    let mut needed = 0usize;
    unsafe { gqe_last_error_message(ptr::null_mut(), 0, &mut needed) };
    let mut buf = vec![0 as std::ffi::c_char; needed + 1];
    let status = unsafe { gqe_last_error_message(buf.as_mut_ptr(), buf.len(), &mut needed) };
    assert_eq!(status, GqeStatus::Ok);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap().to_string()
}

fn synthetic(seed: u64) -> *mut GqeGraph {
    let spec = CString::new(SPEC).unwrap();
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { gqe_graph_synthetic(spec.as_ptr(), seed, &mut g) }, GqeStatus::Ok);
    g
}

/// A chain1 query from the first base edge, with the oracle's answer set.
fn edge_query(seed: u64) -> (CString, Vec<u32>) {
    let g = generate(&SyntheticSpec::parse(SPEC).unwrap(), seed).unwrap();
    let e = g.base_edges().next().unwrap();
    let q = QueryDag::from_structure(
        Structure::Chain1,
        &[e.head],
        &[e.relation],
        &[g.type_of(e.head), g.type_of(e.tail)],
    );
    let members = g.neighbors(e.head, e.relation).unwrap().iter().map(|v| v.0).collect();
    (CString::new(query_to_json(&q, &g)).unwrap(), members)
}

#[test]
fn exact_model_answers_match_neighbors() {
    let g = synthetic(4);
    assert_eq!(unsafe { gqe_graph_node_count(g) }, 30);
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { gqe_model_exact(g, &mut m) }, GqeStatus::Ok);
    assert_eq!(unsafe { gqe_model_dim(m) }, 30);
    assert_eq!(unsafe { gqe_model_is_exact(m) }, 1);

    let (query, mut expected) = edge_query(4);
    let mut nodes = vec![0u32; 30];
    let mut scores = vec![0f64; 30];
    let mut written = 0usize;
    let status = unsafe { gqe_answer(m, query.as_ptr(), 30, nodes.as_mut_ptr(), scores.as_mut_ptr(), &mut written) };
    assert_eq!(status, GqeStatus::Ok);
    assert!(written > 0);
    let mut positive: Vec<u32> = (0..written).filter(|&i| scores[i] > 0.0).map(|i| nodes[i]).collect();
    positive.sort_unstable();
    expected.sort_unstable();
    assert_eq!(positive, expected);
    assert!(scores[..written].windows(2).all(|w| w[0] >= w[1]));

    let mut emb = vec![0f64; 30];
    assert_eq!(unsafe { gqe_embed_query(m, query.as_ptr(), emb.as_mut_ptr(), 30) }, GqeStatus::Ok);
    assert_eq!(emb.iter().filter(|&&x| x > 0.0).count(), expected.len());
    assert_eq!(
        unsafe { gqe_embed_query(m, query.as_ptr(), emb.as_mut_ptr(), 3) },
        GqeStatus::BufferTooSmall
    );

    unsafe {
        gqe_model_free(m);
        gqe_graph_free(g);
    }
}

#[test]
fn node_names_round_trip_and_buffers_are_checked() {
    let g = synthetic(1);
    let name = CString::new("v7").unwrap();
    let mut id = 0u32;
    assert_eq!(unsafe { gqe_graph_node_id(g, name.as_ptr(), &mut id) }, GqeStatus::Ok);
    let mut needed = 0usize;
    let mut small = [0 as std::ffi::c_char; 2];
    assert_eq!(
        unsafe { gqe_graph_node_name(g, id, small.as_mut_ptr(), small.len(), &mut needed) },
        GqeStatus::BufferTooSmall
    );
    assert_eq!(needed, 2);
    let mut buf = [0 as std::ffi::c_char; 8];
    assert_eq!(
        unsafe { gqe_graph_node_name(g, id, buf.as_mut_ptr(), buf.len(), &mut needed) },
        GqeStatus::Ok
    );
    assert_eq!(unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap(), "v7");
    assert_eq!(
        unsafe { gqe_graph_node_name(g, 999, buf.as_mut_ptr(), buf.len(), &mut needed) },
        GqeStatus::Argument
    );
    assert!(last_error().contains("999"));
    unsafe { gqe_graph_free(g) };
}

#[test]
fn errors_report_status_and_message() {
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { gqe_graph_load(ptr::null(), &mut g) }, GqeStatus::NullPointer);
    assert!(last_error().contains("dir"));
    let missing = CString::new("/nonexistent/graph").unwrap();
    assert_eq!(unsafe { gqe_graph_load(missing.as_ptr(), &mut g) }, GqeStatus::Io);
    let bad = CString::new("blocks:x").unwrap();
    assert_eq!(unsafe { gqe_graph_synthetic(bad.as_ptr(), 0, &mut g) }, GqeStatus::Argument);
    assert!(g.is_null());

    let g = synthetic(2);
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { gqe_model_exact(g, &mut m) }, GqeStatus::Ok);
    let junk = CString::new("{\"nodes\": [").unwrap();
    let mut written = 0;
    assert_eq!(
        unsafe { gqe_answer(m, junk.as_ptr(), 0, ptr::null_mut(), ptr::null_mut(), &mut written) },
        GqeStatus::Parse
    );
    assert!(!last_error().is_empty());
    assert_eq!(unsafe { gqe_model_dim(ptr::null()) }, 0);
    unsafe {
        gqe_model_free(m);
        gqe_graph_free(g);
        gqe_graph_free(ptr::null_mut());
        gqe_model_free(ptr::null_mut());
    }
}

#[test]
fn checkpoints_round_trip_and_versions_are_enforced() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exact.ckpt");
    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    let g = synthetic(3);
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { gqe_model_exact(g, &mut m) }, GqeStatus::Ok);
    assert_eq!(unsafe { gqe_model_save(m, cpath.as_ptr()) }, GqeStatus::Ok);
    let first = std::fs::read(&path).unwrap();

    let mut loaded = ptr::null_mut();
    assert_eq!(unsafe { gqe_model_load(g, cpath.as_ptr(), &mut loaded) }, GqeStatus::Ok);
    let again = dir.path().join("again.ckpt");
    let cagain = CString::new(again.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { gqe_model_save(loaded, cagain.as_ptr()) }, GqeStatus::Ok);
    assert_eq!(std::fs::read(&again).unwrap(), first);

    let text = String::from_utf8_lossy(&first).replacen("\"version\":1", "\"version\":2", 1);
    std::fs::write(&path, text.as_bytes()).unwrap();
    let mut refused = ptr::null_mut();
    assert_eq!(
        unsafe { gqe_model_load(g, cpath.as_ptr(), &mut refused) },
        GqeStatus::VersionMismatch
    );
    assert!(refused.is_null());

    let other = CString::new("random:30,3,2,0.1").unwrap();
    let mut g2 = ptr::null_mut();
    assert_eq!(unsafe { gqe_graph_synthetic(other.as_ptr(), 3, &mut g2) }, GqeStatus::Ok);
    assert_eq!(unsafe { gqe_model_load(g2, cagain.as_ptr(), &mut refused) }, GqeStatus::Schema);
    unsafe {
        gqe_model_free(loaded);
        gqe_model_free(m);
        gqe_graph_free(g);
        gqe_graph_free(g2);
    }
}

#[test]
fn version_string_is_static() {
    let v = unsafe { CStr::from_ptr(gqe_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let program = r#"
#include "gqe.h"
int main(void) {
    GqeGraph *g = NULL;
    GqeModel *m = NULL;
    size_t needed = 0;
    GqeStatus s = gqe_graph_synthetic("blocks:3,10,0.5", 1, &g);
    if (s == GQE_STATUS_OK) s = gqe_model_exact(g, &m);
    gqe_last_error_message(NULL, 0, &needed);
    gqe_model_free(m);
    gqe_graph_free(g);
    return (int)s;
}
"#;
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use_header.c");
    std::fs::write(&src, program).unwrap();
    let status = match Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&header)
        .arg(&src)
        .status()
    {
        Ok(s) => s,
        Err(_) => {
            eprintln!("no C compiler available; skipping header check");
            return;
        }
    };
    assert!(status.success());
}
