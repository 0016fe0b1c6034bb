use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde_json::json;

use super::config::ConfigValues;
use super::{AnswerArgs, EvalArgs, IngestArgs, OracleCheckArgs, SampleArgs, TrainArgs};
use super::{EXIT_OK, EXIT_VIOLATION};
use crate::checkpoint::{load_checkpoint, save_checkpoint, CheckpointExtras};
use crate::error::{GqeError, Result};
use crate::evaluation::{
    check_exactness, evaluate, evaluate_with, fit_baseline_scale, BaselineScorer, EvalOptions,
    NegativeSelection,
};
use crate::fsutil::{write_atomic, DirLock};
use crate::kgraph::synthetic::{generate, SyntheticSpec};
use crate::kgraph::{self, load_graph_dir, split_edges, write_graph, GraphSplit, IngestOptions, TypedGraph};
use crate::model::{exact_parameters, Mode, ModelParams, Psi, Variant, EXACT_MEMORY_BUDGET};
use crate::querydag::{parse_query, QueryDag, Structure};
use crate::sampler::{
    build_dataset, read_dataset, read_manifest, read_part, write_dataset, DatasetManifest,
    DatasetSpec, NegativeSource, SplitPart,
};
use crate::training::{train as run_training, Stages, TrainConfig};

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const TRAIN_LOG_FILE: &str = "train_log.ndjson";
pub const SUMMARY_FILE: &str = "train_summary.json";

fn required<T>(slot: Option<T>, flag: &str, what: &str) -> Result<T> {
    slot.ok_or_else(|| GqeError::Argument(format!("missing --{flag} ({what})")))
}

fn parsed<T: FromStr<Err = GqeError>>(slot: Option<&str>, default: T) -> Result<T> {
    slot.map_or(Ok(default), T::from_str)
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| GqeError::io("<stdout>", e))
}

/// A checkpoint path may name the file or the directory `gqe train` wrote.
pub fn resolve_checkpoint(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(CHECKPOINT_FILE)
    } else {
        path.to_path_buf()
    }
}

/// Rebuilds the edge split a dataset was sampled from.
fn load_split(g: &TypedGraph, data: &Path) -> Result<(GraphSplit, DatasetManifest)> {
    let manifest = read_manifest(data)?;
    let split = split_edges(g, manifest.split_fraction, manifest.spec.seed)?;
    Ok((split, manifest))
}

fn graph_summary(g: &TypedGraph) -> serde_json::Value {
    json!({
        "nodes": g.node_count(),
        "base_edges": g.base_edge_count(),
        "node_types": g.node_types().len(),
        "relations": g.relations().len(),
    })
}

pub(super) fn ingest(a: &mut IngestArgs, cfg: &mut ConfigValues, seed: u64, out: &mut dyn Write) -> Result<i32> {
    cfg.fill("edges", &mut a.edges)?;
    cfg.fill("node_types", &mut a.node_types)?;
    cfg.fill("features", &mut a.features)?;
    cfg.fill("synthetic", &mut a.synthetic)?;
    cfg.fill("min_relation_edges", &mut a.min_relation_edges)?;
    cfg.fill("out", &mut a.out)?;
    cfg.finish()?;
    let dir = required(a.out.clone(), "out", "graph directory to write")?;
    let g = match (&a.synthetic, &a.edges, &a.node_types) {
        (Some(spec), None, None) if a.features.is_none() => generate(&SyntheticSpec::parse(spec)?, seed)?,
        (None, Some(edges), Some(types)) => kgraph::ingest(
            edges,
            types,
            a.features.as_deref(),
            &IngestOptions {
                min_relation_edges: a.min_relation_edges.unwrap_or(0),
            },
        )?,
        (Some(_), _, _) => {
            return Err(GqeError::Argument(
                "--synthetic cannot be combined with --edges, --node-types or --features".into(),
            ))
        }
        _ => {
            return Err(GqeError::Argument(
                "need --edges and --node-types, or --synthetic SPEC".into(),
            ))
        }
    };
    if g.edge_count() == 0 {
        log::warn!("graph has no edges");
    }
    let _lock = DirLock::acquire(&dir)?;
    write_graph(&g, &dir)?;
    let s = graph_summary(&g);
    emit(
        out,
        &format!(
            "nodes\t{}\nbase_edges\t{}\nnode_types\t{}\nrelations\t{}\n",
            s["nodes"], s["base_edges"], s["node_types"], s["relations"]
        ),
    )?;
    Ok(EXIT_OK)
}

pub(super) fn sample(a: &mut SampleArgs, cfg: &mut ConfigValues, seed: u64, out: &mut dyn Write) -> Result<i32> {
    cfg.fill("graph", &mut a.graph)?;
    cfg.fill("out", &mut a.out)?;
    cfg.fill("split_fraction", &mut a.split_fraction)?;
    cfg.fill("train", &mut a.train)?;
    cfg.fill("valid", &mut a.valid)?;
    cfg.fill("test", &mut a.test)?;
    cfg.fill("pool_size", &mut a.pool_size)?;
    cfg.fill("test_negatives", &mut a.test_negatives)?;
    cfg.finish()?;
    let graph = required(a.graph.clone(), "graph", "graph directory from `gqe ingest`")?;
    let dir = required(a.out.clone(), "out", "dataset directory to write")?;
    let defaults = DatasetSpec::default();
    let first = defaults.counts.values().next().copied().expect("default counts");
    let mut spec = DatasetSpec::uniform(
        a.train.unwrap_or(first.train),
        a.valid.unwrap_or(first.valid),
        a.test.unwrap_or(first.test),
        seed,
    );
    spec.pool_size = a.pool_size.unwrap_or(defaults.pool_size);
    spec.test_negatives = parsed(a.test_negatives.as_deref(), NegativeSource::Full)?;
    let fraction = a.split_fraction.unwrap_or(0.1);

    let g = load_graph_dir(&graph)?;
    let split = split_edges(&g, fraction, seed)?;
    let _lock = DirLock::acquire(&dir)?;
    let ds = build_dataset(&split, &spec)?;
    for w in &ds.warnings {
        log::warn!("{w}");
    }
    let manifest = write_dataset(&dir, &ds, &g, &spec, fraction)?;
    let mut text = String::from("structure\ttrain\tvalid\ttest\n");
    for s in Structure::ALL {
        let n = |p: SplitPart| manifest.counts.get(&p).and_then(|c| c.get(&s)).copied().unwrap_or(0);
        text.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            s.name(),
            n(SplitPart::Train),
            n(SplitPart::Valid),
            n(SplitPart::Test)
        ));
    }
    emit(out, &text)?;
    Ok(EXIT_OK)
}

fn parse_stages(s: Option<&str>) -> Result<Stages> {
    match s.unwrap_or("full") {
        "full" => Ok(Stages::Full),
        "edge-only" | "edge_only" => Ok(Stages::EdgeOnly),
        other => Err(GqeError::Argument(format!("unknown stages `{other}` (full | edge-only)"))),
    }
}

pub(super) fn train(a: &mut TrainArgs, cfg: &mut ConfigValues, seed: u64, out: &mut dyn Write) -> Result<i32> {
    cfg.fill("graph", &mut a.graph)?;
    cfg.fill("data", &mut a.data)?;
    cfg.fill("out", &mut a.out)?;
    cfg.fill("variant", &mut a.variant)?;
    cfg.fill("psi", &mut a.psi)?;
    cfg.fill("mode", &mut a.mode)?;
    cfg.fill("stages", &mut a.stages)?;
    cfg.fill("dim", &mut a.dim)?;
    cfg.fill("learning_rate", &mut a.learning_rate)?;
    cfg.fill("batch_size", &mut a.batch_size)?;
    cfg.fill("margin", &mut a.margin)?;
    cfg.fill("chain1_weight", &mut a.chain1_weight)?;
    cfg.fill("path_weight", &mut a.path_weight)?;
    cfg.fill("intersection_weight", &mut a.intersection_weight)?;
    cfg.fill("validation_interval", &mut a.validation_interval)?;
    cfg.fill("patience", &mut a.patience)?;
    cfg.fill("clip_norm", &mut a.clip_norm)?;
    cfg.fill("max_stage1_batches", &mut a.max_stage1_batches)?;
    cfg.fill("max_stage2_batches", &mut a.max_stage2_batches)?;
    cfg.fill("mirror_hard_negatives", &mut a.mirror_hard_negatives)?;
    cfg.finish()?;

    let graph = required(a.graph.clone(), "graph", "graph directory from `gqe ingest`")?;
    let dir = required(a.out.clone(), "out", "checkpoint directory to write")?;
    let variant = parsed(a.variant.as_deref(), Variant::Bilinear)?;
    let psi = parsed(a.psi.as_deref(), Psi::Min)?;
    let mode = parsed(a.mode.as_deref(), Mode::Learned)?;
    let stages = parse_stages(a.stages.as_deref())?;
    let d = TrainConfig::default();
    let tc = TrainConfig {
        learning_rate: a.learning_rate.unwrap_or(d.learning_rate),
        batch_size: a.batch_size.unwrap_or(d.batch_size),
        dim: a.dim.unwrap_or(d.dim),
        margin: a.margin.unwrap_or(d.margin),
        chain1_weight: a.chain1_weight.unwrap_or(d.chain1_weight),
        path_weight: a.path_weight.unwrap_or(d.path_weight),
        intersection_weight: a.intersection_weight.unwrap_or(d.intersection_weight),
        validation_interval: a.validation_interval.unwrap_or(d.validation_interval),
        patience: a.patience.unwrap_or(d.patience),
        clip_norm: a.clip_norm.unwrap_or(d.clip_norm),
        max_stage1_batches: a.max_stage1_batches.unwrap_or(d.max_stage1_batches),
        max_stage2_batches: a.max_stage2_batches.unwrap_or(d.max_stage2_batches),
        mirror_hard_negatives: a.mirror_hard_negatives.unwrap_or(d.mirror_hard_negatives),
        seed,
        adam: d.adam,
    };
    tc.validate()?;

    let g = load_graph_dir(&graph)?;
    let split = a.data.as_deref().map(|data| load_split(&g, data)).transpose()?;
    let manifest = split.as_ref().map(|(_, m)| m.clone());
    let ckpt = dir.join(CHECKPOINT_FILE);

    let mut inputs = json!({
        "graph": graph_summary(&g),
        "dataset": manifest,
        "mode": mode,
        "variant": variant,
        "psi": psi,
    });
    if mode == Mode::Learned {
        inputs["config"] = serde_json::to_value(&tc)?;
        inputs["stages"] = serde_json::to_value(stages)?;
    }
    if !a.force && ckpt.exists() {
        if let Ok((_, extras)) = load_checkpoint(&ckpt, &g) {
            if extras.metadata.get("inputs") == Some(&inputs) {
                log::info!("{} is up to date; pass --force to retrain", ckpt.display());
                emit(out, &format!("up to date\t{}\n", ckpt.display()))?;
                return Ok(EXIT_OK);
            }
        }
    }
    let _lock = DirLock::acquire(&dir)?;

    match mode {
        Mode::Exact => {
            if variant != Variant::Bilinear || psi != Psi::Min {
                return Err(GqeError::Argument(
                    "exact mode requires --variant bilinear --psi min".into(),
                ));
            }
            let base = split.as_ref().map_or(&g, |(s, _)| &s.train_graph);
            let params = exact_parameters(base, EXACT_MEMORY_BUDGET)?;
            let mut extras = CheckpointExtras::default();
            extras.metadata.insert("inputs".into(), inputs);
            save_checkpoint(&ckpt, &params, &g, &extras)?;
            emit(
                out,
                &format!("mode\texact\ndim\t{}\ncheckpoint\t{}\n", params.dim, ckpt.display()),
            )?;
            Ok(EXIT_OK)
        }
        Mode::Learned => {
            let data = required(a.data.clone(), "data", "dataset directory from `gqe sample`")?;
            let (split, _) = split.expect("data given");
            let ds = read_dataset(&data, &g)?;
            let params = ModelParams::init(&split.train_graph, variant, psi, tc.dim, seed)?;
            log::info!(
                "training {variant} (psi {psi}, d={}) on {} training examples",
                tc.dim,
                ds.train.len()
            );
            let outcome = run_training(params, &split.train_graph, &ds, &tc, stages)?;
            let summary = json!({
                "best_validation": outcome.best_validation,
                "stage1_batches": outcome.stage1_batches,
                "stage2_batches": outcome.stage2_batches,
                "clipped_steps": outcome.clipped_steps,
                "degenerate_terms": outcome.degenerate_terms,
                "aborted": outcome.aborted,
                "validations": outcome.validations,
            });
            let mut extras = CheckpointExtras {
                optimizer: tc.adam,
                train_config: Some(tc.clone()),
                metadata: BTreeMap::new(),
            };
            extras.metadata.insert("inputs".into(), inputs);
            extras.metadata.insert("best_validation".into(), json!(outcome.best_validation));
            write_atomic(&dir.join(TRAIN_LOG_FILE), outcome.log_ndjson().as_bytes())?;
            let mut text = serde_json::to_string_pretty(&summary)?;
            text.push('\n');
            write_atomic(&dir.join(SUMMARY_FILE), text.as_bytes())?;
            if let Some(reason) = &outcome.aborted {
                return Err(GqeError::Numeric(format!("training aborted: {reason}")));
            }
            save_checkpoint(&ckpt, &outcome.params, &g, &extras)?;
            emit(
                out,
                &format!(
                    "stage1_batches\t{}\nstage2_batches\t{}\nbest_validation\t{}\ncheckpoint\t{}\n",
                    outcome.stage1_batches,
                    outcome.stage2_batches,
                    outcome.best_validation.map_or("none".into(), |v| format!("{v:.6}")),
                    ckpt.display()
                ),
            )?;
            Ok(EXIT_OK)
        }
    }
}

pub(super) fn eval(a: &mut EvalArgs, cfg: &mut ConfigValues, seed: u64, out: &mut dyn Write) -> Result<i32> {
    cfg.fill("graph", &mut a.graph)?;
    cfg.fill("data", &mut a.data)?;
    cfg.fill("checkpoint", &mut a.checkpoint)?;
    cfg.fill("split", &mut a.split)?;
    cfg.fill("negatives", &mut a.negatives)?;
    cfg.fill("include_chain1", &mut a.include_chain1)?;
    cfg.fill("baseline", &mut a.baseline)?;
    cfg.fill("out", &mut a.out)?;
    cfg.fill("ranks", &mut a.ranks)?;
    cfg.finish()?;
    let graph = required(a.graph.clone(), "graph", "graph directory from `gqe ingest`")?;
    let data = required(a.data.clone(), "data", "dataset directory from `gqe sample`")?;
    let ckpt = resolve_checkpoint(&required(a.checkpoint.clone(), "checkpoint", "checkpoint from `gqe train`")?);
    let part = parsed(a.split.as_deref(), SplitPart::Test)?;
    let opts = EvalOptions {
        negatives: parsed(a.negatives.as_deref(), NegativeSelection::Both)?,
        include_chain1: a.include_chain1.unwrap_or(true),
        seed,
    };

    let g = load_graph_dir(&graph)?;
    let (params, _) = load_checkpoint(&ckpt, &g)?;
    let examples = read_part(&data, part, &g)?;
    let report = if a.baseline.unwrap_or(false) {
        let edges: Vec<_> = read_part(&data, SplitPart::Valid, &g)?
            .into_iter()
            .filter(|e| e.query.structure == Some(Structure::Chain1))
            .collect();
        let fit = fit_baseline_scale(&params, &g, &edges)?;
        log::info!("baseline scale {} (grid log-likelihoods {:?})", fit.scale, fit.log_likelihoods);
        let eligible: Vec<_> = examples
            .into_iter()
            .filter(|e| !e.query.has_bound_variables())
            .collect();
        let scorer = BaselineScorer {
            params: &params,
            graph: &g,
            scale: fit.scale,
        };
        evaluate_with(&scorer, &eligible, &opts)?
    } else {
        evaluate(&params, &g, &examples, &opts)?
    };
    if report.skipped > 0 {
        log::warn!("{} examples skipped (degenerate score or empty pool)", report.skipped);
    }
    emit(out, &report.to_table())?;
    if let Some(path) = &a.out {
        write_atomic(path, report.to_json().as_bytes())?;
    }
    if let Some(path) = &a.ranks {
        write_atomic(path, report.ranks_csv().as_bytes())?;
    }
    Ok(EXIT_OK)
}

fn read_query_source(src: &str) -> Result<String> {
    if src == "-" {
        let mut text = String::new();
        std::io::stdin()
            .read_to_string(&mut text)
            .map_err(|e| GqeError::io("<stdin>", e))?;
        return Ok(text);
    }
    if src.trim_start().starts_with('{') {
        return Ok(src.to_string());
    }
    let path = Path::new(src);
    std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => GqeError::MissingInput {
            path: path.to_path_buf(),
            hint: "pass the query as inline JSON, a file path, or `-` for stdin".into(),
        },
        _ => GqeError::io(path, e),
    })
}

/// The `answer` output: a header and up to `top_k` rows of
/// `rank<TAB>node<TAB>score`. Exact-mode models list members only.
pub fn answer_lines(params: &ModelParams, g: &TypedGraph, q: &QueryDag, top_k: usize) -> Result<String> {
    let mut text = String::from("rank\tnode\tscore\n");
    if top_k == 0 {
        q.ensure_valid(g)?;
        return Ok(text);
    }
    let ranked = params.answer(g, q, top_k)?;
    let rows = ranked
        .into_iter()
        .filter(|&(_, s)| params.mode == Mode::Learned || s > 0.0);
    for (i, (v, s)) in rows.enumerate() {
        text.push_str(&format!("{}\t{}\t{s:.6}\n", i + 1, g.node_name(v)));
    }
    Ok(text)
}

pub(super) fn answer(a: &mut AnswerArgs, cfg: &mut ConfigValues, out: &mut dyn Write) -> Result<i32> {
    cfg.fill("graph", &mut a.graph)?;
    cfg.fill("checkpoint", &mut a.checkpoint)?;
    cfg.fill("query", &mut a.query)?;
    cfg.fill("top_k", &mut a.top_k)?;
    cfg.finish()?;
    let graph = required(a.graph.clone(), "graph", "graph directory from `gqe ingest`")?;
    let ckpt = resolve_checkpoint(&required(a.checkpoint.clone(), "checkpoint", "checkpoint from `gqe train`")?);
    let src = required(a.query.clone(), "query", "query JSON, a file, or `-`")?;
    let g = load_graph_dir(&graph)?;
    let (params, _) = load_checkpoint(&ckpt, &g)?;
    let q = parse_query(&read_query_source(&src)?, &g)?;
    emit(out, &answer_lines(&params, &g, &q, a.top_k.unwrap_or(10))?)?;
    Ok(EXIT_OK)
}

pub(super) fn oracle_check(
    a: &mut OracleCheckArgs,
    cfg: &mut ConfigValues,
    seed: u64,
    out: &mut dyn Write,
) -> Result<i32> {
    cfg.fill("graph", &mut a.graph)?;
    cfg.fill("checkpoint", &mut a.checkpoint)?;
    cfg.fill("queries", &mut a.queries)?;
    cfg.fill("out", &mut a.out)?;
    cfg.finish()?;
    let graph = required(a.graph.clone(), "graph", "graph directory from `gqe ingest`")?;
    let g = load_graph_dir(&graph)?;
    if g.node_count() == 0 || g.edge_count() == 0 {
        log::warn!("graph has no edges; nothing to check");
        emit(out, "checked\t0\nmismatches\t0\n")?;
        return Ok(EXIT_OK);
    }
    let params = match &a.checkpoint {
        Some(p) => {
            let (params, _) = load_checkpoint(&resolve_checkpoint(p), &g)?;
            if params.mode != Mode::Exact {
                return Err(GqeError::Argument(
                    "oracle-check needs an exact-mode checkpoint (`gqe train --mode exact`)".into(),
                ));
            }
            params
        }
        None => exact_parameters(&g, EXACT_MEMORY_BUDGET)?,
    };
    let report = check_exactness(&params, &g, a.queries.unwrap_or(100), seed)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    let mut text = String::from("structure\tchecked\n");
    for (s, n) in &report.checked {
        text.push_str(&format!("{}\t{n}\n", s.name()));
    }
    text.push_str(&format!(
        "checked\t{}\nmismatches\t{}\n",
        report.total_checked(),
        report.mismatches.len()
    ));
    for m in &report.mismatches {
        text.push_str(&format!(
            "mismatch\t{}\t{}\tmissing={}\textra={}\n",
            m.structure.name(),
            m.query,
            m.missing.join(","),
            m.extra.join(",")
        ));
    }
    emit(out, &text)?;
    if let Some(path) = &a.out {
        let mut json = serde_json::to_string_pretty(&report)?;
        json.push('\n');
        write_atomic(path, json.as_bytes())?;
    }
    Ok(if report.passed() { EXIT_OK } else { EXIT_VIOLATION })
}
