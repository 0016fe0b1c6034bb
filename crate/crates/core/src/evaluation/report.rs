use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{apr, auc};
use crate::error::{GqeError, Result};
use crate::kgraph::{NodeId, TypedGraph};
use crate::model::ModelParams;
use crate::querydag::Structure;
use crate::rng::{stream, Stream};
use crate::sampler::QueryExample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NegativeKind {
    Standard,
    Hard,
}

impl NegativeKind {
    pub fn name(self) -> &'static str {
        match self {
            NegativeKind::Standard => "standard",
            NegativeKind::Hard => "hard",
        }
    }
}

/// Which negative pools to evaluate against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NegativeSelection {
    Standard,
    Hard,
    #[default]
    Both,
}

impl NegativeSelection {
    fn includes(self, kind: NegativeKind) -> bool {
        matches!(
            (self, kind),
            (NegativeSelection::Both, _)
                | (NegativeSelection::Standard, NegativeKind::Standard)
                | (NegativeSelection::Hard, NegativeKind::Hard)
        )
    }
}

impl std::str::FromStr for NegativeSelection {
    type Err = GqeError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(NegativeSelection::Standard),
            "hard" => Ok(NegativeSelection::Hard),
            "both" => Ok(NegativeSelection::Both),
            _ => Err(GqeError::Argument(format!(
                "unknown negative kind `{s}` (standard | hard | both)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub negatives: NegativeSelection,
    /// Count chain1 (edge prediction) as a macro-average cell.
    pub include_chain1: bool,
    pub seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            negatives: NegativeSelection::Both,
            include_chain1: true,
            seed: 0,
        }
    }
}

/// Metrics of one (structure, negative kind) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub structure: Structure,
    pub negatives: NegativeKind,
    pub auc: f64,
    pub apr: f64,
    pub examples: usize,
    pub skipped: usize,
    pub in_macro: bool,
}

/// Per-example outcome, exportable as CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleRank {
    pub index: usize,
    pub structure: Structure,
    pub negatives: NegativeKind,
    pub positive_score: f64,
    pub sampled_negative_score: f64,
    pub apr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub cells: Vec<CellMetrics>,
    /// Mean AUC over cells with `in_macro`.
    pub macro_auc: f64,
    pub macro_apr: f64,
    pub macro_cells: usize,
    /// Examples dropped because a score was degenerate or a pool was empty.
    pub skipped: usize,
    #[serde(skip)]
    pub ranks: Vec<ExampleRank>,
}

impl MetricReport {
    pub fn cell(&self, s: Structure, kind: NegativeKind) -> Option<&CellMetrics> {
        self.cells.iter().find(|c| c.structure == s && c.negatives == kind)
    }

    /// Mean AUC over the macro cells whose structure satisfies `keep`.
    pub fn mean_auc_where(&self, keep: impl Fn(Structure) -> bool) -> Option<f64> {
        let v: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| keep(c.structure))
            .map(|c| c.auc)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<12} {:<9} {:>8} {:>8} {:>8} {:>8}",
            "structure", "negatives", "auc", "apr%", "examples", "skipped"
        );
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{:<12} {:<9} {:>8.4} {:>8.2} {:>8} {:>8}{}",
                c.structure.name(),
                c.negatives.name(),
                c.auc,
                100.0 * c.apr,
                c.examples,
                c.skipped,
                if c.in_macro { "" } else { "  (not in macro)" }
            );
        }
        let _ = writeln!(
            out,
            "{:<12} {:<9} {:>8.4} {:>8.2} {:>8}",
            "macro",
            format!("{} cells", self.macro_cells),
            self.macro_auc,
            100.0 * self.macro_apr,
            ""
        );
        out
    }

    pub fn ranks_csv(&self) -> String {
        let mut out = String::from("index,structure,negatives,positive_score,sampled_negative_score,apr\n");
        for r in &self.ranks {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.index,
                r.structure.name(),
                r.negatives.name(),
                r.positive_score,
                r.sampled_negative_score,
                r.apr
            );
        }
        out
    }
}

/// Scores `candidates` for one example; `Err` marks the example as skipped.
pub trait Scorer: Sync {
    fn scores(&self, ex: &QueryExample, candidates: &[NodeId]) -> Result<Vec<f64>>;
}

/// GQE scoring: encode the query once, cosine against each candidate.
pub struct ModelScorer<'a> {
    pub params: &'a ModelParams,
    pub graph: &'a TypedGraph,
}

impl Scorer for ModelScorer<'_> {
    fn scores(&self, ex: &QueryExample, candidates: &[NodeId]) -> Result<Vec<f64>> {
        let (emb, _) = self.params.encode_query(self.graph, &ex.query)?;
        candidates
            .iter()
            .map(|&v| self.params.score(&emb, &self.params.embed_node(self.graph, v)?))
            .collect()
    }
}

/// Evaluates GQE scoring on `examples`.
pub fn evaluate(
    params: &ModelParams,
    g: &TypedGraph,
    examples: &[QueryExample],
    opts: &EvalOptions,
) -> Result<MetricReport> {
    evaluate_with(&ModelScorer { params, graph: g }, examples, opts)
}

struct Job {
    index: usize,
    kind: NegativeKind,
    structure: Structure,
    sampled: usize,
}

/// Per cell: AUC pools every positive score against one seeded draw from
/// each example's pool; APR averages each example's percentile rank over
/// its whole pool. Hard cells exist only for intersection structures.
pub fn evaluate_with<S: Scorer>(
    scorer: &S,
    examples: &[QueryExample],
    opts: &EvalOptions,
) -> Result<MetricReport> {
    if examples.is_empty() {
        return Err(GqeError::Argument("no examples to evaluate".into()));
    }
    let mut rng = stream(opts.seed, Stream::Evaluation);
    let mut jobs = Vec::new();
    let mut pre_skipped: Vec<(Structure, NegativeKind)> = Vec::new();
    for (index, ex) in examples.iter().enumerate() {
        let Some(structure) = ex.query.structure else {
            continue;
        };
        for kind in [NegativeKind::Standard, NegativeKind::Hard] {
            if !opts.negatives.includes(kind) {
                continue;
            }
            if kind == NegativeKind::Hard && !structure.has_intersection() {
                continue;
            }
            let pool = pool_of(ex, kind);
            if pool.is_empty() {
                pre_skipped.push((structure, kind));
                continue;
            }
            let sampled = rng.gen_range(0..pool.len());
            jobs.push(Job {
                index,
                kind,
                structure,
                sampled,
            });
        }
    }
    let outcomes: Vec<Option<ExampleRank>> = jobs
        .par_iter()
        .map(|job| {
            let ex = &examples[job.index];
            let pool = pool_of(ex, job.kind);
            let mut cands = Vec::with_capacity(pool.len() + 1);
            cands.push(ex.positive);
            cands.extend_from_slice(pool);
            let scores = match scorer.scores(ex, &cands) {
                Ok(s) => s,
                Err(e) => {
                    log::debug!("example {} skipped: {e}", job.index);
                    return None;
                }
            };
            let rank = apr(scores[0], &scores[1..]).ok()?;
            Some(ExampleRank {
                index: job.index,
                structure: job.structure,
                negatives: job.kind,
                positive_score: scores[0],
                sampled_negative_score: scores[1 + job.sampled],
                apr: rank,
            })
        })
        .collect();
    let mut cells = Vec::new();
    let mut ranks = Vec::new();
    let mut skipped_total = 0;
    for s in Structure::ALL {
        for kind in [NegativeKind::Standard, NegativeKind::Hard] {
            let mut pos = Vec::new();
            let mut neg = Vec::new();
            let mut aprs = Vec::new();
            let mut skipped = pre_skipped.iter().filter(|c| **c == (s, kind)).count();
            for (job, out) in jobs.iter().zip(&outcomes) {
                if job.structure != s || job.kind != kind {
                    continue;
                }
                match out {
                    Some(r) => {
                        pos.push(r.positive_score);
                        neg.push(r.sampled_negative_score);
                        aprs.push(r.apr);
                        ranks.push(r.clone());
                    }
                    None => skipped += 1,
                }
            }
            skipped_total += skipped;
            if pos.is_empty() {
                continue;
            }
            cells.push(CellMetrics {
                structure: s,
                negatives: kind,
                auc: auc(&pos, &neg)?,
                apr: aprs.iter().sum::<f64>() / aprs.len() as f64,
                examples: pos.len(),
                skipped,
                in_macro: opts.include_chain1 || s != Structure::Chain1,
            });
        }
    }
    let in_macro: Vec<&CellMetrics> = cells.iter().filter(|c| c.in_macro).collect();
    let n = in_macro.len();
    let mean = |f: fn(&CellMetrics) -> f64| {
        if n == 0 {
            f64::NAN
        } else {
            in_macro.iter().map(|c| f(c)).sum::<f64>() / n as f64
        }
    };
    ranks.sort_by_key(|r| (r.index, r.negatives));
    Ok(MetricReport {
        macro_auc: mean(|c| c.auc),
        macro_apr: mean(|c| c.apr),
        macro_cells: n,
        cells,
        skipped: skipped_total,
        ranks,
    })
}

fn pool_of(ex: &QueryExample, kind: NegativeKind) -> &[NodeId] {
    match kind {
        NegativeKind::Standard => &ex.standard_negatives,
        NegativeKind::Hard => &ex.hard_negatives,
    }
}
