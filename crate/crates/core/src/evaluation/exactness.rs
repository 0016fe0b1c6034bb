use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GqeError, Result};
use crate::kgraph::TypedGraph;
use crate::model::ModelParams;
use crate::querydag::{denotation, query_to_json, QueryDag, Structure};
use crate::rng::{stream, Stream};
use crate::sampler::sample_query;

/// A query whose positive-score set differs from its denotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    pub structure: Structure,
    pub query: String,
    /// Members of the denotation that did not score above zero.
    pub missing: Vec<String>,
    /// Non-members that scored above zero.
    pub extra: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExactnessReport {
    pub checked: BTreeMap<Structure, usize>,
    pub mismatches: Vec<Mismatch>,
    pub warnings: Vec<String>,
}

impl ExactnessReport {
    pub fn total_checked(&self) -> usize {
        self.checked.values().sum()
    }

    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Compares `{v : score(q, v) > 0}` with the oracle denotation on `g`.
pub fn compare_with_oracle(params: &ModelParams, g: &TypedGraph, q: &QueryDag) -> Result<Option<Mismatch>> {
    let truth = denotation(q, g)?;
    let (emb, _) = params.encode_query(g, q)?;
    let mut missing = Vec::new();
    let mut extra = Vec::new();
    for (v, s) in params.score_all(g, &emb)? {
        match (s > 0.0, truth.contains(v)) {
            (false, true) => missing.push(g.node_name(v).to_string()),
            (true, false) => extra.push(g.node_name(v).to_string()),
            _ => {}
        }
    }
    Ok((!missing.is_empty() || !extra.is_empty()).then(|| Mismatch {
        structure: q.structure.unwrap_or(Structure::Chain1),
        query: query_to_json(q, g),
        missing,
        extra,
    }))
}

/// Samples `per_structure` queries of every catalog shape from `g` and
/// checks each against the oracle. Shapes the graph cannot realize are
/// reported as warnings, as is an empty graph.
pub fn check_exactness(
    params: &ModelParams,
    g: &TypedGraph,
    per_structure: usize,
    seed: u64,
) -> Result<ExactnessReport> {
    let mut report = ExactnessReport::default();
    if g.node_count() == 0 || g.edge_count() == 0 {
        report
            .warnings
            .push("graph has no edges; nothing to check".into());
        return Ok(report);
    }
    let mut rng = stream(seed, Stream::OracleCheck);
    let mut queries = Vec::new();
    for s in Structure::ALL {
        let mut drawn = 0;
        for _ in 0..per_structure {
            match sample_query(g, s, &mut rng) {
                Ok((q, _)) => {
                    queries.push(q);
                    drawn += 1;
                }
                Err(GqeError::SamplingInfeasible { .. }) => {
                    report
                        .warnings
                        .push(format!("{}: graph cannot realize this shape", s.name()));
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        report.checked.insert(s, drawn);
    }
    let results: Vec<Option<Mismatch>> = queries
        .par_iter()
        .map(|q| compare_with_oracle(params, g, q))
        .collect::<Result<_>>()?;
    report.mismatches = results.into_iter().flatten().collect();
    Ok(report)
}
