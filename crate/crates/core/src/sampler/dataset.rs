use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{hard_negatives, standard_negatives, try_sample, QueryExample, RETRY_CAP};
use crate::error::{GqeError, Result};
use crate::fsutil::write_atomic;
use crate::kgraph::{Edge, GraphSplit, NodeId, TypedGraph};
use crate::querydag::{denotation, QueryDag, QueryJson, Structure};
use crate::rng::{stream, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub valid: usize,
    pub test: usize,
}

/// Which graph defines non-membership for validation/test negative pools.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NegativeSource {
    #[default]
    Full,
    Train,
}

impl std::str::FromStr for NegativeSource {
    type Err = GqeError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(NegativeSource::Full),
            "train" => Ok(NegativeSource::Train),
            _ => Err(GqeError::Argument(format!("unknown negative source `{s}` (full | train)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitPart {
    Train,
    Valid,
    Test,
}

impl SplitPart {
    pub const ALL: [SplitPart; 3] = [SplitPart::Train, SplitPart::Valid, SplitPart::Test];

    pub fn name(self) -> &'static str {
        match self {
            SplitPart::Train => "train",
            SplitPart::Valid => "valid",
            SplitPart::Test => "test",
        }
    }

    fn stream_part(self) -> usize {
        self as usize
    }
}

impl std::str::FromStr for SplitPart {
    type Err = GqeError;
    fn from_str(s: &str) -> Result<Self> {
        SplitPart::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| GqeError::Argument(format!("unknown split `{s}` (train | valid | test)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    /// Structures to sample and how many examples of each. Chain1 training
    /// examples are every training-graph edge regardless of the count, and
    /// chain1 validation/test examples come from a 10/90 split of the
    /// deleted edges.
    pub counts: BTreeMap<Structure, SplitCounts>,
    pub seed: u64,
    pub pool_size: usize,
    #[serde(default)]
    pub test_negatives: NegativeSource,
}

impl DatasetSpec {
    pub fn uniform(train: usize, valid: usize, test: usize, seed: u64) -> Self {
        DatasetSpec {
            counts: Structure::ALL
                .into_iter()
                .map(|s| (s, SplitCounts { train, valid, test }))
                .collect(),
            seed,
            pool_size: 1000,
            test_negatives: NegativeSource::Full,
        }
    }

    fn check(&self) -> Result<()> {
        if self.pool_size == 0 {
            return Err(GqeError::Argument("negative pool size must be >= 1".into()));
        }
        Ok(())
    }
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self::uniform(10_000, 500, 1_000, 0)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub train: Vec<QueryExample>,
    pub valid: Vec<QueryExample>,
    pub test: Vec<QueryExample>,
    /// Shortfalls and skipped examples; never silently dropped.
    pub warnings: Vec<String>,
}

impl Dataset {
    pub fn part(&self, part: SplitPart) -> &[QueryExample] {
        match part {
            SplitPart::Train => &self.train,
            SplitPart::Valid => &self.valid,
            SplitPart::Test => &self.test,
        }
    }

    fn part_mut(&mut self, part: SplitPart) -> &mut Vec<QueryExample> {
        match part {
            SplitPart::Train => &mut self.train,
            SplitPart::Valid => &mut self.valid,
            SplitPart::Test => &mut self.test,
        }
    }
}

struct Job {
    structure: Structure,
    part: SplitPart,
    count: usize,
}

struct JobOutput {
    part: SplitPart,
    examples: Vec<QueryExample>,
    warnings: Vec<String>,
}

/// Samples train/valid/test examples for every structure in `spec`.
///
/// Training examples come from the training graph. Validation and test
/// examples come from the full graph and are kept only when their positive
/// is *not* an answer on the training graph, so each depends on a deleted edge.
pub fn build_dataset(split: &GraphSplit, spec: &DatasetSpec) -> Result<Dataset> {
    spec.check()?;
    let mut jobs = Vec::new();
    for (&structure, counts) in &spec.counts {
        if structure == Structure::Chain1 {
            jobs.push(Job {
                structure,
                part: SplitPart::Train,
                count: 0,
            });
            jobs.push(Job {
                structure,
                part: SplitPart::Test,
                count: 0,
            });
            continue;
        }
        for part in SplitPart::ALL {
            let count = match part {
                SplitPart::Train => counts.train,
                SplitPart::Valid => counts.valid,
                SplitPart::Test => counts.test,
            };
            jobs.push(Job {
                structure,
                part,
                count,
            });
        }
    }
    let outputs: Vec<Vec<JobOutput>> = jobs
        .par_iter()
        .map(|job| run_job(split, spec, job))
        .collect::<Result<_>>()?;
    let mut ds = Dataset::default();
    for out in outputs.into_iter().flatten() {
        ds.part_mut(out.part).extend(out.examples);
        ds.warnings.extend(out.warnings);
    }
    Ok(ds)
}

fn run_job(split: &GraphSplit, spec: &DatasetSpec, job: &Job) -> Result<Vec<JobOutput>> {
    let mut rng = stream(
        spec.seed,
        Stream::Sampling {
            structure: job.structure.index(),
            part: job.part.stream_part(),
        },
    );
    if job.structure == Structure::Chain1 {
        return match job.part {
            SplitPart::Train => chain1_train(split, spec, &mut rng).map(|o| vec![o]),
            _ => chain1_heldout(split, spec, &mut rng),
        };
    }
    let train_part = job.part == SplitPart::Train;
    let sample_graph = if train_part {
        &split.train_graph
    } else {
        &split.full_graph
    };
    let mut examples = Vec::with_capacity(job.count);
    let mut warnings = Vec::new();
    'outer: for _ in 0..job.count {
        for _ in 0..RETRY_CAP {
            let Some((q, positive)) = try_sample(sample_graph, job.structure, &mut rng) else {
                continue;
            };
            if !train_part && denotation(&q, &split.train_graph)?.contains(positive) {
                continue;
            }
            if let Some(ex) = attach_negatives(split, spec, q, positive, job.part, &mut rng)? {
                examples.push(ex);
                continue 'outer;
            }
        }
        warnings.push(format!(
            "{} {}: produced {} of {} examples (retry cap {RETRY_CAP} exhausted)",
            job.structure,
            job.part.name(),
            examples.len(),
            job.count
        ));
        break;
    }
    Ok(vec![JobOutput {
        part: job.part,
        examples,
        warnings,
    }])
}

/// Negative pools for a sampled example, or `None` when the target type has
/// no non-members to draw from.
fn attach_negatives<R: Rng>(
    split: &GraphSplit,
    spec: &DatasetSpec,
    query: QueryDag,
    positive: NodeId,
    part: SplitPart,
    rng: &mut R,
) -> Result<Option<QueryExample>> {
    let neg_graph = match (part, spec.test_negatives) {
        (SplitPart::Train, _) | (_, NegativeSource::Train) => &split.train_graph,
        (_, NegativeSource::Full) => &split.full_graph,
    };
    let members = denotation(&query, neg_graph)?;
    let truth = if part == SplitPart::Train {
        None
    } else {
        Some(denotation(&query, &split.full_graph)?)
    };
    let mut standard = standard_negatives(&query, neg_graph, &members, spec.pool_size + 1, rng)?;
    standard.retain(|&v| v != positive);
    standard.truncate(spec.pool_size);
    if standard.is_empty() {
        return Ok(None);
    }
    let hard = if query.has_intersection() {
        let mut h = hard_negatives(&query, neg_graph, spec.pool_size + 1, rng)?;
        h.retain(|&v| v != positive && truth.as_ref().is_none_or(|t| !t.contains(v)));
        h.truncate(spec.pool_size);
        h
    } else {
        Vec::new()
    };
    Ok(Some(QueryExample {
        query,
        positive,
        standard_negatives: standard,
        hard_negatives: hard,
    }))
}

fn chain1_query(g: &TypedGraph, e: Edge) -> QueryDag {
    QueryDag::from_structure(
        Structure::Chain1,
        &[e.head],
        &[e.relation],
        &[g.type_of(e.head), g.type_of(e.tail)],
    )
}

fn chain1_train<R: Rng>(split: &GraphSplit, spec: &DatasetSpec, rng: &mut R) -> Result<JobOutput> {
    let g = &split.train_graph;
    let mut examples = Vec::new();
    let mut skipped = 0;
    for e in g.edges() {
        match attach_negatives(split, spec, chain1_query(g, e), e.tail, SplitPart::Train, rng)? {
            Some(ex) => examples.push(ex),
            None => skipped += 1,
        }
    }
    let warnings = (skipped > 0)
        .then(|| format!("chain1 train: skipped {skipped} edges whose target type has no non-members"))
        .into_iter()
        .collect();
    Ok(JobOutput {
        part: SplitPart::Train,
        examples,
        warnings,
    })
}

fn chain1_heldout<R: Rng>(
    split: &GraphSplit,
    spec: &DatasetSpec,
    rng: &mut R,
) -> Result<Vec<JobOutput>> {
    let mut deleted: Vec<Edge> = split.deleted_edges.iter().copied().collect();
    deleted.shuffle(rng);
    let n_test = (deleted.len() as f64 * 0.9).round() as usize;
    let mut outs = Vec::new();
    for (part, edges) in [
        (SplitPart::Test, &deleted[..n_test]),
        (SplitPart::Valid, &deleted[n_test..]),
    ] {
        let mut examples = Vec::new();
        let mut skipped = 0;
        for &e in edges {
            let q = chain1_query(&split.full_graph, e);
            match attach_negatives(split, spec, q, e.tail, part, rng)? {
                Some(ex) => examples.push(ex),
                None => skipped += 1,
            }
        }
        let warnings = (skipped > 0)
            .then(|| format!("chain1 {}: skipped {skipped} degenerate edges", part.name()))
            .into_iter()
            .collect();
        outs.push(JobOutput {
            part,
            examples,
            warnings,
        });
    }
    Ok(outs)
}

// ---------------------------------------------------------------------------
// Files

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ExampleJson {
    query: QueryJson,
    positive: String,
    neg: Vec<String>,
    hard_neg: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub spec: DatasetSpec,
    pub split_fraction: f64,
    pub files: BTreeMap<SplitPart, String>,
    pub counts: BTreeMap<SplitPart, BTreeMap<Structure, usize>>,
    pub warnings: Vec<String>,
}

pub fn example_to_json(ex: &QueryExample, g: &TypedGraph) -> String {
    let names = |v: &[NodeId]| v.iter().map(|&n| g.node_name(n).to_string()).collect();
    serde_json::to_string(&ExampleJson {
        query: QueryJson::from_query(&ex.query, g),
        positive: g.node_name(ex.positive).to_string(),
        neg: names(&ex.standard_negatives),
        hard_neg: names(&ex.hard_negatives),
    })
    .expect("example json serializes")
}

pub fn example_from_json(line: &str, g: &TypedGraph) -> Result<QueryExample> {
    let doc: ExampleJson = serde_json::from_str(line)?;
    let node = |n: &str| {
        g.node_by_name(n)
            .ok_or_else(|| GqeError::Argument(format!("unknown node `{n}` in dataset")))
    };
    let nodes = |v: &[String]| v.iter().map(|n| node(n)).collect::<Result<Vec<_>>>();
    Ok(QueryExample {
        query: doc.query.to_query(g)?,
        positive: node(&doc.positive)?,
        standard_negatives: nodes(&doc.neg)?,
        hard_negatives: nodes(&doc.hard_neg)?,
    })
}

/// Writes `{train,valid,test}.jsonl` and the manifest; unchanged files are left alone.
pub fn write_dataset(
    dir: &Path,
    ds: &Dataset,
    g: &TypedGraph,
    spec: &DatasetSpec,
    split_fraction: f64,
) -> Result<DatasetManifest> {
    let mut files = BTreeMap::new();
    let mut counts = BTreeMap::new();
    for part in SplitPart::ALL {
        let name = format!("{}.jsonl", part.name());
        let mut text = String::new();
        let mut per: BTreeMap<Structure, usize> = BTreeMap::new();
        for ex in ds.part(part) {
            text.push_str(&example_to_json(ex, g));
            text.push('\n');
            if let Some(s) = ex.query.structure {
                *per.entry(s).or_default() += 1;
            }
        }
        write_atomic(&dir.join(&name), text.as_bytes())?;
        files.insert(part, name);
        counts.insert(part, per);
    }
    let manifest = DatasetManifest {
        spec: spec.clone(),
        split_fraction,
        files,
        counts,
        warnings: ds.warnings.clone(),
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    write_atomic(&dir.join(MANIFEST_FILE), text.as_bytes())?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<DatasetManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => GqeError::MissingInput {
            path: path.clone(),
            hint: "run `gqe sample` to create the dataset".into(),
        },
        _ => GqeError::io(&path, e),
    })?;
    Ok(serde_json::from_str(&text)?)
}

pub fn read_part(dir: &Path, part: SplitPart, g: &TypedGraph) -> Result<Vec<QueryExample>> {
    let path = dir.join(format!("{}.jsonl", part.name()));
    let text = std::fs::read_to_string(&path).map_err(|e| GqeError::io(&path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            example_from_json(l, g).map_err(|e| GqeError::Parse {
                path: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn read_dataset(dir: &Path, g: &TypedGraph) -> Result<Dataset> {
    let manifest = read_manifest(dir)?;
    Ok(Dataset {
        train: read_part(dir, SplitPart::Train, g)?,
        valid: read_part(dir, SplitPart::Valid, g)?,
        test: read_part(dir, SplitPart::Test, g)?,
        warnings: manifest.warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kgraph::split_edges;
    use crate::kgraph::synthetic::{generate, SyntheticSpec};
    use crate::querydag::denotation_disjunctive;

    fn small_split() -> GraphSplit {
        let g = generate(&SyntheticSpec::parse("random:60,4,2,0.06").unwrap(), 4).unwrap();
        split_edges(&g, 0.1, 4).unwrap()
    }

    fn spec(train: usize, valid: usize, test: usize) -> DatasetSpec {
        let mut s = DatasetSpec::uniform(train, valid, test, 8);
        s.pool_size = 20;
        s
    }

    #[test]
    fn counts_and_guarantees() {
        let split = small_split();
        let ds = build_dataset(&split, &spec(30, 5, 10)).unwrap();
        let chain2 = ds
            .train
            .iter()
            .filter(|e| e.query.structure == Some(Structure::Chain2))
            .count();
        assert_eq!(chain2, 30);
        let chain1_train = ds
            .train
            .iter()
            .filter(|e| e.query.structure == Some(Structure::Chain1))
            .count();
        assert_eq!(chain1_train, split.train_graph.edge_count());
        for ex in &ds.train {
            assert!(denotation(&ex.query, &split.train_graph).unwrap().contains(ex.positive));
        }
        for ex in ds.test.iter().chain(&ds.valid) {
            assert!(denotation(&ex.query, &split.full_graph).unwrap().contains(ex.positive));
            assert!(!denotation(&ex.query, &split.train_graph).unwrap().contains(ex.positive));
            let truth = denotation(&ex.query, &split.full_graph).unwrap();
            assert!(ex.standard_negatives.iter().all(|v| !truth.contains(*v)));
            let disj = denotation_disjunctive(&ex.query, &split.full_graph).unwrap();
            assert!(ex
                .hard_negatives
                .iter()
                .all(|v| disj.contains(*v) && !truth.contains(*v)));
            assert!(ex.standard_negatives.len() <= 20);
        }
        let chain1_heldout = ds
            .test
            .iter()
            .chain(&ds.valid)
            .filter(|e| e.query.structure == Some(Structure::Chain1))
            .count();
        assert_eq!(chain1_heldout, split.deleted_edges.len());
    }

    #[test]
    fn deterministic_files() {
        let split = small_split();
        let s = spec(10, 3, 3);
        let a = build_dataset(&split, &s).unwrap();
        let b = build_dataset(&split, &s).unwrap();
        assert_eq!(a, b);
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &a, &split.full_graph, &s, 0.1).unwrap();
        let first = std::fs::read(dir.path().join("test.jsonl")).unwrap();
        let back = read_dataset(dir.path(), &split.full_graph).unwrap();
        assert_eq!(back, a);
        write_dataset(dir.path(), &b, &split.full_graph, &s, 0.1).unwrap();
        assert_eq!(std::fs::read(dir.path().join("test.jsonl")).unwrap(), first);
    }

    #[test]
    fn infeasible_structure_warns() {
        // no edge reaches any node from two different sources
        let g = crate::kgraph::ingest_sources(
            ("e", "a\tr\tb\nc\tr\td\ne\tr\tf\n"),
            ("t", "a\tT\nb\tU\nc\tT\nd\tU\ne\tT\nf\tU\n"),
            None,
            &Default::default(),
        )
        .unwrap();
        let split = split_edges(&g, 0.3, 1).unwrap();
        let mut s = DatasetSpec::uniform(2, 0, 0, 1);
        s.counts.retain(|k, _| *k == Structure::Inter2);
        let ds = build_dataset(&split, &s).unwrap();
        assert!(ds.train.is_empty());
        assert_eq!(ds.warnings.len(), 1, "{:?}", ds.warnings);
    }
}
