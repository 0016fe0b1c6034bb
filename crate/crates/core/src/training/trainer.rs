use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::optimizer::{AdamConstants, OptimizerState};
use crate::error::{GqeError, Result};
use crate::evaluation::{evaluate, EvalOptions, NegativeKind, NegativeSelection};
use crate::kgraph::{NodeId, TypedGraph};
use crate::model::{LossOutcome, ModelParams};
use crate::numkernel::Gradients;
use crate::querydag::Structure;
use crate::rng::{stream, Stream};
use crate::sampler::{Dataset, QueryExample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub dim: usize,
    pub margin: f64,
    pub chain1_weight: f64,
    pub path_weight: f64,
    pub intersection_weight: f64,
    /// Batches between validations.
    pub validation_interval: usize,
    /// Validations without improvement before a stage stops.
    pub patience: usize,
    /// Stage-2 gradient norm cap.
    pub clip_norm: f64,
    pub max_stage1_batches: usize,
    pub max_stage2_batches: usize,
    /// Reuse each structure's standard-negative queries for its hard-negative
    /// batch instead of drawing a second, independent set.
    pub mirror_hard_negatives: bool,
    pub seed: u64,
    pub adam: AdamConstants,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            batch_size: 256,
            dim: 128,
            margin: 1.0,
            chain1_weight: 1.0,
            path_weight: 0.01,
            intersection_weight: 0.005,
            validation_interval: 5000,
            patience: 5,
            clip_norm: 10.0,
            max_stage1_batches: 100_000,
            max_stage2_batches: 100_000,
            mirror_hard_negatives: false,
            seed: 0,
            adam: AdamConstants::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("learning_rate", self.learning_rate),
            ("margin", self.margin),
            ("chain1_weight", self.chain1_weight),
            ("path_weight", self.path_weight),
            ("intersection_weight", self.intersection_weight),
            ("clip_norm", self.clip_norm),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(GqeError::Argument(format!("{name} must be positive, got {v}")));
            }
        }
        let counts = [
            ("batch_size", self.batch_size),
            ("dim", self.dim),
            ("validation_interval", self.validation_interval),
            ("patience", self.patience),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(GqeError::Argument(format!("{name} must be >= 1")));
            }
        }
        Ok(())
    }

    /// Loss weight of a structure's batches.
    pub fn weight(&self, s: Structure) -> f64 {
        if s == Structure::Chain1 {
            self.chain1_weight
        } else if s.has_intersection() {
            self.intersection_weight
        } else {
            self.path_weight
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stages {
    /// Edge prediction only: the ablation.
    EdgeOnly,
    /// Edge prediction to convergence, then all structures.
    Full,
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub stage: u8,
    pub batch: usize,
    pub structure: Structure,
    pub negatives: NegativeKind,
    pub raw_loss: f64,
    pub weighted_loss: f64,
    pub grad_norm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub val_macro_auc: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Validation {
    pub stage: u8,
    pub batch: usize,
    pub auc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters at the best validation of the last stage run.
    pub params: ModelParams,
    pub log: Vec<LogRecord>,
    pub validations: Vec<Validation>,
    pub best_validation: Option<f64>,
    pub stage1_batches: usize,
    pub stage2_batches: usize,
    pub clipped_steps: usize,
    /// Loss terms skipped because an embedding had zero norm.
    pub degenerate_terms: usize,
    /// Set when a non-finite loss or gradient stopped training early.
    pub aborted: Option<String>,
}

impl TrainOutcome {
    fn start(params: &ModelParams) -> Self {
        TrainOutcome {
            params: params.clone(),
            log: Vec::new(),
            validations: Vec::new(),
            best_validation: None,
            stage1_batches: 0,
            stage2_batches: 0,
            clipped_steps: 0,
            degenerate_terms: 0,
            aborted: None,
        }
    }

    pub fn log_ndjson(&self) -> String {
        let mut out = String::new();
        for r in &self.log {
            out.push_str(&serde_json::to_string(r).expect("log record serializes"));
            out.push('\n');
        }
        out
    }
}

/// Runs the requested stages starting from `params` and returns the
/// best-validation parameters of the last stage.
pub fn train(
    params: ModelParams,
    g: &TypedGraph,
    data: &Dataset,
    cfg: &TrainConfig,
    stages: Stages,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut rng = stream(cfg.seed, Stream::Training);
    let mut out = TrainOutcome::start(&params);
    let stage1 = run_stage(params, g, data, cfg, 1, &mut rng, &mut out)?;
    if stages == Stages::EdgeOnly || out.aborted.is_some() {
        out.params = stage1;
        return Ok(out);
    }
    out.params = run_stage(stage1, g, data, cfg, 2, &mut rng, &mut out)?;
    Ok(out)
}

/// Stage 1 on its own (chain1 only, early stopping on chain1 validation AUC).
pub fn train_stage1_edges(
    params: ModelParams,
    g: &TypedGraph,
    data: &Dataset,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    train(params, g, data, cfg, Stages::EdgeOnly)
}

/// Stage 2 on its own, starting from already edge-trained parameters.
pub fn train_stage2_full(
    params: ModelParams,
    g: &TypedGraph,
    data: &Dataset,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut rng = stream(cfg.seed, Stream::Training);
    let mut out = TrainOutcome::start(&params);
    out.params = run_stage(params, g, data, cfg, 2, &mut rng, &mut out)?;
    Ok(out)
}

/// A loss term: one example against one negative, in one sub-batch.
struct Term {
    example: usize,
    negative: NodeId,
    group: usize,
}

struct Group {
    structure: Structure,
    kind: NegativeKind,
    weight: f64,
    size: usize,
}

fn validation_auc(
    params: &ModelParams,
    g: &TypedGraph,
    data: &Dataset,
    cfg: &TrainConfig,
    stage: u8,
) -> Result<Option<f64>> {
    let examples: Vec<QueryExample> = if stage == 1 {
        data.valid
            .iter()
            .filter(|e| e.query.structure == Some(Structure::Chain1))
            .cloned()
            .collect()
    } else {
        data.valid.clone()
    };
    if examples.is_empty() {
        return Ok(None);
    }
    let opts = EvalOptions {
        negatives: if stage == 1 {
            NegativeSelection::Standard
        } else {
            NegativeSelection::Both
        },
        include_chain1: true,
        seed: cfg.seed,
    };
    let report = evaluate(params, g, &examples, &opts)?;
    Ok((report.macro_cells > 0).then_some(report.macro_auc))
}

fn run_stage(
    mut params: ModelParams,
    g: &TypedGraph,
    data: &Dataset,
    cfg: &TrainConfig,
    stage: u8,
    rng: &mut ChaCha8Rng,
    out: &mut TrainOutcome,
) -> Result<ModelParams> {
    let train = &data.train;
    let mut standard: BTreeMap<Structure, Vec<usize>> = BTreeMap::new();
    let mut hard: BTreeMap<Structure, Vec<usize>> = BTreeMap::new();
    for (i, ex) in train.iter().enumerate() {
        let Some(s) = ex.query.structure else { continue };
        if stage == 1 && s != Structure::Chain1 {
            continue;
        }
        if !ex.standard_negatives.is_empty() {
            standard.entry(s).or_default().push(i);
        }
        if stage == 2 && s.has_intersection() && !ex.hard_negatives.is_empty() {
            hard.entry(s).or_default().push(i);
        }
    }
    if standard.is_empty() {
        return Err(GqeError::Argument(format!(
            "stage {stage} has no training examples{}",
            if stage == 1 { " of structure chain1" } else { "" }
        )));
    }
    let max_batches = if stage == 1 {
        cfg.max_stage1_batches
    } else {
        cfg.max_stage2_batches
    };
    let mut optimizer = OptimizerState::new(&params, cfg.adam);
    let mut tracker = Tracker {
        best: params.clone(),
        best_auc: None,
        stale: 0,
    };
    let mut epoch_order: Vec<usize> = Vec::new();
    let mut cursor = 0;
    tracker.validate(&params, g, data, cfg, stage, 0, out)?;

    for batch in 1..=max_batches {
        let mut groups = Vec::new();
        let mut terms = Vec::new();
        if stage == 1 {
            let pool = &standard[&Structure::Chain1];
            let mut picked = Vec::with_capacity(cfg.batch_size);
            while picked.len() < cfg.batch_size.min(pool.len()) {
                if cursor == epoch_order.len() {
                    epoch_order = pool.clone();
                    epoch_order.shuffle(rng);
                    cursor = 0;
                }
                picked.push(epoch_order[cursor]);
                cursor += 1;
            }
            push_group(&mut groups, &mut terms, train, Structure::Chain1, NegativeKind::Standard, cfg, &picked, rng);
        } else {
            for (&s, pool) in &standard {
                let picked: Vec<usize> = (0..cfg.batch_size).map(|_| pool[rng.gen_range(0..pool.len())]).collect();
                push_group(&mut groups, &mut terms, train, s, NegativeKind::Standard, cfg, &picked, rng);
                if let Some(hpool) = hard.get(&s) {
                    let hpicked: Vec<usize> = if cfg.mirror_hard_negatives {
                        picked
                            .iter()
                            .copied()
                            .filter(|&i| !train[i].hard_negatives.is_empty())
                            .collect()
                    } else {
                        (0..cfg.batch_size).map(|_| hpool[rng.gen_range(0..hpool.len())]).collect()
                    };
                    if !hpicked.is_empty() {
                        push_group(&mut groups, &mut terms, train, s, NegativeKind::Hard, cfg, &hpicked, rng);
                    }
                }
            }
        }
        let outcomes: Vec<Result<LossOutcome>> = terms
            .par_iter()
            .map(|t| {
                let ex = &train[t.example];
                params.margin_loss(g, &ex.query, ex.positive, t.negative, cfg.margin)
            })
            .collect();
        let mut group_loss = vec![0.0; groups.len()];
        let mut group_grad: Vec<Gradients> = vec![Gradients::new(); groups.len()];
        let mut diverged = None;
        for (t, o) in terms.iter().zip(outcomes) {
            let o = match o {
                Ok(o) => o,
                Err(GqeError::Numeric(m)) => {
                    diverged = Some(format!("training example {}: {m}", t.example));
                    break;
                }
                Err(GqeError::Degenerate(m)) => {
                    log::debug!("training example {}: {m}; term skipped", t.example);
                    out.degenerate_terms += 1;
                    continue;
                }
                Err(e) => {
                    return Err(GqeError::Numeric(format!("training example {}: {e}", t.example)))
                }
            };
            group_loss[t.group] += o.loss;
            group_grad[t.group].add_scaled(&o.gradients, 1.0);
        }
        if let Some(m) = diverged {
            out.aborted = Some(format!("stage {stage} batch {batch}: {m}"));
            break;
        }
        let mut total = Gradients::new();
        for (k, grp) in groups.iter().enumerate() {
            let n = grp.size as f64;
            let raw = group_loss[k] / n;
            let scale = grp.weight / n;
            total.add_scaled(&group_grad[k], scale);
            let mut weighted_grad = group_grad[k].clone();
            weighted_grad.scale(scale);
            out.log.push(LogRecord {
                stage,
                batch,
                structure: grp.structure,
                negatives: grp.kind,
                raw_loss: raw,
                weighted_loss: grp.weight * raw,
                grad_norm: weighted_grad.l2_norm(),
                val_macro_auc: None,
            });
        }
        if stage == 2 {
            let norm = total.l2_norm();
            if norm > cfg.clip_norm {
                total.scale(cfg.clip_norm / norm);
                out.clipped_steps += 1;
            }
        }
        if let Err(e) = optimizer.step(&mut params, &total, cfg.learning_rate) {
            out.aborted = Some(format!("stage {stage} batch {batch}: {e}"));
            break;
        }
        if stage == 1 {
            out.stage1_batches = batch;
        } else {
            out.stage2_batches = batch;
        }
        let at_interval = batch % cfg.validation_interval == 0 || batch == max_batches;
        if at_interval && tracker.validate(&params, g, data, cfg, stage, batch, out)? {
            break;
        }
    }
    match tracker.best_auc {
        Some(auc) => {
            out.best_validation = Some(auc);
            Ok(tracker.best)
        }
        None => Ok(params),
    }
}

/// Best-so-far parameters and the patience counter of one stage.
struct Tracker {
    best: ModelParams,
    best_auc: Option<f64>,
    stale: usize,
}

impl Tracker {
    /// Validates, keeps the parameters if they improve, and reports whether
    /// patience is exhausted.
    #[allow(clippy::too_many_arguments)]
    fn validate(
        &mut self,
        params: &ModelParams,
        g: &TypedGraph,
        data: &Dataset,
        cfg: &TrainConfig,
        stage: u8,
        batch: usize,
        out: &mut TrainOutcome,
    ) -> Result<bool> {
        let Some(auc) = validation_auc(params, g, data, cfg, stage)? else {
            return Ok(false);
        };
        out.validations.push(Validation { stage, batch, auc });
        if let Some(last) = out.log.last_mut().filter(|r| r.stage == stage && r.batch == batch) {
            last.val_macro_auc = Some(auc);
        }
        if self.best_auc.is_none_or(|b| auc > b) {
            self.best_auc = Some(auc);
            self.best = params.clone();
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        log::info!("stage {stage} batch {batch}: validation auc {auc:.4}");
        Ok(self.stale >= cfg.patience)
    }
}

#[allow(clippy::too_many_arguments)]
fn push_group(
    groups: &mut Vec<Group>,
    terms: &mut Vec<Term>,
    train: &[QueryExample],
    structure: Structure,
    kind: NegativeKind,
    cfg: &TrainConfig,
    picked: &[usize],
    rng: &mut ChaCha8Rng,
) {
    let group = groups.len();
    for &i in picked {
        let pool = match kind {
            NegativeKind::Standard => &train[i].standard_negatives,
            NegativeKind::Hard => &train[i].hard_negatives,
        };
        terms.push(Term {
            example: i,
            negative: pool[rng.gen_range(0..pool.len())],
            group,
        });
    }
    groups.push(Group {
        structure,
        kind,
        weight: cfg.weight(structure),
        size: picked.len(),
    });
}
