use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::params::{Mode, ModelParams, Psi, Variant};
use crate::error::{GqeError, Result};
use crate::kgraph::{NodeId, NodeTypeId, RelationId, TypedGraph};
use crate::numkernel::{cosine, DenseMatrix, DenseVector, Gradients, Tape, Var};
use crate::querydag::{QueryDag, QueryNodeKind};

/// How many operator applications one encoding performed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OpCounts {
    pub projections: usize,
    pub intersections: usize,
    /// Popped nodes with a single incoming vector, passed through unchanged.
    pub pass_throughs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryEmbedding {
    pub vector: DenseVector,
    pub target_type: NodeTypeId,
}

/// Forward computations recorded on a tape against an explicit tensor list,
/// so the same code serves inference, training and gradient checks.
pub struct Recorder<'a> {
    model: &'a ModelParams,
    tensors: &'a [DenseMatrix],
    pub tape: Tape,
    pub counts: OpCounts,
}

impl<'a> Recorder<'a> {
    pub fn new(model: &'a ModelParams, tensors: &'a [DenseMatrix]) -> Self {
        Recorder {
            model,
            tensors,
            tape: Tape::new(),
            counts: OpCounts::default(),
        }
    }

    pub fn embed_node(&mut self, g: &TypedGraph, v: NodeId) -> Result<Var> {
        let ty = g.type_of(v);
        let id = self.model.node_matrix(ty);
        let local = [g.local_index(v)];
        let cols: &[usize] = match self.model.mode {
            Mode::Exact => &local,
            Mode::Learned => g.features(v),
        };
        if cols.is_empty() {
            return Err(GqeError::Degenerate(format!(
                "node {} has no active features",
                g.node_name(v)
            )));
        }
        let scale = 1.0 / cols.len() as f64;
        self.tape.param_columns(self.tensors, id, cols, scale)
    }

    pub fn project(&mut self, q: Var, rel: RelationId) -> Result<Var> {
        self.counts.projections += 1;
        let id = self.model.relation_param(rel);
        if id.0 >= self.tensors.len() {
            return Err(GqeError::Argument(format!("unknown relation id {}", rel.0)));
        }
        match self.model.variant {
            Variant::Bilinear => self.tape.matvec(self.tensors, id, q),
            Variant::DistMult => {
                let diag = self.tape.param_vector(self.tensors, id);
                self.tape.hadamard(diag, q)
            }
            Variant::TransE => {
                let r = self.tape.param_vector(self.tensors, id);
                self.tape.add(q, r)
            }
        }
    }

    /// `W_γ Ψ(ReLU(B_γ q_i + bias_γ))`; a single input passes through untouched.
    pub fn intersect(&mut self, inputs: &[Var], ty: NodeTypeId) -> Result<Var> {
        match inputs {
            [] => Err(GqeError::Argument("intersection of no inputs".into())),
            [only] => {
                self.counts.pass_throughs += 1;
                Ok(*only)
            }
            _ => {
                self.counts.intersections += 1;
                let (b, bias, w) = (
                    self.model.layer_weight(ty),
                    self.model.layer_bias(ty),
                    self.model.post_matrix(ty),
                );
                let mut hidden = Vec::with_capacity(inputs.len());
                for &q in inputs {
                    let lin = self.tape.matvec(self.tensors, b, q)?;
                    let bv = self.tape.param_vector(self.tensors, bias);
                    let pre = self.tape.add(lin, bv)?;
                    hidden.push(self.tape.relu(pre));
                }
                let pooled = match self.model.psi {
                    Psi::Min => self.tape.min_across(&hidden)?,
                    Psi::Mean => self.tape.mean_across(&hidden)?,
                };
                self.tape.matvec(self.tensors, w, pooled)
            }
        }
    }

    /// Kahn-order evaluation: anchors are embedded, every edge is projected
    /// once when removed, and every popped non-anchor node combines its
    /// incoming vectors.
    pub fn encode(&mut self, g: &TypedGraph, q: &QueryDag) -> Result<Var> {
        q.ensure_valid(g)?;
        let order = q.topological_order().expect("validated query is acyclic");
        let mut value: Vec<Option<Var>> = vec![None; q.nodes.len()];
        let mut inbox: Vec<Vec<Var>> = vec![Vec::new(); q.nodes.len()];
        for node in order {
            let v = match q.nodes[node].kind {
                QueryNodeKind::Anchor(a) => self.embed_node(g, a)?,
                _ => {
                    let inputs = std::mem::take(&mut inbox[node]);
                    self.intersect(&inputs, q.nodes[node].ty)?
                }
            };
            value[node] = Some(v);
            for e in q.edges.iter().filter(|e| e.src == node) {
                let p = self.project(v, e.relation)?;
                inbox[e.dst].push(p);
            }
        }
        let t = q.target().expect("validated query has a target");
        Ok(value[t].expect("target reached"))
    }

    pub fn score(&mut self, q: Var, z: Var) -> Result<Var> {
        self.tape.cosine(q, z)
    }
}

/// `max(0, margin - s⁺ + s⁻)` for one positive and one negative.
#[derive(Debug, Clone)]
pub struct LossOutcome {
    pub loss: f64,
    pub positive_score: f64,
    pub negative_score: f64,
    pub gradients: Gradients,
    /// Distance of the forward pass from any ReLU or min kink.
    pub kink_margin: f64,
}

impl ModelParams {
    /// `Z_γ x_v / |x_v|`.
    pub fn embed_node(&self, g: &TypedGraph, v: NodeId) -> Result<DenseVector> {
        let local = [g.local_index(v)];
        let cols: &[usize] = match self.mode {
            Mode::Exact => &local,
            Mode::Learned => g.features(v),
        };
        if cols.is_empty() {
            return Err(GqeError::Degenerate(format!(
                "node {} has no active features",
                g.node_name(v)
            )));
        }
        let z = self.tensor(self.node_matrix(g.type_of(v)));
        if let Some(&c) = cols.iter().find(|&&c| c >= z.cols()) {
            return Err(GqeError::Shape(format!("feature {c} out of range for {} columns", z.cols())));
        }
        let scale = 1.0 / cols.len() as f64;
        Ok(DenseVector::new(
            (0..z.rows())
                .map(|r| scale * cols.iter().map(|&c| z.get(r, c)).sum::<f64>())
                .collect(),
        ))
    }

    pub fn project(&self, q: &DenseVector, rel: RelationId) -> Result<DenseVector> {
        self.check_dim(q)?;
        let mut r = Recorder::new(self, &self.tensors);
        let x = r.tape.constant(q.as_slice().to_vec());
        let out = r.project(x, rel)?;
        Ok(DenseVector::new(r.tape.value(out).to_vec()))
    }

    pub fn intersect(&self, inputs: &[DenseVector], ty: NodeTypeId) -> Result<DenseVector> {
        inputs.iter().try_for_each(|q| self.check_dim(q))?;
        if ty.index() >= self.type_count() {
            return Err(GqeError::Argument(format!("unknown node type id {}", ty.0)));
        }
        let mut r = Recorder::new(self, &self.tensors);
        let vars: Vec<Var> = inputs.iter().map(|q| r.tape.constant(q.as_slice().to_vec())).collect();
        let out = r.intersect(&vars, ty)?;
        Ok(DenseVector::new(r.tape.value(out).to_vec()))
    }

    pub fn encode_query(&self, g: &TypedGraph, q: &QueryDag) -> Result<(QueryEmbedding, OpCounts)> {
        let mut r = Recorder::new(self, &self.tensors);
        let out = r.encode(g, q)?;
        let vector = DenseVector::new(r.tape.value(out).to_vec());
        if !vector.as_slice().iter().all(|x| x.is_finite()) {
            return Err(GqeError::Numeric("query embedding has non-finite entries".into()));
        }
        let target_type = q.target_type().expect("validated query has a target");
        Ok((QueryEmbedding { vector, target_type }, r.counts))
    }

    /// Cosine similarity. In exact mode a zero query embedding scores 0.
    pub fn score(&self, q: &QueryEmbedding, z: &DenseVector) -> Result<f64> {
        if self.mode == Mode::Exact && q.vector.is_zero() {
            return Ok(0.0);
        }
        cosine(&q.vector, z)
    }

    /// Scores of every node of the query's target type, in node-id order.
    pub fn score_all(&self, g: &TypedGraph, q: &QueryEmbedding) -> Result<Vec<(NodeId, f64)>> {
        g.nodes_of_type(q.target_type)?
            .iter()
            .map(|&v| Ok((v, self.score(q, &self.embed_node(g, v)?)?)))
            .collect()
    }

    /// Exhaustive cosine ranking over the target type; descending score,
    /// ties broken by ascending node id.
    pub fn answer(&self, g: &TypedGraph, q: &QueryDag, top_k: usize) -> Result<Vec<(NodeId, f64)>> {
        let (emb, _) = self.encode_query(g, q)?;
        let mut scored = self.score_all(g, &emb)?;
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));
        scored.truncate(top_k);
        Ok(scored)
    }

    /// Hinge loss and its gradients at the current tensors.
    pub fn margin_loss(
        &self,
        g: &TypedGraph,
        q: &QueryDag,
        positive: NodeId,
        negative: NodeId,
        margin: f64,
    ) -> Result<LossOutcome> {
        self.margin_loss_at(&self.tensors, g, q, positive, negative, margin)
    }

    /// [`ModelParams::margin_loss`] evaluated at arbitrary tensors of the same layout.
    pub fn margin_loss_at(
        &self,
        tensors: &[DenseMatrix],
        g: &TypedGraph,
        q: &QueryDag,
        positive: NodeId,
        negative: NodeId,
        margin: f64,
    ) -> Result<LossOutcome> {
        let target = q
            .target_type()
            .ok_or_else(|| GqeError::InvalidQuery(vec!["query has no target".into()]))?;
        if g.type_of(negative) != target || g.type_of(positive) != target {
            return Err(GqeError::Argument(
                "positive and negative must have the target's type".into(),
            ));
        }
        let mut r = Recorder::new(self, tensors);
        let qv = r.encode(g, q)?;
        let zp = r.embed_node(g, positive)?;
        let zn = r.embed_node(g, negative)?;
        let sp = r.score(qv, zp)?;
        let sn = r.score(qv, zn)?;
        let gap = r.tape.sub(sn, sp)?;
        let shifted = r.tape.offset(gap, margin);
        let loss = r.tape.relu(shifted);
        let value = r.tape.scalar(loss);
        if !value.is_finite() {
            return Err(GqeError::Numeric("margin loss is not finite".into()));
        }
        let gradients = if value > 0.0 {
            r.tape.backward(loss, tensors)?
        } else {
            Gradients::new()
        };
        Ok(LossOutcome {
            loss: value,
            positive_score: r.tape.scalar(sp),
            negative_score: r.tape.scalar(sn),
            gradients,
            kink_margin: r.tape.kink_margin(),
        })
    }

    fn check_dim(&self, q: &DenseVector) -> Result<()> {
        if q.dim() != self.dim {
            return Err(GqeError::Shape(format!(
                "vector of dim {} for a model of dim {}",
                q.dim(),
                self.dim
            )));
        }
        Ok(())
    }
}
