use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GqeError, Result};
use crate::kgraph::{NodeTypeId, RelationId, TypedGraph};
use crate::numkernel::{DenseMatrix, ParamId};
use crate::rng::{stream, Stream};

/// How a relation moves a query embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// `R_τ q` with a full `d x d` matrix.
    Bilinear,
    /// `diag_τ ⊙ q`.
    DistMult,
    /// `q + r_τ`.
    TransE,
}

/// Symmetric reduction used inside the intersection operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Psi {
    Min,
    Mean,
}

/// `Learned` embeds nodes from their feature vectors and treats a zero query
/// embedding as an error. `Exact` embeds node `v` as the indicator of `v`
/// and scores a zero query embedding as 0 against everything.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Learned,
    Exact,
}

macro_rules! named_enum {
    ($ty:ident { $($var:ident => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub fn name(self) -> &'static str {
                match self { $($ty::$var => $name),+ }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }
        impl FromStr for $ty {
            type Err = GqeError;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($ty::$var),)+
                    _ => Err(GqeError::Argument(format!(
                        concat!("unknown ", stringify!($ty), " `{}` (expected one of: {})"),
                        s,
                        [$($name),+].join(", ")
                    ))),
                }
            }
        }
    };
}

named_enum!(Variant { Bilinear => "bilinear", DistMult => "distmult", TransE => "transe" });
named_enum!(Psi { Min => "min", Mean => "mean" });
named_enum!(Mode { Learned => "learned", Exact => "exact" });

/// Bytes of dense tensors `exact_parameters` may allocate by default.
pub const EXACT_MEMORY_BUDGET: usize = 1 << 30;

/// Init noise amplitude around identity / one for relation and intersection tensors.
pub const INIT_NOISE: f64 = 0.1;

/// All trainable tensors, stored in one flat list so the tape and the
/// optimizer can address them by [`ParamId`].
///
/// Layout for `T` node types and `R` relations (inverses included):
/// `Z_γ` for each type, then one projection tensor per relation, then
/// `B_γ`, `bias_γ`, `W_γ` for each type.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub variant: Variant,
    pub psi: Psi,
    pub mode: Mode,
    pub dim: usize,
    pub tensors: Vec<DenseMatrix>,
    pub names: Vec<String>,
    type_count: usize,
    relation_count: usize,
}

impl ModelParams {
    /// Randomly initialized parameters for `g`'s schema.
    pub fn init(g: &TypedGraph, variant: Variant, psi: Psi, dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(GqeError::Argument("embedding dimension must be >= 1".into()));
        }
        let mut rng = stream(seed, Stream::Init);
        let mut noise = |rows: usize, cols: usize, base: &dyn Fn(usize, usize) -> f64, amp: f64| {
            let values = (0..rows * cols)
                .map(|i| base(i / cols, i % cols) + rng.gen_range(-amp..=amp))
                .collect();
            DenseMatrix::from_vec(rows, cols, values).expect("shape")
        };
        let zero = |_: usize, _: usize| 0.0;
        let one = |_: usize, _: usize| 1.0;
        let eye = |r: usize, c: usize| if r == c { 1.0 } else { 0.0 };
        let zscale = 1.0 / (dim as f64).sqrt();
        let mut tensors = Vec::new();
        for ty in g.node_types() {
            tensors.push(noise(dim, ty.feature_dim.max(1), &zero, zscale));
        }
        for _ in g.relations() {
            tensors.push(match variant {
                Variant::Bilinear => noise(dim, dim, &eye, INIT_NOISE),
                Variant::DistMult => noise(dim, 1, &one, INIT_NOISE),
                Variant::TransE => noise(dim, 1, &zero, INIT_NOISE),
            });
        }
        for _ in g.node_types() {
            tensors.push(noise(dim, dim, &eye, INIT_NOISE));
            tensors.push(DenseMatrix::zeros(dim, 1));
            tensors.push(noise(dim, dim, &eye, INIT_NOISE));
        }
        Ok(Self::assemble(g, variant, psi, Mode::Learned, dim, tensors))
    }

    fn assemble(
        g: &TypedGraph,
        variant: Variant,
        psi: Psi,
        mode: Mode,
        dim: usize,
        tensors: Vec<DenseMatrix>,
    ) -> Self {
        let names = tensor_names(g, variant);
        debug_assert_eq!(names.len(), tensors.len());
        ModelParams {
            variant,
            psi,
            mode,
            dim,
            tensors,
            names,
            type_count: g.node_types().len(),
            relation_count: g.relations().len(),
        }
    }

    /// Rebuilds parameters from stored tensors, checking every shape against `g`.
    pub fn from_tensors(
        g: &TypedGraph,
        variant: Variant,
        psi: Psi,
        mode: Mode,
        dim: usize,
        tensors: Vec<DenseMatrix>,
    ) -> Result<Self> {
        let expected = expected_shapes(g, variant, mode, dim);
        if expected.len() != tensors.len() {
            return Err(GqeError::Shape(format!(
                "expected {} tensors for this graph, found {}",
                expected.len(),
                tensors.len()
            )));
        }
        let names = tensor_names(g, variant);
        for ((t, (r, c)), name) in tensors.iter().zip(&expected).zip(&names) {
            if (t.rows(), t.cols()) != (*r, *c) {
                return Err(GqeError::Shape(format!(
                    "tensor {name} is {}x{}, expected {r}x{c}",
                    t.rows(),
                    t.cols()
                )));
            }
            if !t.is_finite() {
                return Err(GqeError::Numeric(format!("tensor {name} has non-finite entries")));
            }
        }
        Ok(Self::assemble(g, variant, psi, mode, dim, tensors))
    }

    pub fn node_matrix(&self, ty: NodeTypeId) -> ParamId {
        ParamId(ty.index())
    }

    pub fn relation_param(&self, rel: RelationId) -> ParamId {
        ParamId(self.type_count + rel.index())
    }

    pub fn layer_weight(&self, ty: NodeTypeId) -> ParamId {
        ParamId(self.type_count + self.relation_count + 3 * ty.index())
    }

    pub fn layer_bias(&self, ty: NodeTypeId) -> ParamId {
        ParamId(self.type_count + self.relation_count + 3 * ty.index() + 1)
    }

    pub fn post_matrix(&self, ty: NodeTypeId) -> ParamId {
        ParamId(self.type_count + self.relation_count + 3 * ty.index() + 2)
    }

    pub fn tensor(&self, id: ParamId) -> &DenseMatrix {
        &self.tensors[id.0]
    }

    pub fn tensor_mut(&mut self, id: ParamId) -> &mut DenseMatrix {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn type_count(&self) -> usize {
        self.type_count
    }

    pub fn relation_count(&self) -> usize {
        self.relation_count
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(DenseMatrix::len).sum()
    }

    /// True when this parameter set was built for a graph with `g`'s schema.
    pub fn matches_graph(&self, g: &TypedGraph) -> bool {
        self.type_count == g.node_types().len()
            && self.relation_count == g.relations().len()
            && self.names == tensor_names(g, self.variant)
    }
}

fn tensor_names(g: &TypedGraph, variant: Variant) -> Vec<String> {
    let rel_prefix = match variant {
        Variant::Bilinear => "R",
        Variant::DistMult => "diag",
        Variant::TransE => "r",
    };
    let mut names: Vec<String> = g.node_types().iter().map(|t| format!("Z/{}", t.name)).collect();
    names.extend(g.relations().iter().map(|r| format!("{rel_prefix}/{}", r.name)));
    for t in g.node_types() {
        names.push(format!("B/{}", t.name));
        names.push(format!("bias/{}", t.name));
        names.push(format!("W/{}", t.name));
    }
    names
}

fn expected_shapes(g: &TypedGraph, variant: Variant, mode: Mode, dim: usize) -> Vec<(usize, usize)> {
    let mut shapes = Vec::new();
    for (t, ty) in g.node_types().iter().enumerate() {
        let cols = match mode {
            Mode::Learned => ty.feature_dim.max(1),
            Mode::Exact => g
                .nodes_of_type(NodeTypeId(t as u32))
                .map_or(0, <[_]>::len)
                .max(1),
        };
        shapes.push((dim, cols));
    }
    for _ in g.relations() {
        shapes.push(match variant {
            Variant::Bilinear => (dim, dim),
            Variant::DistMult | Variant::TransE => (dim, 1),
        });
    }
    for _ in g.node_types() {
        shapes.extend([(dim, dim), (dim, 1), (dim, dim)]);
    }
    shapes
}

/// Parameters under which scoring decides observed-denotation membership:
/// `d = |V|`, one-hot node embeddings, adjacency projection matrices,
/// identity intersection weights, zero bias and `Ψ = min`.
///
/// `R_τ` is stored so that `R_τ q` sums the τ-successors of the nodes in
/// `q`: entry `(j, i)` is 1 iff `τ(v_i, v_j)`.
pub fn exact_parameters(g: &TypedGraph, budget_bytes: usize) -> Result<ModelParams> {
    let d = g.node_count();
    if d == 0 {
        return Err(GqeError::Argument("exact parameters need a nonempty graph".into()));
    }
    let floats: usize = expected_shapes(g, Variant::Bilinear, Mode::Exact, d)
        .iter()
        .map(|(r, c)| r * c)
        .sum();
    let bytes = floats.saturating_mul(8);
    if bytes > budget_bytes {
        return Err(GqeError::Capacity(format!(
            "exact mode for {d} nodes needs {bytes} bytes of dense tensors, budget is {budget_bytes}"
        )));
    }
    let mut tensors = Vec::new();
    for t in 0..g.node_types().len() {
        let members = g.nodes_of_type(NodeTypeId(t as u32))?;
        let mut z = DenseMatrix::zeros(d, members.len().max(1));
        for &v in members {
            z.set(v.index(), g.local_index(v), 1.0);
        }
        tensors.push(z);
    }
    for rel in g.relations() {
        let mut r = DenseMatrix::zeros(d, d);
        for &u in g.nodes_of_type(rel.domain)? {
            for &v in g.neighbors(u, rel.id)? {
                r.set(v.index(), u.index(), 1.0);
            }
        }
        tensors.push(r);
    }
    for _ in g.node_types() {
        tensors.push(DenseMatrix::identity(d));
        tensors.push(DenseMatrix::zeros(d, 1));
        tensors.push(DenseMatrix::identity(d));
    }
    Ok(ModelParams::assemble(g, Variant::Bilinear, Psi::Min, Mode::Exact, d, tensors))
}
