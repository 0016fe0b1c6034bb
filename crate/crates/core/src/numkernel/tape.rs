//! Reverse-mode gradient tape over dense vectors.
//!
//! Every value on the tape is a vector (scalars are vectors of length 1).
//! Parameters live outside the tape in a slice of [`DenseMatrix`] and are
//! referenced by [`ParamId`]; the tape only remembers which parameter each
//! operation read, so the same store is passed again to [`Tape::backward`].

use std::collections::BTreeMap;

use super::tensor::{dot, matvec_raw, DenseMatrix};
use crate::error::{GqeError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Constant,
    /// Reads a `dim x 1` parameter as a vector.
    ParamVector(ParamId),
    /// `scale * sum of the listed columns` of a parameter matrix.
    ParamColumns {
        param: ParamId,
        cols: Vec<usize>,
        scale: f64,
    },
    MatVec {
        param: ParamId,
        x: Var,
    },
    Hadamard(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Offset(Var),
    Scale(Var, f64),
    Relu(Var),
    /// `winners[i]` is the position in `inputs` that supplied coordinate `i`.
    MinAcross {
        inputs: Vec<Var>,
        winners: Vec<usize>,
    },
    MeanAcross(Vec<Var>),
    Cosine(Var, Var),
}

#[derive(Debug, Default)]
pub struct Tape {
    ops: Vec<Op>,
    values: Vec<Vec<f64>>,
    kink_margin: f64,
}

/// Parameter gradients keyed by [`ParamId`], each the same length as its tensor.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gradients {
    grads: BTreeMap<ParamId, Vec<f64>>,
}

impl Gradients {
    pub fn new() -> Self {
        Self::default()
    }

    fn slot(&mut self, id: ParamId, len: usize) -> &mut Vec<f64> {
        self.grads.entry(id).or_insert_with(|| vec![0.0; len])
    }

    pub fn insert(&mut self, id: ParamId, values: Vec<f64>) {
        self.grads.insert(id, values);
    }

    pub fn get(&self, id: ParamId) -> Option<&[f64]> {
        self.grads.get(&id).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &[f64])> {
        self.grads.iter().map(|(k, v)| (*k, v.as_slice()))
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Gradients, scale: f64) {
        for (id, g) in &other.grads {
            let slot = self.slot(*id, g.len());
            for (s, v) in slot.iter_mut().zip(g) {
                *s += scale * v;
            }
        }
    }

    pub fn scale(&mut self, c: f64) {
        for g in self.grads.values_mut() {
            g.iter_mut().for_each(|v| *v *= c);
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.grads
            .values()
            .map(|g| dot(g, g))
            .sum::<f64>()
            .sqrt()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            ops: Vec::new(),
            values: Vec::new(),
            kink_margin: f64::INFINITY,
        }
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.values[v.0]
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.values[v.0][0]
    }

    /// Smallest distance of any recorded ReLU input or min-across gap from its
    /// kink. Finite differences with step `eps` are trustworthy only when this
    /// exceeds `eps` comfortably.
    pub fn kink_margin(&self) -> f64 {
        self.kink_margin
    }

    fn push(&mut self, op: Op, value: Vec<f64>) -> Var {
        self.ops.push(op);
        self.values.push(value);
        Var(self.values.len() - 1)
    }

    fn same_dim(&self, a: Var, b: Var, what: &str) -> Result<usize> {
        let (da, db) = (self.values[a.0].len(), self.values[b.0].len());
        if da != db {
            return Err(GqeError::Shape(format!("{what}: dims {da} and {db}")));
        }
        Ok(da)
    }

    pub fn constant(&mut self, values: Vec<f64>) -> Var {
        self.push(Op::Constant, values)
    }

    pub fn param_vector(&mut self, params: &[DenseMatrix], id: ParamId) -> Var {
        self.push(Op::ParamVector(id), params[id.0].as_slice().to_vec())
    }

    pub fn param_columns(
        &mut self,
        params: &[DenseMatrix],
        id: ParamId,
        cols: &[usize],
        scale: f64,
    ) -> Result<Var> {
        let m = &params[id.0];
        if let Some(&c) = cols.iter().find(|&&c| c >= m.cols()) {
            return Err(GqeError::Shape(format!(
                "column {c} out of range for {} columns",
                m.cols()
            )));
        }
        let value = (0..m.rows())
            .map(|r| scale * cols.iter().map(|&c| m.get(r, c)).sum::<f64>())
            .collect();
        Ok(self.push(
            Op::ParamColumns {
                param: id,
                cols: cols.to_vec(),
                scale,
            },
            value,
        ))
    }

    pub fn matvec(&mut self, params: &[DenseMatrix], id: ParamId, x: Var) -> Result<Var> {
        let m = &params[id.0];
        if m.cols() != self.values[x.0].len() {
            return Err(GqeError::Shape(format!(
                "matvec: {}x{} with dim {}",
                m.rows(),
                m.cols(),
                self.values[x.0].len()
            )));
        }
        let value = matvec_raw(m, &self.values[x.0]);
        Ok(self.push(Op::MatVec { param: id, x }, value))
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_dim(a, b, "hadamard")?;
        let value = self.values[a.0]
            .iter()
            .zip(&self.values[b.0])
            .map(|(x, y)| x * y)
            .collect();
        Ok(self.push(Op::Hadamard(a, b), value))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_dim(a, b, "add")?;
        let value = self.values[a.0]
            .iter()
            .zip(&self.values[b.0])
            .map(|(x, y)| x + y)
            .collect();
        Ok(self.push(Op::Add(a, b), value))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_dim(a, b, "sub")?;
        let value = self.values[a.0]
            .iter()
            .zip(&self.values[b.0])
            .map(|(x, y)| x - y)
            .collect();
        Ok(self.push(Op::Sub(a, b), value))
    }

    /// Adds the constant `c` to every coordinate.
    pub fn offset(&mut self, a: Var, c: f64) -> Var {
        let value = self.values[a.0].iter().map(|x| x + c).collect();
        self.push(Op::Offset(a), value)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = self.values[a.0].iter().map(|x| c * x).collect();
        self.push(Op::Scale(a, c), value)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let input = &self.values[a.0];
        let margin = input.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
        self.kink_margin = self.kink_margin.min(margin);
        let value = input.iter().map(|x| x.max(0.0)).collect();
        self.push(Op::Relu(a), value)
    }

    /// Elementwise minimum over `inputs`. Ties go to the earliest input.
    pub fn min_across(&mut self, inputs: &[Var]) -> Result<Var> {
        let first = *inputs
            .first()
            .ok_or_else(|| GqeError::Argument("min_across over no inputs".into()))?;
        for &v in &inputs[1..] {
            self.same_dim(first, v, "min_across")?;
        }
        let dim = self.values[first.0].len();
        let mut winners = vec![0; dim];
        let mut value = vec![0.0; dim];
        for i in 0..dim {
            let mut best = self.values[first.0][i];
            let mut runner_up = f64::INFINITY;
            for (k, v) in inputs.iter().enumerate().skip(1) {
                let x = self.values[v.0][i];
                if x < best {
                    runner_up = best;
                    best = x;
                    winners[i] = k;
                } else {
                    runner_up = runner_up.min(x);
                }
            }
            value[i] = best;
            if inputs.len() > 1 {
                self.kink_margin = self.kink_margin.min(runner_up - best);
            }
        }
        Ok(self.push(
            Op::MinAcross {
                inputs: inputs.to_vec(),
                winners,
            },
            value,
        ))
    }

    pub fn mean_across(&mut self, inputs: &[Var]) -> Result<Var> {
        let first = *inputs
            .first()
            .ok_or_else(|| GqeError::Argument("mean_across over no inputs".into()))?;
        for &v in &inputs[1..] {
            self.same_dim(first, v, "mean_across")?;
        }
        let n = inputs.len() as f64;
        let dim = self.values[first.0].len();
        let value = (0..dim)
            .map(|i| inputs.iter().map(|v| self.values[v.0][i]).sum::<f64>() / n)
            .collect();
        Ok(self.push(Op::MeanAcross(inputs.to_vec()), value))
    }

    /// Cosine similarity as a length-1 value. Zero-norm inputs are an error.
    pub fn cosine(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_dim(a, b, "cosine")?;
        let (x, y) = (&self.values[a.0], &self.values[b.0]);
        let (nx, ny) = (dot(x, x).sqrt(), dot(y, y).sqrt());
        if nx == 0.0 || ny == 0.0 {
            return Err(GqeError::Degenerate("cosine of a zero-norm vector".into()));
        }
        let value = dot(x, y) / (nx * ny);
        Ok(self.push(Op::Cosine(a, b), vec![value]))
    }

    /// Backpropagates from the scalar `output`, visiting operations in exact
    /// reverse recording order, and returns parameter gradients.
    pub fn backward(&self, output: Var, params: &[DenseMatrix]) -> Result<Gradients> {
        if self.values[output.0].len() != 1 {
            return Err(GqeError::Shape("backward from a non-scalar value".into()));
        }
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; self.values.len()];
        adj[output.0] = Some(vec![1.0]);
        let mut grads = Gradients::new();

        fn acc(adj: &mut [Option<Vec<f64>>], target: Var, delta: impl Iterator<Item = f64>) {
            let slot = &mut adj[target.0];
            match slot {
                Some(a) => a.iter_mut().zip(delta).for_each(|(s, d)| *s += d),
                None => *slot = Some(delta.collect()),
            }
        }

        for idx in (0..=output.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            match &self.ops[idx] {
                Op::Constant => {}
                Op::ParamVector(id) => {
                    let slot = grads.slot(*id, params[id.0].len());
                    slot.iter_mut().zip(&g).for_each(|(s, d)| *s += d);
                }
                Op::ParamColumns { param, cols, scale } => {
                    let m = &params[param.0];
                    let slot = grads.slot(*param, m.len());
                    for (r, gr) in g.iter().enumerate() {
                        for &c in cols {
                            slot[r * m.cols() + c] += scale * gr;
                        }
                    }
                }
                Op::MatVec { param, x } => {
                    let m = &params[param.0];
                    let xv = &self.values[x.0];
                    let slot = grads.slot(*param, m.len());
                    for (r, gr) in g.iter().enumerate() {
                        if *gr != 0.0 {
                            let row = &mut slot[r * m.cols()..(r + 1) * m.cols()];
                            row.iter_mut().zip(xv).for_each(|(s, xj)| *s += gr * xj);
                        }
                    }
                    let dx = (0..m.cols()).map(|c| (0..m.rows()).map(|r| m.get(r, c) * g[r]).sum());
                    acc(&mut adj, *x, dx);
                }
                Op::Hadamard(a, b) => {
                    let (av, bv) = (&self.values[a.0], &self.values[b.0]);
                    acc(&mut adj, *a, g.iter().zip(bv).map(|(d, y)| d * y));
                    acc(&mut adj, *b, g.iter().zip(av).map(|(d, x)| d * x));
                }
                Op::Add(a, b) => {
                    acc(&mut adj, *a, g.iter().copied());
                    acc(&mut adj, *b, g.iter().copied());
                }
                Op::Sub(a, b) => {
                    acc(&mut adj, *a, g.iter().copied());
                    acc(&mut adj, *b, g.iter().map(|d| -d));
                }
                Op::Offset(a) => acc(&mut adj, *a, g.iter().copied()),
                Op::Scale(a, c) => acc(&mut adj, *a, g.iter().map(|d| c * d)),
                Op::Relu(a) => {
                    let x = &self.values[a.0];
                    acc(
                        &mut adj,
                        *a,
                        g.iter()
                            .zip(x)
                            .map(|(d, xi)| if *xi > 0.0 { *d } else { 0.0 }),
                    );
                }
                Op::MinAcross { inputs, winners } => {
                    for (k, v) in inputs.iter().enumerate() {
                        acc(
                            &mut adj,
                            *v,
                            g.iter()
                                .zip(winners)
                                .map(|(d, w)| if *w == k { *d } else { 0.0 }),
                        );
                    }
                }
                Op::MeanAcross(inputs) => {
                    let n = inputs.len() as f64;
                    for v in inputs {
                        acc(&mut adj, *v, g.iter().map(|d| d / n));
                    }
                }
                Op::Cosine(a, b) => {
                    let (x, y) = (&self.values[a.0], &self.values[b.0]);
                    let (nx, ny) = (dot(x, x).sqrt(), dot(y, y).sqrt());
                    let s = self.values[idx][0];
                    let d = g[0];
                    acc(
                        &mut adj,
                        *a,
                        x.iter()
                            .zip(y)
                            .map(|(xi, yi)| d * (yi / (nx * ny) - s * xi / (nx * nx))),
                    );
                    acc(
                        &mut adj,
                        *b,
                        x.iter()
                            .zip(y)
                            .map(|(xi, yi)| d * (xi / (nx * ny) - s * yi / (ny * ny))),
                    );
                }
            }
        }
        Ok(grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_across_routes_ties_to_first_input() {
        let mut tape = Tape::new();
        let params = vec![
            DenseMatrix::from_vec(2, 1, vec![1.0, 3.0]).unwrap(),
            DenseMatrix::from_vec(2, 1, vec![1.0, 2.0]).unwrap(),
        ];
        let a = tape.param_vector(&params, ParamId(0));
        let b = tape.param_vector(&params, ParamId(1));
        let m = tape.min_across(&[a, b]).unwrap();
        assert_eq!(tape.value(m), &[1.0, 2.0]);
        let ones = tape.constant(vec![1.0, 1.0]);
        let c = tape.cosine(m, ones).unwrap();
        let g = tape.backward(c, &params).unwrap();
        // coordinate 0 tie → first input, coordinate 1 → second input
        assert_ne!(g.get(ParamId(0)).unwrap()[0], 0.0);
        assert_eq!(g.get(ParamId(0)).unwrap()[1], 0.0);
        assert_eq!(g.get(ParamId(1)).unwrap()[0], 0.0);
        assert_ne!(g.get(ParamId(1)).unwrap()[1], 0.0);
        assert_eq!(tape.kink_margin(), 0.0);
    }

    #[test]
    fn backward_of_x_dot_x() {
        // f(x) = x·x via cosine-free ops: (x ⊙ x) summed by a ones-row matvec
        let params = vec![
            DenseMatrix::from_vec(1, 1, vec![3.0]).unwrap(),
            DenseMatrix::from_vec(1, 1, vec![1.0]).unwrap(),
        ];
        let mut tape = Tape::new();
        let x = tape.param_vector(&params, ParamId(0));
        let sq = tape.hadamard(x, x).unwrap();
        let f = tape.matvec(&params, ParamId(1), sq).unwrap();
        assert_eq!(tape.scalar(f), 9.0);
        let g = tape.backward(f, &params).unwrap();
        assert_eq!(g.get(ParamId(0)).unwrap(), &[6.0]);
        assert_eq!(g.get(ParamId(1)).unwrap(), &[9.0]);
    }

    #[test]
    fn cosine_rejects_zero_norm() {
        let mut tape = Tape::new();
        let a = tape.constant(vec![0.0, 0.0]);
        let b = tape.constant(vec![1.0, 0.0]);
        assert!(matches!(tape.cosine(a, b), Err(GqeError::Degenerate(_))));
    }

    #[test]
    fn gradients_accumulate_and_scale() {
        let mut a = Gradients::new();
        let mut b = Gradients::new();
        b.slot(ParamId(2), 2).copy_from_slice(&[3.0, 4.0]);
        a.add_scaled(&b, 2.0);
        assert_eq!(a.get(ParamId(2)).unwrap(), &[6.0, 8.0]);
        assert_eq!(a.l2_norm(), 10.0);
        a.scale(0.5);
        assert_eq!(a.get(ParamId(2)).unwrap(), &[3.0, 4.0]);
    }
}
