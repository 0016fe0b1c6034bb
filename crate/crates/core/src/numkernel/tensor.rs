use serde::{Deserialize, Serialize};

use crate::error::{GqeError, Result};

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.values[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(GqeError::Shape(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                values.len()
            )));
        }
        Ok(DenseMatrix { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(GqeError::Shape("ragged rows".into()));
        }
        Self::from_vec(rows.len(), cols, rows.concat())
    }

    /// A `dim x 1` matrix holding `v`; vector-valued parameters are stored this way.
    pub fn column(v: DenseVector) -> Self {
        let rows = v.dim();
        DenseMatrix {
            rows,
            cols: 1,
            values: v.into_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.values[r * self.cols + c] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column_vector(&self, c: usize) -> DenseVector {
        DenseVector::new((0..self.rows).map(|r| self.get(r, c)).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseVector {
    values: Vec<f64>,
}

impl DenseVector {
    pub fn new(values: Vec<f64>) -> Self {
        DenseVector { values }
    }

    pub fn zeros(dim: usize) -> Self {
        DenseVector {
            values: vec![0.0; dim],
        }
    }

    pub fn one_hot(dim: usize, index: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.values[index] = 1.0;
        v
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn norm(&self) -> f64 {
        dot(&self.values, &self.values).sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

impl From<Vec<f64>> for DenseVector {
    fn from(values: Vec<f64>) -> Self {
        DenseVector::new(values)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn matvec(m: &DenseMatrix, x: &DenseVector) -> Result<DenseVector> {
    if m.cols != x.dim() {
        return Err(GqeError::Shape(format!(
            "matvec: {}x{} matrix with vector of dim {}",
            m.rows,
            m.cols,
            x.dim()
        )));
    }
    Ok(DenseVector::new(matvec_raw(m, x.as_slice())))
}

pub(crate) fn matvec_raw(m: &DenseMatrix, x: &[f64]) -> Vec<f64> {
    (0..m.rows).map(|r| dot(m.row(r), x)).collect()
}

/// Elementwise primitives used by the intersection operator and the loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Elementwise {
    Relu,
    MinAcross,
    MeanAcross,
    Add,
    Scale(f64),
}

/// Applies `op` to `inputs`. `Relu` and `Scale` are unary; `Add` sums any
/// number of inputs; the two reductions need at least one input.
pub fn elementwise(op: Elementwise, inputs: &[&DenseVector]) -> Result<DenseVector> {
    let first = inputs
        .first()
        .ok_or_else(|| GqeError::Argument(format!("{op:?} over an empty input set")))?;
    let dim = first.dim();
    if let Some(bad) = inputs.iter().find(|v| v.dim() != dim) {
        return Err(GqeError::Shape(format!(
            "{op:?}: inputs of dim {dim} and {}",
            bad.dim()
        )));
    }
    let unary = |f: &dyn Fn(f64) -> f64| -> Result<DenseVector> {
        if inputs.len() != 1 {
            return Err(GqeError::Argument(format!(
                "{op:?} takes one input, got {}",
                inputs.len()
            )));
        }
        Ok(DenseVector::new(first.values.iter().map(|&v| f(v)).collect()))
    };
    match op {
        Elementwise::Relu => unary(&|v| v.max(0.0)),
        Elementwise::Scale(c) => unary(&|v| c * v),
        Elementwise::Add => Ok(DenseVector::new(
            (0..dim)
                .map(|i| inputs.iter().map(|v| v.values[i]).sum())
                .collect(),
        )),
        Elementwise::MinAcross => Ok(DenseVector::new(
            (0..dim)
                .map(|i| {
                    inputs
                        .iter()
                        .map(|v| v.values[i])
                        .fold(f64::INFINITY, f64::min)
                })
                .collect(),
        )),
        Elementwise::MeanAcross => {
            let n = inputs.len() as f64;
            Ok(DenseVector::new(
                (0..dim)
                    .map(|i| inputs.iter().map(|v| v.values[i]).sum::<f64>() / n)
                    .collect(),
            ))
        }
    }
}

/// Cosine similarity. Both inputs must have nonzero norm.
pub fn cosine(a: &DenseVector, b: &DenseVector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(GqeError::Shape(format!(
            "cosine of dims {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(GqeError::Degenerate("cosine of a zero-norm vector".into()));
    }
    Ok((dot(a.as_slice(), b.as_slice()) / (na * nb)).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DenseVector {
        DenseVector::new(x.to_vec())
    }

    #[test]
    fn matvec_examples() {
        let id = DenseMatrix::identity(3);
        assert_eq!(matvec(&id, &v(&[1., 2., 3.])).unwrap(), v(&[1., 2., 3.]));
        let z = DenseMatrix::zeros(3, 3);
        assert_eq!(matvec(&z, &v(&[4., -1., 2.])).unwrap(), v(&[0., 0., 0.]));
        let m = DenseMatrix::from_rows(&[vec![1., 2.], vec![3., 4.]]).unwrap();
        assert_eq!(matvec(&m, &v(&[1., 1.])).unwrap(), v(&[3., 7.]));
        assert!(matches!(
            matvec(&m, &v(&[1., 1., 1.])),
            Err(GqeError::Shape(_))
        ));
    }

    #[test]
    fn elementwise_examples() {
        let a = v(&[1., 0., 1.]);
        let b = v(&[1., 1., 0.]);
        assert_eq!(
            elementwise(Elementwise::MinAcross, &[&a, &b]).unwrap(),
            v(&[1., 0., 0.])
        );
        assert_eq!(
            elementwise(Elementwise::MeanAcross, &[&v(&[2., 0.]), &v(&[0., 2.])]).unwrap(),
            v(&[1., 1.])
        );
        assert_eq!(
            elementwise(Elementwise::Relu, &[&v(&[-1., 0., 2.])]).unwrap(),
            v(&[0., 0., 2.])
        );
        assert_eq!(
            elementwise(Elementwise::Scale(2.0), &[&a]).unwrap(),
            v(&[2., 0., 2.])
        );
        assert_eq!(
            elementwise(Elementwise::Add, &[&a, &b]).unwrap(),
            v(&[2., 1., 1.])
        );
        assert!(matches!(
            elementwise(Elementwise::MinAcross, &[]),
            Err(GqeError::Argument(_))
        ));
        assert!(elementwise(Elementwise::Relu, &[&a, &b]).is_err());
    }

    #[test]
    fn cosine_examples() {
        let x = v(&[0.3, -2.0, 5.0]);
        assert!((cosine(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(
            cosine(&DenseVector::one_hot(4, 1), &DenseVector::one_hot(4, 2)).unwrap(),
            0.0
        );
        let c = cosine(&v(&[1., 1.]), &v(&[1., 0.])).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(matches!(
            cosine(&v(&[0., 0.]), &v(&[1., 0.])),
            Err(GqeError::Degenerate(_))
        ));
    }
}
