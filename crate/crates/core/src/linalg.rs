//! Dense row-major matrices, row-stochastic validation, Euclidean projection
//! onto the probability simplex, and Frobenius metrics.

use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ChoiceDataset, StructuredWeightMatrix};

/// Tolerance on entry bounds and row sums of stochastic matrices and simplex
/// vectors.
pub const STOCHASTIC_TOL: f64 = 1e-9;

/// Dense row-major matrix. Serializes as `{"rows": R, "cols": C, "data": [...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Deserialize)]
struct RawMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TryFrom<RawMatrix> for Matrix {
    type Error = Error;

    fn try_from(raw: RawMatrix) -> Result<Self> {
        Matrix::from_vec(raw.rows, raw.cols, raw.data)
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                format!("{} entries for {rows}x{cols}", rows * cols),
                format!("{} entries", data.len()),
            ));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::shape(
                    format!("{cols} columns"),
                    format!("{} columns in row {}", r.len(), i + 1),
                ));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Row `i`, 0-based.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on zero width
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::shape(
                format!("{} rows on the right", self.cols),
                format!("{}", rhs.rows),
            ));
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let src = rhs.row(k);
                for (o, &b) in out.row_mut(i).iter_mut().zip(src) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    fn check_same_shape(&self, other: &Matrix) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shape(
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

/// A matrix whose entries lie in `[0, 1]` and whose rows sum to one, both
/// within [`STOCHASTIC_TOL`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Matrix", into = "Matrix")]
pub struct StochasticMatrix(Matrix);

impl StochasticMatrix {
    pub fn new(matrix: Matrix) -> Result<Self> {
        check_stochastic(&matrix)?;
        Ok(StochasticMatrix(matrix))
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    pub(crate) fn new_unchecked(matrix: Matrix) -> Self {
        StochasticMatrix(matrix)
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }
}

impl std::ops::Deref for StochasticMatrix {
    type Target = Matrix;

    fn deref(&self) -> &Matrix {
        &self.0
    }
}

impl TryFrom<Matrix> for StochasticMatrix {
    type Error = Error;

    fn try_from(m: Matrix) -> Result<Self> {
        StochasticMatrix::new(m)
    }
}

impl From<StochasticMatrix> for Matrix {
    fn from(m: StochasticMatrix) -> Matrix {
        m.0
    }
}

pub fn check_stochastic(m: &Matrix) -> Result<()> {
    for (i, row) in m.row_iter().enumerate() {
        check_simplex(row).map_err(|why| Error::NotStochastic(format!("row {}: {why}", i + 1)))?;
    }
    Ok(())
}

fn check_simplex(v: &[f64]) -> std::result::Result<(), String> {
    if let Some((k, x)) = v
        .iter()
        .enumerate()
        .find(|(_, x)| !x.is_finite() || **x < -STOCHASTIC_TOL || **x > 1.0 + STOCHASTIC_TOL)
    {
        return Err(format!("entry {} = {x} outside [0, 1]", k + 1));
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > STOCHASTIC_TOL {
        return Err(format!("sums to {sum}"));
    }
    Ok(())
}

/// A point of the probability simplex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimplexVector(Vec<f64>);

impl SimplexVector {
    pub fn new(v: Vec<f64>) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::Dimension);
        }
        check_simplex(&v).map_err(Error::NotStochastic)?;
        Ok(SimplexVector(v))
    }

    pub fn uniform(dim: usize) -> Self {
        SimplexVector(vec![1.0 / dim as f64; dim])
    }

    pub(crate) fn new_unchecked(v: Vec<f64>) -> Self {
        SimplexVector(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl std::ops::Deref for SimplexVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Euclidean projection onto `{x : x >= 0, sum(x) = 1}` using the exact
/// sort-and-threshold algorithm.
pub fn project_to_simplex(v: &[f64]) -> Result<SimplexVector> {
    if v.is_empty() {
        return Err(Error::Dimension);
    }
    if let Some(k) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::Numeric(k));
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let t = (cumulative - 1.0) / (k + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    Ok(SimplexVector(v.iter().map(|&x| (x - theta).max(0.0)).collect()))
}

pub fn frobenius_distance(a: &Matrix, b: &Matrix) -> Result<f64> {
    a.check_same_shape(b)?;
    Ok(squared_distance(a.data(), b.data()).sqrt())
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Mean over `bins` of `||fitted - bin||_F^2`.
pub fn mean_squared_deviation(fitted: &Matrix, bins: &[impl AsRef<Matrix>]) -> Result<f64> {
    if bins.is_empty() {
        return Err(Error::EmptyData);
    }
    let mut total = 0.0;
    for b in bins {
        let b = b.as_ref();
        fitted.check_same_shape(b)?;
        total += squared_distance(fitted.data(), b.data());
    }
    Ok(total / bins.len() as f64)
}

impl AsRef<Matrix> for Matrix {
    fn as_ref(&self) -> &Matrix {
        self
    }
}

impl AsRef<Matrix> for StochasticMatrix {
    fn as_ref(&self) -> &Matrix {
        &self.0
    }
}

/// Average deviation `f(W, Q) = (1/N) sum_n ||WQ - P(n)||_F^2`.
pub fn average_deviation(w: &StructuredWeightMatrix, q: &StochasticMatrix, data: &ChoiceDataset) -> Result<f64> {
    if data.bins().is_empty() {
        return Err(Error::EmptyData);
    }
    let fitted = w.as_matrix().matmul(q)?;
    mean_squared_deviation(&fitted, data.bins())
}

/// Entrywise mean of equally shaped matrices.
pub fn entrywise_mean(mats: &[impl AsRef<Matrix>]) -> Result<Matrix> {
    let first = mats.first().ok_or(Error::EmptyData)?.as_ref();
    let mut sum = Matrix::zeros(first.rows(), first.cols());
    for m in mats {
        let m = m.as_ref();
        sum.check_same_shape(m)?;
        for (s, x) in sum.data.iter_mut().zip(m.data()) {
            *s += x;
        }
    }
    let n = mats.len() as f64;
    sum.data.iter_mut().for_each(|s| *s /= n);
    Ok(sum)
}

/// `||A x - b||^2` for a dense `A`.
pub fn squared_residual(a: &Matrix, x: &[f64], b: &[f64]) -> f64 {
    (0..a.rows())
        .map(|r| {
            let ax: f64 = a.row(r).iter().zip(x).map(|(p, q)| p * q).sum();
            (ax - b[r]) * (ax - b[r])
        })
        .sum()
}

/// Gradient of `x -> ||A x - b||^2`, i.e. `2 A^T (A x - b)`.
pub fn squared_residual_gradient(a: &Matrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    let mut grad = vec![0.0; a.cols()];
    for (row, &target) in a.row_iter().zip(b) {
        let ax: f64 = row.iter().zip(x).map(|(p, q)| p * q).sum();
        let e = 2.0 * (ax - target);
        for (g, &p) in grad.iter_mut().zip(row) {
            *g += e * p;
        }
    }
    grad
}
