//! Small dense matrix/vector toolkit and the activation functions shared by
//! every model. Storage is row-major `f64`.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Shape pair used in error messages, printed as `RxC`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape(pub usize, pub usize);

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.0, self.1)
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data. Fails if the length does not
    /// match `rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "matrix {} needs {} values, got {}",
                Shape(rows, cols),
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::Shape(format!("row {i} has {} columns, expected {cols}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> Shape {
        Shape(self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    /// `out = self * x`, writing into a caller-owned buffer.
    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if x.len() != self.cols || out.len() != self.rows {
            return Err(Error::Shape(format!(
                "matvec {} with vector of length {} into {}",
                self.shape(),
                x.len(),
                out.len()
            )));
        }
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols.max(1))) {
            *o = dot(row, x);
        }
        if self.cols == 0 {
            out.iter_mut().for_each(|o| *o = 0.0);
        }
        Ok(())
    }

    pub fn matvec(&self, x: &Vector) -> Result<Vector> {
        let mut out = vec![0.0; self.rows];
        self.matvec_into(x.as_slice(), &mut out)?;
        Ok(Vector(out))
    }

    /// `out += self^T * y`, the backward pass of a matvec.
    pub fn matvec_t_acc(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (&yr, row) in y.iter().zip(self.data.chunks_exact(self.cols.max(1))) {
            if yr != 0.0 {
                for (o, &w) in out.iter_mut().zip(row) {
                    *o += yr * w;
                }
            }
        }
    }

    /// `self += y * x^T`, the weight gradient of a matvec.
    pub fn add_outer(&mut self, y: &[f64], x: &[f64]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(x.len(), self.cols);
        let cols = self.cols.max(1);
        for (&yr, row) in y.iter().zip(self.data.chunks_exact_mut(cols)) {
            if yr != 0.0 {
                for (w, &xc) in row.iter_mut().zip(x) {
                    *w += yr * xc;
                }
            }
        }
    }
}

/// Standard matrix product.
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(Error::Shape(format!("matmul {} x {}", a.shape(), b.shape())));
    }
    let mut out = Matrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        for k in 0..a.cols {
            let aik = a.data[i * a.cols + k];
            if aik == 0.0 {
                continue;
            }
            let brow = &b.data[k * b.cols..(k + 1) * b.cols];
            let orow = &mut out.data[i * b.cols..(i + 1) * b.cols];
            for (o, &bkj) in orow.iter_mut().zip(brow) {
                *o += aik * bkj;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vector(pub Vec<f64>);

impl Vector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn filled(n: usize, v: f64) -> Self {
        Self(vec![v; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl From<&[f64]> for Vector {
    fn from(v: &[f64]) -> Self {
        Self(v.to_vec())
    }
}

/// Inner product over the common prefix of `a` and `b`, with four partial
/// sums so the loop vectorizes.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    (acc[0] + acc[2]) + (acc[1] + acc[3]) + tail
}

/// Logistic function in the branch form that never evaluates `exp` of a
/// positive argument.
#[inline]
pub fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn relu_scalar(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

pub fn sigmoid(x: &Vector) -> Vector {
    Vector(x.0.iter().map(|&v| sigmoid_scalar(v)).collect())
}

pub fn tanh_act(x: &Vector) -> Vector {
    Vector(x.0.iter().map(|v| v.tanh()).collect())
}

pub fn relu(x: &Vector) -> Vector {
    Vector(x.0.iter().map(|&v| relu_scalar(v)).collect())
}

fn check_same_len(op: &str, a: &Vector, b: &Vector) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("{op}: lengths {} and {}", a.len(), b.len())));
    }
    Ok(())
}

pub fn hadamard(a: &Vector, b: &Vector) -> Result<Vector> {
    check_same_len("hadamard", a, b)?;
    Ok(Vector(a.0.iter().zip(&b.0).map(|(x, y)| x * y).collect()))
}

pub fn vec_add(a: &Vector, b: &Vector) -> Result<Vector> {
    check_same_len("vec_add", a, b)?;
    Ok(Vector(a.0.iter().zip(&b.0).map(|(x, y)| x + y).collect()))
}

pub fn concat(a: &Vector, b: &Vector) -> Vector {
    let mut out = Vec::with_capacity(a.len() + b.len());
    out.extend_from_slice(&a.0);
    out.extend_from_slice(&b.0);
    Vector(out)
}

/// Least-squares solution of `x * beta ≈ y` via the normal equations.
///
/// Fails with [`Error::Singular`] when `x^T x` has a vanishing pivot.
pub fn least_squares(x: &Matrix, y: &[f64]) -> Result<Vec<f64>> {
    if x.rows != y.len() {
        return Err(Error::Shape(format!("least squares: design {} vs {} targets", x.shape(), y.len())));
    }
    let k = x.cols;
    let mut xtx = Matrix::zeros(k, k);
    let mut xty = vec![0.0; k];
    for (row, &yi) in x.data.chunks_exact(k.max(1)).zip(y) {
        for i in 0..k {
            xty[i] += row[i] * yi;
            for j in i..k {
                xtx.data[i * k + j] += row[i] * row[j];
            }
        }
    }
    for i in 0..k {
        for j in 0..i {
            xtx.data[i * k + j] = xtx.data[j * k + i];
        }
    }
    solve(xtx, xty)
}

/// Gaussian elimination with partial pivoting for a square system.
pub fn solve(mut a: Matrix, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = a.rows;
    if a.cols != n || b.len() != n {
        return Err(Error::Shape(format!("solve: {} with rhs {}", a.shape(), b.len())));
    }
    let scale = a.data.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a.get(i, col).abs().total_cmp(&a.get(j, col).abs())).unwrap_or(col);
        if a.get(pivot, col).abs() <= 1e-12 * scale {
            return Err(Error::Singular);
        }
        if pivot != col {
            for c in 0..n {
                a.data.swap(pivot * n + c, col * n + c);
            }
            b.swap(pivot, col);
        }
        let p = a.get(col, col);
        for r in col + 1..n {
            let f = a.get(r, col) / p;
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                a.data[r * n + c] -= f * a.data[col * n + c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a.get(r, c) * x[c]).sum();
        x[r] = (b[r] - s) / a.get(r, r);
    }
    Ok(x)
}
