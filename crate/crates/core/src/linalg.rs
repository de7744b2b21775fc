//! Small dense vectors and matrices, plus QR-based orthonormal sampling.
//!
//! Everything here is desk-scale (matrices up to ~1000x1000); storage is
//! row-major and operations are plain loops. The adjoint of the coupling
//! operator is the transpose, so `apply_transpose` stands in for `K*`.

use crate::rng::SeededRng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("rank-deficient sample after re-draw (rows={rows}, cols={cols})")]
    RankDeficient { rows: usize, cols: usize },
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),
}

/// Dense real vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn from_vec(entries: Vec<f64>) -> Self {
        Vector(entries)
    }

    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scaled(&self, s: f64) -> Vector {
        Vector(self.0.iter().map(|a| a * s).collect())
    }

    /// self += s * other
    pub fn add_scaled(&mut self, s: f64, other: &Vector) {
        debug_assert_eq!(self.dim(), other.dim());
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += s * b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|a| a.is_finite())
    }

    /// Concatenates two vectors, e.g. z = (x, y) on the product space.
    pub fn concat(&self, other: &Vector) -> Vector {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Vector(v)
    }

    pub fn split(&self, first_dim: usize) -> (Vector, Vector) {
        let (a, b) = self.0.split_at(first_dim);
        (Vector(a.to_vec()), Vector(b.to_vec()))
    }
}

impl std::ops::Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl std::ops::IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl std::ops::Add<&Vector> for &Vector {
    type Output = Vector;
    fn add(self, other: &Vector) -> Vector {
        debug_assert_eq!(self.dim(), other.dim());
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

impl std::ops::Sub<&Vector> for &Vector {
    type Output = Vector;
    fn sub(self, other: &Vector) -> Vector {
        debug_assert_eq!(self.dim(), other.dim());
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if rows * cols != data.len() {
            return Err(LinalgError::DimensionMismatch(format!(
                "{}x{} matrix needs {} entries, got {}",
                rows,
                cols,
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

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

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn entries(&self) -> &[f64] {
        &self.data
    }

    /// A v
    pub fn apply(&self, v: &Vector) -> Result<Vector, LinalgError> {
        if v.dim() != self.cols {
            return Err(LinalgError::DimensionMismatch(format!(
                "matvec: matrix is {}x{}, vector has dim {}",
                self.rows,
                self.cols,
                v.dim()
            )));
        }
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            out[i] = row.iter().zip(v.as_slice()).map(|(a, b)| a * b).sum();
        }
        Ok(Vector::from_vec(out))
    }

    /// A^T v (the adjoint: these are Euclidean spaces).
    pub fn apply_transpose(&self, v: &Vector) -> Result<Vector, LinalgError> {
        if v.dim() != self.rows {
            return Err(LinalgError::DimensionMismatch(format!(
                "matvec^T: matrix is {}x{}, vector has dim {}",
                self.rows,
                self.cols,
                v.dim()
            )));
        }
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let vi = v[i];
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * vi;
            }
        }
        Ok(Vector::from_vec(out))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|a| a.is_finite())
    }
}

/// Matrix with orthonormal columns, obtained by modified Gram-Schmidt (with a
/// second orthogonalization pass) applied to a standard-normal sample.
///
/// Rank deficiency is essentially impossible for Gaussian samples; on
/// detection the sample is re-drawn once, then the call errors out.
pub fn qr_orthonormal(
    rng: &mut SeededRng,
    rows: usize,
    cols: usize,
) -> Result<Matrix, LinalgError> {
    if rows < cols || cols < 1 {
        return Err(LinalgError::InvalidDimensions(format!(
            "qr_orthonormal needs rows >= cols >= 1, got {}x{}",
            rows, cols
        )));
    }
    for _attempt in 0..2 {
        let mut columns: Vec<Vec<f64>> = (0..cols)
            .map(|_| (0..rows).map(|_| rng.normal()).collect())
            .collect();
        if let Some(q) = gram_schmidt(&mut columns, rows) {
            let mut m = Matrix::zeros(rows, cols);
            for (j, col) in q.iter().enumerate() {
                for (i, &v) in col.iter().enumerate() {
                    m.set(i, j, v);
                }
            }
            return Ok(m);
        }
    }
    Err(LinalgError::RankDeficient { rows, cols })
}

fn gram_schmidt(columns: &mut [Vec<f64>], rows: usize) -> Option<Vec<Vec<f64>>> {
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(columns.len());
    for col in columns.iter() {
        let mut v = col.clone();
        // Two MGS passes keep Q^T Q - I at machine-precision level.
        for _pass in 0..2 {
            for u in &q {
                let r: f64 = u.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
                for (vi, ui) in v.iter_mut().zip(u) {
                    *vi -= r * ui;
                }
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm <= 1e-12 * (rows as f64).sqrt() {
            return None;
        }
        for vi in v.iter_mut() {
            *vi /= norm;
        }
        q.push(v);
    }
    Some(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_orthonormality_defect(q: &Matrix) -> f64 {
        let mut worst = 0.0f64;
        for a in 0..q.cols() {
            for b in 0..q.cols() {
                let dot: f64 = (0..q.rows()).map(|i| q.get(i, a) * q.get(i, b)).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    #[test]
    fn matvec_example_coupling() {
        let k = Matrix::from_rows(2, 2, vec![2.0, 2.0, 2.0, 2.0]).unwrap();
        let v = Vector::from_vec(vec![1.0, 0.0]);
        let kv = k.apply(&v).unwrap();
        assert_eq!(kv.as_slice(), &[2.0, 2.0]);
    }

    #[test]
    fn matvec_identity() {
        let id = Matrix::identity(3);
        let v = Vector::from_vec(vec![1.0, 2.0, 3.0]);
        assert_eq!(id.apply(&v).unwrap().as_slice(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn matvec_hand_computed() {
        let a = Matrix::from_rows(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let v = Vector::from_vec(vec![1.0, 1.0]);
        assert_eq!(a.apply(&v).unwrap().as_slice(), &[3.0, 7.0]);
    }

    #[test]
    fn matvec_dimension_mismatch_errors() {
        let a = Matrix::from_rows(2, 3, vec![0.0; 6]).unwrap();
        let v = Vector::from_vec(vec![1.0, 2.0]);
        assert!(a.apply(&v).is_err());
        assert!(a.apply_transpose(&Vector::zeros(3)).is_err());
    }

    #[test]
    fn qr_one_dimensional_is_sign() {
        let mut rng = SeededRng::new(7);
        let q = qr_orthonormal(&mut rng, 1, 1).unwrap();
        assert!((q.get(0, 0).abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn qr_columns_orthonormal() {
        let mut rng = SeededRng::new(3);
        for &(rows, cols) in &[(4, 2), (10, 10), (50, 7)] {
            let q = qr_orthonormal(&mut rng, rows, cols).unwrap();
            assert!(
                max_orthonormality_defect(&q) <= 1e-10,
                "defect {} for {}x{}",
                max_orthonormality_defect(&q),
                rows,
                cols
            );
        }
    }

    #[test]
    fn qr_deterministic_for_seed() {
        let a = qr_orthonormal(&mut SeededRng::new(42), 4, 2).unwrap();
        let b = qr_orthonormal(&mut SeededRng::new(42), 4, 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn qr_rejects_bad_shapes() {
        let mut rng = SeededRng::new(1);
        assert!(qr_orthonormal(&mut rng, 2, 3).is_err());
        assert!(qr_orthonormal(&mut rng, 2, 0).is_err());
    }
}
