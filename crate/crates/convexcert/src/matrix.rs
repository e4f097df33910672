//! Small dense symmetric matrices with a cyclic Jacobi eigensolver.
//!
//! The certifier only needs spectra of desk-scale matrices (dimensions up to
//! a few dozen), so a textbook Jacobi iteration is the whole story: it is
//! foolproof for real symmetric input and converges quadratically once the
//! off-diagonal mass is small.

use crate::error::{Error, Result};
use crate::linalg::Vector;

/// Tolerance for declaring the off-diagonal mass annihilated.
const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 64;
/// Symmetry check tolerance for row-major input.
const SYMMETRY_TOL: f64 = 1e-10;

/// Dense symmetric matrix in row-major storage.
#[derive(Clone, Debug)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    /// Builds from a row-major sequence of length `n * n`, rejecting
    /// asymmetric input beyond an absolute tolerance of `1e-10`.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidMatrix("order must be at least 1".into()));
        }
        if data.len() != n * n {
            return Err(Error::InvalidMatrix(format!(
                "expected {} entries for order {n}, got {}",
                n * n,
                data.len()
            )));
        }
        if data.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidMatrix("non-finite entry".into()));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if (data[i * n + j] - data[j * n + i]).abs() > SYMMETRY_TOL {
                    return Err(Error::InvalidMatrix(format!(
                        "asymmetric at ({i}, {j}): {} vs {}",
                        data[i * n + j],
                        data[j * n + i]
                    )));
                }
            }
        }
        Ok(SymMatrix { n, data })
    }

    pub fn diag(entries: &[f64]) -> Self {
        let n = entries.len();
        assert!(n >= 1);
        let mut data = vec![0.0; n * n];
        for (i, &e) in entries.iter().enumerate() {
            data[i * n + i] = e;
        }
        SymMatrix { n, data }
    }

    pub fn identity(n: usize) -> Self {
        Self::diag(&vec![1.0; n])
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// True when every off-diagonal entry is exactly zero.
    pub fn is_diagonal(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| i == j || self.get(i, j) == 0.0))
    }

    pub fn matvec(&self, x: &Vector) -> Vector {
        assert_eq!(x.dim(), self.n, "matvec: dimension mismatch");
        let mut out = vec![0.0; self.n];
        for i in 0..self.n {
            let row = &self.data[i * self.n..(i + 1) * self.n];
            out[i] = row.iter().zip(x.as_slice()).map(|(a, b)| a * b).sum();
        }
        Vector::new(out).expect("matvec produced non-finite output")
    }

    /// Quadratic form `x' A x`.
    pub fn quad_form(&self, x: &Vector) -> f64 {
        x.dot(&self.matvec(x))
    }

    /// Eigenvalues and orthonormal eigenvectors by cyclic Jacobi rotation,
    /// sorted ascending by eigenvalue. Column `k` of the returned matrix
    /// (as a `Vec` of columns) is the eigenvector for eigenvalue `k`.
    pub fn eigen(&self) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = self.n;
        let mut a = self.data.clone();
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            v[i * n + i] = 1.0;
        }
        let scale = self
            .data
            .iter()
            .fold(0.0f64, |acc, x| acc.max(x.abs()))
            .max(1.0);

        for _ in 0..JACOBI_MAX_SWEEPS {
            let mut off = 0.0f64;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += a[p * n + q] * a[p * n + q];
                }
            }
            if off.sqrt() <= JACOBI_TOL * scale {
                break;
            }
            for p in 0..n.saturating_sub(1) {
                for q in (p + 1)..n {
                    let apq = a[p * n + q];
                    if apq.abs() <= f64::MIN_POSITIVE {
                        continue;
                    }
                    let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                    let t = {
                        let tt = 1.0 / (theta.abs() + (1.0 + theta * theta).sqrt());
                        if theta < 0.0 {
                            -tt
                        } else {
                            tt
                        }
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;

                    // Rotate rows/columns p and q of a.
                    for k in 0..n {
                        let akp = a[k * n + p];
                        let akq = a[k * n + q];
                        a[k * n + p] = c * akp - s * akq;
                        a[k * n + q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p * n + k];
                        let aqk = a[q * n + k];
                        a[p * n + k] = c * apk - s * aqk;
                        a[q * n + k] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v[k * n + p];
                        let vkq = v[k * n + q];
                        v[k * n + p] = c * vkp - s * vkq;
                        v[k * n + q] = s * vkp + c * vkq;
                    }
                }
            }
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[i * n + i].partial_cmp(&a[j * n + j]).unwrap());
        let values: Vec<f64> = order.iter().map(|&i| a[i * n + i]).collect();
        let vectors: Vec<Vec<f64>> = order
            .iter()
            .map(|&col| (0..n).map(|row| v[row * n + col]).collect())
            .collect();
        (values, vectors)
    }

    /// Eigenvalues only, sorted ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigen().0
    }

    /// Solves `A x = b` by Gaussian elimination with partial pivoting.
    pub fn solve(&self, b: &Vector) -> Result<Vector> {
        assert_eq!(b.dim(), self.n, "solve: dimension mismatch");
        let n = self.n;
        let mut a = self.data.clone();
        let mut rhs: Vec<f64> = b.as_slice().to_vec();
        let scale = self
            .data
            .iter()
            .fold(0.0f64, |acc, x| acc.max(x.abs()))
            .max(1.0);

        for col in 0..n {
            let pivot_row = (col..n)
                .max_by(|&i, &j| {
                    a[i * n + col]
                        .abs()
                        .partial_cmp(&a[j * n + col].abs())
                        .unwrap()
                })
                .unwrap();
            if a[pivot_row * n + col].abs() <= 1e-12 * scale {
                return Err(Error::SingularMatrix(format!(
                    "pivot {:.3e} at column {col}",
                    a[pivot_row * n + col]
                )));
            }
            if pivot_row != col {
                for k in 0..n {
                    a.swap(col * n + k, pivot_row * n + k);
                }
                rhs.swap(col, pivot_row);
            }
            for row in (col + 1)..n {
                let factor = a[row * n + col] / a[col * n + col];
                if factor == 0.0 {
                    continue;
                }
                for k in col..n {
                    a[row * n + k] -= factor * a[col * n + k];
                }
                rhs[row] -= factor * rhs[col];
            }
        }
        for row in (0..n).rev() {
            let mut sum = rhs[row];
            for k in (row + 1)..n {
                sum -= a[row * n + k] * rhs[k];
            }
            rhs[row] = sum / a[row * n + row];
        }
        Vector::new(rhs).map_err(|_| Error::SingularMatrix("non-finite solution".into()))
    }

    /// Least-norm solution of `A x = b` through the eigendecomposition,
    /// together with a consistency flag (`false` when `b` has mass outside
    /// the range of `A`).
    pub fn pseudo_solve(&self, b: &Vector) -> (Vector, bool) {
        assert_eq!(b.dim(), self.n, "pseudo_solve: dimension mismatch");
        let (values, vectors) = self.eigen();
        let rank_tol = 1e-10 * values.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
        let mut x = vec![0.0; self.n];
        for (lambda, col) in values.iter().zip(&vectors) {
            if lambda.abs() <= rank_tol {
                continue;
            }
            let coeff: f64 = col.iter().zip(b.as_slice()).map(|(v, b)| v * b).sum();
            for (xi, vi) in x.iter_mut().zip(col) {
                *xi += coeff / lambda * vi;
            }
        }
        let x = Vector::new(x).expect("pseudo-solve produced non-finite output");
        let residual = self.matvec(&x).sub(b).norm();
        let consistent = residual <= 1e-9 * b.norm().max(1.0);
        (x, consistent)
    }
}

/// Dense rectangular matrix, row-major. Only what least squares needs.
#[derive(Clone, Debug)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidMatrix(
                "matrix must have at least one row and column".into(),
            ));
        }
        if data.len() != rows * cols {
            return Err(Error::InvalidMatrix(format!(
                "expected {} entries for {rows}x{cols}, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidMatrix("non-finite entry".into()));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn matvec(&self, x: &Vector) -> Vector {
        assert_eq!(x.dim(), self.cols, "matvec: dimension mismatch");
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            out[i] = row.iter().zip(x.as_slice()).map(|(a, b)| a * b).sum();
        }
        Vector::new(out).expect("matvec produced non-finite output")
    }

    pub fn t_matvec(&self, y: &Vector) -> Vector {
        assert_eq!(y.dim(), self.rows, "t_matvec: dimension mismatch");
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * y[i];
            }
        }
        Vector::new(out).expect("t_matvec produced non-finite output")
    }

    /// Gram matrix `A' A`.
    pub fn gram(&self) -> SymMatrix {
        let n = self.cols;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let mut sum = 0.0;
                for r in 0..self.rows {
                    sum += self.data[r * self.cols + i] * self.data[r * self.cols + j];
                }
                data[i * n + j] = sum;
                data[j * n + i] = sum;
            }
        }
        SymMatrix { n, data }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_asymmetric_input() {
        let err = SymMatrix::from_row_major(2, vec![1.0, 2.0, 3.0, 4.0]).unwrap_err();
        assert!(matches!(err, Error::InvalidMatrix(_)));
    }

    #[test]
    fn eigenvalues_of_diagonal() {
        let m = SymMatrix::diag(&[4.0, 1.0, -2.0]);
        let vals = m.eigenvalues();
        assert_eq!(vals, vec![-2.0, 1.0, 4.0]);
    }

    #[test]
    fn eigen_of_2x2() {
        // [[2, 1], [1, 2]] has eigenvalues 1 and 3.
        let m = SymMatrix::from_row_major(2, vec![2.0, 1.0, 1.0, 2.0]).unwrap();
        let vals = m.eigenvalues();
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn eigen_reconstructs_matrix() {
        let m = SymMatrix::from_row_major(
            3,
            vec![3.0, 1.0, 0.5, 1.0, 2.0, -0.25, 0.5, -0.25, 1.5],
        )
        .unwrap();
        let (vals, vecs) = m.eigen();
        for i in 0..3 {
            for j in 0..3 {
                let mut sum = 0.0;
                for k in 0..3 {
                    sum += vals[k] * vecs[k][i] * vecs[k][j];
                }
                assert!(
                    (sum - m.get(i, j)).abs() < 1e-10,
                    "entry ({i},{j}): {sum} vs {}",
                    m.get(i, j)
                );
            }
        }
    }

    #[test]
    fn solve_against_known_system() {
        let m = SymMatrix::diag(&[1.0, 4.0]);
        let x = m.solve(&Vector::from_slice(&[1.0, 4.0])).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14);
        assert!((x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn solve_detects_singularity() {
        let m = SymMatrix::diag(&[1.0, 0.0]);
        assert!(matches!(
            m.solve(&Vector::from_slice(&[1.0, 1.0])),
            Err(Error::SingularMatrix(_))
        ));
    }

    #[test]
    fn pseudo_solve_consistency() {
        let m = SymMatrix::diag(&[1.0, 0.0]);
        let (x, consistent) = m.pseudo_solve(&Vector::from_slice(&[1.0, 0.0]));
        assert!(consistent);
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert_eq!(x[1], 0.0);
        let (_, consistent) = m.pseudo_solve(&Vector::from_slice(&[1.0, 1.0]));
        assert!(!consistent);
    }

    #[test]
    fn gram_of_rank_one() {
        let a = DenseMatrix::from_row_major(2, 2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let g = a.gram();
        assert_eq!(g.get(0, 0), 1.0);
        assert_eq!(g.get(0, 1), 0.0);
        assert_eq!(g.get(1, 1), 0.0);
    }
}
