//! Dense square matrices over a [`Scalar`], with the in-place updates used to
//! build products of matching matrices.

use serde::{Serialize, Serializer};

use crate::exact::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    n: usize,
    data: Vec<T>,
}

/// Floating-point averaging matrix (matching matrix or window product).
pub type AveragingMatrix = DenseMatrix<f64>;

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    /// Matrix of a single matching: `1/2` on matched pairs, `1` on the
    /// diagonal of unmatched nodes, `0` elsewhere.
    pub fn from_matching(n: usize, pairs: &[(usize, usize)]) -> Self {
        let mut m = Self::identity(n);
        m.right_apply_matching(pairs);
        m
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "matrix must be square");
        Self {
            n,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline(always)]
    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.data[i * self.n + j]
    }

    #[inline(always)]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.n.max(1)).take(self.n)
    }

    /// `Σ_{j ∈ cols} self[i, j]`.
    pub fn row_mass(&self, i: usize, cols: impl IntoIterator<Item = usize>) -> T {
        cols.into_iter()
            .fold(T::zero(), |acc, j| acc + self.get(i, j).clone())
    }

    /// `self ← self · M` for the matching `pairs` (columns `u`, `v` averaged).
    pub fn right_apply_matching(&mut self, pairs: &[(usize, usize)]) {
        let n = self.n;
        for &(u, v) in pairs {
            for r in 0..n {
                let base = r * n;
                let avg = (self.data[base + u].clone() + self.data[base + v].clone()).half();
                self.data[base + u] = avg.clone();
                self.data[base + v] = avg;
            }
        }
    }

    /// `self ← M · self` for the matching `pairs` (rows `u`, `v` averaged).
    pub fn left_apply_matching(&mut self, pairs: &[(usize, usize)]) {
        let n = self.n;
        for &(u, v) in pairs {
            for c in 0..n {
                let avg = (self.data[u * n + c].clone() + self.data[v * n + c].clone()).half();
                self.data[u * n + c] = avg.clone();
                self.data[v * n + c] = avg;
            }
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "dimension mismatch");
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if *a == T::zero() {
                    continue;
                }
                for j in 0..n {
                    let prod = a.clone() * other.get(k, j).clone();
                    out.data[i * n + j] = out.data[i * n + j].clone() + prod;
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.get(i, j).clone();
            }
        }
        out
    }

    /// Row vector times matrix: `x · self`.
    pub fn left_mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.n);
        let mut out = vec![T::zero(); self.n];
        for (i, xi) in x.iter().enumerate() {
            if *xi == T::zero() {
                continue;
            }
            for (j, o) in out.iter_mut().enumerate() {
                *o = o.clone() + xi.clone() * self.get(i, j).clone();
            }
        }
        out
    }

    /// Matrix times column vector: `self · a`.
    pub fn mul_vec(&self, a: &[T]) -> Vec<T> {
        assert_eq!(a.len(), self.n);
        self.rows()
            .map(|row| {
                row.iter()
                    .zip(a)
                    .fold(T::zero(), |acc, (m, x)| acc + m.clone() * x.clone())
            })
            .collect()
    }

    pub fn to_f64(&self) -> AveragingMatrix {
        DenseMatrix {
            n: self.n,
            data: self.data.iter().map(Scalar::to_f64).collect(),
        }
    }
}

impl AveragingMatrix {
    /// Entries in `[0, 1]` (up to `tol`) and all row and column sums within `tol` of 1.
    pub fn is_doubly_stochastic(&self, tol: f64) -> bool {
        let n = self.n;
        if self.data.iter().any(|&x| !(-tol..=1.0 + tol).contains(&x)) {
            return false;
        }
        let mut col = vec![0.0; n];
        for row in self.rows() {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > tol {
                return false;
            }
            for (c, x) in col.iter_mut().zip(row) {
                *c += x;
            }
        }
        col.iter().all(|s| (s - 1.0).abs() <= tol)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }
}

impl Serialize for AveragingMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

/// `‖row‖₂²`.
pub fn row_norm_sq(row: &[f64]) -> f64 {
    row.iter().map(|x| x * x).sum()
}

/// `‖row − (1/n)·1‖₂²`.
pub fn row_dist_uniform_sq(row: &[f64]) -> f64 {
    let inv = 1.0 / row.len() as f64;
    row.iter().map(|x| (x - inv) * (x - inv)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::Dyadic;

    #[test]
    fn matching_matrix_examples() {
        let k2 = AveragingMatrix::from_matching(2, &[(0, 1)]);
        assert_eq!(k2.to_rows(), vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        assert_eq!(
            AveragingMatrix::from_matching(3, &[]),
            AveragingMatrix::identity(3)
        );
        let p3 = AveragingMatrix::from_matching(3, &[(0, 1)]);
        assert_eq!(
            p3.to_rows(),
            vec![
                vec![0.5, 0.5, 0.0],
                vec![0.5, 0.5, 0.0],
                vec![0.0, 0.0, 1.0]
            ]
        );
    }

    #[test]
    fn in_place_updates_match_products() {
        let a = [(0, 2), (1, 3)];
        let b = [(0, 1)];
        let ma = DenseMatrix::<Dyadic>::from_matching(4, &a);
        let mb = DenseMatrix::<Dyadic>::from_matching(4, &b);
        let mut right = ma.clone();
        right.right_apply_matching(&b);
        assert_eq!(right, ma.mul(&mb));
        let mut left = ma.clone();
        left.left_apply_matching(&b);
        assert_eq!(left, mb.mul(&ma));
    }

    #[test]
    fn k2_window_is_idempotent() {
        let m = AveragingMatrix::from_matching(2, &[(0, 1)]);
        assert_eq!(m.mul(&m), m);
    }

    #[test]
    fn stochasticity_and_norms() {
        let m = AveragingMatrix::from_matching(4, &[(0, 3)]);
        assert!(m.is_doubly_stochastic(1e-12));
        assert!(m.is_symmetric(0.0));
        assert_eq!(row_norm_sq(m.row(0)), 0.5);
        assert!((row_dist_uniform_sq(m.row(0)) - (0.5 - 0.25)).abs() < 1e-15);
        let bad = AveragingMatrix::from_rows(vec![vec![1.0, 0.5], vec![0.0, 0.5]]);
        assert!(!bad.is_doubly_stochastic(1e-12));
    }
}
