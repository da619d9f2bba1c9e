//! Pairwise shape and property similarity.
//!
//! Distances between unit cells (2D descriptors, 3D point-cloud Hausdorff,
//! embedding cosine, property Euclidean) are collected in a
//! [`DistanceMatrix`] and turned into a PSD [`SimilarityKernel`].

pub mod descriptor;
pub mod hausdorff;
pub mod interfamily;
pub mod kernels;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use descriptor::{descriptor2d, Descriptor2D, DEFAULT_ROUNDS, DESCRIPTOR_LEN};
pub use hausdorff::{hausdorff, hausdorff_directed, GridIndex, IndexedCloud};
pub use interfamily::{interfamily_distance, interfamily_matrix, InterfamilyBase};
pub use kernels::{
    cosine_kernel, min_eigenvalue, property_distance, reciprocal_kernel, rbf_kernel, repair_psd,
    Repair,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("cell has no solid pixels")]
    AllVoid,
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("vector {index} has length {found}, expected {expected}")]
    LengthMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("vector {0} is zero or not finite")]
    DegenerateVector(usize),
    #[error("ground set is empty")]
    Empty,
    #[error("family {0:?} has no samples")]
    EmptyFamily(String),
    #[error("sample in family {0:?} lacks the {1} required by this metric")]
    MissingData(String, &'static str),
    #[error("matrix is not symmetric at ({0}, {1})")]
    NotSymmetric(usize, usize),
    #[error("eigendecomposition did not produce a PSD kernel")]
    RepairFailed,
}

/// What a square matrix over the ground set holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Shape,
    Property,
    Joint,
    Distance,
}

impl KernelKind {
    /// Code stored in the `kind` byte of matrix files.
    pub fn code(self) -> u8 {
        match self {
            KernelKind::Shape => 0,
            KernelKind::Property => 1,
            KernelKind::Joint => 2,
            KernelKind::Distance => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => KernelKind::Shape,
            1 => KernelKind::Property,
            2 => KernelKind::Joint,
            3 => KernelKind::Distance,
            _ => return None,
        })
    }
}

/// Dense symmetric `n x n` matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    pub n: usize,
    pub values: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            values: vec![0.0; n * n],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut values = Vec::with_capacity(n * n);
        for r in rows {
            assert_eq!(r.len(), n, "matrix rows must be square");
            values.extend_from_slice(r);
        }
        Self { n, values }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in i + 1..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn check_symmetric(&self, tol: f64) -> Result<(), MetricsError> {
        for i in 0..self.n {
            for j in i + 1..self.n {
                let (a, b) = (self.get(i, j), self.get(j, i));
                if !a.is_finite() || !b.is_finite() || (a - b).abs() > tol {
                    return Err(MetricsError::NotSymmetric(i, j));
                }
            }
        }
        Ok(())
    }

    /// Principal submatrix on `idx` (in the given order).
    pub fn submatrix(&self, idx: &[usize]) -> SquareMatrix {
        let mut m = SquareMatrix::zeros(idx.len());
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                m.set(a, b, self.get(i, j));
            }
        }
        m
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.values)
    }

    pub fn from_dmatrix(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        let mut values = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                values.push(m[(i, j)]);
            }
        }
        Self { n, values }
    }

    /// Fills a symmetric matrix from `f(i, j)` evaluated on `i < j`, with a
    /// zero diagonal.
    pub fn symmetric_from_fn<F>(n: usize, f: F) -> Self
    where
        F: Fn(usize, usize) -> f64 + Sync,
    {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        #[cfg(feature = "parallel")]
        let vals: Vec<f64> = {
            use rayon::prelude::*;
            pairs.par_iter().map(|&(i, j)| f(i, j)).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let vals: Vec<f64> = pairs.iter().map(|&(i, j)| f(i, j)).collect();
        let mut m = SquareMatrix::zeros(n);
        for (&(i, j), v) in pairs.iter().zip(vals) {
            m.set(i, j, v);
            m.set(j, i, v);
        }
        m
    }
}

/// Pairwise distances: symmetric, zero diagonal, non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix(pub SquareMatrix);

impl DistanceMatrix {
    pub fn from_fn<F>(n: usize, f: F) -> Self
    where
        F: Fn(usize, usize) -> f64 + Sync,
    {
        DistanceMatrix(SquareMatrix::symmetric_from_fn(n, f))
    }

    pub fn n(&self) -> usize {
        self.0.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }

    /// Checks symmetry, zero diagonal and non-negativity.
    pub fn validate(&self) -> Result<(), MetricsError> {
        self.0.check_symmetric(1e-12)?;
        for i in 0..self.n() {
            if self.get(i, i) != 0.0 {
                return Err(MetricsError::InvalidParameter("distance matrix diagonal must be zero"));
            }
        }
        if self.0.values.iter().any(|&v| v < 0.0) {
            return Err(MetricsError::InvalidParameter("distances must be non-negative"));
        }
        Ok(())
    }
}

/// Symmetric PSD similarity matrix over a ground set.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityKernel {
    pub matrix: SquareMatrix,
    pub kind: KernelKind,
}

impl SimilarityKernel {
    pub fn new(matrix: SquareMatrix, kind: KernelKind) -> Self {
        Self { matrix, kind }
    }

    pub fn n(&self) -> usize {
        self.matrix.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.matrix)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_codes_round_trip() {
        for k in [KernelKind::Shape, KernelKind::Property, KernelKind::Joint, KernelKind::Distance] {
            assert_eq!(KernelKind::from_code(k.code()), Some(k));
        }
        assert_eq!(KernelKind::from_code(9), None);
    }

    #[test]
    fn symmetric_fill_and_submatrix() {
        let m = SquareMatrix::symmetric_from_fn(4, |i, j| (i * 10 + j) as f64);
        assert_eq!(m.get(1, 3), 13.0);
        assert_eq!(m.get(3, 1), 13.0);
        assert_eq!(m.get(2, 2), 0.0);
        assert_eq!(m.asymmetry(), 0.0);
        let s = m.submatrix(&[3, 1]);
        assert_eq!(s.values, vec![0.0, 13.0, 13.0, 0.0]);
        assert!(DistanceMatrix(m).validate().is_ok());
    }
}
