//! Distance-to-similarity transforms and PSD repair.

use nalgebra::SymmetricEigen;

use super::{DistanceMatrix, KernelKind, MetricsError, SimilarityKernel, SquareMatrix};

/// Smallest eigenvalue of a symmetric matrix (`+inf` for an empty one).
pub fn min_eigenvalue(m: &SquareMatrix) -> f64 {
    if m.n == 0 {
        return f64::INFINITY;
    }
    SymmetricEigen::new(m.to_dmatrix())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Gaussian kernel with unit bandwidth, `exp(-d^2 / 2)`.
pub fn rbf_kernel(d: &DistanceMatrix, kind: KernelKind) -> SimilarityKernel {
    let mut m = d.0.clone();
    for v in &mut m.values {
        *v = (-0.5 * *v * *v).exp();
    }
    SimilarityKernel::new(m, kind)
}

/// `1 / (1 + d)`, followed by [`repair_psd`] (the transform of a Hausdorff
/// matrix need not be PSD).
pub fn reciprocal_kernel(
    d: &DistanceMatrix,
    kind: KernelKind,
) -> Result<(SimilarityKernel, Repair), MetricsError> {
    let mut m = d.0.clone();
    for v in &mut m.values {
        *v = 1.0 / (1.0 + *v);
    }
    let mut k = SimilarityKernel::new(m, kind);
    let repair = repair_psd(&mut k)?;
    Ok((k, repair))
}

/// Cosine similarity of embedding vectors, clamped to `[-1, 1]`. Negative
/// entries are kept; the result is the Gram matrix of the normalized vectors.
pub fn cosine_kernel(vectors: &[Vec<f64>], kind: KernelKind) -> Result<SimilarityKernel, MetricsError> {
    let units = unit_vectors(vectors)?;
    let n = units.len();
    let mut m = SquareMatrix::identity(n);
    for i in 0..n {
        for j in i + 1..n {
            let c = dot(&units[i], &units[j]).clamp(-1.0, 1.0);
            m.set(i, j, c);
            m.set(j, i, c);
        }
    }
    Ok(SimilarityKernel::new(m, kind))
}

/// `1 - cos(a, b)` for two non-zero vectors.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let c = dot(a, b) / (norm(a) * norm(b));
    (1.0 - c.clamp(-1.0, 1.0)).max(0.0)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn check_lengths(vectors: &[Vec<f64>]) -> Result<usize, MetricsError> {
    let first = vectors.first().ok_or(MetricsError::Empty)?;
    for (i, v) in vectors.iter().enumerate() {
        if v.len() != first.len() {
            return Err(MetricsError::LengthMismatch {
                index: i,
                expected: first.len(),
                found: v.len(),
            });
        }
    }
    Ok(first.len())
}

fn unit_vectors(vectors: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, MetricsError> {
    check_lengths(vectors)?;
    vectors
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let n = norm(v);
            if n == 0.0 || !n.is_finite() {
                Err(MetricsError::DegenerateVector(i))
            } else {
                Ok(v.iter().map(|x| x / n).collect())
            }
        })
        .collect()
}

/// Per-dimension min-max scaling to `[0, 1]` over the ground set; constant
/// dimensions map to 0.
pub fn min_max_normalize(vectors: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, MetricsError> {
    let dim = check_lengths(vectors)?;
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for (i, v) in vectors.iter().enumerate() {
        for (k, &x) in v.iter().enumerate() {
            if !x.is_finite() {
                return Err(MetricsError::DegenerateVector(i));
            }
            lo[k] = lo[k].min(x);
            hi[k] = hi[k].max(x);
        }
    }
    Ok(vectors
        .iter()
        .map(|v| {
            v.iter()
                .enumerate()
                .map(|(k, &x)| {
                    let span = hi[k] - lo[k];
                    if span > 0.0 {
                        (x - lo[k]) / span
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect())
}

/// Euclidean distances between property vectors, optionally after min-max
/// normalization of each dimension.
pub fn property_distance(vectors: &[Vec<f64>], normalize: bool) -> Result<DistanceMatrix, MetricsError> {
    let scaled = if normalize {
        min_max_normalize(vectors)?
    } else {
        check_lengths(vectors)?;
        vectors.to_vec()
    };
    Ok(DistanceMatrix::from_fn(scaled.len(), |i, j| euclidean(&scaled[i], &scaled[j])))
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Outcome of [`repair_psd`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Repair {
    pub min_eigenvalue_before: f64,
    pub min_eigenvalue_after: f64,
    pub repaired: bool,
}

/// Makes a kernel PSD when its smallest eigenvalue is negative: eigenvalues
/// below a small positive floor are raised to it, the matrix is rebuilt and
/// symmetrized, and the diagonal is rescaled to 1. The floor (a tiny
/// multiple of the spectral radius) keeps the recomputed spectrum
/// non-negative despite roundoff.
pub fn repair_psd(kernel: &mut SimilarityKernel) -> Result<Repair, MetricsError> {
    let m = &kernel.matrix;
    m.check_symmetric(1e-9)?;
    let n = m.n;
    if n == 0 {
        return Ok(Repair {
            min_eigenvalue_before: f64::INFINITY,
            min_eigenvalue_after: f64::INFINITY,
            repaired: false,
        });
    }
    let eig = SymmetricEigen::new(m.to_dmatrix());
    let before = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if before >= 0.0 {
        return Ok(Repair {
            min_eigenvalue_before: before,
            min_eigenvalue_after: before,
            repaired: false,
        });
    }
    let scale = eig.eigenvalues.iter().fold(1.0f64, |a, &l| a.max(l.abs()));
    let mut floor = 1e-12 * scale;
    for _ in 0..8 {
        let mut lambda = eig.eigenvalues.clone();
        for l in lambda.iter_mut() {
            *l = l.max(floor);
        }
        let rebuilt = &eig.eigenvectors * nalgebra::DMatrix::from_diagonal(&lambda) * eig.eigenvectors.transpose();
        let mut out = SquareMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.set(i, j, 0.5 * (rebuilt[(i, j)] + rebuilt[(j, i)]));
            }
        }
        let diag: Vec<f64> = (0..n).map(|i| out.get(i, i).sqrt()).collect();
        for i in 0..n {
            for j in 0..n {
                let v = if i == j { 1.0 } else { out.get(i, j) / (diag[i] * diag[j]) };
                out.set(i, j, v);
            }
        }
        let after = min_eigenvalue(&out);
        if after >= 0.0 {
            kernel.matrix = out;
            return Ok(Repair {
                min_eigenvalue_before: before,
                min_eigenvalue_after: after,
                repaired: true,
            });
        }
        floor *= 100.0;
    }
    Err(MetricsError::RepairFailed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dm(rows: &[Vec<f64>]) -> DistanceMatrix {
        DistanceMatrix(SquareMatrix::from_rows(rows))
    }

    #[test]
    fn rbf_values() {
        let d = dm(&[vec![0.0, 1.0, 30.0], vec![1.0, 0.0, 2.0], vec![30.0, 2.0, 0.0]]);
        let k = rbf_kernel(&d, KernelKind::Shape);
        assert_eq!(k.get(0, 0), 1.0);
        assert!((k.get(0, 1) - 0.606_530_659_712_633_4).abs() < 1e-15);
        assert!(k.get(0, 2) > 0.0 && k.get(0, 2) < 1e-190);
    }

    #[test]
    fn reciprocal_values_and_repair() {
        let d = dm(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let (k, r) = reciprocal_kernel(&d, KernelKind::Shape).unwrap();
        assert!(!r.repaired);
        assert_eq!(k.get(0, 0), 1.0);
        assert_eq!(k.get(0, 1), 0.5);
    }

    #[test]
    fn repair_fixes_indefinite_matrix() {
        // pairwise similarities that violate positive semi-definiteness
        let m = SquareMatrix::from_rows(&[
            vec![1.0, 0.9, 0.9, -0.9],
            vec![0.9, 1.0, -0.9, 0.9],
            vec![0.9, -0.9, 1.0, 0.9],
            vec![-0.9, 0.9, 0.9, 1.0],
        ]);
        let mut k = SimilarityKernel::new(m, KernelKind::Shape);
        let r = repair_psd(&mut k).unwrap();
        assert!(r.repaired);
        assert!(r.min_eigenvalue_before < -0.5);
        assert!(k.min_eigenvalue() >= 0.0);
        for i in 0..4 {
            assert_eq!(k.get(i, i), 1.0);
        }
        assert!(k.matrix.asymmetry() <= 1e-15);
    }

    #[test]
    fn cosine_cases() {
        let v = vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 0.0], vec![-1.0, 0.0]];
        let k = cosine_kernel(&v, KernelKind::Shape).unwrap();
        assert_eq!(k.get(0, 1), 0.0);
        assert_eq!(k.get(0, 2), 1.0);
        assert_eq!(k.get(0, 3), -1.0);
        assert_eq!(k.get(1, 1), 1.0);
        assert!(cosine_kernel(&[vec![0.0, 0.0]], KernelKind::Shape).is_err());
        assert!(cosine_kernel(&[vec![1.0], vec![1.0, 2.0]], KernelKind::Shape).is_err());
    }

    #[test]
    fn property_distance_cases() {
        let d = property_distance(&[vec![0.0], vec![1.0]], true).unwrap();
        assert_eq!(d.get(0, 1), 1.0);
        let d = property_distance(&[vec![5.0, 2.0], vec![5.0, 2.0]], true).unwrap();
        assert_eq!(d.get(0, 1), 0.0);
        // normalization removes the unit of each column
        let d = property_distance(&[vec![0.0, 0.0], vec![1000.0, 1.0]], true).unwrap();
        assert!((d.get(0, 1) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn property_distance_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v: Vec<Vec<f64>> = (0..10).map(|_| (0..4).map(|_| rng.gen_range(-5.0..5.0)).collect()).collect();
        let d = property_distance(&v, false).unwrap();
        for i in 0..10 {
            for j in 0..10 {
                let mut s = 0.0;
                for k in 0..4 {
                    s += (v[i][k] - v[j][k]).powi(2);
                }
                assert!((d.get(i, j) - s.sqrt()).abs() <= 1e-12);
            }
        }
        d.validate().unwrap();
    }
}
