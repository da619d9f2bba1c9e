//! Symmetric positive definite band matrices and their Cholesky factor.

/// Lower half of a symmetric matrix with half-bandwidth `b`. Row `i` stores
/// columns `i-b..=i` at offsets `0..=b`.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    b: usize,
    data: Vec<f64>,
}

/// Failure of [`BandMatrix::factor`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FactorError {
    /// A pivot vanished relative to its diagonal entry: the matrix is
    /// singular (for example, an unconstrained rigid-body mode).
    Singular { row: usize },
    /// A non-finite value appeared.
    NotFinite { row: usize },
}

impl BandMatrix {
    pub fn zeros(n: usize, b: usize) -> Self {
        Self {
            n,
            b,
            data: vec![0.0; n * (b + 1)],
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        i * (self.b + 1) + j + self.b - i
    }

    /// Adds `v` at `(i, j)` (and implicitly `(j, i)`).
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        debug_assert!(i - j <= self.b, "entry outside the band");
        let k = self.at(i, j);
        self.data[k] += v;
    }

    /// Replaces row and column `i` by the identity row.
    pub fn pin(&mut self, i: usize) {
        for j in i.saturating_sub(self.b)..i {
            let k = self.at(i, j);
            self.data[k] = 0.0;
        }
        for r in i + 1..(i + self.b + 1).min(self.n) {
            let k = self.at(r, i);
            self.data[k] = 0.0;
        }
        let k = self.at(i, i);
        self.data[k] = 1.0;
    }

    /// In-place Cholesky factorization `A = L L^T`.
    pub fn factor(mut self) -> Result<BandCholesky, FactorError> {
        let (n, b) = (self.n, self.b);
        let w = b + 1;
        for i in 0..n {
            let i0 = i.saturating_sub(b);
            for j in i0..=i {
                let k0 = i0.max(j.saturating_sub(b));
                // L(i,k) at row i offset k+b-i, L(j,k) at row j offset k+b-j
                let ri = i * w + b - i;
                let rj = j * w + b - j;
                let dot: f64 = self.data[ri + k0..ri + j]
                    .iter()
                    .zip(&self.data[rj + k0..rj + j])
                    .map(|(a, c)| a * c)
                    .sum();
                let s = self.data[ri + j] - dot;
                if i == j {
                    let orig = self.data[ri + i];
                    if !s.is_finite() {
                        return Err(FactorError::NotFinite { row: i });
                    }
                    if s <= 1e-12 * orig.abs() || s <= 0.0 {
                        return Err(FactorError::Singular { row: i });
                    }
                    self.data[ri + i] = s.sqrt();
                } else {
                    self.data[ri + j] = s / self.data[rj + j];
                }
            }
        }
        Ok(BandCholesky { l: self })
    }
}

#[derive(Debug, Clone)]
pub struct BandCholesky {
    l: BandMatrix,
}

impl BandCholesky {
    /// Solves `A x = rhs` in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, b) = (self.l.n, self.l.b);
        let w = b + 1;
        let d = &self.l.data;
        for i in 0..n {
            let ri = i * w + b - i;
            let mut s = x[i];
            for k in i.saturating_sub(b)..i {
                s -= d[ri + k] * x[k];
            }
            x[i] = s / d[ri + i];
        }
        for i in (0..n).rev() {
            let ri = i * w + b - i;
            x[i] /= d[ri + i];
            let xi = x[i];
            for k in i.saturating_sub(b)..i {
                x[k] -= d[ri + k] * xi;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (n, b) = (40, 5);
        let mut dense = DMatrix::<f64>::zeros(n, n);
        let mut band = BandMatrix::zeros(n, b);
        for i in 0..n {
            for j in i.saturating_sub(b)..i {
                let v = rng.gen_range(-1.0..1.0);
                dense[(i, j)] = v;
                dense[(j, i)] = v;
                band.add(i, j, v);
            }
            dense[(i, i)] = 12.0;
            band.add(i, i, 12.0);
        }
        let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let expect = dense.clone().lu().solve(&DVector::from_vec(rhs.clone())).unwrap();
        let f = band.factor().unwrap();
        let mut x = rhs;
        f.solve_in_place(&mut x);
        for i in 0..n {
            assert!((x[i] - expect[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_and_pinned() {
        // 1D chain of springs without support: rigid translation
        let n = 5;
        let mut a = BandMatrix::zeros(n, 1);
        for e in 0..n - 1 {
            a.add(e, e, 1.0);
            a.add(e + 1, e + 1, 1.0);
            a.add(e + 1, e, -1.0);
        }
        assert!(matches!(a.clone().factor(), Err(FactorError::Singular { .. })));
        a.pin(0);
        let f = a.factor().unwrap();
        let mut x = vec![0.0, 0.0, 0.0, 0.0, 1.0];
        f.solve_in_place(&mut x);
        assert!((x[4] - 4.0).abs() < 1e-12);
        assert_eq!(x[0], 0.0);
    }
}
