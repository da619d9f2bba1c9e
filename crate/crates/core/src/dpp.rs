//! Determinantal point process scoring and greedy diverse-subset selection.
//!
//! Subsets `M` of a ground set are scored by `log det(L_M)` for a PSD kernel
//! `L`. The greedy selector grows `M` one item at a time, keeping a
//! triangular factor of `L_M` so every candidate gain is a Schur complement.

use nalgebra::{Cholesky, DMatrix};
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{min_eigenvalue, KernelKind, SimilarityKernel, SquareMatrix};

/// Diagonal jitter added before factorizations.
pub const DEFAULT_JITTER: f64 = 1e-10;
/// Most negative eigenvalue accepted as PSD.
pub const PSD_TOLERANCE: f64 = 1e-8;
/// Largest ground set for which the normalized likelihood is computed.
pub const MAX_LIKELIHOOD_N: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DppError {
    #[error("kernels have different sizes ({0} and {1})")]
    DimensionMismatch(usize, usize),
    #[error("weight {0} is outside [0, 1]")]
    WeightOutOfRange(f64),
    #[error("subset size {k} is outside 1..={n}")]
    SubsetSize { k: usize, n: usize },
    #[error("kernel is not PSD (min eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("ground set of {0} items is too large for the exact normalizer")]
    TooLarge(usize),
    #[error("index {0} is out of range or repeated")]
    BadIndex(usize),
}

/// `(1 - w) L_P + w L_S`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointKernel {
    pub kernel: SimilarityKernel,
    pub w: f64,
    pub jitter: f64,
}

pub fn joint_kernel(lp: &SimilarityKernel, ls: &SimilarityKernel, w: f64) -> Result<JointKernel, DppError> {
    if lp.n() != ls.n() {
        return Err(DppError::DimensionMismatch(lp.n(), ls.n()));
    }
    if !(0.0..=1.0).contains(&w) {
        return Err(DppError::WeightOutOfRange(w));
    }
    let values = lp
        .matrix
        .values
        .iter()
        .zip(&ls.matrix.values)
        .map(|(p, s)| (1.0 - w) * p + w * s)
        .collect();
    Ok(JointKernel {
        kernel: SimilarityKernel::new(SquareMatrix { n: lp.n(), values }, KernelKind::Joint),
        w,
        jitter: DEFAULT_JITTER,
    })
}

fn check_subset(n: usize, m: &[usize]) -> Result<(), DppError> {
    let mut seen = vec![false; n];
    for &i in m {
        if i >= n || seen[i] {
            return Err(DppError::BadIndex(i));
        }
        seen[i] = true;
    }
    Ok(())
}

fn det(m: &SquareMatrix) -> f64 {
    if m.n == 0 {
        1.0
    } else {
        m.to_dmatrix().determinant()
    }
}

/// `P(M) = det(L_M) / det(L + I)`, for ground sets of at most 20 items.
pub fn dpp_likelihood(l: &SquareMatrix, m: &[usize]) -> Result<f64, DppError> {
    if l.n > MAX_LIKELIHOOD_N {
        return Err(DppError::TooLarge(l.n));
    }
    check_subset(l.n, m)?;
    let mut shifted = l.clone();
    for i in 0..l.n {
        shifted.set(i, i, l.get(i, i) + 1.0);
    }
    Ok(det(&l.submatrix(m)) / det(&shifted))
}

/// `log det(L_M + jitter I)` via Cholesky; `-inf` when the factorization
/// fails. The empty set scores 0.
pub fn diversity_score(l: &SquareMatrix, m: &[usize], jitter: f64) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let mut sub = l.submatrix(m).to_dmatrix();
    for i in 0..m.len() {
        sub[(i, i)] += jitter;
    }
    match Cholesky::new(sub) {
        Some(c) => 2.0 * c.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>(),
        None => f64::NEG_INFINITY,
    }
}

/// Ordered subset chosen by [`greedy_select`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub indices: Vec<usize>,
    /// Log-det gain of each step.
    pub gains: Vec<f64>,
    /// `log det(L_M + jitter I)`, the sum of the gains.
    pub score: f64,
    /// Normalized DPP probability, when the ground set is small enough.
    pub likelihood: Option<f64>,
}

impl SelectionResult {
    /// True when each gain is at most the previous one plus `tol`.
    pub fn gains_non_increasing(&self, tol: f64) -> bool {
        self.gains.windows(2).all(|g| g[1] <= g[0] + tol)
    }
}

/// Greedy log-det maximization. Each step adds the item with the largest
/// gain `log(L_ii + jitter - |c_i|^2)`, where `c_i` solves the triangular
/// system of the current factor against the kernel column of `i`; ties go to
/// the lowest index.
pub fn greedy_select(l: &SquareMatrix, k: usize, jitter: f64) -> Result<SelectionResult, DppError> {
    let n = l.n;
    if k == 0 || k > n {
        return Err(DppError::SubsetSize { k, n });
    }
    let lambda = min_eigenvalue(l);
    if lambda < -PSD_TOLERANCE || l.asymmetry() > 1e-9 {
        return Err(DppError::NotPsd(lambda));
    }
    // residual variance and factor rows of every item
    let mut d2: Vec<f64> = (0..n).map(|i| l.get(i, i) + jitter).collect();
    let mut c: Vec<Vec<f64>> = vec![Vec::with_capacity(k); n];
    let mut chosen = vec![false; n];
    let mut indices = Vec::with_capacity(k);
    let mut gains = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best: Option<(usize, f64)> = None;
        for i in (0..n).filter(|&i| !chosen[i]) {
            let g = if d2[i] > 0.0 { d2[i].ln() } else { f64::NEG_INFINITY };
            if best.is_none_or(|(_, bg)| g > bg) {
                best = Some((i, g));
            }
        }
        let (j, gain) = best.expect("k <= n leaves a candidate");
        chosen[j] = true;
        indices.push(j);
        gains.push(gain);
        if indices.len() == k {
            break;
        }
        let dj = d2[j].max(f64::MIN_POSITIVE).sqrt();
        let cj = c[j].clone();
        for i in (0..n).filter(|&i| !chosen[i]) {
            let dot: f64 = cj.iter().zip(&c[i]).map(|(a, b)| a * b).sum();
            let e = (l.get(j, i) - dot) / dj;
            c[i].push(e);
            d2[i] -= e * e;
        }
    }
    let score = gains.iter().sum();
    let likelihood = if n <= MAX_LIKELIHOOD_N {
        dpp_likelihood(l, &indices).ok()
    } else {
        None
    };
    Ok(SelectionResult {
        indices,
        gains,
        score,
        likelihood,
    })
}

/// One weight of a shape/property trade-off sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub w: f64,
    pub selection: SelectionResult,
    /// `log det` of the shape kernel restricted to the selection.
    pub score_shape: f64,
    /// `log det` of the property kernel restricted to the selection.
    pub score_property: f64,
}

pub fn sweep(
    lp: &SimilarityKernel,
    ls: &SimilarityKernel,
    weights: &[f64],
    k: usize,
    jitter: f64,
) -> Result<Vec<SweepPoint>, DppError> {
    weights
        .iter()
        .map(|&w| {
            let joint = joint_kernel(lp, ls, w)?;
            let selection = greedy_select(&joint.kernel.matrix, k, jitter)?;
            Ok(SweepPoint {
                w,
                score_shape: diversity_score(&ls.matrix, &selection.indices, jitter),
                score_property: diversity_score(&lp.matrix, &selection.indices, jitter),
                selection,
            })
        })
        .collect()
}

/// Scores of uniformly random subsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    /// Sorted ascending.
    pub scores: Vec<f64>,
}

impl Baseline {
    /// Empirical `q`-quantile (nearest rank), `q` in `[0, 1]`.
    pub fn quantile(&self, q: f64) -> f64 {
        let n = self.scores.len();
        if n == 0 {
            return f64::NAN;
        }
        let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
        self.scores[rank - 1]
    }

    pub fn max(&self) -> f64 {
        self.scores.last().copied().unwrap_or(f64::NAN)
    }

    /// Fraction of baseline scores `<= score`.
    pub fn rank_of(&self, score: f64) -> f64 {
        if self.scores.is_empty() {
            return f64::NAN;
        }
        self.scores.partition_point(|&s| s <= score) as f64 / self.scores.len() as f64
    }
}

pub fn random_baseline(
    l: &SquareMatrix,
    k: usize,
    trials: usize,
    seed: u64,
    jitter: f64,
) -> Result<Baseline, DppError> {
    if k == 0 || k > l.n {
        return Err(DppError::SubsetSize { k, n: l.n });
    }
    let mut rng = crate::seed::rng(seed, "baseline", 0);
    let mut scores: Vec<f64> = (0..trials)
        .map(|_| diversity_score(l, &sample(&mut rng, l.n, k).into_vec(), jitter))
        .collect();
    scores.sort_by(f64::total_cmp);
    Ok(Baseline { scores })
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        let Some(pos) = (0..k).rev().find(|&p| cur[p] < n - k + p) else {
            return out;
        };
        cur[pos] += 1;
        for q in pos + 1..k {
            cur[q] = cur[q - 1] + 1;
        }
    }
}

/// Exhaustive maximizer of `log det(L_M + jitter I)` over `k`-subsets,
/// returning the best subset and the scores of all subsets.
pub fn exhaustive_best(l: &SquareMatrix, k: usize, jitter: f64) -> (Vec<usize>, f64, Vec<f64>) {
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    let mut all = Vec::new();
    for s in k_subsets(l.n, k) {
        let v = diversity_score(l, &s, jitter);
        if v > best.1 {
            best = (s, v);
        }
        all.push(v);
    }
    (best.0, best.1, all)
}

/// `sum over all subsets M of det(L_M)` by enumeration (`n <= 20`).
pub fn sum_principal_minors(l: &SquareMatrix) -> Result<f64, DppError> {
    if l.n > MAX_LIKELIHOOD_N {
        return Err(DppError::TooLarge(l.n));
    }
    let mut total = 0.0;
    for mask in 0u32..(1u32 << l.n) {
        let idx: Vec<usize> = (0..l.n).filter(|&i| mask & (1 << i) != 0).collect();
        total += det(&l.submatrix(&idx));
    }
    Ok(total)
}

/// `det(L + I)`.
pub fn normalizer(l: &SquareMatrix) -> f64 {
    let mut m = l.to_dmatrix();
    m += DMatrix::identity(l.n, l.n);
    m.determinant()
}
