//! Distances between families of unit cells.
//!
//! A family is a finite set of members; the inter-family distance is the
//! symmetric Hausdorff distance between the two sets under a member-level
//! base metric.

use serde::{Deserialize, Serialize};

use super::hausdorff::IndexedCloud;
use super::kernels::{euclidean, min_max_normalize};
use super::{DistanceMatrix, MetricsError};
use crate::isogen::Family;

/// Member-level metric used inside the inter-family Hausdorff distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InterfamilyBase {
    /// Point-cloud Hausdorff distance between members (H-H).
    #[serde(rename = "H-H")]
    HausdorffPoints,
    /// `1 - cos` between member embeddings (E-H).
    #[serde(rename = "E-H")]
    EmbeddingCosine,
    /// Euclidean distance between min-max normalized property vectors.
    #[serde(rename = "property")]
    PropertyEuclidean,
}

/// Symmetric Hausdorff distance between sets `{0..na}` and `{0..nb}`.
///
/// `dist(i, j, cap)` must return the exact member distance when it is below
/// `cap` and any value `>= cap` otherwise; the search uses this to abandon
/// member pairs that cannot change the result.
pub fn set_hausdorff<F>(na: usize, nb: usize, dist: F) -> f64
where
    F: Fn(usize, usize, f64) -> f64,
{
    let ab = directed(na, nb, &dist);
    let ba = directed(nb, na, |j, i, cap| dist(i, j, cap));
    ab.max(ba)
}

fn directed<F>(na: usize, nb: usize, dist: F) -> f64
where
    F: Fn(usize, usize, f64) -> f64,
{
    let mut worst = 0.0f64;
    for i in 0..na {
        // members are ordered by density, so start from the matching slot
        let anchor = if na > 1 { i * (nb - 1) / (na - 1) } else { 0 };
        let mut best = f64::INFINITY;
        for j in outward(anchor, nb) {
            let d = dist(i, j, best);
            if d < best {
                best = d;
            }
            if best <= worst {
                break;
            }
        }
        worst = worst.max(best);
    }
    worst
}

/// `0..n` visited from `anchor` alternately upward and downward.
fn outward(anchor: usize, n: usize) -> impl Iterator<Item = usize> {
    (0..2 * n).filter_map(move |k| {
        let step = k.div_ceil(2);
        if k % 2 == 1 {
            (anchor + step < n).then_some(anchor + step)
        } else {
            anchor.checked_sub(step)
        }
    })
}

enum Members {
    Clouds(Vec<IndexedCloud>),
    Units(Vec<Vec<f64>>),
    Points(Vec<Vec<f64>>),
}

impl Members {
    fn len(&self) -> usize {
        match self {
            Members::Clouds(v) => v.len(),
            Members::Units(v) | Members::Points(v) => v.len(),
        }
    }
}

fn member_distance(a: &Members, b: &Members, i: usize, j: usize, cap: f64) -> f64 {
    match (a, b) {
        (Members::Clouds(x), Members::Clouds(y)) => x[i].hausdorff_capped(&y[j], cap),
        (Members::Units(x), Members::Units(y)) => {
            let c: f64 = x[i].iter().zip(&y[j]).map(|(p, q)| p * q).sum();
            (1.0 - c.clamp(-1.0, 1.0)).max(0.0)
        }
        (Members::Points(x), Members::Points(y)) => euclidean(&x[i], &y[j]),
        _ => unreachable!("families prepared with different bases"),
    }
}

fn prepare(families: &[&Family], base: InterfamilyBase) -> Result<Vec<Members>, MetricsError> {
    for f in families {
        if f.samples.is_empty() {
            return Err(MetricsError::EmptyFamily(f.id.clone()));
        }
    }
    match base {
        InterfamilyBase::HausdorffPoints => families
            .iter()
            .map(|f| {
                f.samples
                    .iter()
                    .map(|s| {
                        if s.cloud.is_empty() {
                            Err(MetricsError::MissingData(f.id.clone(), "point cloud"))
                        } else {
                            Ok(IndexedCloud::new(&s.cloud))
                        }
                    })
                    .collect::<Result<Vec<_>, _>>()
                    .map(Members::Clouds)
            })
            .collect(),
        InterfamilyBase::EmbeddingCosine => families
            .iter()
            .map(|f| {
                f.samples
                    .iter()
                    .map(|s| {
                        let n = s.embedding.iter().map(|x| x * x).sum::<f64>().sqrt();
                        if s.embedding.is_empty() || n == 0.0 || !n.is_finite() {
                            Err(MetricsError::MissingData(f.id.clone(), "embedding"))
                        } else {
                            Ok(s.embedding.iter().map(|x| x / n).collect())
                        }
                    })
                    .collect::<Result<Vec<_>, _>>()
                    .map(Members::Units)
            })
            .collect(),
        InterfamilyBase::PropertyEuclidean => {
            let mut all = Vec::new();
            for f in families {
                for s in &f.samples {
                    if s.properties.is_empty() {
                        return Err(MetricsError::MissingData(f.id.clone(), "property vector"));
                    }
                    all.push(s.properties.clone());
                }
            }
            let mut scaled = min_max_normalize(&all)?.into_iter();
            Ok(families
                .iter()
                .map(|f| Members::Points(scaled.by_ref().take(f.samples.len()).collect()))
                .collect())
        }
    }
}

/// Inter-family distance between two families. Property vectors are
/// normalized over the union of both families.
pub fn interfamily_distance(c: &Family, d: &Family, base: InterfamilyBase) -> Result<f64, MetricsError> {
    let m = prepare(&[c, d], base)?;
    Ok(set_hausdorff(m[0].len(), m[1].len(), |i, j, cap| {
        member_distance(&m[0], &m[1], i, j, cap)
    }))
}

/// Inter-family distance matrix. Property vectors are normalized over all
/// members of all families.
pub fn interfamily_matrix(families: &[Family], base: InterfamilyBase) -> Result<DistanceMatrix, MetricsError> {
    if families.is_empty() {
        return Err(MetricsError::Empty);
    }
    let refs: Vec<&Family> = families.iter().collect();
    let m = prepare(&refs, base)?;
    Ok(DistanceMatrix::from_fn(m.len(), |a, b| {
        set_hausdorff(m[a].len(), m[b].len(), |i, j, cap| member_distance(&m[a], &m[b], i, j, cap))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(a: &[f64], b: &[f64]) -> f64 {
        let d = |x: f64, y: f64| (x - y).abs();
        let h = |p: &[f64], q: &[f64]| {
            p.iter()
                .map(|&x| q.iter().map(|&y| d(x, y)).fold(f64::INFINITY, f64::min))
                .fold(0.0, f64::max)
        };
        h(a, b).max(h(b, a))
    }

    #[test]
    fn outward_visits_everything_once() {
        for n in 1..7 {
            for a in 0..n {
                let mut v: Vec<_> = outward(a, n).collect();
                assert_eq!(v[0], a);
                v.sort();
                assert_eq!(v, (0..n).collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn pruned_search_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let a: Vec<f64> = (0..rng.gen_range(1..9)).map(|_| rng.gen_range(0.0..10.0)).collect();
            let b: Vec<f64> = (0..rng.gen_range(1..9)).map(|_| rng.gen_range(0.0..10.0)).collect();
            // a capped metric that reports garbage above the cap
            let h = set_hausdorff(a.len(), b.len(), |i, j, cap| {
                let d = (a[i] - b[j]).abs();
                if d >= cap {
                    cap + 1.0
                } else {
                    d
                }
            });
            assert_eq!(h, brute(&a, &b));
        }
    }

    #[test]
    fn singleton_sets_collapse_to_base() {
        assert_eq!(set_hausdorff(1, 1, |_, _, _| 0.7), 0.7);
        assert_eq!(set_hausdorff(3, 3, |i, j, _| if i == j { 0.0 } else { 1.0 }), 0.0);
    }
}
