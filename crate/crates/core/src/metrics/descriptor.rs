//! Division-point shape descriptors for 2D cells.
//!
//! The solid is split recursively into sub-regions holding (nearly) equal
//! solid counts, alternating vertical and horizontal division lines. Every
//! line after the first meets the line that created its region at one point;
//! those points, normalized by the image size, form the descriptor.

use super::MetricsError;
use crate::cell2d::UnitCell2D;

/// Division rounds used by default (63 division lines, 62 points).
pub const DEFAULT_ROUNDS: usize = 7;
/// Number of scalars in a descriptor built with [`DEFAULT_ROUNDS`].
pub const DESCRIPTOR_LEN: usize = 124;

#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor2D {
    pub values: Vec<f64>,
}

impl Descriptor2D {
    /// Division points as `(x, y)` pairs in depth-first emission order.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.chunks_exact(2).map(|p| (p[0], p[1]))
    }

    pub fn distance(&self, other: &Descriptor2D) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Offset (number of leading slabs) at which to cut `counts` into two parts
/// of nearly equal mass. Let `c` be the first slab where the cumulative count
/// reaches half; the cut goes before or after `c`, whichever leaves the
/// smaller imbalance, ties toward the lower coordinate. The imbalance is then
/// at most the count of slab `c`. Empty regions are cut at their midpoint.
pub(crate) fn balanced_split(counts: &[usize]) -> usize {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return counts.len() / 2;
    }
    let mut cum = 0usize;
    for (c, &k) in counts.iter().enumerate() {
        let before = cum;
        cum += k;
        if 2 * cum >= total {
            let imbalance_before = total - 2 * before;
            let imbalance_after = 2 * cum - total;
            return if imbalance_before <= imbalance_after { c } else { c + 1 };
        }
    }
    counts.len()
}

#[derive(Clone, Copy)]
struct Region {
    x0: usize,
    x1: usize,
    y0: usize,
    y1: usize,
}

/// Division-point descriptor with `rounds` rounds: `2^(rounds-1) - 1`
/// division lines and one fewer points, i.e. 124 values for `rounds = 7`.
pub fn descriptor2d(cell: &UnitCell2D, rounds: usize) -> Result<Descriptor2D, MetricsError> {
    if cell.solid_count() == 0 {
        return Err(MetricsError::AllVoid);
    }
    if rounds < 2 {
        return Err(MetricsError::InvalidParameter("descriptor rounds must be at least 2"));
    }
    let mut values = Vec::with_capacity(2 * ((1usize << (rounds - 1)) - 2));
    let full = Region {
        x0: 0,
        x1: cell.width,
        y0: 0,
        y1: cell.height,
    };
    divide(cell, full, true, rounds - 1, None, &mut values);
    Ok(Descriptor2D { values })
}

/// `parent` is the coordinate of the line that bounds `region`.
fn divide(
    cell: &UnitCell2D,
    r: Region,
    vertical: bool,
    levels_left: usize,
    parent: Option<usize>,
    out: &mut Vec<f64>,
) {
    if levels_left == 0 {
        return;
    }
    let (w, h) = (cell.width as f64, cell.height as f64);
    if vertical {
        let counts: Vec<usize> = (r.x0..r.x1)
            .map(|x| (r.y0..r.y1).filter(|&y| cell.get(x, y)).count())
            .collect();
        let at = r.x0 + balanced_split(&counts);
        if let Some(py) = parent {
            out.push(at as f64 / w);
            out.push(py as f64 / h);
        }
        divide(cell, Region { x1: at, ..r }, false, levels_left - 1, Some(at), out);
        divide(cell, Region { x0: at, ..r }, false, levels_left - 1, Some(at), out);
    } else {
        let counts: Vec<usize> = (r.y0..r.y1)
            .map(|y| (r.x0..r.x1).filter(|&x| cell.get(x, y)).count())
            .collect();
        let at = r.y0 + balanced_split(&counts);
        if let Some(px) = parent {
            out.push(px as f64 / w);
            out.push(at as f64 / h);
        }
        divide(cell, Region { y1: at, ..r }, true, levels_left - 1, Some(at), out);
        divide(cell, Region { y0: at, ..r }, true, levels_left - 1, Some(at), out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn split_rule() {
        assert_eq!(balanced_split(&[1, 1, 1, 1]), 2);
        // odd uniform: both cuts leave imbalance 1, lower wins
        assert_eq!(balanced_split(&[1, 1, 1]), 1);
        assert_eq!(balanced_split(&[0, 0, 0, 0]), 2);
        assert_eq!(balanced_split(&[5, 0, 0]), 0);
        assert_eq!(balanced_split(&[1, 5, 1]), 1);
        assert_eq!(balanced_split(&[3, 5, 1]), 1);
    }

    #[test]
    fn full_solid_is_nested_bisection() {
        let cell = UnitCell2D::filled(64, 64, true);
        let d = descriptor2d(&cell, DEFAULT_ROUNDS).unwrap();
        assert_eq!(d.values.len(), DESCRIPTOR_LEN);
        let pts: Vec<_> = d.points().collect();
        // first point: horizontal split of the left half meets x = 1/2
        assert_eq!(pts[0], (0.5, 0.5));
        // then the vertical split of the lower-left quarter meets y = 1/2
        assert_eq!(pts[1], (0.25, 0.5));
        // every coordinate is a dyadic fraction
        for v in &d.values {
            assert_eq!((v * 64.0).fract(), 0.0);
        }
    }

    #[test]
    fn full_solid_50_midpoints() {
        let cell = UnitCell2D::filled(50, 50, true);
        let d = descriptor2d(&cell, DEFAULT_ROUNDS).unwrap();
        assert_eq!(d.values.len(), 124);
        assert_eq!(d.points().next().unwrap(), (0.5, 0.5));
    }

    #[test]
    fn all_void_is_an_error() {
        let cell = UnitCell2D::filled(10, 10, false);
        assert!(matches!(descriptor2d(&cell, 7), Err(MetricsError::AllVoid)));
    }

    #[test]
    fn translated_copy_moves_by_one_pixel() {
        // blob away from the borders, then shifted one pixel in x
        let blob = |x: usize, y: usize, dx: usize| {
            let x = x as i64 - dx as i64;
            let y = y as i64;
            (10..35).contains(&x) && (8..40).contains(&y) && !(x > 20 && x < 26 && y > 15 && y < 30)
        };
        let a = UnitCell2D::from_fn(50, 50, |x, y| blob(x, y, 0));
        let b = UnitCell2D::from_fn(50, 50, |x, y| blob(x, y, 1));
        let da = descriptor2d(&a, 7).unwrap();
        let db = descriptor2d(&b, 7).unwrap();
        for (u, v) in da.values.iter().zip(&db.values) {
            assert!((u - v).abs() <= 1.0 / 50.0 + 1e-12, "{u} vs {v}");
        }
    }

    fn check_split(counts: &[usize]) -> bool {
        let cut = balanced_split(counts);
        let left: usize = counts[..cut].iter().sum();
        let right: usize = counts[cut..].iter().sum();
        let total = left + right;
        if total == 0 {
            return true;
        }
        // slab that crosses half of the mass
        let mut cum = 0;
        let mut crossing = 0;
        for &k in counts {
            cum += k;
            if 2 * cum >= total {
                crossing = k;
                break;
            }
        }
        left.abs_diff(right) <= crossing
    }

    proptest! {
        #[test]
        fn split_imbalance_bounded(counts in proptest::collection::vec(0usize..20, 1..40)) {
            prop_assert!(check_split(&counts));
        }

        #[test]
        fn descriptor_length_and_range(bits in proptest::collection::vec(any::<bool>(), 30 * 24)) {
            let mut cell = UnitCell2D::new(30, 24, bits);
            cell.solid[0] = true;
            let d = descriptor2d(&cell, 7).unwrap();
            prop_assert_eq!(d.values.len(), 124);
            prop_assert!(d.values.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
