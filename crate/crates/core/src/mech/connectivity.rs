//! Connectivity between neighboring unit cells of an assembly.
//!
//! Assemblies are `rows x cols` grids stored row-major; row `r + 1` lies
//! below row `r`, so the bottom pixel row of a cell (`y = h - 1`) touches the
//! top row (`y = 0`) of the cell beneath it.

use super::MechError;
use crate::cell2d::UnitCell2D;

/// Solid-contact and mismatch ratio of one interface between two pixel
/// edges.
fn interface(a: impl Iterator<Item = bool>, b: impl Iterator<Item = bool>) -> (bool, f64) {
    let (mut both, mut one, mut any) = (0usize, 0usize, 0usize);
    for (p, q) in a.zip(b) {
        if p && q {
            both += 1;
        }
        if p != q {
            one += 1;
        }
        if p || q {
            any += 1;
        }
    }
    let ratio = if any == 0 { 0.0 } else { one as f64 / any as f64 };
    (both > 0, ratio)
}

/// Contact flags and mismatch ratios for every ordered pair of cells of a
/// dataset, so assemblies can be scored from indices alone.
#[derive(Debug, Clone)]
pub struct InterfaceTable {
    n: usize,
    /// `[left * n + right]`: left cell's right edge against right cell's left edge.
    horizontal: Vec<(bool, f64)>,
    /// `[upper * n + lower]`: upper cell's bottom edge against lower cell's top edge.
    vertical: Vec<(bool, f64)>,
}

impl InterfaceTable {
    pub fn new(cells: &[&UnitCell2D]) -> Result<Self, MechError> {
        let n = cells.len();
        if let Some(first) = cells.first() {
            if cells.iter().any(|c| c.width != first.width || c.height != first.height) {
                return Err(MechError::Invalid("assembly cells must share one size".into()));
            }
        }
        let mut horizontal = Vec::with_capacity(n * n);
        let mut vertical = Vec::with_capacity(n * n);
        for a in cells {
            for b in cells {
                horizontal.push(interface(a.column(a.width - 1), b.column(0)));
                vertical.push(interface(a.row(a.height - 1), b.row(0)));
            }
        }
        Ok(Self { n, horizontal, vertical })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn edges(&self, rows: usize, cols: usize, l: &[usize]) -> Vec<(usize, usize, bool, f64)> {
        let mut out = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let i = r * cols + c;
                if c + 1 < cols {
                    let (t, q) = self.horizontal[l[i] * self.n + l[i + 1]];
                    out.push((i, i + 1, t, q));
                }
                if r + 1 < rows {
                    let (t, q) = self.vertical[l[i] * self.n + l[i + cols]];
                    out.push((i, i + cols, t, q));
                }
            }
        }
        out
    }

    /// Number of cells outside the largest contact-connected group.
    pub fn n_disconnected(&self, rows: usize, cols: usize, l: &[usize]) -> usize {
        let nf = rows * cols;
        let mut parent: Vec<usize> = (0..nf).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for (a, b, touch, _) in self.edges(rows, cols, l) {
            if touch {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[ra] = rb;
            }
        }
        let mut size = vec![0usize; nf];
        for i in 0..nf {
            let r = find(&mut parent, i);
            size[r] += 1;
        }
        nf - size.into_iter().max().unwrap_or(0)
    }

    /// Mean mismatch ratio over all interior interfaces (0 without any).
    pub fn r_disconnected(&self, rows: usize, cols: usize, l: &[usize]) -> f64 {
        let e = self.edges(rows, cols, l);
        if e.is_empty() {
            return 0.0;
        }
        e.iter().map(|x| x.3).sum::<f64>() / e.len() as f64
    }
}

fn check(rows: usize, cols: usize, cells: &[&UnitCell2D]) -> Result<(), MechError> {
    if rows * cols != cells.len() || cells.is_empty() {
        return Err(MechError::Invalid(format!(
            "assembly of {} cells does not fill a {rows}x{cols} grid",
            cells.len()
        )));
    }
    Ok(())
}

/// `N_dc`: cells not in the largest group of cells connected through
/// solid-solid interface contacts.
pub fn n_disconnected(rows: usize, cols: usize, cells: &[&UnitCell2D]) -> Result<usize, MechError> {
    check(rows, cols, cells)?;
    let table = InterfaceTable::new(cells)?;
    let l: Vec<usize> = (0..cells.len()).collect();
    Ok(table.n_disconnected(rows, cols, &l))
}

/// `r_dc`: mean over interior interfaces of (positions where exactly one
/// side is solid) / (positions where at least one side is solid).
pub fn r_disconnected(rows: usize, cols: usize, cells: &[&UnitCell2D]) -> Result<f64, MechError> {
    check(rows, cols, cells)?;
    let table = InterfaceTable::new(cells)?;
    let l: Vec<usize> = (0..cells.len()).collect();
    Ok(table.r_disconnected(rows, cols, &l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn all_solid_grid_is_connected() {
        let s = UnitCell2D::filled(4, 4, true);
        let cells = vec![&s; 4];
        assert_eq!(n_disconnected(2, 2, &cells).unwrap(), 0);
        assert_eq!(r_disconnected(2, 2, &cells).unwrap(), 0.0);
    }

    #[test]
    fn cell_with_void_border_is_detached() {
        let s = UnitCell2D::filled(4, 4, true);
        let island = UnitCell2D::from_fn(4, 4, |x, y| (1..3).contains(&x) && (1..3).contains(&y));
        let cells = vec![&s, &s, &s, &island];
        assert_eq!(n_disconnected(2, 2, &cells).unwrap(), 1);
    }

    #[test]
    fn half_matching_edge() {
        // left cell's right column all solid, right cell's left column half solid
        let left = UnitCell2D::filled(4, 4, true);
        let right = UnitCell2D::from_fn(4, 4, |x, y| x > 0 || y < 2);
        let r = r_disconnected(1, 2, &[&left, &right]).unwrap();
        assert_eq!(r, 0.5);
    }

    /// Pixel-level oracle: a cell belongs to the main group when its solid
    /// pixels touch across interfaces; built by flood fill over cells.
    fn oracle_ndc(rows: usize, cols: usize, cells: &[&UnitCell2D]) -> usize {
        let (w, h) = (cells[0].width, cells[0].height);
        let touches = |a: usize, b: usize| -> bool {
            let (ra, ca, rb, cb) = (a / cols, a % cols, b / cols, b % cols);
            if ra == rb && cb == ca + 1 {
                (0..h).any(|y| cells[a].get(w - 1, y) && cells[b].get(0, y))
            } else if ca == cb && rb == ra + 1 {
                (0..w).any(|x| cells[a].get(x, h - 1) && cells[b].get(x, 0))
            } else {
                false
            }
        };
        let nf = rows * cols;
        let mut seen = vec![false; nf];
        let mut best = 0;
        for s in 0..nf {
            if seen[s] {
                continue;
            }
            let mut stack = vec![s];
            seen[s] = true;
            let mut size = 0;
            while let Some(a) = stack.pop() {
                size += 1;
                for b in 0..nf {
                    if !seen[b] && (touches(a, b) || touches(b, a)) {
                        seen[b] = true;
                        stack.push(b);
                    }
                }
            }
            best = best.max(size);
        }
        nf - best
    }

    #[test]
    fn matches_flood_fill_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let (rows, cols) = (rng.gen_range(1..5), rng.gen_range(1..5));
            let owned: Vec<UnitCell2D> = (0..rows * cols)
                .map(|_| {
                    let p = rng.gen_range(0.05..0.6);
                    let bits = (0..25).map(|_| rng.gen::<f64>() < p).collect();
                    UnitCell2D::new(5, 5, bits)
                })
                .collect();
            let cells: Vec<&UnitCell2D> = owned.iter().collect();
            assert_eq!(n_disconnected(rows, cols, &cells).unwrap(), oracle_ndc(rows, cols, &cells));
            let r = r_disconnected(rows, cols, &cells).unwrap();
            assert!((0.0..=1.0).contains(&r));
        }
    }
}
