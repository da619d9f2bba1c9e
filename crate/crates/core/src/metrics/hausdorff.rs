//! Exact Hausdorff distances between 3D point clouds.
//!
//! Nearest-neighbor queries go through a uniform grid over the target cloud
//! searched in expanding Chebyshev shells; the search stops once the best
//! candidate is closer than anything outside the examined block, so results
//! are bit-identical to brute force.

use crate::isogen::PointCloud;

#[inline]
fn dist_sq(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

/// Uniform-grid spatial index over a point set.
#[derive(Debug, Clone)]
pub struct GridIndex {
    points: Vec<[f64; 3]>,
    lo: [f64; 3],
    cell: [f64; 3],
    dims: [usize; 3],
    /// Start offsets into `order` per grid cell (length = cells + 1).
    starts: Vec<usize>,
    order: Vec<usize>,
}

impl GridIndex {
    pub fn new(points: &[[f64; 3]]) -> Self {
        assert!(!points.is_empty(), "cannot index an empty cloud");
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in points {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        // about two points per cell
        let per_axis = ((points.len() as f64 / 2.0).cbrt().ceil() as usize).clamp(1, 128);
        let mut dims = [1usize; 3];
        let mut cell = [1.0f64; 3];
        for a in 0..3 {
            let extent = hi[a] - lo[a];
            if extent > 0.0 {
                dims[a] = per_axis;
                cell[a] = extent / per_axis as f64;
            }
        }
        let total = dims[0] * dims[1] * dims[2];
        let mut counts = vec![0usize; total + 1];
        let mut index = GridIndex {
            points: points.to_vec(),
            lo,
            cell,
            dims,
            starts: Vec::new(),
            order: Vec::new(),
        };
        let keys: Vec<usize> = points.iter().map(|p| index.key(index.coords(p))).collect();
        for &k in &keys {
            counts[k + 1] += 1;
        }
        for i in 0..total {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut order = vec![0usize; points.len()];
        for (i, &k) in keys.iter().enumerate() {
            order[fill[k]] = i;
            fill[k] += 1;
        }
        index.starts = counts;
        index.order = order;
        index
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    fn coords(&self, p: &[f64; 3]) -> [usize; 3] {
        let mut c = [0usize; 3];
        for a in 0..3 {
            let t = ((p[a] - self.lo[a]) / self.cell[a]).floor();
            c[a] = if t <= 0.0 {
                0
            } else {
                (t as usize).min(self.dims[a] - 1)
            };
        }
        c
    }

    fn key(&self, c: [usize; 3]) -> usize {
        c[0] + self.dims[0] * (c[1] + self.dims[1] * c[2])
    }

    /// Squared distance from `q` to its nearest indexed point. When
    /// `stop_at` is given the search may return early with any value
    /// `<= stop_at` (used for early-break Hausdorff).
    pub fn nearest_sq(&self, q: &[f64; 3], stop_at: Option<f64>) -> f64 {
        let c = self.coords(q);
        let mut best = f64::INFINITY;
        let max_r = *self.dims.iter().max().unwrap();
        for r in 0..=max_r {
            self.scan_shell(q, c, r, &mut best);
            if stop_at.is_some_and(|s| best <= s) {
                return best;
            }
            // the block of radius r covers everything?
            let covers = (0..3).all(|a| c[a] < r + 1 && c[a] + r + 1 >= self.dims[a]);
            if covers {
                break;
            }
            // lower bound on the distance to any point outside the block
            let mut bound = f64::INFINITY;
            for a in 0..3 {
                if c[a] > r {
                    let wall = self.lo[a] + (c[a] - r) as f64 * self.cell[a];
                    bound = bound.min(q[a] - wall);
                }
                if c[a] + r + 1 < self.dims[a] {
                    let wall = self.lo[a] + (c[a] + r + 1) as f64 * self.cell[a];
                    bound = bound.min(wall - q[a]);
                }
            }
            if bound > 0.0 && best < bound * bound {
                break;
            }
        }
        best
    }

    fn scan_shell(&self, q: &[f64; 3], c: [usize; 3], r: usize, best: &mut f64) {
        let range = |a: usize| {
            let lo = c[a].saturating_sub(r);
            let hi = (c[a] + r).min(self.dims[a] - 1);
            (lo, hi)
        };
        let (x0, x1) = range(0);
        let (y0, y1) = range(1);
        let (z0, z1) = range(2);
        for z in z0..=z1 {
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let cheb = x.abs_diff(c[0]).max(y.abs_diff(c[1])).max(z.abs_diff(c[2]));
                    if cheb != r {
                        continue;
                    }
                    let k = self.key([x, y, z]);
                    for &i in &self.order[self.starts[k]..self.starts[k + 1]] {
                        let d = dist_sq(q, &self.points[i]);
                        if d < *best {
                            *best = d;
                        }
                    }
                }
            }
        }
    }
}

/// Directed Hausdorff distance `max_a min_b |a - b|`, brute force.
pub fn hausdorff_directed_brute(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    let mut worst = 0.0f64;
    for p in a {
        let mut best = f64::INFINITY;
        for q in b {
            let d = dist_sq(p, q);
            if d < best {
                best = d;
            }
        }
        worst = worst.max(best);
    }
    worst.sqrt()
}

/// Directed Hausdorff distance from `a` to the indexed cloud. Returns early
/// with a value `>= cap` once the running maximum reaches `cap`.
pub fn hausdorff_directed_indexed(a: &[[f64; 3]], b: &GridIndex, cap: f64) -> f64 {
    let cap_sq = cap * cap;
    let mut worst = 0.0f64;
    for p in a {
        // a nearest distance at or below the running max cannot raise it
        let d = b.nearest_sq(p, Some(worst));
        if d > worst {
            worst = d;
            if worst >= cap_sq {
                break;
            }
        }
    }
    worst.sqrt()
}

/// Directed Hausdorff distance `h(A, B)`.
pub fn hausdorff_directed(a: &PointCloud, b: &PointCloud) -> f64 {
    if a.is_empty() || b.is_empty() {
        return if a.is_empty() { 0.0 } else { f64::INFINITY };
    }
    hausdorff_directed_indexed(&a.points, &GridIndex::new(&b.points), f64::INFINITY)
}

/// Symmetric Hausdorff distance `max(h(A,B), h(B,A))`.
pub fn hausdorff(a: &PointCloud, b: &PointCloud) -> f64 {
    hausdorff_directed(a, b).max(hausdorff_directed(b, a))
}

/// A cloud with its spatial index, for repeated distance queries.
#[derive(Debug, Clone)]
pub struct IndexedCloud {
    pub index: GridIndex,
}

impl IndexedCloud {
    pub fn new(cloud: &PointCloud) -> Self {
        Self {
            index: GridIndex::new(&cloud.points),
        }
    }

    pub fn points(&self) -> &[[f64; 3]] {
        self.index.points()
    }

    /// Symmetric Hausdorff distance; exact when below `cap`, otherwise some
    /// value `>= cap`.
    pub fn hausdorff_capped(&self, other: &IndexedCloud, cap: f64) -> f64 {
        let ab = hausdorff_directed_indexed(self.points(), &other.index, cap);
        if ab >= cap {
            return ab;
        }
        ab.max(hausdorff_directed_indexed(other.points(), &self.index, cap))
    }

    pub fn hausdorff(&self, other: &IndexedCloud) -> f64 {
        self.hausdorff_capped(other, f64::INFINITY)
    }
}
