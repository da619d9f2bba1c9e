//! Connected-component labeling on periodic (toroidal) pixel and voxel grids.

/// Neighborhood used when labeling a 3D grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conn3 {
    Faces6,
    Full26,
}

/// Neighborhood used when labeling a 2D grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conn2 {
    Four,
    Eight,
}

pub const UNLABELED: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct Components {
    /// Component id per cell, [`UNLABELED`] for cells outside the mask.
    pub labels: Vec<u32>,
    /// Cell count per component id.
    pub sizes: Vec<usize>,
}

impl Components {
    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    /// Id of the largest component; ties go to the lowest id.
    pub fn largest(&self) -> Option<u32> {
        let mut best: Option<(usize, u32)> = None;
        for (id, &s) in self.sizes.iter().enumerate() {
            if best.is_none_or(|(b, _)| s > b) {
                best = Some((s, id as u32));
            }
        }
        best.map(|(_, id)| id)
    }

    /// Mask retaining only the largest component.
    pub fn largest_mask(&self) -> Vec<bool> {
        match self.largest() {
            Some(id) => self.labels.iter().map(|&l| l == id).collect(),
            None => vec![false; self.labels.len()],
        }
    }
}

fn offsets3(conn: Conn3) -> Vec<(i64, i64, i64)> {
    let mut out = Vec::new();
    for dz in -1i64..=1 {
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                let manhattan = dx.abs() + dy.abs() + dz.abs();
                let keep = match conn {
                    Conn3::Faces6 => manhattan == 1,
                    Conn3::Full26 => manhattan > 0,
                };
                if keep {
                    out.push((dx, dy, dz));
                }
            }
        }
    }
    out
}

fn offsets2(conn: Conn2) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    for dy in -1i64..=1 {
        for dx in -1i64..=1 {
            let manhattan = dx.abs() + dy.abs();
            let keep = match conn {
                Conn2::Four => manhattan == 1,
                Conn2::Eight => manhattan > 0,
            };
            if keep {
                out.push((dx, dy));
            }
        }
    }
    out
}

/// Labels the `true` cells of an `n^3` grid (x fastest) with wraparound on
/// every axis.
pub fn label_periodic_3d(mask: &[bool], n: usize, conn: Conn3) -> Components {
    assert_eq!(mask.len(), n * n * n, "mask is not n^3");
    let offs = offsets3(conn);
    let ni = n as i64;
    let mut labels = vec![UNLABELED; mask.len()];
    let mut sizes = Vec::new();
    let mut stack = Vec::new();
    for seed in 0..mask.len() {
        if !mask[seed] || labels[seed] != UNLABELED {
            continue;
        }
        let id = sizes.len() as u32;
        labels[seed] = id;
        stack.push(seed);
        let mut size = 0usize;
        while let Some(idx) = stack.pop() {
            size += 1;
            let i = (idx % n) as i64;
            let j = ((idx / n) % n) as i64;
            let k = (idx / (n * n)) as i64;
            for &(dx, dy, dz) in &offs {
                let x = (i + dx).rem_euclid(ni) as usize;
                let y = (j + dy).rem_euclid(ni) as usize;
                let z = (k + dz).rem_euclid(ni) as usize;
                let nb = x + n * (y + n * z);
                if mask[nb] && labels[nb] == UNLABELED {
                    labels[nb] = id;
                    stack.push(nb);
                }
            }
        }
        sizes.push(size);
    }
    Components { labels, sizes }
}

/// Labels the `true` cells of a `width x height` grid (x fastest) with
/// wraparound on both axes.
pub fn label_periodic_2d(mask: &[bool], width: usize, height: usize, conn: Conn2) -> Components {
    assert_eq!(mask.len(), width * height, "mask is not width*height");
    let offs = offsets2(conn);
    let (w, h) = (width as i64, height as i64);
    let mut labels = vec![UNLABELED; mask.len()];
    let mut sizes = Vec::new();
    let mut stack = Vec::new();
    for seed in 0..mask.len() {
        if !mask[seed] || labels[seed] != UNLABELED {
            continue;
        }
        let id = sizes.len() as u32;
        labels[seed] = id;
        stack.push(seed);
        let mut size = 0usize;
        while let Some(idx) = stack.pop() {
            size += 1;
            let i = (idx % width) as i64;
            let j = (idx / width) as i64;
            for &(dx, dy) in &offs {
                let x = (i + dx).rem_euclid(w) as usize;
                let y = (j + dy).rem_euclid(h) as usize;
                let nb = x + width * y;
                if mask[nb] && labels[nb] == UNLABELED {
                    labels[nb] = id;
                    stack.push(nb);
                }
            }
        }
        sizes.push(size);
    }
    Components { labels, sizes }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wraparound_joins_opposite_faces() {
        let n = 4;
        let mut mask = vec![false; 64];
        mask[0] = true; // (0,0,0)
        mask[3] = true; // (3,0,0), touches (0,0,0) across the x wrap
        let c = label_periodic_3d(&mask, n, Conn3::Faces6);
        assert_eq!(c.count(), 1);
        assert_eq!(c.sizes, vec![2]);
    }

    #[test]
    fn diagonal_needs_26() {
        let n = 4;
        let mut mask = vec![false; 64];
        mask[0] = true;
        mask[1 + 4 + 16] = true;
        assert_eq!(label_periodic_3d(&mask, n, Conn3::Faces6).count(), 2);
        assert_eq!(label_periodic_3d(&mask, n, Conn3::Full26).count(), 1);
    }

    #[test]
    fn two_d_corner_wrap() {
        let mut mask = vec![false; 25];
        mask[0] = true;
        mask[24] = true; // (4,4) is a diagonal neighbor of (0,0) through both wraps
        assert_eq!(label_periodic_2d(&mask, 5, 5, Conn2::Four).count(), 2);
        assert_eq!(label_periodic_2d(&mask, 5, 5, Conn2::Eight).count(), 1);
    }

    #[test]
    fn largest_mask_keeps_biggest() {
        let mut mask = vec![false; 36];
        for i in [0, 1, 2, 14, 15] {
            mask[i] = true;
        }
        let c = label_periodic_2d(&mask, 6, 6, Conn2::Four);
        assert_eq!(c.count(), 2);
        let keep = c.largest_mask();
        assert_eq!(keep.iter().filter(|&&b| b).count(), 3);
        assert!(keep[0] && !keep[14]);
    }
}
