use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{IsogenError, VoxelCell};

pub const DEFAULT_POINT_COUNT: usize = 4096;

/// Points sampled on a unit cell's surface, in cell coordinates `[0,1)^3`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<[f64; 3]>,
}

impl PointCloud {
    pub fn new(points: Vec<[f64; 3]>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Surface crossings on grid edges between voxel centers whose solid state
/// differs. With a source field the crossing is linearly interpolated on the
/// level value; otherwise (or where post-processing changed a voxel) the edge
/// midpoint is used. Order is deterministic: voxel index, then axis.
pub fn surface_candidates(cell: &VoxelCell) -> Vec<[f64; 3]> {
    let n = cell.n;
    let h = 1.0 / n as f64;
    let field = cell.field();
    let mut out = Vec::new();
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let a = i + n * (j + n * k);
                let sa = cell.solid[a];
                let neighbors = [
                    (i + 1) % n + n * (j + n * k),
                    i + n * ((j + 1) % n + n * k),
                    i + n * (j + n * ((k + 1) % n)),
                ];
                for (axis, &b) in neighbors.iter().enumerate() {
                    let sb = cell.solid[b];
                    if sa == sb {
                        continue;
                    }
                    let s = match field {
                        Some(f) => {
                            let la = cell.form.level(f.values[a], cell.isovalue);
                            let lb = cell.form.level(f.values[b], cell.isovalue);
                            if (la <= 0.0) == sa && (lb <= 0.0) == sb && la != lb {
                                (la / (la - lb)).clamp(0.0, 1.0)
                            } else {
                                0.5
                            }
                        }
                        None => 0.5,
                    };
                    let mut p = [
                        (i as f64 + 0.5) * h,
                        (j as f64 + 0.5) * h,
                        (k as f64 + 0.5) * h,
                    ];
                    p[axis] = (p[axis] + s * h).rem_euclid(1.0);
                    out.push(p);
                }
            }
        }
    }
    out
}

/// Samples exactly `count` surface points, without replacement when enough
/// candidates exist and with replacement otherwise.
pub fn extract_surface_points(
    cell: &VoxelCell,
    count: usize,
    seed: u64,
) -> Result<PointCloud, IsogenError> {
    let solid = cell.solid_count();
    if solid == 0 {
        return Err(IsogenError::NoSurface("void"));
    }
    if solid == cell.solid.len() {
        return Err(IsogenError::NoSurface("solid"));
    }
    let candidates = surface_candidates(cell);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = if candidates.len() >= count {
        index::sample(&mut rng, candidates.len(), count)
            .into_iter()
            .map(|i| candidates[i])
            .collect()
    } else {
        (0..count)
            .map(|_| candidates[rng.gen_range(0..candidates.len())])
            .collect()
    };
    Ok(PointCloud { points })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::expr::{FamilyForm, LevelSetExpr};
    use crate::isogen::solidify;

    fn cell(src: &str, n: usize, form: FamilyForm, t: f64) -> VoxelCell {
        let f = LevelSetExpr::parse_with_dims(src, 3).unwrap().evaluate_grid(n).unwrap();
        solidify(Arc::new(f), form, t)
    }

    #[test]
    fn primitive_points_lie_on_surface() {
        let n = 64;
        let expr = LevelSetExpr::parse("cos(X)+cos(Y)+cos(Z)").unwrap();
        let c = cell("cos(X)+cos(Y)+cos(Z)", n, FamilyForm::Le, 0.0);
        let cloud = extract_surface_points(&c, 4096, 11).unwrap();
        assert_eq!(cloud.len(), 4096);
        // |grad f| <= 2*pi*sqrt(3); the crossing lies within one edge of length 1/n
        let bound = std::f64::consts::TAU * 3f64.sqrt() / n as f64;
        for p in &cloud.points {
            assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
            assert!(expr.evaluate(p).abs() <= bound, "{p:?}");
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let c = cell("cos(X)+cos(Y)+cos(Z)", 16, FamilyForm::Le, 0.3);
        let a = extract_surface_points(&c, 500, 3).unwrap();
        let b = extract_surface_points(&c, 500, 3).unwrap();
        assert_eq!(a, b);
        let d = extract_surface_points(&c, 500, 4).unwrap();
        assert_ne!(a, d);
    }

    #[test]
    fn resamples_with_replacement_when_short() {
        let c = cell("cos(X)", 8, FamilyForm::Le, 0.0);
        let cands = surface_candidates(&c);
        assert!(cands.len() < 1000);
        let cloud = extract_surface_points(&c, 1000, 1).unwrap();
        assert_eq!(cloud.len(), 1000);
        assert!(cloud.points.iter().all(|p| cands.contains(p)));
    }

    #[test]
    fn uniform_cells_have_no_surface() {
        let solid = VoxelCell::from_solid(8, vec![true; 512]);
        assert!(matches!(extract_surface_points(&solid, 10, 0), Err(IsogenError::NoSurface("solid"))));
        let void = VoxelCell::from_solid(8, vec![false; 512]);
        assert!(matches!(extract_surface_points(&void, 10, 0), Err(IsogenError::NoSurface("void"))));
    }

    #[test]
    fn scalar_multiple_gives_identical_cloud() {
        let n = 24;
        let f1 = Arc::new(LevelSetExpr::parse("cos(X)+cos(Y)+cos(Z)").unwrap().evaluate_grid(n).unwrap());
        let f4 = Arc::new(
            LevelSetExpr::parse("4*(cos(X)+cos(Y)+cos(Z))").unwrap().evaluate_grid(n).unwrap(),
        );
        let s1 = crate::isogen::solve_isovalue(&f1, FamilyForm::Le, 0.35, 1e-3).unwrap();
        let s4 = crate::isogen::solve_isovalue(&f4, FamilyForm::Le, 0.35, 1e-3).unwrap();
        let c1 = solidify(f1, FamilyForm::Le, s1.t);
        let c4 = solidify(f4, FamilyForm::Le, s4.t);
        assert_eq!(c1.solid, c4.solid);
        let a = extract_surface_points(&c1, 2048, 9).unwrap();
        let b = extract_surface_points(&c4, 2048, 9).unwrap();
        assert_eq!(a, b);
    }
}
