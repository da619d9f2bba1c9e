use std::sync::Arc;

use super::density::{solidify, solve_with_probe, DensityProbe};
use super::feasibility::{feasibility, feasible_range, Feasibility, FeasibleRange};
use super::surface::{extract_surface_points, surface_candidates, PointCloud};
use super::{IsogenError, VoxelCell};
use crate::expr::{CatalogEntry, FamilyForm, LevelSetExpr, ScalarField};
use crate::metrics::descriptor::balanced_split;
use crate::seed;

/// Length of [`descriptor_embedding`] vectors.
pub const EMBEDDING_DIM: usize = 64;

#[derive(Debug, Clone)]
pub struct FamilyConfig {
    pub resolution: usize,
    pub samples: usize,
    pub points: usize,
    pub scan_step: f64,
    pub tol: f64,
    pub seed: u64,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        Self {
            resolution: 64,
            samples: 100,
            points: super::DEFAULT_POINT_COUNT,
            scan_step: 0.01,
            tol: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FamilySample {
    pub target_density: f64,
    pub cell: VoxelCell,
    /// Screening result before the largest-component cleanup.
    pub feasibility: Feasibility,
    pub cloud: PointCloud,
    pub properties: Vec<f64>,
    pub embedding: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Family {
    pub id: String,
    pub expr: LevelSetExpr,
    pub form: FamilyForm,
    pub range: Option<FeasibleRange>,
    /// Empty for rejected families.
    pub samples: Vec<FamilySample>,
}

impl Family {
    pub fn is_retained(&self) -> bool {
        self.range.is_some_and(|r| r.is_retained())
    }
}

/// Cells at `count` densities spaced uniformly over `range` (inclusive),
/// each reduced to its largest periodic solid component. The returned
/// feasibility is that of the cell before the cleanup.
pub fn sample_family(
    field: &Arc<ScalarField>,
    form: FamilyForm,
    range: FeasibleRange,
    count: usize,
    tol: f64,
) -> Result<Vec<(f64, VoxelCell, Feasibility)>, IsogenError> {
    let probe = DensityProbe::new(field, form);
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let target = if count == 1 {
            0.5 * (range.rho_min + range.rho_max)
        } else {
            range.rho_min + range.width() * i as f64 / (count - 1) as f64
        };
        let sol = solve_with_probe(&probe, target, tol)?;
        let mut cell = solidify(field.clone(), form, sol.t);
        let feas = feasibility(&cell);
        cell.keep_largest_solid();
        out.push((target, cell, feas));
    }
    Ok(out)
}

/// Screens a catalog family and, when retained, samples it and extracts
/// clouds, surrogate properties and embeddings for every sample.
pub fn generate_family(entry: &CatalogEntry, cfg: &FamilyConfig) -> Result<Family, IsogenError> {
    if entry.expr.dims() != 3 {
        return Err(IsogenError::NotThreeDimensional(entry.expr.dims()));
    }
    let field = Arc::new(entry.expr.evaluate_grid(cfg.resolution)?);
    let range = feasible_range(&field, entry.form, cfg.scan_step, cfg.tol);
    let mut family = Family {
        id: entry.family_id.clone(),
        expr: entry.expr.clone(),
        form: entry.form,
        range,
        samples: Vec::new(),
    };
    let Some(range) = range.filter(|r| r.is_retained()) else {
        return Ok(family);
    };
    for (i, (target, mut cell, feas)) in sample_family(&field, entry.form, range, cfg.samples, cfg.tol)?
        .into_iter()
        .enumerate()
    {
        cell.family_id = entry.family_id.clone();
        // seeds depend on the sample slot only, so identical families give identical clouds
        let cloud = extract_surface_points(&cell, cfg.points, seed::derive(cfg.seed, "surface", i as u64))?;
        family.samples.push(FamilySample {
            target_density: target,
            properties: geometric_properties(&cell),
            embedding: descriptor_embedding(&cell),
            cell,
            feasibility: feas,
            cloud,
        });
    }
    Ok(family)
}

/// Geometric stand-in for a 3D property vector:
/// `[density, series_x, series_y, series_z, surface]`, where `series_a` is the
/// harmonic mean of the solid fraction of slices normal to axis `a` (a
/// Reuss-style load-path measure) and `surface` approximates the surface
/// area per cell from the number of solid/void grid edges.
pub fn geometric_properties(cell: &VoxelCell) -> Vec<f64> {
    let n = cell.n;
    let mut slices = [vec![0usize; n], vec![0usize; n], vec![0usize; n]];
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                if cell.solid[i + n * (j + n * k)] {
                    slices[0][i] += 1;
                    slices[1][j] += 1;
                    slices[2][k] += 1;
                }
            }
        }
    }
    let area = (n * n) as f64;
    let mut out = vec![cell.density];
    for s in &slices {
        let series = if s.contains(&0) {
            0.0
        } else {
            n as f64 / s.iter().map(|&c| area / c as f64).sum::<f64>()
        };
        out.push(series);
    }
    out.push(surface_candidates(cell).len() as f64 / area);
    out
}

/// 64-dimensional shape feature: split coordinates of a recursive
/// equal-solid-volume bisection (axes cycling x, y, z; six levels, 63 splits)
/// centered on 0.5, followed by `density - 0.5`.
pub fn descriptor_embedding(cell: &VoxelCell) -> Vec<f64> {
    let n = cell.n;
    let mut out = Vec::with_capacity(EMBEDDING_DIM);
    split3(cell, [0, 0, 0], [n, n, n], 0, &mut out);
    out.push(cell.density - 0.5);
    debug_assert_eq!(out.len(), EMBEDDING_DIM);
    out
}

fn split3(cell: &VoxelCell, lo: [usize; 3], hi: [usize; 3], depth: usize, out: &mut Vec<f64>) {
    if depth == 6 {
        return;
    }
    let n = cell.n;
    let axis = depth % 3;
    let mut counts = vec![0usize; hi[axis] - lo[axis]];
    for k in lo[2]..hi[2] {
        for j in lo[1]..hi[1] {
            for i in lo[0]..hi[0] {
                if cell.solid[i + n * (j + n * k)] {
                    let c = [i, j, k][axis] - lo[axis];
                    counts[c] += 1;
                }
            }
        }
    }
    let at = lo[axis] + balanced_split(&counts);
    out.push(at as f64 / n as f64 - 0.5);
    let mut left_hi = hi;
    left_hi[axis] = at;
    let mut right_lo = lo;
    right_lo[axis] = at;
    split3(cell, lo, left_hi, depth + 1, out);
    split3(cell, right_lo, hi, depth + 1, out);
}
