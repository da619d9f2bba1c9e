//! Isosurface unit-cell families generated from periodic level-set functions.
//!
//! A family is one expression plus a [`FamilyForm`]; sweeping the isovalue
//! grades its density. This module controls density by bisection, screens
//! families for connectivity, samples them across their feasible density
//! range, and extracts surface point clouds.

mod density;
mod family;
mod feasibility;
mod surface;

use std::sync::Arc;

use thiserror::Error;

pub use density::{density_of, solidify, solve_isovalue, DensityProbe, IsovalueSolution};
pub use family::{
    descriptor_embedding, generate_family, geometric_properties, sample_family, Family,
    FamilyConfig, FamilySample, EMBEDDING_DIM,
};
pub use feasibility::{
    feasibility, feasible_range, scan_feasible_range, Feasibility, FeasibleRange, Infeasibility,
    MIN_FEASIBLE_WIDTH,
};
pub use surface::{extract_surface_points, surface_candidates, PointCloud, DEFAULT_POINT_COUNT};

use crate::expr::{FamilyForm, GridError, ScalarField};

#[derive(Debug, Error)]
pub enum IsogenError {
    #[error("target density {0} is outside (0, 1)")]
    TargetOutOfRange(f64),
    #[error("level-set field is constant; density cannot be controlled")]
    ConstantField,
    #[error("cell is uniformly {0}; no surface to sample")]
    NoSurface(&'static str),
    #[error("field must be three-dimensional, got {0} dimensions")]
    NotThreeDimensional(usize),
    #[error("family {0:?} has no feasible density range")]
    NoFeasibleRange(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// A periodic binary voxel unit cell of `n^3` voxels (x fastest).
#[derive(Debug, Clone)]
pub struct VoxelCell {
    pub n: usize,
    pub solid: Vec<bool>,
    pub density: f64,
    pub family_id: String,
    pub isovalue: f64,
    pub form: FamilyForm,
    field: Option<Arc<ScalarField>>,
}

impl VoxelCell {
    /// Builds a cell from an explicit solid mask, with no source field.
    pub fn from_solid(n: usize, solid: Vec<bool>) -> Self {
        assert_eq!(solid.len(), n * n * n, "solid mask is not n^3");
        let density = solid_fraction(&solid);
        Self {
            n,
            solid,
            density,
            family_id: String::new(),
            isovalue: 0.0,
            form: FamilyForm::Le,
            field: None,
        }
    }

    pub fn field(&self) -> Option<&ScalarField> {
        self.field.as_deref()
    }

    pub fn solid_count(&self) -> usize {
        self.solid.iter().filter(|&&s| s).count()
    }

    /// Replaces the solid mask and recomputes the density.
    pub fn set_solid(&mut self, solid: Vec<bool>) {
        assert_eq!(solid.len(), self.solid.len());
        self.density = solid_fraction(&solid);
        self.solid = solid;
    }

    /// Keeps only the largest 26-connected periodic solid component.
    pub fn keep_largest_solid(&mut self) {
        let comps = crate::topology::label_periodic_3d(
            &self.solid,
            self.n,
            crate::topology::Conn3::Full26,
        );
        if comps.count() > 1 {
            self.set_solid(comps.largest_mask());
        }
    }

    /// Cell translated by an integer voxel shift with wraparound.
    pub fn shifted(&self, dx: usize, dy: usize, dz: usize) -> Self {
        let n = self.n;
        let mut solid = vec![false; self.solid.len()];
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    let to = (i + dx) % n + n * ((j + dy) % n + n * ((k + dz) % n));
                    solid[to] = self.solid[i + n * (j + n * k)];
                }
            }
        }
        let mut out = self.clone();
        out.field = None;
        out.solid = solid;
        out
    }
}

pub(crate) fn solid_fraction(solid: &[bool]) -> f64 {
    if solid.is_empty() {
        return 0.0;
    }
    solid.iter().filter(|&&s| s).count() as f64 / solid.len() as f64
}
