//! Diverse subset selection for metamaterial unit-cell datasets.
//!
//! The crate generates isosurface unit-cell families from periodic level-set
//! expressions and synthetic 2D cells, measures shape and property
//! similarity, builds PSD kernels for determinantal point processes, selects
//! diverse subsets greedily, and evaluates them in an aperiodic assembly
//! design study.

pub mod cell2d;
pub mod dpp;
pub mod expr;
pub mod formats;
pub mod isogen;
pub mod mech;
pub mod metrics;
pub mod pipeline;
pub mod seed;
pub mod topology;

pub use cell2d::UnitCell2D;
pub use expr::{FamilyForm, LevelSetExpr};
pub use isogen::{PointCloud, VoxelCell};
pub use metrics::{DistanceMatrix, KernelKind, SimilarityKernel};
