use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::density::{solidify, solve_with_probe, DensityProbe};
use super::VoxelCell;
use crate::expr::{FamilyForm, ScalarField};
use crate::topology::{label_periodic_3d, Conn3};

/// Families whose feasible density interval is narrower than this are dropped.
pub const MIN_FEASIBLE_WIDTH: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Infeasibility {
    /// The cell has no solid voxels.
    NoSolid,
    /// Solid voxels form more than one 26-connected periodic component.
    DisconnectedSolid { components: usize },
    /// Void voxels form more than one 6-connected periodic component; every
    /// component besides one is an enclosed void.
    InternalVoid { components: usize },
}

impl fmt::Display for Infeasibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Infeasibility::NoSolid => f.write_str("no solid"),
            Infeasibility::DisconnectedSolid { components } => {
                write!(f, "disconnected solid ({components} components)")
            }
            Infeasibility::InternalVoid { components } => {
                write!(f, "internal void ({components} void components)")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feasibility {
    pub feasible: bool,
    pub reasons: Vec<Infeasibility>,
}

/// Checks that the solid is one 26-connected periodic component and the void
/// is at most one 6-connected periodic component.
pub fn feasibility(cell: &VoxelCell) -> Feasibility {
    let mut reasons = Vec::new();
    let solid = label_periodic_3d(&cell.solid, cell.n, Conn3::Full26);
    match solid.count() {
        0 => reasons.push(Infeasibility::NoSolid),
        1 => {}
        c => reasons.push(Infeasibility::DisconnectedSolid { components: c }),
    }
    let void_mask: Vec<bool> = cell.solid.iter().map(|&s| !s).collect();
    let void = label_periodic_3d(&void_mask, cell.n, Conn3::Faces6);
    if void.count() > 1 {
        reasons.push(Infeasibility::InternalVoid {
            components: void.count(),
        });
    }
    Feasibility {
        feasible: reasons.is_empty(),
        reasons,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibleRange {
    pub rho_min: f64,
    pub rho_max: f64,
}

impl FeasibleRange {
    pub fn width(&self) -> f64 {
        self.rho_max - self.rho_min
    }

    /// Strict `width < 0.2` rejection; the small slack absorbs the rounding
    /// of densities built as multiples of the scan step.
    pub fn is_retained(&self) -> bool {
        self.width() >= MIN_FEASIBLE_WIDTH - 1e-9
    }
}

/// Longest contiguous run of scan densities `k * step` (`0 < k*step < 1`)
/// for which `is_feasible` holds.
pub fn scan_feasible_range(step: f64, mut is_feasible: impl FnMut(f64) -> bool) -> Option<FeasibleRange> {
    assert!(step > 0.0 && step < 0.5, "scan step must be in (0, 0.5)");
    let steps = (1.0 / step).round() as usize;
    let mut best: Option<(usize, usize)> = None;
    let mut run_start: Option<usize> = None;
    for k in 1..steps {
        let ok = is_feasible(k as f64 * step);
        match (ok, run_start) {
            (true, None) => run_start = Some(k),
            (false, Some(s)) => {
                consider(&mut best, s, k - 1);
                run_start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = run_start {
        consider(&mut best, s, steps - 1);
    }
    best.map(|(a, b)| FeasibleRange {
        rho_min: a as f64 * step,
        rho_max: b as f64 * step,
    })
}

fn consider(best: &mut Option<(usize, usize)>, a: usize, b: usize) {
    if best.is_none_or(|(x, y)| b - a > y - x) {
        *best = Some((a, b));
    }
}

/// Scans the family's density range at `step` (targets solved to `tol`).
/// A pinned target is judged by the nearest achievable density.
pub fn feasible_range(
    field: &Arc<ScalarField>,
    form: FamilyForm,
    step: f64,
    tol: f64,
) -> Option<FeasibleRange> {
    let probe = DensityProbe::new(field, form);
    scan_feasible_range(step, |rho| match solve_with_probe(&probe, rho, tol) {
        Ok(sol) => feasibility(&solidify(field.clone(), form, sol.t)).feasible,
        Err(_) => false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::LevelSetExpr;

    fn ball_field(n: usize, centers: &[[f64; 3]]) -> Vec<f64> {
        // min distance to any center (periodic), solid where below the radius
        let mut out = Vec::with_capacity(n * n * n);
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    let p = [
                        (i as f64 + 0.5) / n as f64,
                        (j as f64 + 0.5) / n as f64,
                        (k as f64 + 0.5) / n as f64,
                    ];
                    let d = centers
                        .iter()
                        .map(|c| {
                            (0..3)
                                .map(|a| {
                                    let d = (p[a] - c[a]).abs();
                                    let d = d.min(1.0 - d);
                                    d * d
                                })
                                .sum::<f64>()
                                .sqrt()
                        })
                        .fold(f64::INFINITY, f64::min);
                    out.push(d);
                }
            }
        }
        out
    }

    #[test]
    fn full_solid_is_feasible() {
        let cell = VoxelCell::from_solid(8, vec![true; 512]);
        let f = feasibility(&cell);
        assert!(f.feasible, "{:?}", f.reasons);
    }

    #[test]
    fn empty_cell_is_infeasible() {
        let cell = VoxelCell::from_solid(8, vec![false; 512]);
        assert_eq!(feasibility(&cell).reasons, vec![Infeasibility::NoSolid]);
    }

    #[test]
    fn two_spheres_disconnected() {
        let n = 16;
        let d = ball_field(n, &[[0.25, 0.25, 0.25], [0.75, 0.75, 0.75]]);
        let solid = d.iter().map(|&v| v <= 0.15).collect();
        let f = feasibility(&VoxelCell::from_solid(n, solid));
        assert!(!f.feasible);
        assert_eq!(f.reasons, vec![Infeasibility::DisconnectedSolid { components: 2 }]);
    }

    #[test]
    fn shell_with_bubble_has_internal_void() {
        let n = 16;
        let d = ball_field(n, &[[0.5, 0.5, 0.5]]);
        let solid: Vec<bool> = d.iter().map(|&v| (0.15..=0.3).contains(&v)).collect();
        // independent oracle: count void voxels reachable from the cell corner
        let void_outside = {
            let mut seen = vec![false; n * n * n];
            let mut stack = vec![0usize];
            seen[0] = true;
            while let Some(idx) = stack.pop() {
                let (i, j, k) = (idx % n, (idx / n) % n, idx / (n * n));
                for (di, dj, dk) in [(1, 0, 0), (n - 1, 0, 0), (0, 1, 0), (0, n - 1, 0), (0, 0, 1), (0, 0, n - 1)] {
                    let nb = (i + di) % n + n * ((j + dj) % n + n * ((k + dk) % n));
                    if !solid[nb] && !seen[nb] {
                        seen[nb] = true;
                        stack.push(nb);
                    }
                }
            }
            seen.iter().filter(|&&s| s).count()
        };
        let voids = solid.iter().filter(|&&s| !s).count();
        assert!(void_outside < voids, "construction must enclose a bubble");
        let f = feasibility(&VoxelCell::from_solid(n, solid));
        assert!(!f.feasible);
        assert_eq!(f.reasons, vec![Infeasibility::InternalVoid { components: 2 }]);
    }

    #[test]
    fn feasibility_is_translation_invariant() {
        let n = 12;
        let d = ball_field(n, &[[0.3, 0.3, 0.3], [0.8, 0.7, 0.75]]);
        let solid = d.iter().map(|&v| v <= 0.18).collect();
        let cell = VoxelCell::from_solid(n, solid);
        let base = feasibility(&cell);
        for (dx, dy, dz) in [(1, 0, 0), (0, 5, 3), (11, 7, 2)] {
            assert_eq!(feasibility(&cell.shifted(dx, dy, dz)), base);
        }
    }

    #[test]
    fn width_rule_is_strict() {
        let r = scan_feasible_range(0.01, |rho| (0.295..0.495).contains(&rho)).unwrap();
        assert!((r.rho_min - 0.30).abs() < 1e-12 && (r.rho_max - 0.49).abs() < 1e-12);
        assert!((r.width() - 0.19).abs() < 1e-12);
        assert!(!r.is_retained());
        let r = scan_feasible_range(0.01, |rho| (0.295..0.505).contains(&rho)).unwrap();
        assert!(r.is_retained());
        assert!(scan_feasible_range(0.01, |_| false).is_none());
    }

    #[test]
    fn scan_picks_longest_run() {
        let r = scan_feasible_range(0.1, |rho| rho < 0.25 || (0.45..0.85).contains(&rho)).unwrap();
        assert!((r.rho_min - 0.5).abs() < 1e-12);
        assert!((r.rho_max - 0.8).abs() < 1e-12);
    }

    #[test]
    fn primitive_range_is_retained() {
        let field = Arc::new(
            LevelSetExpr::parse("cos(X)+cos(Y)+cos(Z)")
                .unwrap()
                .evaluate_grid(24)
                .unwrap(),
        );
        let r = feasible_range(&field, FamilyForm::Le, 0.01, 1e-3).unwrap();
        assert!(r.is_retained(), "{r:?}");
        // independent scan oracle: the midpoint of the range must be feasible
        let mid = 0.5 * (r.rho_min + r.rho_max);
        let sol = super::super::solve_isovalue(&field, FamilyForm::Le, mid, 1e-3).unwrap();
        assert!(feasibility(&solidify(field.clone(), FamilyForm::Le, sol.t)).feasible);
    }

    #[test]
    fn always_disconnected_family_rejected() {
        // isolated blobs at each of the 8 lattice sites of a doubled grid
        let field = Arc::new(
            LevelSetExpr::parse("cos(2*X)*cos(2*Y)*cos(2*Z) + cos(2*X) + cos(2*Y) + cos(2*Z)")
                .unwrap()
                .evaluate_grid(16)
                .unwrap(),
        );
        let always_two = |rho: f64| {
            let probe = DensityProbe::new(&field, FamilyForm::Ge);
            let sol = solve_with_probe(&probe, rho, 1e-3).unwrap();
            let cell = solidify(field.clone(), FamilyForm::Ge, sol.t);
            // construction: split the cell into two disjoint halves
            let mut solid = cell.solid.clone();
            for (idx, s) in solid.iter_mut().enumerate() {
                let x = idx % 16;
                if x == 0 || x == 8 {
                    *s = false;
                }
            }
            feasibility(&VoxelCell::from_solid(16, solid)).feasible
        };
        let r = scan_feasible_range(0.05, always_two);
        assert!(r.is_none_or(|r| !r.is_retained()), "{r:?}");
    }
}
