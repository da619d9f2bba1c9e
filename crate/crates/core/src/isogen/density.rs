use std::sync::Arc;

use super::{IsogenError, VoxelCell};
use crate::expr::{FamilyForm, LevelSetExpr, ScalarField};

/// Thresholds `field` into a voxel cell; `density` is the exact solid fraction.
pub fn solidify(field: Arc<ScalarField>, form: FamilyForm, t: f64) -> VoxelCell {
    let solid: Vec<bool> = field.values.iter().map(|&f| form.is_solid(f, t)).collect();
    let density = super::solid_fraction(&solid);
    VoxelCell {
        n: field.n,
        solid,
        density,
        family_id: String::new(),
        isovalue: t,
        form,
        field: Some(field),
    }
}

/// Solid fraction of `expr` under `form` at isovalue `t` on an `n^3` grid.
pub fn density_of(
    expr: &LevelSetExpr,
    form: FamilyForm,
    t: f64,
    n: usize,
) -> Result<f64, IsogenError> {
    let field = expr.evaluate_grid(n)?;
    Ok(DensityProbe::new(&field, form).density(t))
}

/// Answers density queries for one field in `O(log N)` from sorted values.
#[derive(Debug, Clone)]
pub struct DensityProbe {
    form: FamilyForm,
    sorted: Vec<f64>,
}

impl DensityProbe {
    pub fn new(field: &ScalarField, form: FamilyForm) -> Self {
        let mut sorted: Vec<f64> = match form {
            FamilyForm::Sq => field.values.iter().map(|v| v.abs()).collect(),
            _ => field.values.clone(),
        };
        sorted.sort_by(f64::total_cmp);
        Self { form, sorted }
    }

    pub fn density(&self, t: f64) -> f64 {
        let n = self.sorted.len();
        if n == 0 {
            return 0.0;
        }
        let count = match self.form {
            FamilyForm::Le => self.sorted.partition_point(|&v| v <= t),
            FamilyForm::Ge => n - self.sorted.partition_point(|&v| v < t),
            FamilyForm::Sq => self.sorted.partition_point(|&v| v <= t.abs()),
        };
        count as f64 / n as f64
    }

    /// Isovalue interval searched by the bisection, oriented so that density
    /// grows from the first bound to the second.
    fn bracket(&self) -> Option<(f64, f64)> {
        let lo = *self.sorted.first()?;
        let hi = *self.sorted.last()?;
        let span = hi - lo;
        match self.form {
            FamilyForm::Le => Some((lo - span, hi)),
            FamilyForm::Ge => Some((hi + span, lo)),
            FamilyForm::Sq => Some((0.0, hi)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsovalueSolution {
    pub t: f64,
    pub density: f64,
    /// True when the voxelized density could not get within tolerance of the
    /// target; `t` then gives the nearest achievable density.
    pub pinned: bool,
}

/// Finds `t` with `|density(t) - target| <= tol` by bisection over the
/// isovalue. Bisection iterates scale exactly with the field, so a field and
/// its power-of-two multiple give identical solid sets.
pub fn solve_isovalue(
    field: &ScalarField,
    form: FamilyForm,
    target: f64,
    tol: f64,
) -> Result<IsovalueSolution, IsogenError> {
    solve_with_probe(&DensityProbe::new(field, form), target, tol)
}

pub(crate) fn solve_with_probe(
    probe: &DensityProbe,
    target: f64,
    tol: f64,
) -> Result<IsovalueSolution, IsogenError> {
    if !(target > 0.0 && target < 1.0) {
        return Err(IsogenError::TargetOutOfRange(target));
    }
    let (mut lo, mut hi) = probe.bracket().ok_or(IsogenError::ConstantField)?;
    let width = (hi - lo).abs();
    if width == 0.0 {
        return Err(IsogenError::ConstantField);
    }
    let mut rho_lo = probe.density(lo);
    let mut rho_hi = probe.density(hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let rho = probe.density(mid);
        if (rho - target).abs() <= tol {
            return Ok(IsovalueSolution {
                t: mid,
                density: rho,
                pinned: false,
            });
        }
        if rho < target {
            lo = mid;
            rho_lo = rho;
        } else {
            hi = mid;
            rho_hi = rho;
        }
        if (hi - lo).abs() <= 1e-13 * width {
            break;
        }
    }
    let (t, density) = if (target - rho_lo).abs() <= (rho_hi - target).abs() {
        (lo, rho_lo)
    } else {
        (hi, rho_hi)
    };
    Ok(IsovalueSolution {
        t,
        density,
        pinned: (density - target).abs() > tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn primitive(n: usize) -> ScalarField {
        LevelSetExpr::parse("cos(X)+cos(Y)+cos(Z)")
            .unwrap()
            .evaluate_grid(n)
            .unwrap()
    }

    #[test]
    fn primitive_half_density_at_zero() {
        let n = 64;
        let cell = solidify(Arc::new(primitive(n)), FamilyForm::Le, 0.0);
        assert!((cell.density - 0.5).abs() <= 2.0 / n as f64);
        assert_eq!(cell.density, cell.solid_count() as f64 / (n * n * n) as f64);
    }

    #[test]
    fn le_and_ge_partition_voxels() {
        let field = Arc::new(
            LevelSetExpr::parse("sin(X)*cos(Y)+sin(Y)*cos(Z)+sin(Z)*cos(X)")
                .unwrap()
                .evaluate_grid(16)
                .unwrap(),
        );
        for t in [-0.7, -0.1, 0.0, 0.3, 1.2] {
            let le = solidify(field.clone(), FamilyForm::Le, t).density;
            let ge = solidify(field.clone(), FamilyForm::Ge, t).density;
            let eq = field.values.iter().filter(|&&v| v == t).count() as f64 / field.len() as f64;
            assert!((le + ge - eq - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sq_zero_is_exact_zero_set() {
        let field = Arc::new(primitive(16));
        let zeros = field.values.iter().filter(|&&v| v == 0.0).count() as f64 / field.len() as f64;
        assert_eq!(solidify(field, FamilyForm::Sq, 0.0).density, zeros);
    }

    #[test]
    fn probe_matches_solidify() {
        let field = Arc::new(primitive(16));
        for form in [FamilyForm::Le, FamilyForm::Ge, FamilyForm::Sq] {
            let probe = DensityProbe::new(&field, form);
            for t in [-2.0, -0.5, 0.0, 0.25, 1.0, 3.5] {
                assert_eq!(probe.density(t), solidify(field.clone(), form, t).density);
            }
        }
    }

    #[test]
    fn solve_primitive_half() {
        let sol = solve_isovalue(&primitive(64), FamilyForm::Le, 0.5, 1e-3).unwrap();
        assert!(sol.pinned || (sol.density - 0.5).abs() <= 1e-3);
        assert!(sol.t.abs() < 0.05);
    }

    #[test]
    fn solve_recount() {
        let field = primitive(32);
        for form in [FamilyForm::Le, FamilyForm::Ge, FamilyForm::Sq] {
            let sol = solve_isovalue(&field, form, 0.3, 1e-3).unwrap();
            let recount = field.values.iter().filter(|&&f| form.is_solid(f, sol.t)).count() as f64
                / field.len() as f64;
            assert_eq!(recount, sol.density);
            assert!(sol.pinned || (recount - 0.3).abs() <= 1e-3, "{form}: {recount}");
        }
    }

    #[test]
    fn out_of_range_target() {
        let field = primitive(16);
        for bad in [1.5, 0.0, 1.0, -0.1, f64::NAN] {
            assert!(matches!(
                solve_isovalue(&field, FamilyForm::Le, bad, 1e-3),
                Err(IsogenError::TargetOutOfRange(_))
            ));
        }
    }

    #[test]
    fn constant_field_is_rejected() {
        let field = ScalarField {
            n: 8,
            dims: 3,
            values: vec![1.0; 512],
        };
        assert!(matches!(
            solve_isovalue(&field, FamilyForm::Le, 0.5, 1e-3),
            Err(IsogenError::ConstantField)
        ));
    }

    #[test]
    fn density_monotone_in_t() {
        let field = primitive(16);
        let (lo, hi) = field.min_max();
        for form in [FamilyForm::Le, FamilyForm::Ge, FamilyForm::Sq] {
            let probe = DensityProbe::new(&field, form);
            let rhos: Vec<f64> = (0..50)
                .map(|i| lo + (hi - lo) * i as f64 / 49.0)
                .map(|t| probe.density(t))
                .collect();
            for w in rhos.windows(2) {
                match form {
                    FamilyForm::Ge => assert!(w[1] <= w[0]),
                    _ if lo >= 0.0 => assert!(w[1] >= w[0]),
                    FamilyForm::Le => assert!(w[1] >= w[0]),
                    FamilyForm::Sq => {}
                }
            }
        }
        // SQ is monotone in |t|
        let probe = DensityProbe::new(&field, FamilyForm::Sq);
        let rhos: Vec<f64> = (0..50).map(|i| probe.density(hi * i as f64 / 49.0)).collect();
        assert!(rhos.windows(2).all(|w| w[1] >= w[0]));
    }
}
