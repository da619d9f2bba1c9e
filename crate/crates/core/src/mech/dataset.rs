//! Synthetic 2D unit cells from periodic level-set expressions.

use rand::Rng;

use super::homogenize::homogenize2d;
use super::MechError;
use crate::cell2d::UnitCell2D;
use crate::expr::{CatalogEntry, FamilyForm};
use crate::seed;

#[derive(Debug, Clone)]
pub struct Gen2dConfig {
    pub count: usize,
    pub vf_min: f64,
    pub vf_max: f64,
    /// Pixels per side.
    pub n: usize,
    pub seed: u64,
    /// Draws per cell before giving up.
    pub max_attempts: usize,
}

impl Default for Gen2dConfig {
    fn default() -> Self {
        Self {
            count: 200,
            vf_min: 0.70,
            vf_max: 0.95,
            n: 50,
            seed: 0,
            max_attempts: 200,
        }
    }
}

/// Field whose sublevel set `g <= t` is the solid of the entry's form,
/// scaled to unit standard deviation.
fn oriented_field(entry: &CatalogEntry, n: usize) -> Result<Vec<f64>, MechError> {
    let field = entry
        .expr
        .evaluate_grid(n)
        .map_err(|e| MechError::Invalid(e.to_string()))?;
    let mut g: Vec<f64> = field
        .values
        .iter()
        .map(|&f| match entry.form {
            FamilyForm::Le => f,
            FamilyForm::Ge => -f,
            FamilyForm::Sq => f.abs(),
        })
        .collect();
    let mean = g.iter().sum::<f64>() / g.len() as f64;
    let sd = (g.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / g.len() as f64).sqrt();
    if sd == 0.0 {
        return Err(MechError::Invalid(format!("family {:?} is constant", entry.family_id)));
    }
    for v in &mut g {
        *v = (*v - mean) / sd;
    }
    Ok(g)
}

/// Seeded synthetic cells. Each cell blends two catalog fields with a random
/// weight, shifts the blend by a random whole-pixel offset, and thresholds it
/// at a random volume fraction in `[vf_min, vf_max]`. Draws whose solid is
/// not one periodic 4-connected component, or whose volume fraction falls
/// below `vf_min`, are redrawn. Properties are filled by homogenization.
pub fn gen2d_dataset(catalog: &[CatalogEntry], cfg: &Gen2dConfig) -> Result<Vec<UnitCell2D>, MechError> {
    if catalog.is_empty() {
        return Err(MechError::Invalid("2D catalog has no families".into()));
    }
    if catalog.iter().any(|e| e.expr.dims() != 2) {
        return Err(MechError::Invalid("2D catalog expressions must use X and Y only".into()));
    }
    if !(0.0..1.0).contains(&cfg.vf_min) || cfg.vf_max < cfg.vf_min || cfg.vf_max > 1.0 {
        return Err(MechError::Invalid("volume fraction bounds must satisfy 0 <= vf_min <= vf_max <= 1".into()));
    }
    let n = cfg.n;
    let fields: Vec<Vec<f64>> = catalog
        .iter()
        .map(|e| oriented_field(e, n))
        .collect::<Result<_, _>>()?;
    let mut cells = Vec::with_capacity(cfg.count);
    for i in 0..cfg.count {
        let mut rng = seed::rng(cfg.seed, "gen2d", i as u64);
        let mut made = None;
        for _ in 0..cfg.max_attempts {
            let a = rng.gen_range(0..fields.len());
            let b = rng.gen_range(0..fields.len());
            let mix: f64 = rng.gen();
            let (sx, sy) = (rng.gen_range(0..n), rng.gen_range(0..n));
            let target = rng.gen_range(cfg.vf_min..=cfg.vf_max);
            let g: Vec<f64> = (0..n * n)
                .map(|p| {
                    let (x, y) = ((p % n + sx) % n, (p / n + sy) % n);
                    let q = x + n * y;
                    mix * fields[a][q] + (1.0 - mix) * fields[b][q]
                })
                .collect();
            let mut sorted = g.clone();
            sorted.sort_by(f64::total_cmp);
            let k = ((target * (n * n) as f64).ceil() as usize).clamp(1, n * n);
            let t = sorted[k - 1];
            let cell = UnitCell2D::new(n, n, g.iter().map(|&v| v <= t).collect());
            if cell.volume_fraction() >= cfg.vf_min && cell.solid_components() == 1 {
                made = Some(cell);
                break;
            }
        }
        cells.push(made.ok_or_else(|| {
            MechError::Invalid(format!("no connected cell with vf >= {} after {} draws", cfg.vf_min, cfg.max_attempts))
        })?);
    }
    fill_properties(&mut cells)?;
    Ok(cells)
}

/// Homogenizes every cell and stores `(C11, C12, C22, C33)`.
pub fn fill_properties(cells: &mut [UnitCell2D]) -> Result<(), MechError> {
    #[cfg(feature = "parallel")]
    let tensors: Vec<_> = {
        use rayon::prelude::*;
        cells.par_iter().map(homogenize2d).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let tensors: Vec<_> = cells.iter().map(homogenize2d).collect();
    for (cell, t) in cells.iter_mut().zip(tensors) {
        cell.properties = Some(t?.property_vector());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_catalog;

    #[test]
    fn cells_meet_the_contract() {
        let cat = parse_catalog("a | cos(X)+cos(Y) | LE\nb | sin(X)*sin(Y) | SQ\n", 2).unwrap();
        let cfg = Gen2dConfig {
            count: 4,
            n: 16,
            seed: 3,
            ..Default::default()
        };
        let cells = gen2d_dataset(&cat, &cfg).unwrap();
        assert_eq!(cells.len(), 4);
        for c in &cells {
            assert!(c.volume_fraction() >= 0.70);
            assert_eq!(c.solid_components(), 1);
            assert_eq!(c.properties.as_ref().unwrap().len(), 4);
        }
        assert_eq!(cells, gen2d_dataset(&cat, &cfg).unwrap());
    }

    #[test]
    fn rejects_three_dimensional_catalog() {
        let cat = parse_catalog("a | cos(X)+cos(Z) | LE\n", 3).unwrap();
        assert!(gen2d_dataset(&cat, &Gen2dConfig::default()).is_err());
    }
}
