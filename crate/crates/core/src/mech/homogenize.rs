//! Periodic homogenization of binary 2D unit cells.
//!
//! One bilinear element per pixel; void pixels carry a small ersatz modulus.
//! For each unit test strain the periodic fluctuation field solves
//! `K chi = sum_e K_e chi0_e`, and the effective tensor is the cell average
//! of the element energies of `chi0 - chi`.

use serde::{Deserialize, Serialize};

use super::banded::{BandMatrix, FactorError};
use super::fe::{element_stiffness, plane_stress, quad_form, unit_strain_displacements, Voigt};
use super::MechError;
use crate::cell2d::UnitCell2D;

/// Young's modulus of the base material.
pub const BASE_E: f64 = 1.0;
/// Poisson's ratio of the base material.
pub const BASE_NU: f64 = 0.3;
/// Modulus assigned to void pixels.
pub const E_MIN: f64 = 1e-9;

/// Homogenized plane-stress tensor in Voigt form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElasticTensor2D {
    pub c: Voigt,
    pub e: f64,
    pub nu: f64,
}

impl ElasticTensor2D {
    pub fn c11(&self) -> f64 {
        self.c[0][0]
    }
    pub fn c12(&self) -> f64 {
        self.c[0][1]
    }
    pub fn c22(&self) -> f64 {
        self.c[1][1]
    }
    pub fn c33(&self) -> f64 {
        self.c[2][2]
    }

    /// `(C11, C12, C22, C33)`.
    pub fn property_vector(&self) -> Vec<f64> {
        vec![self.c11(), self.c12(), self.c22(), self.c33()]
    }

    /// Orthotropic tensor from `(C11, C12, C22, C33)`.
    pub fn from_property_vector(p: &[f64]) -> Option<Self> {
        if p.len() != 4 {
            return None;
        }
        Some(Self {
            c: [[p[0], p[1], 0.0], [p[1], p[2], 0.0], [0.0, 0.0, p[3]]],
            e: BASE_E,
            nu: BASE_NU,
        })
    }
}

/// Position of index `i` in the order `0, n-1, 1, n-2, ...`; periodic
/// neighbors end up at most two positions apart.
fn folded(i: usize, n: usize) -> usize {
    if 2 * i < n {
        2 * i
    } else {
        2 * (n - 1 - i) + 1
    }
}

pub fn homogenize2d(cell: &UnitCell2D) -> Result<ElasticTensor2D, MechError> {
    homogenize2d_with(cell, BASE_E, BASE_NU, E_MIN)
}

pub fn homogenize2d_with(cell: &UnitCell2D, e: f64, nu: f64, e_min: f64) -> Result<ElasticTensor2D, MechError> {
    let (w, h) = (cell.width, cell.height);
    if w < 2 || h < 2 {
        return Err(MechError::Invalid("cell must be at least 2x2 pixels".into()));
    }
    let ke = element_stiffness(&plane_stress(1.0, nu));
    let moduli: Vec<f64> = cell.solid.iter().map(|&s| if s { e } else { e_min }).collect();
    // global DOF of node (x, y), component c
    let node = |x: usize, y: usize| folded(x % w, w) + w * folded(y % h, h);
    let dofs = |ex: usize, ey: usize| {
        let nodes = [node(ex, ey), node(ex + 1, ey), node(ex + 1, ey + 1), node(ex, ey + 1)];
        let mut d = [0usize; 8];
        for (a, &n) in nodes.iter().enumerate() {
            d[2 * a] = 2 * n;
            d[2 * a + 1] = 2 * n + 1;
        }
        d
    };
    let ndof = 2 * w * h;
    let mut band = 0;
    for ey in 0..h {
        for ex in 0..w {
            let d = dofs(ex, ey);
            let (lo, hi) = (d.iter().min().unwrap(), d.iter().max().unwrap());
            band = band.max(hi - lo);
        }
    }
    let mut k = BandMatrix::zeros(ndof, band);
    let chi0: [[f64; 8]; 3] = [0, 1, 2].map(unit_strain_displacements);
    let mut rhs = vec![vec![0.0; ndof]; 3];
    for ey in 0..h {
        for ex in 0..w {
            let em = moduli[ex + w * ey];
            let d = dofs(ex, ey);
            for r in 0..8 {
                for c in 0..8 {
                    if d[r] >= d[c] {
                        // repeated DOFs only occur for 1-pixel periods, excluded above
                        k.add(d[r], d[c], em * ke[r][c]);
                    }
                }
                for (case, f) in rhs.iter_mut().enumerate() {
                    f[d[r]] += em * (0..8).map(|c| ke[r][c] * chi0[case][c]).sum::<f64>();
                }
            }
        }
    }
    // remove rigid translations by fixing node (0, 0)
    for dof in [0, 1] {
        k.pin(dof);
        for f in &mut rhs {
            f[dof] = 0.0;
        }
    }
    let chol = k.factor().map_err(|err| match err {
        FactorError::Singular { row } => MechError::Singular(format!("periodic cell system, row {row}")),
        FactorError::NotFinite { row } => MechError::Solver(format!("non-finite pivot at row {row}")),
    })?;
    for f in &mut rhs {
        chol.solve_in_place(f);
    }
    let mut c = [[0.0; 3]; 3];
    for ey in 0..h {
        for ex in 0..w {
            let em = moduli[ex + w * ey];
            let d = dofs(ex, ey);
            let mut v = [[0.0; 8]; 3];
            for case in 0..3 {
                for a in 0..8 {
                    v[case][a] = chi0[case][a] - rhs[case][d[a]];
                }
            }
            for i in 0..3 {
                for j in i..3 {
                    c[i][j] += em * quad_form(&ke, &v[i], &v[j]);
                }
            }
        }
    }
    let area = (w * h) as f64;
    for i in 0..3 {
        for j in i..3 {
            c[i][j] /= area;
            c[j][i] = c[i][j];
        }
    }
    if c.iter().flatten().any(|x| !x.is_finite()) {
        return Err(MechError::Solver("non-finite homogenized tensor".into()));
    }
    Ok(ElasticTensor2D { c, e, nu })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn folded_order_is_a_permutation() {
        for n in 2..9 {
            let mut v: Vec<usize> = (0..n).map(|i| folded(i, n)).collect();
            for i in 0..n {
                assert!(folded(i, n).abs_diff(folded((i + 1) % n, n)) <= 2);
            }
            v.sort();
            assert_eq!(v, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn full_solid_is_the_base_tensor() {
        let t = homogenize2d(&UnitCell2D::filled(12, 10, true)).unwrap();
        let d = plane_stress(BASE_E, BASE_NU);
        for i in 0..3 {
            for j in 0..3 {
                if d[i][j] != 0.0 {
                    assert!(rel(t.c[i][j], d[i][j]) < 1e-6);
                } else {
                    assert!(t.c[i][j].abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn full_void_is_the_ersatz_floor() {
        let t = homogenize2d(&UnitCell2D::filled(8, 8, false)).unwrap();
        let bound = 2.0 * E_MIN / (1.0 - BASE_NU * BASE_NU);
        assert!(t.c.iter().flatten().all(|v| v.abs() <= bound));
    }

    #[test]
    fn vertical_bars_carry_load_along_y_only() {
        // solid columns: stiff in y, compliant in x
        let cell = UnitCell2D::from_fn(10, 10, |x, _| x < 5);
        let t = homogenize2d(&cell).unwrap();
        assert!((t.c22() - 0.5).abs() < 1e-6);
        assert!(t.c11() < 1e-6);
    }

    #[test]
    fn tensor_is_symmetric_psd() {
        let cell = UnitCell2D::from_fn(16, 16, |x, y| (x * 7 + y * 3) % 5 != 0 || x == 3);
        let t = homogenize2d(&cell).unwrap();
        let m = nalgebra::Matrix3::from_fn(|i, j| t.c[i][j]);
        assert!(m.symmetric_eigenvalues().min() > -1e-12);
        assert!(t.c11() <= cell.volume_fraction() * BASE_E / (1.0 - BASE_NU * BASE_NU) + 1e-9);
    }
}
