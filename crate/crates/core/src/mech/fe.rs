//! Bilinear quadrilateral plane-stress elements on unit squares.
//!
//! Local nodes are `(0,0), (1,0), (1,1), (0,1)`; element DOFs are ordered
//! `[u1x, u1y, u2x, u2y, u3x, u3y, u4x, u4y]`. The stiffness of a square
//! element does not depend on its size, so one matrix serves every mesh.

pub type Voigt = [[f64; 3]; 3];
pub type ElementMatrix = [[f64; 8]; 8];

/// Local node coordinates.
pub const NODES: [[f64; 2]; 4] = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];

/// Plane-stress constitutive matrix in Voigt form (engineering shear).
pub fn plane_stress(e: f64, nu: f64) -> Voigt {
    let c = e / (1.0 - nu * nu);
    [[c, c * nu, 0.0], [c * nu, c, 0.0], [0.0, 0.0, c * (1.0 - nu) / 2.0]]
}

/// Strain-displacement matrix at local point `(xi, eta)`.
fn strain_matrix(xi: f64, eta: f64) -> [[f64; 8]; 3] {
    // derivatives of N1..N4 = (1-x)(1-y), x(1-y), xy, (1-x)y
    let dx = [-(1.0 - eta), 1.0 - eta, eta, -eta];
    let dy = [-(1.0 - xi), -xi, xi, 1.0 - xi];
    let mut b = [[0.0; 8]; 3];
    for a in 0..4 {
        b[0][2 * a] = dx[a];
        b[1][2 * a + 1] = dy[a];
        b[2][2 * a] = dy[a];
        b[2][2 * a + 1] = dx[a];
    }
    b
}

/// Element stiffness `int B^T D B` by 2x2 Gauss quadrature.
pub fn element_stiffness(d: &Voigt) -> ElementMatrix {
    let g = 0.5 / 3f64.sqrt();
    let mut k = [[0.0; 8]; 8];
    for xi in [0.5 - g, 0.5 + g] {
        for eta in [0.5 - g, 0.5 + g] {
            let b = strain_matrix(xi, eta);
            let mut db = [[0.0; 8]; 3];
            for r in 0..3 {
                for c in 0..8 {
                    db[r][c] = (0..3).map(|s| d[r][s] * b[s][c]).sum();
                }
            }
            for r in 0..8 {
                for c in 0..8 {
                    k[r][c] += 0.25 * (0..3).map(|s| b[s][r] * db[s][c]).sum::<f64>();
                }
            }
        }
    }
    k
}

/// Nodal values of the affine displacement with unit strain `case`
/// (0: eps_xx, 1: eps_yy, 2: gamma_xy) on the local nodes.
pub fn unit_strain_displacements(case: usize) -> [f64; 8] {
    let mut u = [0.0; 8];
    for (a, [x, y]) in NODES.iter().enumerate() {
        let (ux, uy) = match case {
            0 => (*x, 0.0),
            1 => (0.0, *y),
            _ => (0.5 * y, 0.5 * x),
        };
        u[2 * a] = ux;
        u[2 * a + 1] = uy;
    }
    u
}

pub fn quad_form(k: &ElementMatrix, a: &[f64; 8], b: &[f64; 8]) -> f64 {
    let mut s = 0.0;
    for r in 0..8 {
        let mut row = 0.0;
        for c in 0..8 {
            row += k[r][c] * b[c];
        }
        s += a[r] * row;
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_strain_energy_recovers_constitutive_matrix() {
        let d = plane_stress(1.0, 0.3);
        let k = element_stiffness(&d);
        for i in 0..3 {
            for j in 0..3 {
                let e = quad_form(&k, &unit_strain_displacements(i), &unit_strain_displacements(j));
                assert!((e - d[i][j]).abs() < 1e-14, "{i}{j}: {e} vs {}", d[i][j]);
            }
        }
    }

    #[test]
    fn rigid_modes_are_in_the_null_space() {
        let k = element_stiffness(&plane_stress(1.0, 0.3));
        let tx = [1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        let rot = [0.0, 0.0, 0.0, 1.0, -1.0, 1.0, -1.0, 0.0];
        for m in [tx, rot] {
            for r in 0..8 {
                let f: f64 = (0..8).map(|c| k[r][c] * m[c]).sum();
                assert!(f.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn stiffness_is_symmetric() {
        let k = element_stiffness(&[[2.0, 0.5, 0.0], [0.5, 1.0, 0.0], [0.0, 0.0, 0.7]]);
        for r in 0..8 {
            for c in 0..8 {
                assert!((k[r][c] - k[c][r]).abs() < 1e-15);
            }
        }
    }
}
