//! Finite-element solve of an aperiodic assembly of unit cells.
//!
//! The design domain is a `rows x cols` grid of macro-elements; each one is
//! meshed with `m x m` bilinear elements carrying the homogenized tensor of
//! the chosen cell. Nodes are addressed by global grid indices `[ix, iy]`
//! with `ix` in `0..=cols*m` (rightward) and `iy` in `0..=rows*m`
//! (downward, matching pixel rows).

use serde::{Deserialize, Serialize};

use super::banded::{BandMatrix, FactorError};
use super::fe::{element_stiffness, ElementMatrix};
use super::homogenize::ElasticTensor2D;
use super::MechError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Support {
    pub node: [usize; 2],
    /// `"x"`, `"y"` or `"xy"`.
    pub dofs: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Load {
    pub node: [usize; 2],
    #[serde(default)]
    pub fx: f64,
    #[serde(default)]
    pub fy: f64,
}

fn default_subdiv() -> usize {
    4
}

/// Problem file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssemblyProblem {
    /// `[rows, cols]` of macro-elements.
    pub grid: [usize; 2],
    #[serde(default = "default_subdiv")]
    pub element_subdiv: usize,
    pub supports: Vec<Support>,
    pub loads: Vec<Load>,
    /// Target vertical displacement at each node of the horizontal
    /// centerline `iy = rows*m/2`, for `ix = 0..=cols*m`.
    pub target_profile: Vec<f64>,
    /// Half-domain model mirrored about the left edge: adds `u_x = 0` on
    /// every node with `ix = 0`.
    #[serde(default)]
    pub symmetry: bool,
}

impl AssemblyProblem {
    pub fn rows(&self) -> usize {
        self.grid[0]
    }

    pub fn cols(&self) -> usize {
        self.grid[1]
    }

    pub fn cells(&self) -> usize {
        self.rows() * self.cols()
    }

    /// Nodes per side `(nx, ny)`.
    pub fn node_dims(&self) -> (usize, usize) {
        let m = self.element_subdiv;
        (self.cols() * m + 1, self.rows() * m + 1)
    }

    pub fn centerline_len(&self) -> usize {
        self.node_dims().0
    }

    /// Right half of a simply supported beam with a central point load:
    /// mirror symmetry on the left edge, vertical support at the
    /// bottom-right corner, unit downward load at the top-left node.
    pub fn mbb(rows: usize, cols: usize, m: usize, target_profile: Vec<f64>) -> Self {
        Self {
            grid: [rows, cols],
            element_subdiv: m,
            supports: vec![Support {
                node: [cols * m, rows * m],
                dofs: "y".into(),
            }],
            loads: vec![Load {
                node: [0, 0],
                fx: 0.0,
                fy: 1.0,
            }],
            target_profile,
            symmetry: true,
        }
    }

    /// Cantilever clamped on the left edge with a unit downward end load
    /// spread over the right edge as consistent nodal forces.
    pub fn cantilever(rows: usize, cols: usize, m: usize, target_profile: Vec<f64>) -> Self {
        let (nx, ny) = (cols * m + 1, rows * m + 1);
        let share = 1.0 / (ny - 1) as f64;
        Self {
            grid: [rows, cols],
            element_subdiv: m,
            supports: (0..ny)
                .map(|iy| Support {
                    node: [0, iy],
                    dofs: "xy".into(),
                })
                .collect(),
            loads: (0..ny)
                .map(|iy| Load {
                    node: [nx - 1, iy],
                    fx: 0.0,
                    fy: if iy == 0 || iy == ny - 1 { 0.5 * share } else { share },
                })
                .collect(),
            target_profile,
            symmetry: false,
        }
    }

    /// Same problem meshed `factor` times finer; node indices are scaled.
    /// Loads on refined edges are not redistributed.
    pub fn refined(&self, factor: usize) -> Self {
        let scale = |n: [usize; 2]| [n[0] * factor, n[1] * factor];
        Self {
            element_subdiv: self.element_subdiv * factor,
            supports: self
                .supports
                .iter()
                .map(|s| Support {
                    node: scale(s.node),
                    dofs: s.dofs.clone(),
                })
                .collect(),
            loads: self
                .loads
                .iter()
                .map(|l| Load {
                    node: scale(l.node),
                    ..l.clone()
                })
                .collect(),
            target_profile: Vec::new(),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), MechError> {
        let bad = |m: String| Err(MechError::Invalid(m));
        let m = self.element_subdiv;
        if self.rows() == 0 || self.cols() == 0 || m == 0 {
            return bad("grid and element_subdiv must be positive".into());
        }
        if !(self.rows() * m).is_multiple_of(2) {
            return bad("rows * element_subdiv must be even so the centerline lies on nodes".into());
        }
        let (nx, ny) = self.node_dims();
        let inside = |n: [usize; 2]| n[0] < nx && n[1] < ny;
        for s in &self.supports {
            if !inside(s.node) {
                return bad(format!("support node {:?} is outside the {nx}x{ny} node grid", s.node));
            }
            if !matches!(s.dofs.as_str(), "x" | "y" | "xy") {
                return bad(format!("support dofs {:?} must be x, y or xy", s.dofs));
            }
        }
        for l in &self.loads {
            if !inside(l.node) {
                return bad(format!("load node {:?} is outside the {nx}x{ny} node grid", l.node));
            }
            if !l.fx.is_finite() || !l.fy.is_finite() {
                return bad("load components must be finite".into());
            }
        }
        if !self.target_profile.is_empty() && self.target_profile.len() != nx {
            return bad(format!(
                "target_profile has {} values, the centerline has {nx} nodes",
                self.target_profile.len()
            ));
        }
        Ok(())
    }
}

/// Precomputed mesh data for repeated solves with different cell choices.
#[derive(Debug, Clone)]
pub struct AssemblySolver {
    problem: AssemblyProblem,
    element: Vec<ElementMatrix>,
    fixed: Vec<bool>,
    force: Vec<f64>,
    band: usize,
    x_fastest: bool,
}

impl AssemblySolver {
    /// `tensors[i]` is the homogenized tensor of dataset cell `i`.
    pub fn new(problem: &AssemblyProblem, tensors: &[ElasticTensor2D]) -> Result<Self, MechError> {
        problem.validate()?;
        if tensors.is_empty() {
            return Err(MechError::Invalid("dataset is empty".into()));
        }
        let (nx, ny) = problem.node_dims();
        let x_fastest = nx <= ny;
        let mut s = Self {
            problem: problem.clone(),
            element: tensors.iter().map(|t| element_stiffness(&t.c)).collect(),
            fixed: vec![false; 2 * nx * ny],
            force: vec![0.0; 2 * nx * ny],
            band: 0,
            x_fastest,
        };
        s.band = 2 * (if x_fastest { nx } else { ny }) + 3;
        for sup in &problem.supports {
            let id = s.node_id(sup.node[0], sup.node[1]);
            if sup.dofs.contains('x') {
                s.fixed[2 * id] = true;
            }
            if sup.dofs.contains('y') {
                s.fixed[2 * id + 1] = true;
            }
        }
        if problem.symmetry {
            for iy in 0..ny {
                let id = s.node_id(0, iy);
                s.fixed[2 * id] = true;
            }
        }
        for l in &problem.loads {
            let id = s.node_id(l.node[0], l.node[1]);
            s.force[2 * id] += l.fx;
            s.force[2 * id + 1] += l.fy;
        }
        Ok(s)
    }

    pub fn problem(&self) -> &AssemblyProblem {
        &self.problem
    }

    pub fn dataset_len(&self) -> usize {
        self.element.len()
    }

    fn node_id(&self, ix: usize, iy: usize) -> usize {
        let (nx, ny) = self.problem.node_dims();
        if self.x_fastest {
            ix + nx * iy
        } else {
            iy + ny * ix
        }
    }

    /// Full nodal displacement field for cell choices `l` (row-major over
    /// the macro grid), indexed by `2 * node_id + component`.
    fn solve_field(&self, l: &[usize], scale: f64) -> Result<Vec<f64>, MechError> {
        let p = &self.problem;
        if l.len() != p.cells() {
            return Err(MechError::Invalid(format!("assignment has {} genes, grid has {} cells", l.len(), p.cells())));
        }
        if let Some(&g) = l.iter().find(|&&g| g >= self.element.len()) {
            return Err(MechError::Invalid(format!("cell index {g} is outside the dataset")));
        }
        let (nx, ny) = p.node_dims();
        let m = p.element_subdiv;
        let mut k = BandMatrix::zeros(2 * nx * ny, self.band);
        for ey in 0..ny - 1 {
            for ex in 0..nx - 1 {
                let ke = &self.element[l[(ey / m) * p.cols() + ex / m]];
                let nodes = [
                    self.node_id(ex, ey),
                    self.node_id(ex + 1, ey),
                    self.node_id(ex + 1, ey + 1),
                    self.node_id(ex, ey + 1),
                ];
                let mut d = [0usize; 8];
                for (a, &n) in nodes.iter().enumerate() {
                    d[2 * a] = 2 * n;
                    d[2 * a + 1] = 2 * n + 1;
                }
                for r in 0..8 {
                    for c in 0..8 {
                        if d[r] >= d[c] {
                            k.add(d[r], d[c], scale * ke[r][c]);
                        }
                    }
                }
            }
        }
        let mut u = self.force.clone();
        for (dof, &fixed) in self.fixed.iter().enumerate() {
            if fixed {
                k.pin(dof);
                u[dof] = 0.0;
            }
        }
        let chol = k.factor().map_err(|e| match e {
            FactorError::Singular { row } => {
                MechError::Singular(format!("global stiffness is singular at DOF {row}; supports are insufficient"))
            }
            FactorError::NotFinite { row } => MechError::Solver(format!("non-finite pivot at DOF {row}")),
        })?;
        chol.solve_in_place(&mut u);
        if u.iter().any(|v| !v.is_finite()) {
            return Err(MechError::Solver("non-finite displacement".into()));
        }
        Ok(u)
    }

    /// Vertical displacements along the horizontal centerline.
    pub fn centerline(&self, l: &[usize]) -> Result<Vec<f64>, MechError> {
        self.centerline_scaled(l, 1.0)
    }

    /// As [`Self::centerline`] with every tensor multiplied by `scale`.
    pub fn centerline_scaled(&self, l: &[usize], scale: f64) -> Result<Vec<f64>, MechError> {
        let u = self.solve_field(l, scale)?;
        let (nx, _) = self.problem.node_dims();
        let iy = self.problem.rows() * self.problem.element_subdiv / 2;
        Ok((0..nx).map(|ix| u[2 * self.node_id(ix, iy) + 1]).collect())
    }

    /// Vertical displacement of node `[ix, iy]`.
    pub fn displacement_y(&self, l: &[usize], node: [usize; 2]) -> Result<f64, MechError> {
        let u = self.solve_field(l, 1.0)?;
        Ok(u[2 * self.node_id(node[0], node[1]) + 1])
    }
}

/// Mean squared error between two profiles of equal length.
pub fn mse(u: &[f64], target: &[f64]) -> f64 {
    assert_eq!(u.len(), target.len(), "profiles differ in length");
    if u.is_empty() {
        return 0.0;
    }
    u.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / u.len() as f64
}

/// Solves the problem for assignment `l` over a dataset of tensors and
/// returns the centerline displacements.
pub fn assemble_and_solve(
    problem: &AssemblyProblem,
    tensors: &[ElasticTensor2D],
    l: &[usize],
) -> Result<Vec<f64>, MechError> {
    AssemblySolver::new(problem, tensors)?.centerline(l)
}
