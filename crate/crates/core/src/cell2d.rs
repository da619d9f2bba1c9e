//! Periodic binary 2D unit cells.

use serde::{Deserialize, Serialize};

use crate::topology::{label_periodic_2d, Conn2};

/// A periodic binary pixel grid, `true` = solid, stored row-major with x
/// fastest (`x + width * y`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitCell2D {
    pub width: usize,
    pub height: usize,
    pub solid: Vec<bool>,
    /// Homogenized `(C11, C12, C22, C33)` in base-material units, when known.
    pub properties: Option<Vec<f64>>,
}

impl UnitCell2D {
    pub fn new(width: usize, height: usize, solid: Vec<bool>) -> Self {
        assert_eq!(solid.len(), width * height, "solid mask is not width*height");
        Self {
            width,
            height,
            solid,
            properties: None,
        }
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut solid = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                solid.push(f(x, y));
            }
        }
        Self::new(width, height, solid)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.solid[x + self.width * y]
    }

    pub fn solid_count(&self) -> usize {
        self.solid.iter().filter(|&&s| s).count()
    }

    pub fn volume_fraction(&self) -> f64 {
        self.solid_count() as f64 / self.solid.len() as f64
    }

    /// Number of 4-connected periodic solid components.
    pub fn solid_components(&self) -> usize {
        label_periodic_2d(&self.solid, self.width, self.height, Conn2::Four).count()
    }

    pub fn column(&self, x: usize) -> impl Iterator<Item = bool> + '_ {
        (0..self.height).map(move |y| self.get(x, y))
    }

    pub fn row(&self, y: usize) -> impl Iterator<Item = bool> + '_ {
        (0..self.width).map(move |x| self.get(x, y))
    }
}
