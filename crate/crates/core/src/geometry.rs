//! The x-periodic channel `[0, Lx) x (0, H)` and its tensor quadrature grid.
//!
//! The boundary consists of the two walls `y = 0` (outward normal `(0, -1)`)
//! and `y = H` (outward normal `(0, 1)`). The x-direction is sampled
//! uniformly, the y-direction with Gauss–Legendre nodes.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{self, Rule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Wall {
    Bottom,
    Top,
}

impl Wall {
    pub const BOTH: [Wall; 2] = [Wall::Bottom, Wall::Top];

    /// y-component of the outward unit normal.
    pub fn normal_y(self) -> f64 {
        match self {
            Wall::Bottom => -1.0,
            Wall::Top => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Wall::Bottom => "bottom",
            Wall::Top => "top",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub lx: f64,
    pub h: f64,
    pub quad_x: usize,
    pub quad_y: usize,
}

impl Geometry {
    pub fn new(lx: f64, h: f64, quad_x: usize, quad_y: usize) -> Result<Self> {
        if !(lx > 0.0 && lx.is_finite()) || !(h > 0.0 && h.is_finite()) {
            return Err(Error::Argument(format!(
                "channel extents must be positive, got Lx={lx}, H={h}"
            )));
        }
        if quad_x == 0 || quad_y == 0 {
            return Err(Error::Argument(
                "quadrature resolution must be positive".into(),
            ));
        }
        Ok(Self {
            lx,
            h,
            quad_x,
            quad_y,
        })
    }

    /// Checks the dealiasing margin against the highest x wavenumber and y
    /// mode index carried by any field on this grid.
    pub fn check_margin(&self, max_kx: usize, max_my: usize) -> Result<()> {
        let need_x = 2 * max_kx;
        let need_y = 2 * max_my;
        if self.quad_x < need_x.max(1) {
            return Err(Error::Resolution {
                axis: "quad_x",
                got: self.quad_x,
                need: need_x,
            });
        }
        if self.quad_y < need_y.max(1) {
            return Err(Error::Resolution {
                axis: "quad_y",
                got: self.quad_y,
                need: need_y,
            });
        }
        Ok(())
    }

    pub fn wall_y(&self, wall: Wall) -> f64 {
        match wall {
            Wall::Bottom => 0.0,
            Wall::Top => self.h,
        }
    }

    pub fn area(&self) -> f64 {
        self.lx * self.h
    }

    /// Smallest grid spacing, used for the CFL check.
    pub fn min_spacing(&self) -> f64 {
        (self.lx / self.quad_x as f64).min(self.h / self.quad_y as f64)
    }

    pub fn grid(&self) -> Grid {
        Grid::new(self)
    }

    /// Wavenumber `2 pi k / Lx`.
    pub fn kx(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.lx
    }

    /// Wavenumber `m pi / H`.
    pub fn ky(&self, m: usize) -> f64 {
        PI * m as f64 / self.h
    }
}

/// Tensor quadrature grid. Grid fields are `nx x ny` matrices with
/// entry `(i, j)` at `(x_i, y_j)`.
#[derive(Debug, Clone)]
pub struct Grid {
    pub x: Rule,
    pub y: Rule,
    /// Product weights `wx_i * wy_j`.
    pub weights: DMatrix<f64>,
}

impl Grid {
    pub fn new(geometry: &Geometry) -> Self {
        let x = quadrature::periodic(geometry.quad_x, geometry.lx);
        let y = quadrature::gauss_legendre(geometry.quad_y, 0.0, geometry.h);
        let weights = DMatrix::from_fn(x.len(), y.len(), |i, j| x.weights[i] * y.weights[j]);
        Self { x, y, weights }
    }

    pub fn nx(&self) -> usize {
        self.x.len()
    }

    pub fn ny(&self) -> usize {
        self.y.len()
    }

    pub fn zeros(&self) -> DMatrix<f64> {
        DMatrix::zeros(self.nx(), self.ny())
    }

    pub fn from_fn(&self, f: impl Fn(f64, f64) -> f64) -> DMatrix<f64> {
        DMatrix::from_fn(self.nx(), self.ny(), |i, j| {
            f(self.x.nodes[i], self.y.nodes[j])
        })
    }

    pub fn integrate(&self, field: &DMatrix<f64>) -> f64 {
        self.weights.component_mul(field).sum()
    }

    /// Applies the quadrature weights entrywise.
    pub fn weighted(&self, field: &DMatrix<f64>) -> DMatrix<f64> {
        self.weights.component_mul(field)
    }

    pub fn l2_norm(&self, field: &DMatrix<f64>) -> f64 {
        self.integrate(&field.map(|v| v * v)).sqrt()
    }

    pub fn point(&self, i: usize, j: usize) -> (f64, f64) {
        (self.x.nodes[i], self.y.nodes[j])
    }
}
