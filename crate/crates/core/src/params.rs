//! Physical and regularisation parameters of the approximate system.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Wall;

/// Body force `f`, constant in time.
#[derive(Debug, Clone, Default)]
pub enum BodyForce {
    #[default]
    Zero,
    Constant([f64; 2]),
    /// Samples on the quadrature grid (x and y component).
    Gridded(Box<[DMatrix<f64>; 2]>),
}

impl BodyForce {
    pub fn is_zero(&self) -> bool {
        match self {
            BodyForce::Zero => true,
            BodyForce::Constant(f) => f[0] == 0.0 && f[1] == 0.0,
            BodyForce::Gridded(g) => g[0].amax() == 0.0 && g[1].amax() == 0.0,
        }
    }

    pub fn sup_norm(&self) -> f64 {
        match self {
            BodyForce::Zero => 0.0,
            BodyForce::Constant(f) => f[0].hypot(f[1]),
            BodyForce::Gridded(g) => g[0].zip_map(&g[1], |a, b| a.hypot(b)).max(),
        }
    }

    /// Grid samples; `shape` is `(nx, ny)`.
    pub fn on_grid(&self, shape: (usize, usize)) -> [DMatrix<f64>; 2] {
        match self {
            BodyForce::Zero => [
                DMatrix::zeros(shape.0, shape.1),
                DMatrix::zeros(shape.0, shape.1),
            ],
            BodyForce::Constant(f) => [
                DMatrix::from_element(shape.0, shape.1, f[0]),
                DMatrix::from_element(shape.0, shape.1, f[1]),
            ],
            BodyForce::Gridded(g) => {
                assert_eq!(
                    g[0].shape(),
                    shape,
                    "gridded body force sampled on a different grid"
                );
                (**g).clone()
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct FluidParams {
    pub nu: f64,
    pub lambda: f64,
    pub a: f64,
    pub gamma: f64,
    pub beta: f64,
    pub alpha: f64,
    pub eps: f64,
    pub delta: f64,
    /// Slip threshold per wall, `[bottom, top]`.
    pub g: [f64; 2],
    pub f: BodyForce,
}

/// Scalar part of [`FluidParams`] for archives and reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamScalars {
    pub nu: f64,
    pub lambda: f64,
    pub a: f64,
    pub gamma: f64,
    pub beta: f64,
    pub alpha: f64,
    pub eps: f64,
    pub delta: f64,
    pub g_bottom: f64,
    pub g_top: f64,
}

impl Default for FluidParams {
    fn default() -> Self {
        Self {
            nu: 0.1,
            lambda: 0.0,
            a: 1.0,
            gamma: 5.0 / 3.0,
            beta: 4.5,
            alpha: 1e-3,
            eps: 1e-2,
            delta: 5e-2,
            g: [0.1, 0.1],
            f: BodyForce::Zero,
        }
    }
}

impl FluidParams {
    /// Enforces the standing assumptions; the message names the violated
    /// condition.
    pub fn validate(&self) -> Result<()> {
        let scalars = [
            ("nu", self.nu),
            ("lambda", self.lambda),
            ("a", self.a),
            ("gamma", self.gamma),
            ("beta", self.beta),
            ("alpha", self.alpha),
            ("eps", self.eps),
            ("delta", self.delta),
            ("g_bottom", self.g[0]),
            ("g_top", self.g[1]),
        ];
        for (name, v) in scalars {
            if !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite")));
            }
        }
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(what.to_string()))
            }
        };
        check(
            self.nu > 0.0,
            &format!("nu > 0 violated (nu = {})", self.nu),
        )?;
        check(self.a > 0.0, &format!("a > 0 violated (a = {})", self.a))?;
        check(
            self.gamma > 1.5,
            &format!("gamma > 3/2 violated (gamma = {})", self.gamma),
        )?;
        check(
            self.nu + self.lambda >= 0.0,
            &format!(
                "nu + lambda >= 0 violated (nu + lambda = {})",
                self.nu + self.lambda
            ),
        )?;
        check(
            self.beta > self.gamma.max(4.0),
            &format!(
                "beta > max(gamma, 4) violated (beta = {}, gamma = {})",
                self.beta, self.gamma
            ),
        )?;
        check(
            self.alpha > 0.0,
            &format!("alpha > 0 violated (alpha = {})", self.alpha),
        )?;
        check(
            self.eps > 0.0,
            &format!("eps > 0 violated (eps = {})", self.eps),
        )?;
        check(
            self.delta > 0.0,
            &format!("delta > 0 violated (delta = {})", self.delta),
        )?;
        check(
            self.g[0] >= 0.0 && self.g[1] >= 0.0,
            &format!("g >= 0 violated (g = {:?})", self.g),
        )?;
        Ok(())
    }

    pub fn g_wall(&self, wall: Wall) -> f64 {
        match wall {
            Wall::Bottom => self.g[0],
            Wall::Top => self.g[1],
        }
    }

    /// `a rho^gamma + alpha rho^beta`.
    pub fn pressure(&self, rho: f64) -> f64 {
        self.a * rho.powf(self.gamma) + self.alpha * rho.powf(self.beta)
    }

    /// `a rho^gamma / (gamma - 1)`.
    pub fn pressure_potential(&self, rho: f64) -> f64 {
        self.a * rho.powf(self.gamma) / (self.gamma - 1.0)
    }

    /// `alpha rho^beta / (beta - 1)`.
    pub fn artificial_potential(&self, rho: f64) -> f64 {
        self.alpha * rho.powf(self.beta) / (self.beta - 1.0)
    }

    /// Second derivative of the total potential:
    /// `a gamma rho^(gamma-2) + alpha beta rho^(beta-2)`.
    pub fn potential_curvature(&self, rho: f64) -> f64 {
        self.a * self.gamma * rho.powf(self.gamma - 2.0)
            + self.alpha * self.beta * rho.powf(self.beta - 2.0)
    }

    pub fn scalars(&self) -> ParamScalars {
        ParamScalars {
            nu: self.nu,
            lambda: self.lambda,
            a: self.a,
            gamma: self.gamma,
            beta: self.beta,
            alpha: self.alpha,
            eps: self.eps,
            delta: self.delta,
            g_bottom: self.g[0],
            g_top: self.g[1],
        }
    }
}

pub type GridSource = Arc<dyn Fn(f64) -> [DMatrix<f64>; 2] + Send + Sync>;
pub type ScalarSource = Arc<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>;
pub type WallSource = Arc<dyn Fn(f64, Wall) -> Vec<f64> + Send + Sync>;

/// Additional time-dependent forcing used by manufactured-solution studies.
/// Absent in ordinary runs.
#[derive(Clone, Default)]
pub struct Sources {
    /// Momentum source on the grid, added as `int F . phi` (not weighted
    /// by the density).
    pub momentum: Option<GridSource>,
    /// Tangential wall traction at the grid x-nodes, added as
    /// `int_wall s phi_x`.
    pub wall: Option<WallSource>,
    /// Continuity source on the grid.
    pub density: Option<ScalarSource>,
}

impl Sources {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.momentum.is_none() && self.wall.is_none() && self.density.is_none()
    }
}

impl fmt::Debug for Sources {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Sources")
            .field("momentum", &self.momentum.is_some())
            .field("wall", &self.wall.is_some())
            .field("density", &self.density.is_some())
            .finish()
    }
}
