//! Galerkin momentum system `d/dt (M_rho c) = N(w, rho, c)`.
//!
//! The load pairs three kinds of integrands with each mode `phi`:
//!
//! * a vector part with `phi`: `rho f - eps (grad u)(grad rho)` plus sources,
//! * a tensor part with `grad phi`: `rho u (x) w - 2 nu D(u) - lambda div u I + p I`,
//! * a wall part: `-g grad j_delta(w_tau) phi_tau` on both walls.
//!
//! The convective tensor `rho u_i w_j` transports `u` by `w`; tested with
//! `phi = u = w` it gives `-1/2 int div(rho u) |u|^2`, which is what the
//! kinetic energy balance needs.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::basis::{GalerkinBasis, VelocityCoeffs, VelocityGrid};
use crate::error::{Error, Result};
use crate::geometry::{Grid, Wall};
use crate::model::Model;
use crate::params::FluidParams;
use crate::spectral::{ScalarSpace, ScalarSpectralField};

/// Density and its gradient on the quadrature grid.
#[derive(Debug, Clone)]
pub struct DensityGrid {
    pub value: DMatrix<f64>,
    pub grad: [DMatrix<f64>; 2],
}

impl DensityGrid {
    pub fn new(space: &ScalarSpace, rho: &ScalarSpectralField) -> Self {
        let [value, dx, dy, _] = space.to_grid_with_derivatives(rho);
        Self {
            value,
            grad: [dx, dy],
        }
    }

    /// Errors with the first nonpositive sample.
    pub fn check_positive(&self, grid: &Grid, t: f64) -> Result<()> {
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let v = self.value[(i, j)];
                if !(v > 0.0) {
                    let (x, y) = grid.point(i, j);
                    return Err(Error::Positivity { t, x, y, value: v });
                }
            }
        }
        Ok(())
    }
}

/// `M_jk = int rho phi_j . phi_k dx`.
pub fn assemble_mass_operator(
    basis: &GalerkinBasis,
    space: &ScalarSpace,
    rho: &ScalarSpectralField,
) -> Result<DMatrix<f64>> {
    let values = space.to_grid(rho);
    mass_from_grid(basis, &values, 0.0)
}

fn mass_from_grid(basis: &GalerkinBasis, rho: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    let grid = basis.grid();
    if let Some(idx) = rho.iter().position(|v| !(*v > 0.0)) {
        let (i, j) = (idx % grid.nx(), idx / grid.nx());
        let (x, y) = grid.point(i, j);
        return Err(Error::Positivity {
            t,
            x,
            y,
            value: rho[idx],
        });
    }
    Ok(basis.weighted_mass(rho))
}

fn finite(term: &'static str, m: &DMatrix<f64>) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Overflow { term })
    }
}

/// Parts of the load that do not depend on the unknown `u`: pressure, body
/// force, wall friction (a function of `w`) and sources.
#[derive(Debug, Clone)]
struct FrozenLoad {
    rho: DensityGrid,
    w: [DMatrix<f64>; 2],
    fixed: DVector<f64>,
}

impl FrozenLoad {
    fn new(model: &Model, w: &VelocityCoeffs, rho: DensityGrid, t: f64) -> Result<Self> {
        let basis = &model.basis;
        let grid = basis.grid();
        let p = &model.params;
        rho.check_positive(grid, t)?;
        let mut pressure = rho.value.map(|r| p.pressure(r));
        finite("pressure", &pressure)?;
        // A constant pressure exerts no load on fields with zero normal
        // trace; removing the mean keeps quadrature error out of that case.
        let mean = grid.integrate(&pressure) / basis.geometry().area();
        pressure.add_scalar_mut(-mean);
        let body = model.body_force();
        let mut vector = [
            rho.value.component_mul(&body[0]),
            rho.value.component_mul(&body[1]),
        ];
        finite("body force", &vector[0])?;
        finite("body force", &vector[1])?;
        if let Some(src) = &model.sources.momentum {
            let s = src(t);
            vector[0] += &s[0];
            vector[1] += &s[1];
            finite("momentum source", &vector[0])?;
            finite("momentum source", &vector[1])?;
        }
        let z = grid.zeros();
        let tensor = [[pressure.clone(), z.clone()], [z, pressure]];
        let mut fixed = basis.test_fields(Some(&vector), Some(&tensor));
        let reg = model.friction();
        for wall in Wall::BOTH {
            let g = p.g_wall(wall);
            let wt = basis.wall_velocity(w, wall);
            let mut s: Vec<f64> = if g > 0.0 {
                wt.iter().map(|&v| -g * reg.grad_1d(v)).collect()
            } else {
                vec![0.0; wt.len()]
            };
            if let Some(src) = &model.sources.wall {
                for (si, extra) in s.iter_mut().zip(src(t, wall)) {
                    *si += extra;
                }
            }
            if s.iter().any(|v| !v.is_finite()) {
                return Err(Error::Overflow {
                    term: "wall friction",
                });
            }
            fixed += basis.test_wall(wall, &s);
        }
        let w = basis.evaluate_values(w);
        Ok(Self { rho, w, fixed })
    }

    /// Full load for the unknown `u`.
    fn apply(&self, model: &Model, u: &VelocityCoeffs) -> Result<DVector<f64>> {
        let basis = &model.basis;
        let p = &model.params;
        let v = basis.evaluate(u);
        let div = v.divergence();
        let rho = &self.rho;
        let mut tensor: [[DMatrix<f64>; 2]; 2] = Default::default();
        for i in 0..2 {
            let ru = rho.value.component_mul(&v.u[i]);
            for j in 0..2 {
                let strain = (&v.grad[i][j] + &v.grad[j][i]) * p.nu;
                tensor[i][j] = ru.component_mul(&self.w[j]) - strain;
            }
        }
        finite("convective and viscous stress", &tensor[0][0])?;
        finite("convective and viscous stress", &tensor[1][1])?;
        if p.lambda != 0.0 {
            for (i, row) in tensor.iter_mut().enumerate() {
                row[i] -= &div * p.lambda;
            }
        }
        let vector = [
            -(v.grad[0][0].component_mul(&rho.grad[0]) + v.grad[0][1].component_mul(&rho.grad[1]))
                * p.eps,
            -(v.grad[1][0].component_mul(&rho.grad[0]) + v.grad[1][1].component_mul(&rho.grad[1]))
                * p.eps,
        ];
        finite("eps correction", &vector[0])?;
        finite("eps correction", &vector[1])?;
        Ok(basis.test_fields(Some(&vector), Some(&tensor)) + &self.fixed)
    }
}

/// Load vector `N(w, rho, u)` at time `t` (the time only matters for
/// sources).
pub fn momentum_rhs(
    model: &Model,
    w: &VelocityCoeffs,
    u: &VelocityCoeffs,
    rho: &ScalarSpectralField,
    t: f64,
) -> Result<DVector<f64>> {
    let frozen = FrozenLoad::new(model, w, DensityGrid::new(&model.space, rho), t)?;
    frozen.apply(model, u)
}

pub(crate) struct Node {
    load: FrozenLoad,
    chol: Cholesky<f64, Dyn>,
    mass: DMatrix<f64>,
}

impl Node {
    pub(crate) fn new(
        model: &Model,
        w: &VelocityCoeffs,
        rho: &ScalarSpectralField,
        t: f64,
    ) -> Result<Self> {
        let grid_rho = DensityGrid::new(&model.space, rho);
        let mass = mass_from_grid(&model.basis, &grid_rho.value, t)?;
        let chol =
            Cholesky::new(mass.clone()).ok_or(Error::Singular("density-weighted mass matrix"))?;
        let load = FrozenLoad::new(model, w, grid_rho, t)?;
        Ok(Self { load, chol, mass })
    }
}

/// Integrates `d/dt (M_rho c) = N(w, rho, c)` with Heun's method in the
/// momentum variable `p = M c`: an explicit predictor followed by one
/// trapezoidal corrector. Returns `c` at every node, starting from `u0`.
pub fn linearized_solve(
    model: &Model,
    w: &[VelocityCoeffs],
    rho: &[ScalarSpectralField],
    u0: &VelocityCoeffs,
    dt: f64,
) -> Result<Vec<VelocityCoeffs>> {
    if w.len() != rho.len() || w.is_empty() {
        return Err(Error::Argument(format!(
            "velocity and density trajectories must share their time nodes ({} vs {})",
            w.len(),
            rho.len()
        )));
    }
    if u0.len() != model.basis.dim() {
        return Err(Error::Argument(format!(
            "initial velocity has {} coefficients, basis has {}",
            u0.len(),
            model.basis.dim()
        )));
    }
    let mut out = Vec::with_capacity(w.len());
    out.push(u0.clone());
    let mut current = Node::new(model, &w[0], &rho[0], 0.0)?;
    for k in 0..w.len() - 1 {
        let t = k as f64 * dt;
        let next = Node::new(model, &w[k + 1], &rho[k + 1], t + dt)?;
        let c = heun_step(model, &current, &next, &out[k], t, dt)?;
        out.push(c);
        current = next;
    }
    Ok(out)
}

/// One predictor-corrector step between two prepared nodes.
pub(crate) fn heun_step(
    model: &Model,
    current: &Node,
    next: &Node,
    c: &VelocityCoeffs,
    t: f64,
    dt: f64,
) -> Result<VelocityCoeffs> {
    let p = &current.mass * &c.c;
    let n0 = current.load.apply(model, c)?;
    let predicted = VelocityCoeffs {
        c: next.chol.solve(&(&p + &n0 * dt)),
    };
    let n1 = next.load.apply(model, &predicted)?;
    let corrected = VelocityCoeffs {
        c: next.chol.solve(&(p + (n0 + n1) * (0.5 * dt))),
    };
    if !corrected.is_finite() {
        return Err(Error::Diverged { t: t + dt });
    }
    Ok(corrected)
}

/// `sigma = 2 nu D(u) + lambda div u I - p(rho) I` at a point.
pub fn stress_at(params: &FluidParams, grad: &[[f64; 2]; 2], rho: f64) -> [[f64; 2]; 2] {
    let div = grad[0][0] + grad[1][1];
    let iso = params.lambda * div - params.pressure(rho);
    let mut s = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            s[i][j] = params.nu * (grad[i][j] + grad[j][i]);
        }
        s[i][i] += iso;
    }
    s
}

/// Tangential and normal components of `sigma n` on one wall.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallTraction {
    pub wall: Wall,
    pub x: Vec<f64>,
    /// `(sigma n)_tau`, the x-component.
    pub tangential: Vec<f64>,
    /// `sigma_n = n . sigma n`.
    pub normal: Vec<f64>,
}

/// Splits `sigma n` for a stress given at a wall point.
pub fn wall_traction_at(sigma: &[[f64; 2]; 2], wall: Wall) -> (f64, f64) {
    let ny = wall.normal_y();
    (sigma[0][1] * ny, sigma[1][1] * ny * ny)
}

#[derive(Debug, Clone)]
pub struct StressField {
    /// `sigma[i][j]` on the quadrature grid.
    pub sigma: [[DMatrix<f64>; 2]; 2],
    pub walls: [WallTraction; 2],
}

/// Cauchy stress on the grid from gridded velocity gradients and density.
pub fn stress_on_grid(
    params: &FluidParams,
    v: &VelocityGrid,
    rho: &DMatrix<f64>,
) -> [[DMatrix<f64>; 2]; 2] {
    let div = v.divergence();
    let iso = div * params.lambda - rho.map(|r| params.pressure(r));
    let mut s: [[DMatrix<f64>; 2]; 2] = Default::default();
    for i in 0..2 {
        for j in 0..2 {
            s[i][j] = (&v.grad[i][j] + &v.grad[j][i]) * params.nu;
        }
        s[i][i] += &iso;
    }
    s
}

/// Stress on the grid plus wall traction traces at the x-nodes, with the
/// wall values evaluated in closed form.
pub fn cauchy_stress(
    model: &Model,
    u: &VelocityCoeffs,
    rho: &ScalarSpectralField,
) -> Result<StressField> {
    let basis = &model.basis;
    let grid = basis.grid();
    let rho_grid = DensityGrid::new(&model.space, rho);
    rho_grid.check_positive(grid, 0.0)?;
    let sigma = stress_on_grid(&model.params, &basis.evaluate(u), &rho_grid.value);
    let walls = Wall::BOTH.map(|wall| {
        let y = basis.geometry().wall_y(wall);
        let mut tangential = Vec::with_capacity(grid.nx());
        let mut normal = Vec::with_capacity(grid.nx());
        for &x in &grid.x.nodes {
            let (_, g) = basis.eval_at(u, x, y);
            let r = model.space.eval_at(rho, x, y)[0];
            let s = stress_at(&model.params, &g, r);
            let (t, n) = wall_traction_at(&s, wall);
            tangential.push(t);
            normal.push(n);
        }
        WallTraction {
            wall,
            x: grid.x.nodes.clone(),
            tangential,
            normal,
        }
    });
    Ok(StressField { sigma, walls })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Geometry;
    use crate::params::{BodyForce, Sources};
    use crate::trig::YFamily;

    fn model(params: FluidParams) -> Model {
        let g = Geometry::new(1.0, 1.0, 12, 16).unwrap();
        let basis = crate::basis::build_velocity_basis(&g, 2, 3).unwrap();
        let space = ScalarSpace::new(&g, 2, 4).unwrap();
        Model::new(basis, space, params, Sources::none()).unwrap()
    }

    #[test]
    fn unit_density_mass_is_gram() {
        let m = model(FluidParams::default());
        let mass = assemble_mass_operator(&m.basis, &m.space, &m.space.constant(1.0)).unwrap();
        assert!((&mass - m.basis.gram()).amax() < 1e-12);
        let mass = assemble_mass_operator(&m.basis, &m.space, &m.space.constant(2.5)).unwrap();
        assert!((&mass - m.basis.gram() * 2.5).amax() < 1e-12);
        assert!(matches!(
            assemble_mass_operator(&m.basis, &m.space, &m.space.constant(-1.0)),
            Err(Error::Positivity { .. })
        ));
    }

    #[test]
    fn constant_state_has_zero_load() {
        let m = model(FluidParams {
            g: [0.0, 0.0],
            ..FluidParams::default()
        });
        let z = VelocityCoeffs::zeros(m.basis.dim());
        let n = momentum_rhs(&m, &z, &z, &m.space.constant(1.3), 0.0).unwrap();
        assert!(n.amax() < 1e-12, "{}", n.amax());
    }

    #[test]
    fn constant_body_force_load() {
        let f = [0.7, -0.2];
        let m = model(FluidParams {
            g: [0.0, 0.0],
            f: BodyForce::Constant(f),
            ..FluidParams::default()
        });
        let z = VelocityCoeffs::zeros(m.basis.dim());
        let n = momentum_rhs(&m, &z, &z, &m.space.constant(1.0), 0.0).unwrap();
        // f . int phi_k in closed form (Lx = H = 1)
        for (k, mode) in m.basis.modes().iter().enumerate() {
            let mean_y = match mode.family {
                YFamily::Cos => (mode.m == 0) as u8 as f64,
                YFamily::Sin => {
                    (1.0 - (-1.0f64).powi(mode.m as i32)) / (mode.m as f64 * std::f64::consts::PI)
                }
            };
            let expect = if mode.k == 0 {
                f[mode.component] * mean_y
            } else {
                0.0
            };
            assert!(
                (n[k] - expect).abs() < 1e-12,
                "mode {k}: {} vs {expect}",
                n[k]
            );
        }
    }

    #[test]
    fn zero_data_stays_zero() {
        let m = model(FluidParams::default());
        let z = VelocityCoeffs::zeros(m.basis.dim());
        let w = vec![z.clone(); 5];
        let rho = vec![m.space.constant(1.0); 5];
        let u = linearized_solve(&m, &w, &rho, &z, 1e-2).unwrap();
        assert!(u.iter().all(|c| c.max_abs() < 1e-14));
    }

    #[test]
    fn stress_examples() {
        let p = FluidParams::default();
        let s = stress_at(&p, &[[0.0; 2]; 2], 1.0);
        assert!((s[0][0] + p.a + p.alpha).abs() < 1e-15 && s[0][1] == 0.0);
        // shear u = (y, 0)
        let s = stress_at(&p, &[[0.0, 1.0], [0.0, 0.0]], 1.0);
        for wall in Wall::BOTH {
            let (t, _) = wall_traction_at(&s, wall);
            assert!((t.abs() - p.nu).abs() < 1e-15);
        }
    }
}
