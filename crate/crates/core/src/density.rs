//! Parabolically regularised continuity equation
//! `d_t rho + div(rho u) = eps lap rho` with homogeneous Neumann walls.
//!
//! Diffusion is integrated exactly in the Laplacian eigenbasis; transport
//! is explicit with the integrating-factor midpoint rule, giving a second
//! order scheme that is exact for pure diffusion. The transport term is
//! projected weakly (`-<rho u, grad psi>`), so the mean mode, and with it
//! the total mass, never changes.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::basis::{GalerkinBasis, VelocityCoeffs};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::spectral::{ScalarSpace, ScalarSpectralField};

/// Largest admissible `max|u| dt / h`.
pub const CFL_LIMIT: f64 = 1.0;

fn transport(model: &Model, rho: &DMatrix<f64>, u: &[DMatrix<f64>; 2], t: f64) -> DMatrix<f64> {
    let space = &model.space;
    let rho_grid = space.to_grid(&ScalarSpectralField::from_coeffs(rho.clone()));
    let flux = [rho_grid.component_mul(&u[0]), rho_grid.component_mul(&u[1])];
    let mut out = -space.weak_divergence(&flux);
    if let Some(src) = &model.sources.density {
        out += space.from_grid(&src(t)).coeffs;
    }
    out
}

fn decay(space: &ScalarSpace, eps: f64, s: f64) -> DMatrix<f64> {
    space.eigenvalues().map(|lam| (-eps * lam * s).exp())
}

fn check_cfl(model: &Model, u: &[DMatrix<f64>; 2], dt: f64, t: f64) -> Result<()> {
    let speed = u[0].zip_map(&u[1], |a, b| a.hypot(b)).max();
    let cfl = speed * dt / model.space.geometry().min_spacing();
    if cfl > CFL_LIMIT || !cfl.is_finite() {
        return Err(Error::StepSize {
            t,
            cfl,
            limit: CFL_LIMIT,
        });
    }
    Ok(())
}

/// Advances the density by one step from `t` to `t + dt` with the velocity
/// varying linearly from `u_start` to `u_end`.
pub fn density_step(
    model: &Model,
    rho: &ScalarSpectralField,
    u_start: &VelocityCoeffs,
    u_end: &VelocityCoeffs,
    t: f64,
    dt: f64,
) -> Result<ScalarSpectralField> {
    if !(dt > 0.0) {
        return Err(Error::Argument(format!(
            "time step must be positive, got {dt}"
        )));
    }
    let eps = model.params.eps;
    let basis = &model.basis;
    let space = &model.space;
    let u0 = basis.evaluate_values(u_start);
    let u1 = basis.evaluate_values(u_end);
    check_cfl(model, &u0, dt, t)?;
    check_cfl(model, &u1, dt, t)?;
    let umid = [(&u0[0] + &u1[0]) * 0.5, (&u0[1] + &u1[1]) * 0.5];

    let half = decay(space, eps, 0.5 * dt);
    let full = decay(space, eps, dt);
    let c = &rho.coeffs;
    let k1 = transport(model, c, &u0, t);
    let stage = (c + k1 * (0.5 * dt)).component_mul(&half);
    let k2 = transport(model, &stage, &umid, t + 0.5 * dt);
    let next = c.component_mul(&full) + k2.component_mul(&half) * dt;
    if next.iter().any(|v| !v.is_finite()) {
        return Err(Error::Overflow {
            term: "density transport",
        });
    }
    Ok(ScalarSpectralField::from_coeffs(next))
}

/// First grid point where the density is not strictly positive.
pub fn check_positive(space: &ScalarSpace, rho: &ScalarSpectralField, t: f64) -> Result<()> {
    let values = space.to_grid(rho);
    let grid = space.grid();
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            let v = values[(i, j)];
            if !(v > 0.0) {
                let (x, y) = grid.point(i, j);
                return Err(Error::Positivity { t, x, y, value: v });
            }
        }
    }
    Ok(())
}

/// Density at every node of a uniform time grid driven by the velocity
/// trajectory `w` (one entry per node).
pub fn solve_density_trajectory(
    model: &Model,
    w: &[VelocityCoeffs],
    rho0: &ScalarSpectralField,
    dt: f64,
) -> Result<Vec<ScalarSpectralField>> {
    if w.is_empty() {
        return Err(Error::Argument("velocity trajectory is empty".into()));
    }
    check_positive(&model.space, rho0, 0.0)?;
    let mut out = Vec::with_capacity(w.len());
    out.push(rho0.clone().without_cache());
    for k in 0..w.len() - 1 {
        let t = k as f64 * dt;
        let next = density_step(model, &out[k], &w[k], &w[k + 1], t, dt)?;
        check_positive(&model.space, &next, t + dt)?;
        out.push(next);
    }
    Ok(out)
}

/// `max |div w| + max |grad w|` over the grid, the stand-in for the norm
/// of the Galerkin space in the density envelope.
pub fn velocity_norm_surrogate(basis: &GalerkinBasis, w: &VelocityCoeffs) -> f64 {
    let v = basis.evaluate(w);
    let div = v.divergence().amax();
    let g = &v.grad;
    let mut grad_max = 0.0f64;
    for i in 0..g[0][0].len() {
        let frob =
            (g[0][0][i].powi(2) + g[0][1][i].powi(2) + g[1][0][i].powi(2) + g[1][1][i].powi(2))
                .sqrt();
        grad_max = grad_max.max(frob);
    }
    div + grad_max
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeViolation {
    pub node: usize,
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityBoundsReport {
    pub rho_min: f64,
    pub rho_max: f64,
    pub lower_envelope: Vec<f64>,
    pub upper_envelope: Vec<f64>,
    pub norm_surrogate: Vec<f64>,
    pub tolerance: f64,
    pub violated: bool,
    pub first_violation: Option<EnvelopeViolation>,
}

/// Compares every collocation value against
/// `rho_lower exp(-int_0^t ||w||) <= rho <= rho_upper exp(int_0^t ||w||)`.
/// The time integral uses the trapezoidal rule.
pub fn check_density_bounds(
    model: &Model,
    traj: &[ScalarSpectralField],
    times: &[f64],
    rho_lower: f64,
    rho_upper: f64,
    w: &[VelocityCoeffs],
    tolerance: f64,
) -> DensityBoundsReport {
    assert_eq!(
        traj.len(),
        times.len(),
        "density trajectory and time grid differ in length"
    );
    assert_eq!(
        w.len(),
        times.len(),
        "velocity trajectory and time grid differ in length"
    );
    let norms: Vec<f64> = w
        .iter()
        .map(|c| velocity_norm_surrogate(&model.basis, c))
        .collect();
    let mut integral = 0.0;
    let mut lower = Vec::with_capacity(times.len());
    let mut upper = Vec::with_capacity(times.len());
    for k in 0..times.len() {
        if k > 0 {
            integral += 0.5 * (times[k] - times[k - 1]) * (norms[k] + norms[k - 1]);
        }
        lower.push(rho_lower * (-integral).exp());
        upper.push(rho_upper * integral.exp());
    }
    let grid = model.space.grid();
    let mut rho_min = f64::INFINITY;
    let mut rho_max = f64::NEG_INFINITY;
    let mut first_violation = None;
    for (k, rho) in traj.iter().enumerate() {
        let values = match rho.grid_values() {
            Some(v) => v.clone(),
            None => model.space.to_grid(rho),
        };
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let v = values[(i, j)];
                rho_min = rho_min.min(v);
                rho_max = rho_max.max(v);
                let out = !(v >= lower[k] - tolerance && v <= upper[k] + tolerance);
                if out && first_violation.is_none() {
                    let (x, y) = grid.point(i, j);
                    first_violation = Some(EnvelopeViolation {
                        node: k,
                        t: times[k],
                        x,
                        y,
                        value: v,
                    });
                }
            }
        }
    }
    DensityBoundsReport {
        rho_min,
        rho_max,
        lower_envelope: lower,
        upper_envelope: upper,
        norm_surrogate: norms,
        tolerance,
        violated: first_violation.is_some(),
        first_violation,
    }
}
