use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::report::ResidualReport;
use super::NodeFields;
use crate::error::{Error, Result};
use crate::fixed_point::Trajectory;
use crate::model::Model;

/// Renormalisation `zeta` from the admissible convex family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "theta")]
pub enum Renormalization {
    /// `r^2`
    Square,
    /// `r ln r`, extended by `0` at `r = 0`.
    EntropyLike,
    /// `r^theta` with `theta >= 1`.
    Power(f64),
}

impl Renormalization {
    /// Rejects members outside the family: `r^theta` is convex with
    /// `|zeta'(r)| <= theta r^(theta - 1)` only for `theta >= 1`.
    pub fn validate(&self) -> Result<()> {
        match *self {
            Renormalization::Power(theta) if !(theta >= 1.0 && theta.is_finite()) => {
                Err(Error::Argument(format!(
                    "r^theta is admissible only for theta >= 1, got {theta}"
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Renormalization::Square => "r^2".into(),
            Renormalization::EntropyLike => "r ln r".into(),
            Renormalization::Power(t) => format!("r^{t}"),
        }
    }

    /// `(zeta, zeta', zeta'')` at `r`.
    pub fn eval(&self, r: f64) -> [f64; 3] {
        match *self {
            Renormalization::Square => [r * r, 2.0 * r, 2.0],
            Renormalization::EntropyLike => {
                if r == 0.0 {
                    [0.0, f64::NEG_INFINITY, f64::INFINITY]
                } else {
                    [r * r.ln(), r.ln() + 1.0, 1.0 / r]
                }
            }
            Renormalization::Power(t) => [
                r.powf(t),
                t * r.powf(t - 1.0),
                t * (t - 1.0) * r.powf(t - 2.0),
            ],
        }
    }
}

/// Weights of the fourth-order five-point difference for `d/dt` at node `k`
/// of a uniform grid, shifted to one side near the ends.
fn stencil(k: usize, n: usize, dt: f64) -> Vec<(usize, f64)> {
    let (j0, w): (usize, [f64; 5]) = if k < 2 {
        (
            0,
            if k == 0 {
                [-25.0 / 12.0, 4.0, -3.0, 4.0 / 3.0, -0.25]
            } else {
                [-0.25, -5.0 / 6.0, 1.5, -0.5, 1.0 / 12.0]
            },
        )
    } else if k + 2 >= n {
        (
            n - 5,
            if k == n - 1 {
                [0.25, -4.0 / 3.0, 3.0, -4.0, 25.0 / 12.0]
            } else {
                [-1.0 / 12.0, 0.5, -1.5, 5.0 / 6.0, 0.25]
            },
        )
    } else {
        (k - 2, [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0])
    };
    w.iter()
        .enumerate()
        .map(|(i, v)| (j0 + i, v / dt))
        .collect()
}

fn check_length(traj: &Trajectory) -> Result<()> {
    traj.validate()?;
    if traj.len() < 5 {
        return Err(Error::Argument(
            "time derivatives need at least five nodes".into(),
        ));
    }
    Ok(())
}

/// Grid samples of `d/dt` of `map(rho)` at node `k`.
fn time_derivative(
    model: &Model,
    traj: &Trajectory,
    k: usize,
    map: impl Fn(f64) -> f64,
) -> DMatrix<f64> {
    let dt = traj.dt();
    let mut out = model.basis.grid().zeros();
    for (j, w) in stencil(k, traj.len(), dt) {
        if w != 0.0 {
            out += model.space.to_grid(&traj.rho[j]).map(&map) * w;
        }
    }
    out
}

/// `L^2` space-time norm of `d_t rho + div(rho u) - eps lap rho` (minus the
/// continuity source, if any). Spatial derivatives are spectral.
pub fn continuity_residual(
    model: &Model,
    traj: &Trajectory,
    tolerance: f64,
) -> Result<ResidualReport> {
    check_length(traj)?;
    let grid = model.basis.grid();
    let eps = model.params.eps;
    let mut rate = Vec::with_capacity(traj.len());
    for k in 0..traj.len() {
        let f = NodeFields::new(model, traj, k);
        let rho_t = time_derivative(model, traj, k, |r| r);
        let u = &f.vel.u;
        let mut c = rho_t
            + u[0].component_mul(&f.rho.grad[0])
            + u[1].component_mul(&f.rho.grad[1])
            + f.rho.value.component_mul(&f.vel.divergence())
            - &f.lap * eps;
        if let Some(src) = &model.sources.density {
            c -= src(traj.times[k]);
        }
        rate.push(grid.integrate(&c.component_mul(&c)));
    }
    let total = super::cumulative_trapezoid(&traj.times, &rate);
    let value = total.last().copied().unwrap_or(0.0).max(0.0).sqrt();
    Ok(ResidualReport::at_most(
        "continuity",
        value,
        tolerance,
        "L2 over space-time",
    ))
}

/// Renormalised continuity defect
/// `R = d_t zeta + div(zeta u) + (zeta' rho - zeta) div u - eps lap zeta`,
/// which should equal `-eps zeta'' |grad rho|^2 <= 0`. Returns two
/// reports: the sign condition (`max R`) and the identity, relative to the
/// largest `eps zeta'' |grad rho|^2`.
pub fn renormalized_residual(
    model: &Model,
    traj: &Trajectory,
    zeta: Renormalization,
    sign_tolerance: f64,
    identity_tolerance: f64,
) -> Result<Vec<ResidualReport>> {
    zeta.validate()?;
    check_length(traj)?;
    let eps = model.params.eps;
    let mut max_r = f64::NEG_INFINITY;
    let mut max_gap = 0.0f64;
    let mut max_defect = 0.0f64;
    for k in 0..traj.len() {
        let f = NodeFields::new(model, traj, k);
        let zeta_t = time_derivative(model, traj, k, |r| zeta.eval(r)[0]);
        let div = f.vel.divergence();
        let u = &f.vel.u;
        let gr = &f.rho.grad;
        for idx in 0..f.rho.value.len() {
            let r = f.rho.value[idx];
            let [z, dz, ddz] = zeta.eval(r);
            let grad_sq = gr[0][idx] * gr[0][idx] + gr[1][idx] * gr[1][idx];
            let transport = dz * (gr[0][idx] * u[0][idx] + gr[1][idx] * u[1][idx]) + z * div[idx];
            let lap_zeta = dz * f.lap[idx] + ddz * grad_sq;
            let big_r = zeta_t[idx] + transport + (dz * r - z) * div[idx] - eps * lap_zeta;
            let defect = eps * ddz * grad_sq;
            max_r = max_r.max(big_r);
            max_gap = max_gap.max((big_r + defect).abs());
            max_defect = max_defect.max(defect.abs());
        }
    }
    let relative = if max_defect > 0.0 {
        max_gap / max_defect
    } else {
        max_gap
    };
    let name = zeta.name();
    Ok(vec![
        ResidualReport::at_most(
            format!("renormalized_sign[{name}]"),
            max_r,
            sign_tolerance,
            "max over space-time of R",
        ),
        ResidualReport::at_most(
            format!("renormalized_identity[{name}]"),
            relative,
            identity_tolerance,
            format!("max |R + eps zeta'' |grad rho|^2| relative to {max_defect:.3e}"),
        ),
    ])
}
