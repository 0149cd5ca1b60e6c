use serde::{Deserialize, Serialize};

use super::{cumulative_trapezoid, NodeFields};
use crate::fixed_point::Trajectory;
use crate::geometry::Wall;
use crate::model::Model;

/// Energy balance terms per time node. Accumulators integrate in time with
/// the trapezoidal rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub times: Vec<f64>,
    /// `int 1/2 rho |u|^2`
    pub kinetic: Vec<f64>,
    /// `int a rho^gamma / (gamma - 1)`
    pub pressure_potential: Vec<f64>,
    /// `int alpha rho^beta / (beta - 1)`
    pub artificial_potential: Vec<f64>,
    /// `int int 2 nu |D(u)|^2 + lambda (div u)^2`
    pub dissipation: Vec<f64>,
    /// `int int eps (a gamma rho^(gamma-2) + alpha beta rho^(beta-2)) |grad rho|^2`
    pub eps_dissipation: Vec<f64>,
    /// `int int_wall g grad j_delta(u) . u`
    pub boundary: Vec<f64>,
    /// `int int rho f . u`
    pub work: Vec<f64>,
    /// Same boundary accumulator with `j_delta` replaced by `|.|`.
    pub boundary_abs: Vec<f64>,
    /// `int int_wall g`
    pub boundary_weight: Vec<f64>,
    /// `E(t) + dissipation - work - E(0)`
    pub residual: Vec<f64>,
}

impl EnergyLedger {
    pub fn total_energy(&self, k: usize) -> f64 {
        self.kinetic[k] + self.pressure_potential[k] + self.artificial_potential[k]
    }

    /// Scale for relative residuals: the largest total energy along the run.
    pub fn scale(&self) -> f64 {
        (0..self.times.len())
            .map(|k| self.total_energy(k))
            .fold(0.0, f64::max)
    }

    pub fn max_abs_residual(&self) -> f64 {
        self.residual.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    pub fn max_relative_residual(&self) -> f64 {
        let s = self.scale();
        if s > 0.0 {
            self.max_abs_residual() / s
        } else {
            self.max_abs_residual()
        }
    }

    /// Column order of [`EnergyLedger::rows`].
    pub const COLUMNS: [&'static str; 12] = [
        "t",
        "kinetic",
        "pressure_potential",
        "artificial_potential",
        "dissipation",
        "eps_dissipation",
        "boundary",
        "work",
        "boundary_abs",
        "boundary_weight",
        "total_energy",
        "residual",
    ];

    pub fn rows(&self) -> Vec<[f64; 12]> {
        (0..self.times.len())
            .map(|k| {
                [
                    self.times[k],
                    self.kinetic[k],
                    self.pressure_potential[k],
                    self.artificial_potential[k],
                    self.dissipation[k],
                    self.eps_dissipation[k],
                    self.boundary[k],
                    self.work[k],
                    self.boundary_abs[k],
                    self.boundary_weight[k],
                    self.total_energy(k),
                    self.residual[k],
                ]
            })
            .collect()
    }
}

/// Evaluates all terms of the energy balance on a trajectory.
pub fn energy_ledger(model: &Model, traj: &Trajectory) -> EnergyLedger {
    let p = &model.params;
    let grid = model.basis.grid();
    let reg = model.friction();
    let body = model.body_force();
    let n = traj.len();
    let mut kinetic = Vec::with_capacity(n);
    let mut pressure_potential = Vec::with_capacity(n);
    let mut artificial_potential = Vec::with_capacity(n);
    let mut diss_rate = Vec::with_capacity(n);
    let mut eps_rate = Vec::with_capacity(n);
    let mut boundary_rate = Vec::with_capacity(n);
    let mut abs_rate = Vec::with_capacity(n);
    let mut work_rate = Vec::with_capacity(n);
    let lx = model.basis.geometry().lx;
    let weight_rate = vec![(p.g[0] + p.g[1]) * lx; n];
    for k in 0..n {
        let f = NodeFields::new(model, traj, k);
        let rho = &f.rho.value;
        let u = &f.vel.u;
        let speed_sq = u[0].component_mul(&u[0]) + u[1].component_mul(&u[1]);
        kinetic.push(0.5 * grid.integrate(&rho.component_mul(&speed_sq)));
        pressure_potential.push(grid.integrate(&rho.map(|r| p.pressure_potential(r))));
        artificial_potential.push(grid.integrate(&rho.map(|r| p.artificial_potential(r))));
        let div = f.vel.divergence();
        let visc = f.vel.strain_sq() * (2.0 * p.nu) + div.component_mul(&div) * p.lambda;
        diss_rate.push(grid.integrate(&visc));
        let grad_sq = f.rho.grad[0].component_mul(&f.rho.grad[0])
            + f.rho.grad[1].component_mul(&f.rho.grad[1]);
        let curv = rho.map(|r| p.potential_curvature(r));
        eps_rate.push(p.eps * grid.integrate(&curv.component_mul(&grad_sq)));
        let w = rho.component_mul(&(u[0].component_mul(&body[0]) + u[1].component_mul(&body[1])));
        work_rate.push(grid.integrate(&w));
        let mut b = 0.0;
        let mut babs = 0.0;
        for wall in Wall::BOTH {
            let g = p.g_wall(wall);
            let ut = model.basis.wall_velocity(&traj.u[k], wall);
            for (v, wx) in ut.iter().zip(&grid.x.weights) {
                b += g * wx * reg.grad_1d(*v) * v;
                babs += g * wx * v.abs();
            }
        }
        boundary_rate.push(b);
        abs_rate.push(babs);
    }
    let t = &traj.times;
    let dissipation = cumulative_trapezoid(t, &diss_rate);
    let eps_dissipation = cumulative_trapezoid(t, &eps_rate);
    let boundary = cumulative_trapezoid(t, &boundary_rate);
    let boundary_abs = cumulative_trapezoid(t, &abs_rate);
    let boundary_weight = cumulative_trapezoid(t, &weight_rate);
    let work = cumulative_trapezoid(t, &work_rate);
    let e0 = kinetic[0] + pressure_potential[0] + artificial_potential[0];
    let residual = (0..n)
        .map(|k| {
            kinetic[k]
                + pressure_potential[k]
                + artificial_potential[k]
                + dissipation[k]
                + eps_dissipation[k]
                + boundary[k]
                - work[k]
                - e0
        })
        .collect();
    EnergyLedger {
        times: t.clone(),
        kinetic,
        pressure_potential,
        artificial_potential,
        dissipation,
        eps_dissipation,
        boundary,
        work,
        boundary_abs,
        boundary_weight,
        residual,
    }
}
