use serde::{Deserialize, Serialize};

use super::ledger::EnergyLedger;
use super::report::ResidualReport;
use crate::error::Result;
use crate::fixed_point::Trajectory;
use crate::geometry::Wall;
use crate::model::Model;
use crate::momentum::cauchy_stress;

/// Friction law diagnostics on one wall, maximised over the wall nodes and
/// all time nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallComplementarity {
    pub wall: Wall,
    pub g: f64,
    pub delta: f64,
    /// `max |t_delta| - g`, where `t_delta = -g grad j_delta(u_tau)`.
    pub traction_excess: f64,
    /// `max |t_delta u_tau + g |u_tau||`.
    pub defect: f64,
    /// `g delta / 4`.
    pub defect_bound: f64,
    /// `max |(sigma n)_tau - t_delta|` at the final node.
    pub stress_gap: f64,
}

impl WallComplementarity {
    pub fn reports(&self) -> Vec<ResidualReport> {
        let wall = self.wall.name();
        vec![
            ResidualReport::at_most(
                format!("traction_bound[{wall}]"),
                self.traction_excess,
                1e-12,
                "max |t_delta| - g",
            ),
            ResidualReport::at_most(
                format!("complementarity[{wall}]"),
                self.defect,
                self.defect_bound + 1e-12,
                format!("bound g delta / 4; stress gap {:.3e}", self.stress_gap),
            ),
        ]
    }
}

/// Traction bound and complementarity defect on both walls.
pub fn complementarity_report(
    model: &Model,
    traj: &Trajectory,
) -> Result<Vec<WallComplementarity>> {
    traj.validate()?;
    let p = &model.params;
    let reg = model.friction();
    let last = traj.len() - 1;
    let stress = cauchy_stress(model, &traj.u[last], &traj.rho[last])?;
    let mut out = Vec::with_capacity(2);
    for (w, wall) in Wall::BOTH.into_iter().enumerate() {
        let g = p.g_wall(wall);
        let mut excess = f64::NEG_INFINITY;
        let mut defect = 0.0f64;
        for u in &traj.u {
            for v in model.basis.wall_velocity(u, wall) {
                let t = -g * reg.grad_1d(v);
                excess = excess.max(t.abs() - g);
                defect = defect.max((t * v + g * v.abs()).abs());
            }
        }
        let final_wall = model.basis.wall_velocity(&traj.u[last], wall);
        let stress_gap = stress.walls[w]
            .tangential
            .iter()
            .zip(&final_wall)
            .map(|(s, v)| (s + g * reg.grad_1d(*v)).abs())
            .fold(0.0, f64::max);
        out.push(WallComplementarity {
            wall,
            g,
            delta: p.delta,
            traction_excess: excess,
            defect,
            defect_bound: g * p.delta / 4.0,
            stress_gap,
        });
    }
    Ok(out)
}

/// Gap between the regularised and the limit boundary dissipation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryGap {
    pub gap: f64,
    pub bound: f64,
}

impl BoundaryGap {
    pub fn report(&self) -> ResidualReport {
        ResidualReport::at_most(
            "boundary_dissipation_gap",
            self.gap,
            self.bound + 1e-12,
            "bound (delta/4) int int g",
        )
    }
}

/// `|int int g grad j_delta(u) . u - int int g |u||` against `(delta/4) int int g`.
pub fn boundary_gap(model: &Model, ledger: &EnergyLedger) -> BoundaryGap {
    let last = ledger.times.len() - 1;
    BoundaryGap {
        gap: (ledger.boundary[last] - ledger.boundary_abs[last]).abs(),
        bound: 0.25 * model.params.delta * ledger.boundary_weight[last],
    }
}
