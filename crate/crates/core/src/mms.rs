//! Manufactured solutions: a prescribed analytic pair `(rho*, u*)` is
//! turned into an exact solution of the regularised system by adding the
//! momentum, wall and continuity residuals it leaves as sources.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::diagnostics::ResidualReport;
use crate::error::{Error, Result};
use crate::expr::{Expr, Var};
use crate::fixed_point::{fixed_point_solve, SolverOptions, Trajectory};
use crate::friction::FrictionReg;
use crate::geometry::{Geometry, Grid, Wall};
use crate::model::Model;
use crate::params::{FluidParams, Sources};

/// Analytic density and velocity, as expressions in `x`, `y`, `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ManufacturedSolution {
    pub rho: Expr,
    pub u: [Expr; 2],
}

/// Value and first and second partial derivatives of one expression.
#[derive(Debug, Clone)]
struct Jet {
    v: Expr,
    t: Expr,
    x: Expr,
    y: Expr,
    xx: Expr,
    yy: Expr,
    xy: Expr,
}

impl Jet {
    fn new(e: &Expr) -> Self {
        let x = e.diff(Var::X);
        let y = e.diff(Var::Y);
        Self {
            v: e.clone(),
            t: e.diff(Var::T),
            xx: x.diff(Var::X),
            yy: y.diff(Var::Y),
            xy: x.diff(Var::Y),
            x,
            y,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Sample {
    v: f64,
    t: f64,
    g: [f64; 2],
    xx: f64,
    yy: f64,
    xy: f64,
}

impl Sample {
    fn at(j: &Jet, x: f64, y: f64, t: f64) -> Self {
        Self {
            v: j.v.eval(x, y, t),
            t: j.t.eval(x, y, t),
            g: [j.x.eval(x, y, t), j.y.eval(x, y, t)],
            xx: j.xx.eval(x, y, t),
            yy: j.yy.eval(x, y, t),
            xy: j.xy.eval(x, y, t),
        }
    }

    fn lap(&self) -> f64 {
        self.xx + self.yy
    }
}

/// Pointwise residuals of the pair at one time.
struct Residuals {
    momentum: [DMatrix<f64>; 2],
    density: DMatrix<f64>,
    wall: [Vec<f64>; 2],
}

struct Forcing {
    rho: Jet,
    u: [Jet; 2],
    params: FluidParams,
    grid: Grid,
    height: f64,
    body: [DMatrix<f64>; 2],
    reg: FrictionReg,
    cache: Mutex<HashMap<u64, Arc<Residuals>>>,
}

impl Forcing {
    fn residuals(&self, t: f64) -> Arc<Residuals> {
        if let Some(hit) = self
            .cache
            .lock()
            .expect("source cache poisoned")
            .get(&t.to_bits())
        {
            return hit.clone();
        }
        let p = &self.params;
        let grid = &self.grid;
        let (nx, ny) = (grid.nx(), grid.ny());
        let mut momentum = [DMatrix::zeros(nx, ny), DMatrix::zeros(nx, ny)];
        let mut density = DMatrix::zeros(nx, ny);
        for j in 0..ny {
            for i in 0..nx {
                let (x, y) = grid.point(i, j);
                let r = Sample::at(&self.rho, x, y, t);
                let u = [
                    Sample::at(&self.u[0], x, y, t),
                    Sample::at(&self.u[1], x, y, t),
                ];
                let div_u = u[0].g[0] + u[1].g[1];
                // d_t rho + div(rho u) - eps lap rho
                let div_ru = r.g[0] * u[0].v + r.g[1] * u[1].v + r.v * div_u;
                density[(i, j)] = r.t + div_ru - p.eps * r.lap();
                let grad_div = [u[0].xx + u[1].xy, u[0].xy + u[1].yy];
                let dp = p.a * p.gamma * r.v.powf(p.gamma - 1.0)
                    + p.alpha * p.beta * r.v.powf(p.beta - 1.0);
                for c in 0..2 {
                    let ui = &u[c];
                    let time = r.t * ui.v + r.v * ui.t;
                    let convective = ui.v * div_ru + r.v * (u[0].v * ui.g[0] + u[1].v * ui.g[1]);
                    let viscous = p.nu * (ui.lap() + grad_div[c]) + p.lambda * grad_div[c];
                    let eps = p.eps * (ui.g[0] * r.g[0] + ui.g[1] * r.g[1]);
                    let body = r.v * self.body[c][(i, j)];
                    momentum[c][(i, j)] = time + convective - viscous + dp * r.g[c] + eps - body;
                }
            }
        }
        let mut wall = [Vec::with_capacity(nx), Vec::with_capacity(nx)];
        for (w, side) in Wall::BOTH.into_iter().enumerate() {
            let y = match side {
                Wall::Bottom => 0.0,
                Wall::Top => self.height,
            };
            let g = p.g_wall(side);
            for &x in &grid.x.nodes {
                let ux = Sample::at(&self.u[0], x, y, t);
                let uy = Sample::at(&self.u[1], x, y, t);
                // (2 nu D(u) n)_x + g grad j_delta(u_x)
                let shear = p.nu * (ux.g[1] + uy.g[0]) * side.normal_y();
                wall[w].push(shear + g * self.reg.grad_1d(ux.v));
            }
        }
        let out = Arc::new(Residuals {
            momentum,
            density,
            wall,
        });
        self.cache
            .lock()
            .expect("source cache poisoned")
            .insert(t.to_bits(), out.clone());
        out
    }
}

impl ManufacturedSolution {
    pub fn parse(rho: &str, ux: &str, uy: &str) -> Result<Self> {
        Ok(Self {
            rho: Expr::parse(rho)?,
            u: [Expr::parse(ux)?, Expr::parse(uy)?],
        })
    }

    /// Checks the admissibility conditions on the quadrature grid at the
    /// given times: `u* . n = 0` and `d rho*/dy = 0` on the walls, `rho* > 0`.
    pub fn check(&self, geometry: &Geometry, times: &[f64]) -> Result<()> {
        let grid = geometry.grid();
        let h = geometry.wall_y(Wall::Top);
        let drho = self.rho.diff(Var::Y);
        for &t in times {
            for &x in &grid.x.nodes {
                for y in [0.0, h] {
                    let un = self.u[1].eval(x, y, t);
                    if un.abs() > 1e-12 {
                        return Err(Error::Argument(format!("manufactured velocity has normal trace {un:.3e} at (x={x}, y={y}, t={t})")));
                    }
                    let dn = drho.eval(x, y, t);
                    if dn.abs() > 1e-12 {
                        return Err(Error::Argument(format!("manufactured density has normal derivative {dn:.3e} at (x={x}, y={y}, t={t})")));
                    }
                }
            }
            for j in 0..grid.ny() {
                for i in 0..grid.nx() {
                    let (x, y) = grid.point(i, j);
                    let r = self.rho.eval(x, y, t);
                    if !(r > 0.0) {
                        return Err(Error::Argument(format!(
                            "manufactured density {r} not positive at (x={x}, y={y}, t={t})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Sources that make the pair an exact solution for `params`, sampled
    /// on the quadrature grid of `geometry`.
    pub fn sources(&self, params: &FluidParams, geometry: &Geometry) -> Result<Sources> {
        let grid = geometry.grid();
        let forcing = Arc::new(Forcing {
            rho: Jet::new(&self.rho),
            u: [Jet::new(&self.u[0]), Jet::new(&self.u[1])],
            params: params.clone(),
            body: params.f.on_grid((grid.nx(), grid.ny())),
            height: geometry.wall_y(Wall::Top),
            grid,
            reg: FrictionReg::new(params.delta)?,
            cache: Mutex::new(HashMap::new()),
        });
        let (fm, fd, fw) = (forcing.clone(), forcing.clone(), forcing);
        Ok(Sources {
            momentum: Some(Arc::new(move |t| fm.residuals(t).momentum.clone())),
            density: Some(Arc::new(move |t| fd.residuals(t).density.clone())),
            wall: Some(Arc::new(move |t, wall| {
                let w = match wall {
                    Wall::Bottom => 0,
                    Wall::Top => 1,
                };
                fw.residuals(t).wall[w].clone()
            })),
        })
    }
}

/// Result of one manufactured-solution run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MmsOutcome {
    /// `L^2` space-time error of the velocity.
    pub u_error: f64,
    /// `L^2` space-time error of the density.
    pub rho_error: f64,
    pub iterations: usize,
    pub report: ResidualReport,
}

/// Runs the solver on `model` (whose own sources are replaced) with the
/// sources of `solution`, starting from the projections of its initial
/// values, and measures the `L^2(0, t_end; L^2)` errors.
pub fn manufactured_solution_residual(
    model: &Model,
    solution: &ManufacturedSolution,
    t_end: f64,
    dt: f64,
    options: &SolverOptions,
    tolerance: f64,
) -> Result<MmsOutcome> {
    let grid = model.basis.grid().clone();
    let geometry = model.basis.geometry();
    solution.check(geometry, &[0.0, 0.5 * t_end, t_end])?;
    let sources = solution.sources(&model.params, geometry)?;
    let model = Model::new(
        model.basis.clone(),
        model.space.clone(),
        model.params.clone(),
        sources,
    )?;
    let rho0 = model.space.from_grid(&solution.rho.on_grid(&grid, 0.0));
    let u0 = model.basis.project_l2(&[
        solution.u[0].on_grid(&grid, 0.0),
        solution.u[1].on_grid(&grid, 0.0),
    ])?;
    let sol = fixed_point_solve(&model, &rho0, &u0, t_end, dt, options)?;
    let (u_error, rho_error) = trajectory_error(&model, &sol.trajectory, solution);
    let value = u_error.max(rho_error);
    let report = ResidualReport::at_most(
        "mms_error",
        value,
        tolerance,
        format!("L2 space-time errors: velocity {u_error:.3e}, density {rho_error:.3e}"),
    );
    Ok(MmsOutcome {
        u_error,
        rho_error,
        iterations: sol.history.len(),
        report,
    })
}

/// `L^2` space-time distances of the computed fields to the analytic pair.
pub fn trajectory_error(
    model: &Model,
    traj: &Trajectory,
    solution: &ManufacturedSolution,
) -> (f64, f64) {
    let grid = model.basis.grid();
    let mut u_rate = Vec::with_capacity(traj.len());
    let mut rho_rate = Vec::with_capacity(traj.len());
    for k in 0..traj.len() {
        let t = traj.times[k];
        let u = model.basis.evaluate_values(&traj.u[k]);
        let du = [
            &u[0] - solution.u[0].on_grid(grid, t),
            &u[1] - solution.u[1].on_grid(grid, t),
        ];
        u_rate.push(grid.integrate(&(du[0].component_mul(&du[0]) + du[1].component_mul(&du[1]))));
        let dr = model.space.to_grid(&traj.rho[k]) - solution.rho.on_grid(grid, t);
        rho_rate.push(grid.integrate(&dr.component_mul(&dr)));
    }
    let total = |rate: &[f64]| {
        let mut acc = 0.0;
        for k in 1..rate.len() {
            acc += 0.5 * (traj.times[k] - traj.times[k - 1]) * (rate[k] + rate[k - 1]);
        }
        acc.max(0.0).sqrt()
    };
    (total(&u_rate), total(&rho_rate))
}

/// Least-squares slope of `log(err)` against `log(h)`.
pub fn log_log_slope(h: &[f64], err: &[f64]) -> Result<f64> {
    if h.len() != err.len() || h.len() < 2 {
        return Err(Error::Argument(
            "slope fit needs at least two matching samples".into(),
        ));
    }
    if h.iter().chain(err).any(|v| !(*v > 0.0)) {
        return Err(Error::Argument("slope fit needs positive samples".into()));
    }
    let lx: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{GalerkinBasis, InteriorModes};
    use crate::geometry::Geometry;
    use crate::spectral::ScalarSpace;

    fn model(params: FluidParams) -> Model {
        let g = Geometry::new(1.0, 1.0, 12, 16).unwrap();
        let basis = GalerkinBasis::new(&g, 1, 3, InteriorModes::Omit).unwrap();
        let space = ScalarSpace::new(&g, 3, 6).unwrap();
        Model::new(basis, space, params, Sources::none()).unwrap()
    }

    #[test]
    fn constant_state_is_reproduced_exactly() {
        let m = model(FluidParams::default());
        let s = ManufacturedSolution::parse("1.3", "0", "0").unwrap();
        let out =
            manufactured_solution_residual(&m, &s, 0.05, 0.01, &SolverOptions::default(), 1e-12)
                .unwrap();
        assert!(out.u_error < 1e-13 && out.rho_error < 1e-13, "{out:?}");
        assert!(out.report.pass);
    }

    #[test]
    fn diffusion_eigenmode_needs_no_velocity() {
        let m = model(FluidParams::default());
        let s =
            ManufacturedSolution::parse("1 + 0.1*exp(-0.01*pi^2*t)*cos(pi*y)", "0", "0").unwrap();
        let out =
            manufactured_solution_residual(&m, &s, 0.1, 0.01, &SolverOptions::default(), 1e-8)
                .unwrap();
        assert!(out.report.pass, "{out:?}");
    }

    #[test]
    fn inadmissible_pairs_are_rejected() {
        let m = model(FluidParams::default());
        let opts = SolverOptions::default();
        for (r, ux, uy) in [
            ("1", "0", "0.1*cos(pi*y)"),
            ("1 + 0.1*sin(pi*y)", "0", "0"),
            ("cos(pi*y)", "0", "0"),
        ] {
            let s = ManufacturedSolution::parse(r, ux, uy).unwrap();
            assert!(matches!(
                manufactured_solution_residual(&m, &s, 0.05, 0.01, &opts, 1.0),
                Err(Error::Argument(_))
            ));
        }
    }

    #[test]
    fn slope_of_power_law() {
        let h = [0.1, 0.05, 0.025];
        let e: Vec<f64> = h.iter().map(|v| 3.0 * v * v).collect();
        assert!((log_log_slope(&h, &e).unwrap() - 2.0).abs() < 1e-12);
        assert!(log_log_slope(&h[..1], &e[..1]).is_err());
    }
}
