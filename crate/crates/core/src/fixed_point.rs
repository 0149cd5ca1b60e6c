//! Coupled density-velocity solution as a fixed point of
//! `w -> u(w)`, where `u(w)` solves the linearised momentum system with the
//! density `rho(w)` transported by `w`.

use serde::{Deserialize, Serialize};

use crate::basis::VelocityCoeffs;
use crate::density::{check_positive, density_step, solve_density_trajectory};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::momentum::{heun_step, linearized_solve, Node};
use crate::params::FluidParams;
use crate::spectral::ScalarSpectralField;

/// Time-indexed solution pair on a uniform grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub rho: Vec<ScalarSpectralField>,
    pub u: Vec<VelocityCoeffs>,
    pub params: FluidParams,
    /// Hash of the configuration that produced the run.
    pub provenance: String,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dt(&self) -> f64 {
        if self.times.len() < 2 {
            0.0
        } else {
            self.times[1] - self.times[0]
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rho.len() != self.times.len() || self.u.len() != self.times.len() {
            return Err(Error::Argument("trajectory fields differ in length".into()));
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Argument(
                "trajectory times must be strictly increasing".into(),
            ));
        }
        if self.u.iter().any(|c| !c.is_finite()) {
            return Err(Error::Argument(
                "trajectory has non-finite velocity coefficients".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// Picard iteration on whole trajectories.
    #[default]
    Trajectory,
    /// Picard iteration inside each time step.
    StepLocal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol_fp: f64,
    pub max_iter: usize,
    pub damping: f64,
    pub coupling: Coupling,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_fp: 1e-12,
            max_iter: 50,
            damping: 0.7,
            coupling: Coupling::Trajectory,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_fp > 0.0) {
            return Err(Error::Config(format!(
                "tol_fp > 0 violated (tol_fp = {})",
                self.tol_fp
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter >= 1 violated".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Config(format!(
                "damping in (0, 1] violated (damping = {})",
                self.damping
            )));
        }
        Ok(())
    }
}

/// One Picard sweep. `residual` is `max_t max_k |T(w)_k - w_k|`;
/// `contraction` the ratio to the previous residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub residual: f64,
    pub damping: f64,
    pub max_coeff: f64,
    pub contraction: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct FixedPointSolution {
    pub trajectory: Trajectory,
    pub history: Vec<IterationRecord>,
}

/// Number of steps `K` with `K dt = t_end`.
pub fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    if !(t_end > 0.0 && dt > 0.0) {
        return Err(Error::Config(format!(
            "T_end > 0 and dt > 0 violated (T_end = {t_end}, dt = {dt})"
        )));
    }
    let k = (t_end / dt).round();
    if (k * dt - t_end).abs() > 1e-9 * t_end || k < 1.0 {
        return Err(Error::Config(format!(
            "dt * K = T_end violated for integer K (T_end / dt = {})",
            t_end / dt
        )));
    }
    Ok(k as usize)
}

fn max_change(a: &[VelocityCoeffs], b: &[VelocityCoeffs]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (&x.c - &y.c).amax())
        .fold(0.0, f64::max)
}

/// Solves the coupled system on `[0, t_end]` with step `dt`.
pub fn fixed_point_solve(
    model: &Model,
    rho0: &ScalarSpectralField,
    u0: &VelocityCoeffs,
    t_end: f64,
    dt: f64,
    options: &SolverOptions,
) -> Result<FixedPointSolution> {
    options.validate()?;
    let steps = step_count(t_end, dt)?;
    let dt = t_end / steps as f64;
    if u0.len() != model.basis.dim() {
        return Err(Error::Argument(format!(
            "initial velocity has {} coefficients, basis has {}",
            u0.len(),
            model.basis.dim()
        )));
    }
    check_positive(&model.space, rho0, 0.0)?;
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
    let (rho, u, history) = match options.coupling {
        Coupling::Trajectory => whole_trajectory(model, rho0, u0, steps, dt, options)?,
        Coupling::StepLocal => step_local(model, rho0, u0, steps, dt, options)?,
    };
    let trajectory = Trajectory {
        times,
        rho,
        u,
        params: model.params.clone(),
        provenance: String::new(),
    };
    Ok(FixedPointSolution {
        trajectory,
        history,
    })
}

type Solved = (
    Vec<ScalarSpectralField>,
    Vec<VelocityCoeffs>,
    Vec<IterationRecord>,
);

fn whole_trajectory(
    model: &Model,
    rho0: &ScalarSpectralField,
    u0: &VelocityCoeffs,
    steps: usize,
    dt: f64,
    options: &SolverOptions,
) -> Result<Solved> {
    let theta = options.damping;
    let mut w = vec![u0.clone(); steps + 1];
    let mut history: Vec<IterationRecord> = Vec::new();
    for iter in 1..=options.max_iter {
        let rho = solve_density_trajectory(model, &w, rho0, dt)?;
        let u = linearized_solve(model, &w, &rho, u0, dt)?;
        let residual = max_change(&u, &w);
        let max_coeff = w.iter().chain(&u).map(|c| c.max_abs()).fold(0.0, f64::max);
        let contraction = history
            .last()
            .filter(|r| r.residual > 0.0)
            .map(|r| residual / r.residual);
        history.push(IterationRecord {
            iter,
            residual,
            damping: theta,
            max_coeff,
            contraction,
        });
        if !residual.is_finite() {
            break;
        }
        if residual <= options.tol_fp {
            return Ok((rho, u, history));
        }
        for (wk, uk) in w.iter_mut().zip(&u) {
            wk.c = &wk.c * (1.0 - theta) + &uk.c * theta;
        }
    }
    let residual = history.last().map_or(f64::NAN, |r| r.residual);
    Err(Error::NonConvergence {
        iterations: options.max_iter,
        residual,
    })
}

fn step_local(
    model: &Model,
    rho0: &ScalarSpectralField,
    u0: &VelocityCoeffs,
    steps: usize,
    dt: f64,
    options: &SolverOptions,
) -> Result<Solved> {
    let theta = options.damping;
    let mut rho = vec![rho0.clone().without_cache()];
    let mut u = vec![u0.clone()];
    let mut worst = IterationRecord {
        iter: 0,
        residual: 0.0,
        damping: theta,
        max_coeff: u0.max_abs(),
        contraction: None,
    };
    let mut current = Node::new(model, u0, rho0, 0.0)?;
    for k in 0..steps {
        let t = k as f64 * dt;
        let mut w = u[k].clone();
        let mut last: Option<f64> = None;
        let mut done = None;
        for iter in 1..=options.max_iter {
            let r = density_step(model, &rho[k], &u[k], &w, t, dt)?;
            check_positive(&model.space, &r, t + dt)?;
            let next = Node::new(model, &w, &r, t + dt)?;
            let c = heun_step(model, &current, &next, &u[k], t, dt)?;
            let residual = (&c.c - &w.c).amax();
            if let Some(prev) = last.filter(|p| *p > 0.0) {
                worst.contraction = Some(
                    worst
                        .contraction
                        .map_or(residual / prev, |q: f64| q.max(residual / prev)),
                );
            }
            last = Some(residual);
            worst.max_coeff = worst.max_coeff.max(c.max_abs()).max(w.max_abs());
            if residual <= options.tol_fp {
                done = Some((iter, residual, r, c, next));
                break;
            }
            if !residual.is_finite() {
                break;
            }
            w.c = &w.c * (1.0 - theta) + &c.c * theta;
        }
        let Some((iter, residual, r, c, next)) = done else {
            return Err(Error::NonConvergence {
                iterations: options.max_iter,
                residual: last.unwrap_or(f64::NAN),
            });
        };
        worst.iter = worst.iter.max(iter);
        worst.residual = worst.residual.max(residual);
        rho.push(r);
        u.push(c);
        current = next;
    }
    Ok((rho, u, vec![worst]))
}

/// Bound on `max |c|` for fixed points of `s T`, `s in [0, 1]`, from the
/// energy balance with all dissipation dropped:
/// `sqrt(E(t)) <= sqrt(E(0)) + t ||f||_inf sqrt(m / 2)` and
/// `|c|^2 <= 2 E / (rho_min lambda_min(gram))`.
pub fn gronwall_bound(
    model: &Model,
    rho0: &ScalarSpectralField,
    u0: &VelocityCoeffs,
    t_end: f64,
    rho_min: f64,
) -> f64 {
    let space = &model.space;
    let grid = space.grid();
    let p = &model.params;
    let rho = space.to_grid(rho0);
    let vel = model.basis.evaluate_values(u0);
    let speed_sq = vel[0].component_mul(&vel[0]) + vel[1].component_mul(&vel[1]);
    let kinetic = 0.5 * grid.integrate(&rho.component_mul(&speed_sq));
    let potential =
        grid.integrate(&rho.map(|r| p.pressure_potential(r) + p.artificial_potential(r)));
    let mass = space.mass(rho0);
    let root = (kinetic + potential).sqrt() + t_end * p.f.sup_norm() * (0.5 * mass).sqrt();
    (2.0 * root * root / (rho_min * model.basis.gram_min_eigenvalue())).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_velocity_basis;
    use crate::geometry::Geometry;
    use crate::params::Sources;
    use crate::spectral::ScalarSpace;

    fn model() -> Model {
        let g = Geometry::new(1.0, 1.0, 8, 8).unwrap();
        let basis = build_velocity_basis(&g, 1, 2).unwrap();
        let space = ScalarSpace::new(&g, 2, 3).unwrap();
        Model::new(basis, space, FluidParams::default(), Sources::none()).unwrap()
    }

    #[test]
    fn step_count_requires_integer_division() {
        assert_eq!(step_count(0.5, 2.5e-4).unwrap(), 2000);
        assert!(step_count(0.5, 0.3).is_err());
        assert!(step_count(0.5, 0.0).is_err());
    }

    #[test]
    fn zero_data_is_a_fixed_point() {
        let m = model();
        let z = VelocityCoeffs::zeros(m.basis.dim());
        for coupling in [Coupling::Trajectory, Coupling::StepLocal] {
            let opts = SolverOptions {
                coupling,
                ..SolverOptions::default()
            };
            let sol = fixed_point_solve(&m, &m.space.constant(1.0), &z, 0.05, 1e-2, &opts).unwrap();
            assert_eq!(sol.history.len(), 1, "{:?}", sol.history);
            assert_eq!(sol.history[0].iter, 1);
            assert!(sol.trajectory.u.iter().all(|c| c.max_abs() < 1e-14));
        }
    }

    #[test]
    fn rejects_bad_options() {
        let m = model();
        let z = VelocityCoeffs::zeros(m.basis.dim());
        let opts = SolverOptions {
            damping: 0.0,
            ..SolverOptions::default()
        };
        assert!(fixed_point_solve(&m, &m.space.constant(1.0), &z, 0.05, 1e-2, &opts).is_err());
    }
}
