//! Numerical certification of the identities and inequalities satisfied by
//! computed trajectories.

mod battery;
mod complementarity;
mod continuity;
mod initial;
mod ledger;
mod report;
mod weak;

pub use battery::{TestClass, TestFunction, TestFunctionBattery};
pub use complementarity::{boundary_gap, complementarity_report, BoundaryGap, WallComplementarity};
pub use continuity::{continuity_residual, renormalized_residual, Renormalization};
pub use initial::initial_condition_check;
pub use ledger::{energy_ledger, EnergyLedger};
pub use report::{Comparison, ResidualReport};
pub use weak::{alt_momentum_residual, weak_inequality_check, WeakForm};

use nalgebra::DMatrix;

use crate::basis::VelocityGrid;
use crate::fixed_point::Trajectory;
use crate::model::Model;
use crate::momentum::DensityGrid;

/// Velocity, density and pressure at one node on the quadrature grid.
pub(crate) struct NodeFields {
    pub vel: VelocityGrid,
    pub rho: DensityGrid,
    pub lap: DMatrix<f64>,
}

impl NodeFields {
    pub fn new(model: &Model, traj: &Trajectory, k: usize) -> Self {
        let [value, dx, dy, lap] = model.space.to_grid_with_derivatives(&traj.rho[k]);
        Self {
            vel: model.basis.evaluate(&traj.u[k]),
            rho: DensityGrid {
                value,
                grad: [dx, dy],
            },
            lap,
        }
    }
}

/// Cumulative trapezoidal integral of samples on `times`.
pub(crate) fn cumulative_trapezoid(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    for k in 0..values.len() {
        if k > 0 {
            acc += 0.5 * (times[k] - times[k - 1]) * (values[k] + values[k - 1]);
        }
        out.push(acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{GalerkinBasis, InteriorModes, VelocityCoeffs};
    use crate::density::solve_density_trajectory;
    use crate::fixed_point::{fixed_point_solve, SolverOptions};
    use crate::geometry::Geometry;
    use crate::params::{FluidParams, Sources};
    use crate::spectral::ScalarSpace;
    use std::f64::consts::PI;

    fn model(params: FluidParams) -> Model {
        let g = Geometry::new(1.0, 1.0, 12, 16).unwrap();
        let basis = GalerkinBasis::new(&g, 1, 3, InteriorModes::Sine).unwrap();
        let space = ScalarSpace::new(&g, 3, 6).unwrap();
        Model::new(basis, space, params, Sources::none()).unwrap()
    }

    fn zero_run(m: &Model, steps: usize) -> Trajectory {
        let z = VelocityCoeffs::zeros(m.basis.dim());
        fixed_point_solve(
            m,
            &m.space.constant(1.2),
            &z,
            0.1,
            0.1 / steps as f64,
            &SolverOptions::default(),
        )
        .unwrap()
        .trajectory
    }

    /// Density-only run with the velocity held at zero.
    fn diffusion_run(m: &Model, steps: usize, t_end: f64) -> Trajectory {
        let grid = m.space.grid().clone();
        let rho0 = m
            .space
            .from_grid(&grid.from_fn(|x, y| 1.0 + 0.3 * (2.0 * PI * x).cos() * (PI * y).cos()));
        let dt = t_end / steps as f64;
        let u = vec![VelocityCoeffs::zeros(m.basis.dim()); steps + 1];
        let rho = solve_density_trajectory(m, &u, &rho0, dt).unwrap();
        let times = (0..=steps).map(|k| k as f64 * dt).collect();
        Trajectory {
            times,
            rho,
            u,
            params: m.params.clone(),
            provenance: String::new(),
        }
    }

    #[test]
    fn zero_solution_has_vanishing_residuals() {
        let m = model(FluidParams::default());
        let traj = zero_run(&m, 20);
        let led = energy_ledger(&m, &traj);
        for k in 0..traj.len() {
            assert!(led.kinetic[k].abs() <= 1e-20);
            assert!(led.dissipation[k].abs() <= 1e-20);
            assert!(led.boundary[k].abs() <= 1e-20);
            assert!(led.work[k].abs() <= 1e-20);
            assert!(led.residual[k].abs() <= 1e-12);
        }
        assert!(continuity_residual(&m, &traj, 1e-12).unwrap().value <= 1e-12);
        for z in [Renormalization::Square, Renormalization::EntropyLike] {
            let r = renormalized_residual(&m, &traj, z, 1e-12, 1e-12).unwrap();
            assert!(r[0].value.abs() <= 1e-12, "{:?}", r[0]);
        }
        let battery = TestFunctionBattery::generate(&m.basis, 0.1, 5, 5, 3).unwrap();
        let inner: Vec<_> = battery.of_class(TestClass::Interior).cloned().collect();
        for r in alt_momentum_residual(&m, &traj, &led, &inner, 1e-12).unwrap() {
            assert!(r.value <= 1e-12);
        }
        for c in complementarity_report(&m, &traj).unwrap() {
            assert!(c.defect <= 1e-20);
            assert!(c.traction_excess <= 0.0);
        }
        let q = [m.basis.grid().zeros(), m.basis.grid().zeros()];
        let reports =
            initial_condition_check(&m, &traj, &q, &traj.rho[0].clone(), &battery, 1e-12).unwrap();
        assert!(reports.iter().all(|r| r.pass && r.value <= 1e-12));
    }

    #[test]
    fn zero_test_field_gives_energy_surplus() {
        let m = model(FluidParams::default());
        let traj = zero_run(&m, 20);
        let led = energy_ledger(&m, &traj);
        let form = WeakForm::new(&m, &traj, &led).unwrap();
        let z = VelocityCoeffs::zeros(m.basis.dim());
        let value = form
            .combined_lhs(&m, 0.1, false, |_| (z.clone(), z.clone()))
            .unwrap();
        // With u = 0 only the wall term survives: -int int g j_delta(0) = -(delta/2) int int g,
        // and the zero field contributes +int int g j_delta(0).
        assert!(value.abs() <= 1e-14);
        let limit = form
            .combined_lhs(&m, 0.1, true, |_| (z.clone(), z.clone()))
            .unwrap();
        assert!(limit.abs() <= 1e-14);
    }

    #[test]
    fn velocity_as_test_field_recovers_energy_balance() {
        let m = model(FluidParams::default());
        let grid = m.basis.grid().clone();
        let rho0 = m
            .space
            .from_grid(&grid.from_fn(|x, y| 1.0 + 0.2 * (2.0 * PI * x).cos() * (PI * y).cos()));
        let ux = grid.from_fn(|x, y| 0.2 * (2.0 * PI * x).sin() * (PI * y).cos());
        let uy = grid.from_fn(|x, y| 0.1 * (2.0 * PI * x).cos() * (PI * y).sin());
        let u0 = m.basis.project_l2(&[ux, uy]).unwrap();
        let traj = fixed_point_solve(&m, &rho0, &u0, 0.1, 1e-3, &SolverOptions::default())
            .unwrap()
            .trajectory;
        let led = energy_ledger(&m, &traj);
        let form = WeakForm::new(&m, &traj, &led).unwrap();
        let n = traj.len();
        let dt = traj.dt();
        let phi = |k: usize| {
            let d = if k == 0 {
                (&traj.u[1].c * 4.0 - &traj.u[0].c * 3.0 - &traj.u[2].c) / (2.0 * dt)
            } else if k == n - 1 {
                (&traj.u[n - 1].c * 3.0 - &traj.u[n - 2].c * 4.0 + &traj.u[n - 3].c) / (2.0 * dt)
            } else {
                (&traj.u[k + 1].c - &traj.u[k - 1].c) / (2.0 * dt)
            };
            (traj.u[k].clone(), VelocityCoeffs { c: d })
        };
        let value = form
            .combined_lhs(&m, traj.times[n - 1], false, phi)
            .unwrap();
        assert!(value.abs() <= 1e-5 * led.scale(), "{value}");
    }

    #[test]
    fn pure_diffusion_matches_renormalized_identity() {
        let m = model(FluidParams {
            eps: 0.05,
            ..FluidParams::default()
        });
        let traj = diffusion_run(&m, 200, 0.2);
        for z in [
            Renormalization::Square,
            Renormalization::EntropyLike,
            Renormalization::Power(3.0),
        ] {
            let r = renormalized_residual(&m, &traj, z, 1e-12, 1e-8).unwrap();
            assert!(r[0].pass, "{:?}", r[0]);
            assert!(r[1].pass, "{:?}", r[1]);
        }
        assert!(continuity_residual(&m, &traj, 1e-8).unwrap().pass);
    }

    #[test]
    fn renormalization_family_is_enforced() {
        assert!(Renormalization::Power(0.5).validate().is_err());
        assert!(Renormalization::Power(f64::NAN).validate().is_err());
        assert!(Renormalization::Power(1.0).validate().is_ok());
        let m = model(FluidParams::default());
        let traj = zero_run(&m, 10);
        assert!(renormalized_residual(&m, &traj, Renormalization::Power(0.5), 1e-6, 1e-6).is_err());
        assert_eq!(
            Renormalization::Power(2.0).eval(1.5),
            Renormalization::Square.eval(1.5)
        );
        assert_eq!(Renormalization::EntropyLike.eval(0.0)[0], 0.0);
    }

    #[test]
    fn fast_slip_has_exact_complementarity() {
        let m = model(FluidParams::default());
        let grid = m.basis.grid().clone();
        let u = m
            .basis
            .project_l2(&[grid.from_fn(|_, _| 0.8), grid.zeros()])
            .unwrap();
        let n = 6;
        let traj = Trajectory {
            times: (0..n).map(|k| k as f64 * 0.01).collect(),
            rho: vec![m.space.constant(1.0); n],
            u: vec![u; n],
            params: m.params.clone(),
            provenance: String::new(),
        };
        for c in complementarity_report(&m, &traj).unwrap() {
            assert!(c.defect <= 1e-12, "{c:?}");
            assert!(c.traction_excess.abs() <= 1e-12);
            assert!(c.reports().iter().all(|r| r.pass));
        }
    }

    #[test]
    fn alt_residual_rejects_zero_normal_fields() {
        let m = model(FluidParams::default());
        let traj = zero_run(&m, 10);
        let led = energy_ledger(&m, &traj);
        let battery = TestFunctionBattery::generate(&m.basis, 0.1, 3, 0, 1).unwrap();
        assert!(alt_momentum_residual(&m, &traj, &led, &battery.members, 1e-6).is_err());
    }

    #[test]
    fn battery_is_seeded_and_admissible() {
        let m = model(FluidParams::default());
        let a = TestFunctionBattery::generate(&m.basis, 0.5, 30, 20, 11).unwrap();
        let b = TestFunctionBattery::generate(&m.basis, 0.5, 30, 20, 11).unwrap();
        assert_eq!(a, b);
        a.check(&m.basis, 1e-12).unwrap();
        for f in &a.members {
            assert!(f.t1 - f.t0 >= 0.1 - 1e-12);
            assert_eq!(f.bump(f.t0), (0.0, 0.0));
            assert!((f.bump(0.5 * (f.t0 + f.t1)).0 - 1.0).abs() < 1e-15);
        }
        let c = TestFunctionBattery::generate(&m.basis, 0.5, 30, 20, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn cumulative_trapezoid_is_exact_for_lines() {
        let t = [0.0, 0.5, 1.5, 2.0];
        let v: Vec<f64> = t.iter().map(|x| 2.0 * x + 1.0).collect();
        let out = cumulative_trapezoid(&t, &v);
        for (x, c) in t.iter().zip(out) {
            assert!((c - (x * x + x)).abs() < 1e-14);
        }
    }
}
