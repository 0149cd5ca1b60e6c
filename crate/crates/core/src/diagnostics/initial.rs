use nalgebra::DMatrix;

use super::battery::TestFunctionBattery;
use super::report::ResidualReport;
use crate::error::{Error, Result};
use crate::fixed_point::Trajectory;
use crate::model::Model;
use crate::spectral::ScalarSpectralField;

/// Attainment of the initial data. The density must start from `rho0`
/// coefficient for coefficient. For the spatial part of every battery
/// member the gap `d(t) = int rho u . phi - int q . phi` is extrapolated to
/// `t -> 0` linearly from the first two steps and must agree with `d(0)`;
/// `d(0)` itself is the projection error of `u0 = P_n(q / rho0)` and is
/// reported in the context.
pub fn initial_condition_check(
    model: &Model,
    traj: &Trajectory,
    q: &[DMatrix<f64>; 2],
    rho0: &ScalarSpectralField,
    battery: &TestFunctionBattery,
    tolerance: f64,
) -> Result<Vec<ResidualReport>> {
    traj.validate()?;
    if traj.len() < 3 {
        return Err(Error::Argument(
            "initial-condition check needs at least three nodes".into(),
        ));
    }
    if traj.rho[0].coeffs.shape() != rho0.coeffs.shape() {
        return Err(Error::Argument(
            "initial density has a different spectral shape".into(),
        ));
    }
    let basis = &model.basis;
    let density_gap = (&traj.rho[0].coeffs - &rho0.coeffs).amax();
    let target = basis.test_fields(Some(q), None);
    let momentum = |k: usize| {
        let rho = model.space.to_grid(&traj.rho[k]);
        let u = basis.evaluate_values(&traj.u[k]);
        basis.test_fields(
            Some(&[rho.component_mul(&u[0]), rho.component_mul(&u[1])]),
            None,
        )
    };
    let m: Vec<_> = (0..3).map(momentum).collect();
    let mut worst_jump = 0.0f64;
    let mut worst_initial = 0.0f64;
    for member in &battery.members {
        let phi = &member.spatial.c;
        let d: Vec<f64> = m.iter().map(|mk| phi.dot(mk) - phi.dot(&target)).collect();
        worst_initial = worst_initial.max(d[0].abs());
        worst_jump = worst_jump.max((2.0 * d[1] - d[2] - d[0]).abs());
    }
    Ok(vec![
        ResidualReport::at_most("initial_density", density_gap, 0.0, "max coefficient difference at t = 0"),
        ResidualReport::at_most(
            "initial_momentum",
            worst_jump,
            tolerance,
            format!("extrapolated t -> 0 gap minus gap at t = 0; projection gap at t = 0 is {worst_initial:.3e}"),
        ),
    ])
}
