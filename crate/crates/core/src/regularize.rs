//! Regularised initial data: a smooth density with
//! `alpha <= rho0 <= alpha^(-1/(2 beta))` and zero normal derivative, a
//! matching momentum, and the initial velocity `P_n(q / rho0)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::basis::{GalerkinBasis, VelocityCoeffs};
use crate::error::{Error, Result};
use crate::spectral::{ScalarSpace, ScalarSpectralField};

/// Clamp/project sweeps used to pull the projected density back inside
/// its bounds.
const SWEEPS: usize = 20;

/// Distances between regularised and raw data, one per convergence
/// statement of the initial-data limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizationDistances {
    /// `||rho0_reg - rho0_raw||_{L^gamma}`
    pub rho_lgamma: f64,
    /// `int alpha rho0_reg^beta`
    pub artificial_l1: f64,
    /// `||q_reg - q_raw||_{L^1}`
    pub q_l1: f64,
    /// `|| |q_reg|^2/rho0_reg - |q_raw|^2/rho0_raw ||_{L^1}`
    pub energy_l1: f64,
    /// Largest amount by which the collocation values of `rho0_reg` leave
    /// `[alpha, alpha^(-1/(2 beta))]`; zero when the bounds hold.
    pub bounds_excess: f64,
}

#[derive(Debug, Clone)]
pub struct RegularizedData {
    pub rho0: ScalarSpectralField,
    pub q: [DMatrix<f64>; 2],
    pub u0: VelocityCoeffs,
    pub lower: f64,
    pub upper: f64,
    pub distances: RegularizationDistances,
}

/// Projects the raw density onto the Neumann-compatible space, clamps it
/// to `[alpha, alpha^(-1/(2 beta))]` and re-projects (repeated a few times
/// to damp the projection overshoot). Any overshoot left after that is
/// removed by shrinking the fluctuation about the mean. The momentum is truncated as
/// `q min(1, rho_reg/rho_raw)`, which keeps `|q|^2/rho` from growing where
/// the density was lowered, and `u0 = P_n(q_reg / rho_reg)`.
pub fn regularize_initial_data(
    basis: &GalerkinBasis,
    space: &ScalarSpace,
    rho0_raw: &DMatrix<f64>,
    q_raw: &[DMatrix<f64>; 2],
    alpha: f64,
    beta: f64,
    gamma: f64,
) -> Result<RegularizedData> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Argument(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let grid = space.grid();
    let shape = (grid.nx(), grid.ny());
    if rho0_raw.shape() != shape || q_raw[0].shape() != shape || q_raw[1].shape() != shape {
        return Err(Error::Argument(
            "initial data must be sampled on the quadrature grid".into(),
        ));
    }
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            let r = rho0_raw[(i, j)];
            let (x, y) = grid.point(i, j);
            if !(r >= 0.0) || !r.is_finite() {
                return Err(Error::Argument(format!(
                    "raw initial density {r} is negative at (x={x}, y={y})"
                )));
            }
            if r == 0.0 && (q_raw[0][(i, j)] != 0.0 || q_raw[1][(i, j)] != 0.0) {
                return Err(Error::Argument(format!(
                    "initial momentum is nonzero where the density vanishes, at (x={x}, y={y})"
                )));
            }
        }
    }
    let lower = alpha;
    let upper = alpha.powf(-1.0 / (2.0 * beta));
    let mut rho = space.from_grid(rho0_raw);
    for _ in 0..SWEEPS {
        let values = space.to_grid(&rho);
        if values.iter().all(|v| (lower..=upper).contains(v)) {
            break;
        }
        rho = space.from_grid(&values.map(|v| v.clamp(lower, upper)));
    }
    contract_into(space, &mut rho, lower, upper);
    let values = space.to_grid(&rho);
    let bounds_excess = values
        .iter()
        .fold(0.0f64, |m, &v| m.max(lower - v).max(v - upper));
    if values.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Argument(
            "regularised initial density is not positive; raise the density resolution".into(),
        ));
    }
    let factor = values.zip_map(
        rho0_raw,
        |reg, raw| if raw > 0.0 { (reg / raw).min(1.0) } else { 1.0 },
    );
    let q = [
        q_raw[0].component_mul(&factor),
        q_raw[1].component_mul(&factor),
    ];
    let u0 = basis.project_l2(&[q[0].component_div(&values), q[1].component_div(&values)])?;

    let rho_lgamma = grid
        .integrate(&(&values - rho0_raw).map(|d| d.abs().powf(gamma)))
        .powf(1.0 / gamma);
    let artificial_l1 = grid.integrate(&values.map(|r| alpha * r.powf(beta)));
    let q_l1 = grid.integrate(&((&q[0] - &q_raw[0]).abs() + (&q[1] - &q_raw[1]).abs()));
    let mut energy_gap = grid.zeros();
    for idx in 0..values.len() {
        let reg = (q[0][idx].powi(2) + q[1][idx].powi(2)) / values[idx];
        let raw = if rho0_raw[idx] > 0.0 {
            (q_raw[0][idx].powi(2) + q_raw[1][idx].powi(2)) / rho0_raw[idx]
        } else {
            0.0
        };
        energy_gap[idx] = (reg - raw).abs();
    }
    let energy_l1 = grid.integrate(&energy_gap);
    Ok(RegularizedData {
        rho0: rho,
        q,
        u0,
        lower,
        upper,
        distances: RegularizationDistances {
            rho_lgamma,
            artificial_l1,
            q_l1,
            energy_l1,
            bounds_excess,
        },
    })
}

/// Scales the non-mean coefficients so the collocation values fit in
/// `[lower, upper]`. The mean is kept, so the mass is unchanged; it lies in
/// the bounds because it is the mean of clamped values.
fn contract_into(space: &ScalarSpace, rho: &mut ScalarSpectralField, lower: f64, upper: f64) {
    let values = space.to_grid(rho);
    let (lo, hi) = (values.min(), values.max());
    if lo >= lower && hi <= upper {
        return;
    }
    let mean = rho.coeffs[(0, 0)].clamp(lower, upper);
    let mut s = 1.0f64;
    if hi > upper {
        s = s.min((upper - mean) / (hi - mean));
    }
    if lo < lower {
        s = s.min((mean - lower) / (mean - lo));
    }
    // Keep rounding in the scaled values from reopening the gap.
    let s = (s * (1.0 - 1e-12)).max(0.0);
    let mut coeffs = rho.coeffs.map(|c| c * s);
    coeffs[(0, 0)] = rho.coeffs[(0, 0)];
    *rho = ScalarSpectralField::from_coeffs(coeffs);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::InteriorModes;
    use crate::geometry::Geometry;
    use std::f64::consts::PI;

    fn spaces() -> (GalerkinBasis, ScalarSpace) {
        let g = Geometry::new(1.0, 1.0, 24, 32).unwrap();
        (
            GalerkinBasis::new(&g, 1, 4, InteriorModes::Omit).unwrap(),
            ScalarSpace::new(&g, 6, 12).unwrap(),
        )
    }

    #[test]
    fn admissible_constant_is_unchanged() {
        let (b, s) = spaces();
        let grid = s.grid().clone();
        let rho = grid.from_fn(|_, _| 1.3);
        let q = [grid.zeros(), grid.zeros()];
        let reg = regularize_initial_data(&b, &s, &rho, &q, 1e-3, 4.5, 5.0 / 3.0).unwrap();
        assert!((s.to_grid(&reg.rho0) - &rho).amax() < 1e-13);
        assert_eq!(reg.u0.max_abs(), 0.0);
        assert!(reg.distances.rho_lgamma < 1e-12);
        assert_eq!(reg.distances.bounds_excess, 0.0);
    }

    #[test]
    fn momentum_on_vacuum_is_rejected() {
        let (b, s) = spaces();
        let grid = s.grid().clone();
        let rho = grid.zeros();
        let q = [grid.from_fn(|_, _| 1.0), grid.zeros()];
        assert!(regularize_initial_data(&b, &s, &rho, &q, 1e-3, 4.5, 5.0 / 3.0).is_err());
        let rho = grid.from_fn(|_, _| -1.0);
        assert!(regularize_initial_data(
            &b,
            &s,
            &rho,
            &[grid.zeros(), grid.zeros()],
            1e-3,
            4.5,
            5.0 / 3.0
        )
        .is_err());
    }

    #[test]
    fn distances_shrink_with_alpha() {
        let (b, s) = spaces();
        let grid = s.grid().clone();
        let rho = grid.from_fn(|x, y| 1.5 + 1.45 * (2.0 * PI * x).cos() * (PI * y).cos());
        let q = [
            rho.component_mul(&grid.from_fn(|x, y| 0.2 * (2.0 * PI * x).sin() * (PI * y).cos())),
            grid.zeros(),
        ];
        let runs: Vec<_> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&a| {
                regularize_initial_data(&b, &s, &rho, &q, a, 4.5, 5.0 / 3.0)
                    .unwrap()
                    .distances
            })
            .collect();
        for pair in runs.windows(2) {
            assert!(pair[1].rho_lgamma < pair[0].rho_lgamma);
            assert!(pair[1].artificial_l1 < pair[0].artificial_l1);
            assert!(pair[1].q_l1 < pair[0].q_l1);
            assert!(pair[1].energy_l1 < pair[0].energy_l1);
        }
        for d in &runs {
            assert_eq!(d.bounds_excess, 0.0, "{d:?}");
        }
    }
}
