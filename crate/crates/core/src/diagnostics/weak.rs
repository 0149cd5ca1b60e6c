use nalgebra::{DMatrix, DVector};

use super::battery::{TestClass, TestFunction, TestFunctionBattery};
use super::ledger::EnergyLedger;
use super::report::ResidualReport;
use super::NodeFields;
use crate::basis::VelocityCoeffs;
use crate::error::{Error, Result};
use crate::fixed_point::Trajectory;
use crate::geometry::Wall;
use crate::model::Model;

/// Per-node load vectors `b_j = int (term) : phi_j`, one per term of the
/// momentum equation, so that any test field in the Galerkin space pairs
/// with a dot product.
#[derive(Debug, Clone)]
struct NodeTerms {
    /// `int rho u . phi`
    momentum: DVector<f64>,
    /// `int (rho u (x) u) : grad phi`
    convective: DVector<f64>,
    /// `int 2 nu D(u) : D(phi)`
    viscous: DVector<f64>,
    /// `int lambda div u div phi`
    bulk: DVector<f64>,
    /// `int a rho^gamma div phi`
    pressure: DVector<f64>,
    /// `int alpha rho^beta div phi`
    artificial: DVector<f64>,
    /// `int rho f . phi`
    body: DVector<f64>,
    /// `int eps (grad u grad rho) . phi`
    eps: DVector<f64>,
}

impl NodeTerms {
    /// Right-hand side of the momentum equation without the wall term.
    fn load(&self) -> DVector<f64> {
        &self.convective - &self.viscous - &self.bulk
            + &self.pressure
            + &self.artificial
            + &self.body
            - &self.eps
    }

    fn each(&self) -> [&DVector<f64>; 7] {
        [
            &self.convective,
            &self.viscous,
            &self.bulk,
            &self.pressure,
            &self.artificial,
            &self.body,
            &self.eps,
        ]
    }
}

/// Precomputed pairing data for testing a trajectory against fields in the
/// Galerkin space.
#[derive(Debug, Clone)]
pub struct WeakForm {
    times: Vec<f64>,
    terms: Vec<NodeTerms>,
    ledger: EnergyLedger,
    /// Cumulative `int int_wall g j_delta(u)` and `int int_wall g |u|`.
    j_u: Vec<f64>,
    abs_u: Vec<f64>,
}

fn isotropic(grid_zero: &DMatrix<f64>, p: DMatrix<f64>) -> [[DMatrix<f64>; 2]; 2] {
    [[p.clone(), grid_zero.clone()], [grid_zero.clone(), p]]
}

impl WeakForm {
    pub fn new(model: &Model, traj: &Trajectory, ledger: &EnergyLedger) -> Result<Self> {
        traj.validate()?;
        if ledger.times.len() != traj.len() {
            return Err(Error::Argument(
                "ledger and trajectory differ in length".into(),
            ));
        }
        let basis = &model.basis;
        let grid = basis.grid();
        let p = &model.params;
        let area = basis.geometry().area();
        let zero = grid.zeros();
        let body = model.body_force();
        let reg = model.friction();
        let mut terms = Vec::with_capacity(traj.len());
        let mut j_rate = Vec::with_capacity(traj.len());
        let mut abs_rate = Vec::with_capacity(traj.len());
        for k in 0..traj.len() {
            let f = NodeFields::new(model, traj, k);
            let rho = &f.rho.value;
            let u = &f.vel.u;
            let g = &f.vel.grad;
            let ru = [rho.component_mul(&u[0]), rho.component_mul(&u[1])];
            let momentum = basis.test_fields(Some(&ru), None);
            let conv: [[DMatrix<f64>; 2]; 2] = [
                [ru[0].component_mul(&u[0]), ru[0].component_mul(&u[1])],
                [ru[1].component_mul(&u[0]), ru[1].component_mul(&u[1])],
            ];
            let convective = basis.test_fields(None, Some(&conv));
            let strain: [[DMatrix<f64>; 2]; 2] = [
                [&g[0][0] * (2.0 * p.nu), (&g[0][1] + &g[1][0]) * p.nu],
                [(&g[0][1] + &g[1][0]) * p.nu, &g[1][1] * (2.0 * p.nu)],
            ];
            let viscous = basis.test_fields(None, Some(&strain));
            let bulk =
                basis.test_fields(None, Some(&isotropic(&zero, f.vel.divergence() * p.lambda)));
            let centred = |mut m: DMatrix<f64>| {
                let mean = grid.integrate(&m) / area;
                m.add_scalar_mut(-mean);
                m
            };
            let pa = centred(rho.map(|r| p.a * r.powf(p.gamma)));
            let palpha = centred(rho.map(|r| p.alpha * r.powf(p.beta)));
            let pressure = basis.test_fields(None, Some(&isotropic(&zero, pa)));
            let artificial = basis.test_fields(None, Some(&isotropic(&zero, palpha)));
            let body = basis.test_fields(
                Some(&[rho.component_mul(&body[0]), rho.component_mul(&body[1])]),
                None,
            );
            let gr = &f.rho.grad;
            let eps_field = [
                (g[0][0].component_mul(&gr[0]) + g[0][1].component_mul(&gr[1])) * p.eps,
                (g[1][0].component_mul(&gr[0]) + g[1][1].component_mul(&gr[1])) * p.eps,
            ];
            let eps = basis.test_fields(Some(&eps_field), None);
            terms.push(NodeTerms {
                momentum,
                convective,
                viscous,
                bulk,
                pressure,
                artificial,
                body,
                eps,
            });
            let (mut jr, mut ar) = (0.0, 0.0);
            for wall in Wall::BOTH {
                let gw = p.g_wall(wall);
                for (v, wx) in basis
                    .wall_velocity(&traj.u[k], wall)
                    .iter()
                    .zip(&grid.x.weights)
                {
                    jr += gw * wx * reg.value_1d(*v);
                    ar += gw * wx * v.abs();
                }
            }
            j_rate.push(jr);
            abs_rate.push(ar);
        }
        let j_u = super::cumulative_trapezoid(&traj.times, &j_rate);
        let abs_u = super::cumulative_trapezoid(&traj.times, &abs_rate);
        Ok(Self {
            times: traj.times.clone(),
            terms,
            ledger: ledger.clone(),
            j_u,
            abs_u,
        })
    }

    fn node_index(&self, tau: f64) -> Result<usize> {
        let dt = if self.times.len() > 1 {
            self.times[1] - self.times[0]
        } else {
            1.0
        };
        self.times
            .iter()
            .position(|t| (t - tau).abs() <= 1e-9 * dt.max(tau.abs()))
            .ok_or_else(|| Error::Argument(format!("tau = {tau} is not a trajectory node")))
    }

    fn trapezoid_weight(&self, k: usize, last: usize) -> f64 {
        let mut w = 0.0;
        if k > 0 {
            w += 0.5 * (self.times[k] - self.times[k - 1]);
        }
        if k < last {
            w += 0.5 * (self.times[k + 1] - self.times[k]);
        }
        w
    }

    /// Left-hand side of the combined momentum and energy inequality on
    /// `[0, tau]` for a test field given per node as `(phi_k, d_t phi_k)`.
    /// Time-boundary terms `[int rho u . phi]_0^tau` are included, so fields
    /// that do not vanish at the ends are allowed. With `limit` the wall
    /// term uses `|.|` in place of `j_delta`.
    pub fn combined_lhs(
        &self,
        model: &Model,
        tau: f64,
        limit: bool,
        phi: impl Fn(usize) -> (VelocityCoeffs, VelocityCoeffs),
    ) -> Result<f64> {
        let last = self.node_index(tau)?;
        let led = &self.ledger;
        let e = |k: usize| led.total_energy(k);
        let wall_u = if limit {
            self.abs_u[last]
        } else {
            self.j_u[last]
        };
        let mut value = e(0) - e(last) - led.dissipation[last] - led.eps_dissipation[last]
            + led.work[last]
            - wall_u;
        let basis = &model.basis;
        let grid = basis.grid();
        let reg = model.friction();
        let p = &model.params;
        for k in 0..=last {
            let (f, df) = phi(k);
            let w = self.trapezoid_weight(k, last);
            let t = &self.terms[k];
            let mut rate = -df.c.dot(&t.momentum) - f.c.dot(&t.load());
            for wall in Wall::BOTH {
                let gw = p.g_wall(wall);
                for (v, wx) in basis.wall_velocity(&f, wall).iter().zip(&grid.x.weights) {
                    rate += gw * wx * if limit { v.abs() } else { reg.value_1d(*v) };
                }
            }
            value += w * rate;
            if k == 0 {
                value -= f.c.dot(&t.momentum);
            }
            if k == last {
                value += f.c.dot(&t.momentum);
            }
        }
        Ok(value)
    }

    /// Residual of the momentum equation against an interior field,
    /// normalised by the largest single term.
    fn interior_residual(&self, m: &TestFunction) -> (f64, f64) {
        let last = self.times.len() - 1;
        let mut time_term = 0.0;
        let mut parts = [0.0; 7];
        for k in 0..=last {
            let (psi, dpsi) = m.bump(self.times[k]);
            if psi == 0.0 && dpsi == 0.0 {
                continue;
            }
            let w = self.trapezoid_weight(k, last);
            let t = &self.terms[k];
            time_term += w * dpsi * m.spatial.c.dot(&t.momentum);
            for (acc, term) in parts.iter_mut().zip(t.each()) {
                *acc += w * psi * m.spatial.c.dot(term);
            }
        }
        let [conv, visc, bulk, pa, palpha, body, eps] = parts;
        let residual = -time_term - (conv - visc - bulk + pa + palpha + body - eps);
        let scale = parts.iter().fold(time_term.abs(), |s, v| s.max(v.abs()));
        (residual, scale)
    }
}

/// Combined inequality for every zero-normal member of `battery` on
/// `[0, tau]`. Each report passes when the value is at least `-tol_weak`;
/// the context carries the limit-form value.
pub fn weak_inequality_check(
    model: &Model,
    traj: &Trajectory,
    ledger: &EnergyLedger,
    battery: &TestFunctionBattery,
    tau: f64,
    tol_weak: f64,
) -> Result<Vec<ResidualReport>> {
    let form = WeakForm::new(model, traj, ledger)?;
    form.node_index(tau)?;
    if battery.tau > tau * (1.0 + 1e-12) {
        return Err(Error::Argument(format!(
            "battery horizon {} exceeds tau = {tau}",
            battery.tau
        )));
    }
    let mut out = Vec::new();
    for m in battery.of_class(TestClass::ZeroNormal) {
        let phi = |k: usize| {
            let (psi, dpsi) = m.bump(traj.times[k]);
            (
                VelocityCoeffs {
                    c: &m.spatial.c * psi,
                },
                VelocityCoeffs {
                    c: &m.spatial.c * dpsi,
                },
            )
        };
        let delta_level = form.combined_lhs(model, tau, false, phi)?;
        let limit = form.combined_lhs(model, tau, true, phi)?;
        out.push(ResidualReport::at_least(
            "weak_inequality",
            delta_level,
            -tol_weak,
            format!("{}; limit form {limit:.6e}", m.window()),
        ));
    }
    Ok(out)
}

/// Momentum equation tested with interior fields, for which the wall term
/// drops out. Value is `|residual|` divided by the largest single term over
/// all of `members`, so fields the flow does not excite are not judged on
/// roundoff. The divisor is floored at `sqrt(machine eps)` times the energy
/// scale over the horizon, which makes a quiescent state report zero.
pub fn alt_momentum_residual(
    model: &Model,
    traj: &Trajectory,
    ledger: &EnergyLedger,
    members: &[TestFunction],
    tolerance: f64,
) -> Result<Vec<ResidualReport>> {
    if let Some(m) = members.iter().find(|m| m.class != TestClass::Interior) {
        return Err(Error::Argument(format!(
            "{} is not an interior test function",
            m.window()
        )));
    }
    let form = WeakForm::new(model, traj, ledger)?;
    let raw: Vec<(f64, f64)> = members.iter().map(|m| form.interior_residual(m)).collect();
    let horizon = traj.times.last().copied().unwrap_or(0.0) - traj.times[0];
    let floor = f64::EPSILON.sqrt() * ledger.scale() * horizon;
    let scale = raw.iter().fold(floor, |s, (_, v)| s.max(*v));
    Ok(members
        .iter()
        .zip(&raw)
        .map(|(m, (r, own))| {
            let value = if scale > 0.0 {
                r.abs() / scale
            } else {
                r.abs()
            };
            ResidualReport::at_most(
                "alt_momentum",
                value,
                tolerance,
                format!(
                    "{}; largest own term {own:.3e}, battery scale {scale:.3e}",
                    m.window()
                ),
            )
        })
        .collect())
}
