use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::{GalerkinBasis, VelocityCoeffs};
use crate::error::{Error, Result};
use crate::geometry::Wall;
use crate::trig::YFamily;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestClass {
    /// `phi . n = 0` on the walls.
    ZeroNormal,
    /// `phi = 0` on the walls.
    Interior,
}

/// `phi(t, x) = psi(t) phi_s(x)` with a smooth bump `psi` supported in
/// `[t0, t1]` and a spatial field `phi_s` in the Galerkin space.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    pub id: usize,
    pub class: TestClass,
    pub spatial: VelocityCoeffs,
    pub t0: f64,
    pub t1: f64,
}

impl TestFunction {
    /// `(psi(t), psi'(t))`, with `psi = exp(1 - 1/(1 - s^2))` in the
    /// rescaled variable `s in (-1, 1)`, so `psi` peaks at one.
    pub fn bump(&self, t: f64) -> (f64, f64) {
        let half = 0.5 * (self.t1 - self.t0);
        let s = (t - 0.5 * (self.t0 + self.t1)) / half;
        if s.abs() >= 1.0 {
            return (0.0, 0.0);
        }
        let q = 1.0 - s * s;
        let psi = (1.0 - 1.0 / q).exp();
        let dpsi = psi * (-2.0 * s / (q * q)) / half;
        (psi, dpsi)
    }

    pub fn window(&self) -> String {
        format!(
            "test function {} ({:?}) on [{:.4}, {:.4}]",
            self.id, self.class, self.t0, self.t1
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestFunctionBattery {
    pub seed: u64,
    pub tau: f64,
    pub members: Vec<TestFunction>,
}

/// Spatial fields vanishing on both walls: single interior modes and, for
/// the wall-trace family, differences `cos(m pi y/H) - cos((m+2) pi y/H)`.
fn interior_fields(basis: &GalerkinBasis) -> Vec<DVector<f64>> {
    let n = basis.dim();
    let modes = basis.modes();
    let mut out = Vec::new();
    for (i, mode) in modes.iter().enumerate() {
        if mode.interior {
            out.push(DVector::from_fn(n, |j, _| (j == i) as u8 as f64));
        } else if mode.family == YFamily::Cos {
            let partner = modes.iter().position(|o| {
                o.component == mode.component
                    && o.family == YFamily::Cos
                    && o.k == mode.k
                    && o.parity == mode.parity
                    && o.m == mode.m + 2
            });
            if let Some(p) = partner {
                let mut v = DVector::zeros(n);
                v[i] = 1.0;
                v[p] = -1.0;
                out.push(v);
            }
        }
    }
    out
}

impl TestFunctionBattery {
    /// Random members: `zero_normal` drawn from every mode, `interior` from
    /// fields vanishing on the walls. Temporal supports are intervals of
    /// length at least `tau / 5` strictly inside `(0, tau)`.
    pub fn generate(
        basis: &GalerkinBasis,
        tau: f64,
        zero_normal: usize,
        interior: usize,
        seed: u64,
    ) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::Argument(format!(
                "battery horizon must be positive, got {tau}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = basis.dim();
        let inner = interior_fields(basis);
        if interior > 0 && inner.is_empty() {
            return Err(Error::Argument(
                "basis has no fields vanishing on the walls".into(),
            ));
        }
        let mut members = Vec::with_capacity(zero_normal + interior);
        let margin = 0.02 * tau;
        let window = |rng: &mut ChaCha8Rng| {
            let len = rng.gen_range(0.2 * tau..(tau - 2.0 * margin));
            let t0 = rng.gen_range(margin..(tau - margin - len));
            (t0, t0 + len)
        };
        for _ in 0..zero_normal {
            let idx = rng.gen_range(0..n);
            let amp = rng.gen_range(0.5..1.5) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let (t0, t1) = window(&mut rng);
            let spatial = VelocityCoeffs {
                c: DVector::from_fn(n, |j, _| if j == idx { amp } else { 0.0 }),
            };
            members.push(TestFunction {
                id: members.len(),
                class: TestClass::ZeroNormal,
                spatial,
                t0,
                t1,
            });
        }
        for _ in 0..interior {
            let field = &inner[rng.gen_range(0..inner.len())];
            let amp = rng.gen_range(0.5..1.5) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let (t0, t1) = window(&mut rng);
            members.push(TestFunction {
                id: members.len(),
                class: TestClass::Interior,
                spatial: VelocityCoeffs { c: field * amp },
                t0,
                t1,
            });
        }
        Ok(Self { seed, tau, members })
    }

    pub fn of_class(&self, class: TestClass) -> impl Iterator<Item = &TestFunction> {
        self.members.iter().filter(move |m| m.class == class)
    }

    /// Checks the class invariants on the wall x-nodes: normal trace zero
    /// for every member, full trace zero for interior members.
    pub fn check(&self, basis: &GalerkinBasis, tol: f64) -> Result<()> {
        let grid = basis.grid();
        for m in &self.members {
            if !(m.t0 > 0.0 && m.t1 < self.tau && m.t0 < m.t1) {
                return Err(Error::Argument(format!("{} leaves (0, tau)", m.window())));
            }
            for wall in Wall::BOTH {
                let y = basis.geometry().wall_y(wall);
                for &x in &grid.x.nodes {
                    let (v, _) = basis.eval_at(&m.spatial, x, y);
                    let bad =
                        v[1].abs() > tol || (m.class == TestClass::Interior && v[0].abs() > tol);
                    if bad {
                        return Err(Error::Argument(format!(
                            "{} violates its trace condition at x={x}, wall {}",
                            m.window(),
                            wall.name()
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}
