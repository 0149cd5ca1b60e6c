use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use slipflow::basis::{GalerkinBasis, InteriorModes, VelocityCoeffs};
use slipflow::density::density_step;
use slipflow::geometry::{Geometry, Wall};
use slipflow::momentum::{
    assemble_mass_operator, cauchy_stress, linearized_solve, momentum_rhs, stress_at,
};
use slipflow::trig::YFamily;
use slipflow::{BodyForce, FluidParams, Model, ScalarSpace, ScalarSpectralField, Sources};

const KX: usize = 1;
const KY: usize = 3;
const MY: usize = 4;

fn model_on(quad_x: usize, quad_y: usize, params: FluidParams) -> Model {
    model_with(quad_x, quad_y, params, InteriorModes::Sine)
}

fn model_with(quad_x: usize, quad_y: usize, params: FluidParams, modes: InteriorModes) -> Model {
    let g = Geometry::new(1.0, 1.0, quad_x, quad_y).unwrap();
    let basis = GalerkinBasis::new(&g, KX, KY, modes).unwrap();
    let space = ScalarSpace::new(&g, KX, MY).unwrap();
    Model::new(basis, space, params, Sources::none()).unwrap()
}

fn params() -> FluidParams {
    FluidParams {
        eps: 0.02,
        lambda: 0.05,
        f: BodyForce::Constant([0.5, -0.2]),
        ..FluidParams::default()
    }
}

fn density(space: &ScalarSpace) -> ScalarSpectralField {
    let grid = space.grid();
    space.from_grid(&grid.from_fn(|x, y| {
        1.0 + 0.2 * (2.0 * PI * x).cos() * (PI * y).cos() + 0.1 * (2.0 * PI * y).cos()
    }))
}

fn coeffs(n: usize, scale: f64, seed: u64) -> VelocityCoeffs {
    VelocityCoeffs::from_vec(
        (0..n)
            .map(|i| scale * ((i as f64 + 1.0) * 1.7 + seed as f64).sin())
            .collect(),
    )
}

#[test]
fn mass_operator_matches_pointwise_integration() {
    let m = model_on(16, 24, params());
    let rho = density(&m.space);
    let mass = assemble_mass_operator(&m.basis, &m.space, &rho).unwrap();

    // Brute force on an independent, much finer rule using point evaluation.
    let fine = Geometry::new(1.0, 1.0, 48, 64).unwrap();
    let grid = slipflow::geometry::Grid::new(&fine);
    let n = m.basis.dim();
    let mut brute = DMatrix::zeros(n, n);
    for i in 0..grid.nx() {
        for j in 0..grid.ny() {
            let (x, y) = grid.point(i, j);
            let w = grid.weights[(i, j)] * m.space.eval_at(&rho, x, y)[0];
            let phi: Vec<[f64; 2]> = (0..n).map(|a| m.basis.mode_at(a, x, y).0).collect();
            for a in 0..n {
                for b in 0..n {
                    brute[(a, b)] += w * (phi[a][0] * phi[b][0] + phi[a][1] * phi[b][1]);
                }
            }
        }
    }
    assert!(
        (&mass - &brute).amax() < 1e-12,
        "{:e}",
        (&mass - &brute).amax()
    );
    assert!((&mass - mass.transpose()).amax() < 1e-14);
    assert!(mass.symmetric_eigen().eigenvalues.min() > 0.0);
}

#[test]
fn load_is_resolved_by_the_quadrature() {
    // Friction off: the kink of the regularized friction gradient on the
    // walls converges only algebraically in the x rule.
    let p = FluidParams {
        g: [0.0, 0.0],
        ..params()
    };
    let coarse = model_on(16, 24, p.clone());
    let fine = model_on(64, 96, p);
    let n = coarse.basis.dim();
    let rho_c = density(&coarse.space);
    let rho_f = density(&fine.space);
    assert!((&rho_c.coeffs - &rho_f.coeffs).amax() < 1e-13);
    let w = coeffs(n, 0.3, 1);
    let u = coeffs(n, 0.2, 2);
    let a = momentum_rhs(&coarse, &w, &u, &rho_c, 0.0).unwrap();
    let b = momentum_rhs(&fine, &w, &u, &rho_f, 0.0).unwrap();
    let rel = (&a - &b).amax() / b.amax();
    assert!(rel < 1e-8, "{rel:e}");
}

fn rk4_reference(
    model: &Model,
    w: &VelocityCoeffs,
    rho: &ScalarSpectralField,
    u0: &VelocityCoeffs,
    t_end: f64,
    steps: usize,
) -> DVector<f64> {
    let mass = assemble_mass_operator(&model.basis, &model.space, rho).unwrap();
    let chol = mass.cholesky().unwrap();
    let f = |c: &DVector<f64>| {
        chol.solve(&momentum_rhs(model, w, &VelocityCoeffs { c: c.clone() }, rho, 0.0).unwrap())
    };
    let h = t_end / steps as f64;
    let mut c = u0.c.clone();
    for _ in 0..steps {
        let k1 = f(&c);
        let k2 = f(&(&c + &k1 * (h / 2.0)));
        let k3 = f(&(&c + &k2 * (h / 2.0)));
        let k4 = f(&(&c + &k3 * h));
        c += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    c
}

#[test]
fn linearized_solve_is_second_order_against_rk4() {
    let m = model_on(16, 24, params());
    let n = m.basis.dim();
    let rho = density(&m.space);
    let w = coeffs(n, 0.3, 3);
    let u0 = coeffs(n, 0.2, 4);
    let t_end = 0.2;
    let reference = rk4_reference(&m, &w, &rho, &u0, t_end, 800);
    let error = |steps: usize| {
        let ws = vec![w.clone(); steps + 1];
        let rhos = vec![rho.clone(); steps + 1];
        let out = linearized_solve(&m, &ws, &rhos, &u0, t_end / steps as f64).unwrap();
        (&out[steps].c - &reference).amax()
    };
    let (e1, e2) = (error(20), error(40));
    assert!(e2 < 1e-3 * reference.amax(), "{e2:e}");
    assert!(e1 / e2 >= 3.5, "ratio {}", e1 / e2);
}

#[test]
fn shear_mode_decays_at_the_viscous_rate() {
    let p = FluidParams {
        g: [0.0, 0.0],
        ..FluidParams::default()
    };
    let m = model_with(8, 12, p.clone(), InteriorModes::Omit);
    let n = m.basis.dim();
    let idx = m
        .basis
        .modes()
        .iter()
        .position(|md| md.component == 0 && md.family == YFamily::Cos && md.m == 1 && md.k == 0)
        .unwrap();
    let mut u0 = VelocityCoeffs::zeros(n);
    u0.c[idx] = 1.0;
    let steps = 100;
    let dt = 1e-2;
    let out = linearized_solve(
        &m,
        &vec![VelocityCoeffs::zeros(n); steps + 1],
        &vec![m.space.constant(1.0); steps + 1],
        &u0,
        dt,
    )
    .unwrap();
    // Heun's amplification factor for u' = -nu pi^2 u.
    let z = p.nu * PI * PI * dt;
    let amp = 1.0 - z + z * z / 2.0;
    for (k, c) in out.iter().enumerate() {
        let mut expected = VelocityCoeffs::zeros(n);
        expected.c[idx] = amp.powi(k as i32);
        assert!(
            (&c.c - &expected.c).amax() < 1e-12,
            "step {k}: {:e}",
            (&c.c - &expected.c).amax()
        );
    }
    let continuous = (-p.nu * PI * PI * dt * steps as f64).exp();
    assert!((out[steps].c[idx] - continuous).abs() < 1e-5);
}

#[test]
fn stress_matches_finite_differences() {
    let m = model_on(8, 12, params());
    let n = m.basis.dim();
    let rho = density(&m.space);
    let u = coeffs(n, 0.5, 5);
    let field = cauchy_stress(&m, &u, &rho).unwrap();
    let h = 1e-5;
    let fd_grad = |x: f64, y: f64| {
        let d = |dx: f64, dy: f64| {
            let p = m.basis.eval_at(&u, x + dx, y + dy).0;
            let q = m.basis.eval_at(&u, x - dx, y - dy).0;
            [(p[0] - q[0]) / (2.0 * h), (p[1] - q[1]) / (2.0 * h)]
        };
        let (gx, gy) = (d(h, 0.0), d(0.0, h));
        [[gx[0], gy[0]], [gx[1], gy[1]]]
    };
    let grid = m.basis.grid();
    for i in 0..grid.nx() {
        for j in 0..grid.ny() {
            let (x, y) = grid.point(i, j);
            let s = stress_at(&m.params, &fd_grad(x, y), m.space.eval_at(&rho, x, y)[0]);
            for (a, row) in s.iter().enumerate() {
                for (b, expected) in row.iter().enumerate() {
                    assert!(
                        (field.sigma[a][b][(i, j)] - expected).abs() < 1e-6,
                        "sigma[{a}][{b}] at ({x},{y})"
                    );
                }
            }
        }
    }
    for wt in &field.walls {
        let y = m.basis.geometry().wall_y(wt.wall);
        let ny = if wt.wall == Wall::Top { 1.0 } else { -1.0 };
        for (k, &x) in wt.x.iter().enumerate() {
            let s = stress_at(&m.params, &fd_grad(x, y), m.space.eval_at(&rho, x, y)[0]);
            assert!((wt.tangential[k] - s[0][1] * ny).abs() < 1e-6);
            assert!((wt.normal[k] - s[1][1]).abs() < 1e-6);
        }
    }
}

#[test]
fn pure_diffusion_step_is_the_exact_heat_flow() {
    let m = model_on(8, 12, params());
    let rho = density(&m.space);
    let zero = VelocityCoeffs::zeros(m.basis.dim());
    let dt = 0.05;
    let next = density_step(&m, &rho, &zero, &zero, 0.0, dt).unwrap();
    let expected = rho.coeffs.zip_map(m.space.eigenvalues(), |c, lam| {
        c * (-m.params.eps * lam * dt).exp()
    });
    assert!((&next.coeffs - &expected).amax() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn transport_conserves_mass(seed in 0u64..10_000, amp in 0.0f64..0.3, scale in 0.0f64..2.0) {
        let m = model_on(8, 12, params());
        let s = seed as f64;
        let grid = m.space.grid().clone();
        let rho = m.space.from_grid(&grid.from_fn(|x, y| 1.0 + amp * ((2.0 * PI * x + s).cos() * (PI * y).cos() + 0.5 * (3.0 * PI * y + s).cos())));
        let u0 = coeffs(m.basis.dim(), scale, seed);
        let u1 = coeffs(m.basis.dim(), scale, seed + 1);
        let next = density_step(&m, &rho, &u0, &u1, 0.0, 1e-3).unwrap();
        let before = m.space.mass(&rho);
        prop_assert!((m.space.mass(&next) - before).abs() <= 1e-13 * before);
    }
}
