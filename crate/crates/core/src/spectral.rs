//! Scalar fields in the Neumann-compatible spectral space
//! `span{ X_a(x) cos(m pi y/H) }`.
//!
//! Every member satisfies `d rho/dy = 0` on both walls identically, and the
//! Neumann Laplacian is diagonal with eigenvalues `-(kx^2 + (m pi/H)^2)`.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::geometry::{Geometry, Grid};
use crate::trig::{analyze, synthesize, FourierX, Table, YFamily};

/// Spectral coefficients `coeffs[(a, m)]` with optionally cached
/// collocation values.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarSpectralField {
    pub coeffs: DMatrix<f64>,
    grid_values: Option<DMatrix<f64>>,
}

impl ScalarSpectralField {
    pub fn from_coeffs(coeffs: DMatrix<f64>) -> Self {
        Self {
            coeffs,
            grid_values: None,
        }
    }

    pub fn grid_values(&self) -> Option<&DMatrix<f64>> {
        self.grid_values.as_ref()
    }

    /// Fills the collocation cache.
    pub fn cache_grid(&mut self, space: &ScalarSpace) {
        self.grid_values = Some(space.to_grid(self));
    }

    pub fn without_cache(mut self) -> Self {
        self.grid_values = None;
        self
    }
}

#[derive(Debug, Clone)]
pub struct ScalarSpace {
    geometry: Geometry,
    grid: Grid,
    kx_max: usize,
    my_max: usize,
    xtab: Table,
    ytab: Table,
    /// `1 / (||X_a||^2 ||Y_m||^2)`
    inv_norms: DMatrix<f64>,
    /// Neumann Laplacian eigenvalues `kx^2 + ky^2` (non-negative).
    eigen: DMatrix<f64>,
}

impl ScalarSpace {
    pub fn new(geometry: &Geometry, kx_max: usize, my_max: usize) -> Result<Self> {
        geometry.check_margin(kx_max, my_max)?;
        let grid = geometry.grid();
        let fx = FourierX { kmax: kx_max };
        let xtab = fx.table(geometry, &grid.x.nodes);
        let ytab = YFamily::Cos.table(geometry, my_max, &grid.y.nodes);
        let nxf = fx.len();
        let inv_norms = DMatrix::from_fn(nxf, my_max + 1, |a, m| {
            let ny = if m == 0 { geometry.h } else { 0.5 * geometry.h };
            1.0 / (FourierX::norm_sq(geometry, a) * ny)
        });
        let eigen = DMatrix::from_fn(nxf, my_max + 1, |a, m| {
            let ky = geometry.ky(m);
            FourierX::eigen(geometry, a) + ky * ky
        });
        Ok(Self {
            geometry: geometry.clone(),
            grid,
            kx_max,
            my_max,
            xtab,
            ytab,
            inv_norms,
            eigen,
        })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn kx_max(&self) -> usize {
        self.kx_max
    }

    pub fn my_max(&self) -> usize {
        self.my_max
    }

    pub fn shape(&self) -> (usize, usize) {
        (2 * self.kx_max + 1, self.my_max + 1)
    }

    pub fn zeros(&self) -> ScalarSpectralField {
        let (a, b) = self.shape();
        ScalarSpectralField::from_coeffs(DMatrix::zeros(a, b))
    }

    pub fn constant(&self, value: f64) -> ScalarSpectralField {
        let mut f = self.zeros();
        f.coeffs[(0, 0)] = value;
        f
    }

    /// Laplacian eigenvalues (as positive numbers) per coefficient.
    pub fn eigenvalues(&self) -> &DMatrix<f64> {
        &self.eigen
    }

    pub fn to_grid(&self, f: &ScalarSpectralField) -> DMatrix<f64> {
        synthesize(&self.xtab.val, &f.coeffs, &self.ytab.val)
    }

    /// Values, `d/dx`, `d/dy` and Laplacian on the grid.
    pub fn to_grid_with_derivatives(&self, f: &ScalarSpectralField) -> [DMatrix<f64>; 4] {
        let c = &f.coeffs;
        let lap = -c.component_mul(&self.eigen);
        [
            synthesize(&self.xtab.val, c, &self.ytab.val),
            synthesize(&self.xtab.d1, c, &self.ytab.val),
            synthesize(&self.xtab.val, c, &self.ytab.d1),
            synthesize(&self.xtab.val, &lap, &self.ytab.val),
        ]
    }

    /// `L^2` projection of grid data onto the space.
    pub fn from_grid(&self, values: &DMatrix<f64>) -> ScalarSpectralField {
        let raw = analyze(&self.xtab.val, &self.grid.weighted(values), &self.ytab.val);
        ScalarSpectralField::from_coeffs(raw.component_mul(&self.inv_norms))
    }

    /// Projection of `div F` for a flux with vanishing normal component on
    /// the walls, computed as `-<F, grad psi>` so that the mean mode is
    /// exactly zero.
    pub fn weak_divergence(&self, flux: &[DMatrix<f64>; 2]) -> DMatrix<f64> {
        let fx = self.grid.weighted(&flux[0]);
        let fy = self.grid.weighted(&flux[1]);
        let raw = analyze(&self.xtab.d1, &fx, &self.ytab.val)
            + analyze(&self.xtab.val, &fy, &self.ytab.d1);
        -raw.component_mul(&self.inv_norms)
    }

    /// `int f dx` computed from the mean coefficient.
    pub fn mass(&self, f: &ScalarSpectralField) -> f64 {
        f.coeffs[(0, 0)] * self.geometry.area()
    }

    /// Evaluates at an arbitrary point (closed form).
    pub fn eval_at(&self, f: &ScalarSpectralField, x: f64, y: f64) -> [f64; 3] {
        let mut out = [0.0; 3];
        for a in 0..f.coeffs.nrows() {
            let [xv, xd, _] = FourierX::eval(&self.geometry, a, x);
            for m in 0..f.coeffs.ncols() {
                let c = f.coeffs[(a, m)];
                if c == 0.0 {
                    continue;
                }
                let [yv, yd, _] = YFamily::Cos.eval(&self.geometry, m, y);
                out[0] += c * xv * yv;
                out[1] += c * xd * yv;
                out[2] += c * xv * yd;
            }
        }
        out
    }

    /// Copies coefficients into this space's shape (truncating or padding).
    pub fn resample(&self, f: &ScalarSpectralField) -> ScalarSpectralField {
        let mut out = self.zeros();
        let rows = out.coeffs.nrows().min(f.coeffs.nrows());
        let cols = out.coeffs.ncols().min(f.coeffs.ncols());
        out.coeffs
            .view_mut((0, 0), (rows, cols))
            .copy_from(&f.coeffs.view((0, 0), (rows, cols)));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn space() -> ScalarSpace {
        let g = Geometry::new(1.0, 1.0, 24, 32).unwrap();
        ScalarSpace::new(&g, 4, 8).unwrap()
    }

    #[test]
    fn grid_roundtrip_is_identity_on_space() {
        let s = space();
        let mut f = s.zeros();
        for a in 0..9 {
            for m in 0..9 {
                f.coeffs[(a, m)] = ((a * 3 + m * 5) % 7) as f64 * 0.1 - 0.3;
            }
        }
        let back = s.from_grid(&s.to_grid(&f));
        assert!((back.coeffs - &f.coeffs).amax() < 1e-12);
        f.cache_grid(&s);
        assert!((f.grid_values().unwrap() - s.to_grid(&f)).amax() < 1e-12);
    }

    #[test]
    fn derivatives_and_neumann_condition() {
        let s = space();
        let grid = s.grid().clone();
        let values = grid.from_fn(|x, y| 1.0 + 0.2 * (2.0 * PI * x).sin() * (2.0 * PI * y).cos());
        let f = s.from_grid(&values);
        let [v, dx, dy, lap] = s.to_grid_with_derivatives(&f);
        for i in 0..grid.nx() {
            for j in 0..grid.ny() {
                let (x, y) = grid.point(i, j);
                let e = 0.2 * (2.0 * PI * x).sin() * (2.0 * PI * y).cos();
                assert!((v[(i, j)] - 1.0 - e).abs() < 1e-12);
                assert!(
                    (dx[(i, j)] - 0.4 * PI * (2.0 * PI * x).cos() * (2.0 * PI * y).cos()).abs()
                        < 1e-11
                );
                assert!(
                    (dy[(i, j)] + 0.4 * PI * (2.0 * PI * x).sin() * (2.0 * PI * y).sin()).abs()
                        < 1e-11
                );
                assert!((lap[(i, j)] + 8.0 * PI * PI * e).abs() < 1e-9);
            }
        }
        for wall_y in [0.0, 1.0] {
            assert!(s.eval_at(&f, 0.3, wall_y)[2].abs() < 1e-13);
        }
    }

    #[test]
    fn weak_divergence_has_zero_mean_and_matches_strong_form() {
        let s = space();
        let grid = s.grid().clone();
        // F = (sin(2 pi x) cos(pi y), cos(2 pi x) sin(pi y)), F.n = 0 on walls
        let fx = grid.from_fn(|x, y| (2.0 * PI * x).sin() * (PI * y).cos());
        let fy = grid.from_fn(|x, y| (2.0 * PI * x).cos() * (PI * y).sin());
        let div = s.weak_divergence(&[fx, fy]);
        assert_eq!(div[(0, 0)], 0.0);
        let strong = grid.from_fn(|x, y| {
            2.0 * PI * (2.0 * PI * x).cos() * (PI * y).cos()
                + PI * (2.0 * PI * x).cos() * (PI * y).cos()
        });
        let proj = s.from_grid(&strong);
        assert!((div - proj.coeffs).amax() < 1e-11);
    }
}
