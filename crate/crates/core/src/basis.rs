//! Galerkin velocity space with zero normal trace on the channel walls.
//!
//! Modes are separable products `X_a(x) Y_b(y)` placed in one velocity
//! component:
//!
//! * x-component, `Y = cos(m pi y/H)`, `m >= 0` (slip modes),
//! * x-component, `Y = sin(m pi y/H)`, `m >= 1` (interior modes, optional),
//! * y-component, `Y = sin(m pi y/H)`, `m >= 1` (interior modes).
//!
//! `u . n = u_y` vanishes identically at `y in {0, H}` for every mode. The
//! flat coefficient ordering is lexicographic in
//! `(component, y-family, k, m, parity)` with `cos` before `sin` in both
//! slots; it is recorded in [`BasisMetadata`] so coefficient dumps are
//! self-describing.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Geometry, Grid, Wall};
use crate::trig::{analyze, synthesize, FourierX, Parity, Table, YFamily};

/// Whether the x-component carries the `sin(m pi y/H)` family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InteriorModes {
    #[default]
    Sine,
    Omit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mode {
    pub component: usize,
    pub family: YFamily,
    pub k: usize,
    pub m: usize,
    pub parity: Parity,
    /// Vanishes on both walls (member of the interior subspace).
    pub interior: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisMetadata {
    pub kx_max: usize,
    pub ky_max: usize,
    pub interior_modes: InteriorModes,
    pub dimension: usize,
    pub ordering: String,
    pub modes: Vec<Mode>,
}

/// Coefficient vector over a [`GalerkinBasis`].
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityCoeffs {
    pub c: DVector<f64>,
}

impl VelocityCoeffs {
    pub fn zeros(n: usize) -> Self {
        Self {
            c: DVector::zeros(n),
        }
    }

    pub fn from_vec(v: Vec<f64>) -> Self {
        Self {
            c: DVector::from_vec(v),
        }
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.c.amax()
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|v| v.is_finite())
    }

    /// `(a + b) / 2`
    pub fn midpoint(a: &Self, b: &Self) -> Self {
        Self {
            c: (&a.c + &b.c) * 0.5,
        }
    }
}

/// Velocity and its gradient on the quadrature grid; `grad[i][j] = d_j u_i`.
#[derive(Debug, Clone)]
pub struct VelocityGrid {
    pub u: [DMatrix<f64>; 2],
    pub grad: [[DMatrix<f64>; 2]; 2],
}

impl VelocityGrid {
    pub fn zeros(grid: &Grid) -> Self {
        let z = grid.zeros();
        Self {
            u: [z.clone(), z.clone()],
            grad: [[z.clone(), z.clone()], [z.clone(), z]],
        }
    }

    pub fn divergence(&self) -> DMatrix<f64> {
        &self.grad[0][0] + &self.grad[1][1]
    }

    pub fn speed_max(&self) -> f64 {
        self.u[0].zip_map(&self.u[1], |a, b| a.hypot(b)).max()
    }

    /// `|D(u)|^2` pointwise.
    pub fn strain_sq(&self) -> DMatrix<f64> {
        let dxx = &self.grad[0][0];
        let dyy = &self.grad[1][1];
        let off = (&self.grad[0][1] + &self.grad[1][0]) * 0.5;
        dxx.component_mul(dxx) + dyy.component_mul(dyy) + off.component_mul(&off) * 2.0
    }
}

/// Per-component layout: the y-functions concatenated, and the flat index
/// of coefficient `(a, b)`.
#[derive(Debug, Clone)]
struct Block {
    ytab: Table,
    /// Values of each y-function at the bottom and top wall.
    ywall: [Vec<f64>; 2],
    index: Vec<Vec<usize>>,
}

impl Block {
    fn width(&self) -> usize {
        self.ytab.val.ncols()
    }
}

#[derive(Debug, Clone)]
pub struct GalerkinBasis {
    geometry: Geometry,
    grid: Grid,
    kx_max: usize,
    ky_max: usize,
    interior_modes: InteriorModes,
    modes: Vec<Mode>,
    xtab: Table,
    blocks: [Block; 2],
    gram: DMatrix<f64>,
    gram_chol: Cholesky<f64, Dyn>,
}

/// Builds the standard basis (with the interior sine family in x).
pub fn build_velocity_basis(
    geometry: &Geometry,
    kx_max: usize,
    ky_max: usize,
) -> Result<GalerkinBasis> {
    GalerkinBasis::new(geometry, kx_max, ky_max, InteriorModes::Sine)
}

impl GalerkinBasis {
    pub fn new(
        geometry: &Geometry,
        kx_max: usize,
        ky_max: usize,
        interior_modes: InteriorModes,
    ) -> Result<Self> {
        if ky_max < 1 {
            return Err(Error::Argument(format!(
                "ky_max must be at least 1, got {ky_max}"
            )));
        }
        geometry.check_margin(kx_max, ky_max)?;
        let grid = geometry.grid();
        let fx = FourierX { kmax: kx_max };
        let xtab = fx.table(geometry, &grid.x.nodes);

        let mut x_families = vec![(YFamily::Cos, ky_max)];
        if interior_modes == InteriorModes::Sine {
            x_families.push((YFamily::Sin, ky_max));
        }
        let y_families = vec![(YFamily::Sin, ky_max)];

        let mut modes = Vec::new();
        let blocks = [
            Self::block(geometry, &grid, 0, fx, &x_families, &mut modes),
            Self::block(geometry, &grid, 1, fx, &y_families, &mut modes),
        ];

        let mut basis = Self {
            geometry: geometry.clone(),
            grid,
            kx_max,
            ky_max,
            interior_modes,
            modes,
            xtab,
            blocks,
            gram: DMatrix::zeros(0, 0),
            gram_chol: Cholesky::new(DMatrix::identity(1, 1)).expect("identity is SPD"),
        };
        let ones = basis.grid.from_fn(|_, _| 1.0);
        let gram = basis.weighted_mass(&ones);
        basis.gram_chol = Cholesky::new(gram.clone()).ok_or(Error::Singular("gram matrix"))?;
        basis.gram = gram;
        Ok(basis)
    }

    fn block(
        geometry: &Geometry,
        grid: &Grid,
        component: usize,
        fx: FourierX,
        families: &[(YFamily, usize)],
        modes: &mut Vec<Mode>,
    ) -> Block {
        let nx = fx.len();
        let mut columns: Vec<(YFamily, usize)> = Vec::new();
        for &(fam, mmax) in families {
            for b in 0..fam.len(mmax) {
                columns.push((fam, fam.mode(b)));
            }
        }
        let ny = grid.ny();
        let mut ytab = Table {
            val: DMatrix::zeros(ny, columns.len()),
            d1: DMatrix::zeros(ny, columns.len()),
            d2: DMatrix::zeros(ny, columns.len()),
        };
        let mut ywall = [vec![0.0; columns.len()], vec![0.0; columns.len()]];
        for (col, &(fam, m)) in columns.iter().enumerate() {
            for (j, &y) in grid.y.nodes.iter().enumerate() {
                let [v, d, dd] = fam.eval(geometry, m, y);
                ytab.val[(j, col)] = v;
                ytab.d1[(j, col)] = d;
                ytab.d2[(j, col)] = dd;
            }
            for (w, wall) in Wall::BOTH.iter().enumerate() {
                ywall[w][col] = match fam {
                    YFamily::Cos => fam.eval(geometry, m, geometry.wall_y(*wall))[0],
                    YFamily::Sin => 0.0,
                };
            }
        }
        let mut index = vec![vec![usize::MAX; columns.len()]; nx];
        // (component, family, k, m, parity)
        let mut col0 = 0;
        for &(fam, mmax) in families {
            let width = fam.len(mmax);
            for k in 0..=fx.kmax {
                for b in 0..width {
                    let parities: &[Parity] = if k == 0 {
                        &[Parity::Cos]
                    } else {
                        &[Parity::Cos, Parity::Sin]
                    };
                    for &parity in parities {
                        let a = FourierX::index(k, parity);
                        index[a][col0 + b] = modes.len();
                        modes.push(Mode {
                            component,
                            family: fam,
                            k,
                            m: fam.mode(b),
                            parity,
                            interior: fam == YFamily::Sin,
                        });
                    }
                }
            }
            col0 += width;
        }
        Block { ytab, ywall, index }
    }

    pub fn dim(&self) -> usize {
        self.modes.len()
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

    pub fn ky_max(&self) -> usize {
        self.ky_max
    }

    pub fn interior_modes(&self) -> InteriorModes {
        self.interior_modes
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn interior_flags(&self) -> Vec<bool> {
        self.modes.iter().map(|m| m.interior).collect()
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn gram_min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.gram.clone()).eigenvalues.min()
    }

    pub fn metadata(&self) -> BasisMetadata {
        BasisMetadata {
            kx_max: self.kx_max,
            ky_max: self.ky_max,
            interior_modes: self.interior_modes,
            dimension: self.dim(),
            ordering: "component, y-family (cos<sin), k, m, parity (cos<sin)".into(),
            modes: self.modes.clone(),
        }
    }

    /// Closed-form evaluation of mode `idx` and its gradient at `(x, y)`:
    /// returns `(value, grad)` with `grad[i][j] = d_j phi_i`.
    pub fn mode_at(&self, idx: usize, x: f64, y: f64) -> ([f64; 2], [[f64; 2]; 2]) {
        let mode = self.modes[idx];
        let a = FourierX::index(mode.k, mode.parity);
        let [xv, xd, _] = FourierX::eval(&self.geometry, a, x);
        let [yv, yd, _] = mode.family.eval(&self.geometry, mode.m, y);
        let mut value = [0.0; 2];
        let mut grad = [[0.0; 2]; 2];
        value[mode.component] = xv * yv;
        grad[mode.component] = [xd * yv, xv * yd];
        (value, grad)
    }

    /// Pointwise evaluation of a coefficient vector.
    pub fn eval_at(&self, c: &VelocityCoeffs, x: f64, y: f64) -> ([f64; 2], [[f64; 2]; 2]) {
        let mut value = [0.0; 2];
        let mut grad = [[0.0; 2]; 2];
        for (idx, &ck) in c.c.iter().enumerate() {
            if ck == 0.0 {
                continue;
            }
            let (v, g) = self.mode_at(idx, x, y);
            for i in 0..2 {
                value[i] += ck * v[i];
                for j in 0..2 {
                    grad[i][j] += ck * g[i][j];
                }
            }
        }
        (value, grad)
    }

    fn gather(&self, component: usize, c: &DVector<f64>) -> DMatrix<f64> {
        let block = &self.blocks[component];
        DMatrix::from_fn(self.xtab.val.ncols(), block.width(), |a, b| {
            let idx = block.index[a][b];
            if idx == usize::MAX {
                0.0
            } else {
                c[idx]
            }
        })
    }

    fn scatter(&self, component: usize, m: &DMatrix<f64>, out: &mut DVector<f64>) {
        let block = &self.blocks[component];
        for (a, row) in block.index.iter().enumerate() {
            for (b, &idx) in row.iter().enumerate() {
                if idx != usize::MAX {
                    out[idx] += m[(a, b)];
                }
            }
        }
    }

    /// Velocity and gradient on the quadrature grid.
    pub fn evaluate(&self, c: &VelocityCoeffs) -> VelocityGrid {
        let xt = &self.xtab;
        let eval = |component: usize| {
            let coeffs = self.gather(component, &c.c);
            let yt = &self.blocks[component].ytab;
            let u = synthesize(&xt.val, &coeffs, &yt.val);
            let dx = synthesize(&xt.d1, &coeffs, &yt.val);
            let dy = synthesize(&xt.val, &coeffs, &yt.d1);
            (u, dx, dy)
        };
        let (ux, uxx, uxy) = eval(0);
        let (uy, uyx, uyy) = eval(1);
        VelocityGrid {
            u: [ux, uy],
            grad: [[uxx, uxy], [uyx, uyy]],
        }
    }

    /// Velocity values only (no gradient) on the quadrature grid.
    pub fn evaluate_values(&self, c: &VelocityCoeffs) -> [DMatrix<f64>; 2] {
        let v = |component: usize| {
            let coeffs = self.gather(component, &c.c);
            synthesize(&self.xtab.val, &coeffs, &self.blocks[component].ytab.val)
        };
        [v(0), v(1)]
    }

    /// Tangential (x) velocity at the wall nodes `grid.x.nodes`.
    pub fn wall_velocity(&self, c: &VelocityCoeffs, wall: Wall) -> Vec<f64> {
        let w = wall_slot(wall);
        let coeffs = self.gather(0, &c.c);
        let ywall = DVector::from_column_slice(&self.blocks[0].ywall[w]);
        let line = &self.xtab.val * (coeffs * ywall);
        line.iter().copied().collect()
    }

    /// Load vector `b_k = int v . phi_k + G : grad phi_k dx` by quadrature.
    /// Either part may be omitted.
    pub fn test_fields(
        &self,
        v: Option<&[DMatrix<f64>; 2]>,
        g: Option<&[[DMatrix<f64>; 2]; 2]>,
    ) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        let xt = &self.xtab;
        for component in 0..2 {
            let yt = &self.blocks[component].ytab;
            let mut acc = DMatrix::zeros(xt.val.ncols(), yt.val.ncols());
            if let Some(v) = v {
                acc += analyze(&xt.val, &self.grid.weighted(&v[component]), &yt.val);
            }
            if let Some(g) = g {
                acc += analyze(&xt.d1, &self.grid.weighted(&g[component][0]), &yt.val);
                acc += analyze(&xt.val, &self.grid.weighted(&g[component][1]), &yt.d1);
            }
            self.scatter(component, &acc, &mut out);
        }
        out
    }

    /// Wall load `b_k = int_wall s(x) phi_k,x(x, wall) dx` for a tangential
    /// density `s` sampled at the grid x-nodes.
    pub fn test_wall(&self, wall: Wall, s: &[f64]) -> DVector<f64> {
        let w = wall_slot(wall);
        let weighted = DVector::from_iterator(
            s.len(),
            s.iter().zip(&self.grid.x.weights).map(|(a, b)| a * b),
        );
        let xproj = self.xtab.val.tr_mul(&weighted);
        let ywall = DVector::from_column_slice(&self.blocks[0].ywall[w]);
        let m = xproj * ywall.transpose();
        let mut out = DVector::zeros(self.dim());
        self.scatter(0, &m, &mut out);
        out
    }

    /// `M_jk = int rho phi_j . phi_k dx` by sum factorisation.
    pub(crate) fn weighted_mass(&self, rho: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.dim();
        let nxf = self.xtab.val.ncols();
        let grid = &self.grid;
        let mut out = DMatrix::zeros(n, n);
        // T_j[a, a'] = sum_i wx_i rho_ij X_a X_a'
        let mut tj = Vec::with_capacity(grid.ny());
        for j in 0..grid.ny() {
            let scaled = DMatrix::from_fn(grid.nx(), nxf, |i, a| {
                grid.x.weights[i] * rho[(i, j)] * self.xtab.val[(i, a)]
            });
            tj.push(self.xtab.val.tr_mul(&scaled));
        }
        for block in &self.blocks {
            let width = block.width();
            let mut local = DMatrix::zeros(nxf * width, nxf * width);
            for (j, t) in tj.iter().enumerate() {
                let wy = grid.y.weights[j];
                for b in 0..width {
                    let yb = wy * block.ytab.val[(j, b)];
                    if yb == 0.0 {
                        continue;
                    }
                    for bp in b..width {
                        let s = yb * block.ytab.val[(j, bp)];
                        for a in 0..nxf {
                            for ap in 0..nxf {
                                local[(b * nxf + a, bp * nxf + ap)] += s * t[(a, ap)];
                            }
                        }
                    }
                }
            }
            for b in 0..width {
                for bp in b..width {
                    for a in 0..nxf {
                        let ia = block.index[a][b];
                        if ia == usize::MAX {
                            continue;
                        }
                        for ap in 0..nxf {
                            let ib = block.index[ap][bp];
                            if ib == usize::MAX {
                                continue;
                            }
                            let v = local[(b * nxf + a, bp * nxf + ap)];
                            out[(ia, ib)] = v;
                            out[(ib, ia)] = v;
                        }
                    }
                }
            }
        }
        out
    }

    /// Solves `gram c = rhs`.
    pub fn solve_gram(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.gram_chol.solve(rhs)
    }

    /// `L^2` projection of a vector field sampled on the quadrature grid.
    pub fn project_l2(&self, field: &[DMatrix<f64>; 2]) -> Result<VelocityCoeffs> {
        for f in field {
            if f.nrows() != self.grid.nx() || f.ncols() != self.grid.ny() {
                return Err(Error::Argument(
                    "field not sampled on the basis quadrature grid".into(),
                ));
            }
        }
        let b = self.test_fields(Some(field), None);
        let c = self.solve_gram(&b);
        if !c.iter().all(|v| v.is_finite()) {
            return Err(Error::Singular("gram matrix"));
        }
        Ok(VelocityCoeffs { c })
    }

    /// `int |u|^2` of a coefficient vector, via the gram matrix.
    pub fn l2_norm_sq(&self, c: &VelocityCoeffs) -> f64 {
        c.c.dot(&(&self.gram * &c.c))
    }
}

fn wall_slot(wall: Wall) -> usize {
    match wall {
        Wall::Bottom => 0,
        Wall::Top => 1,
    }
}
