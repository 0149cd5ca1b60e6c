//! Closed-form one-dimensional trigonometric families and the separable
//! synthesis/analysis kernels built on them.

use nalgebra::DMatrix;

use crate::geometry::Geometry;

/// Parity of a Fourier function in x.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Parity {
    Cos,
    Sin,
}

/// Real Fourier functions in x: index 0 is the constant, index `2k-1` is
/// `cos(2 pi k x / Lx)` and index `2k` is `sin(2 pi k x / Lx)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FourierX {
    pub kmax: usize,
}

impl FourierX {
    pub fn len(&self) -> usize {
        2 * self.kmax + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(k: usize, parity: Parity) -> usize {
        match (k, parity) {
            (0, _) => 0,
            (k, Parity::Cos) => 2 * k - 1,
            (k, Parity::Sin) => 2 * k,
        }
    }

    pub fn decode(a: usize) -> (usize, Parity) {
        if a == 0 {
            (0, Parity::Cos)
        } else if a % 2 == 1 {
            (a.div_ceil(2), Parity::Cos)
        } else {
            (a / 2, Parity::Sin)
        }
    }

    /// Value, first and second derivative of function `a` at `x`.
    pub fn eval(geometry: &Geometry, a: usize, x: f64) -> [f64; 3] {
        let (k, parity) = Self::decode(a);
        if k == 0 {
            return [1.0, 0.0, 0.0];
        }
        let kappa = geometry.kx(k);
        let (s, c) = (kappa * x).sin_cos();
        match parity {
            Parity::Cos => [c, -kappa * s, -kappa * kappa * c],
            Parity::Sin => [s, kappa * c, -kappa * kappa * s],
        }
    }

    /// `int_0^Lx X_a^2 dx`.
    pub fn norm_sq(geometry: &Geometry, a: usize) -> f64 {
        if a == 0 {
            geometry.lx
        } else {
            0.5 * geometry.lx
        }
    }

    /// Squared wavenumber of function `a`.
    pub fn eigen(geometry: &Geometry, a: usize) -> f64 {
        let k = geometry.kx(Self::decode(a).0);
        k * k
    }

    pub fn table(&self, geometry: &Geometry, nodes: &[f64]) -> Table {
        Table::build(nodes, self.len(), |a, x| Self::eval(geometry, a, x))
    }
}

/// Family of wall-normal functions `cos(m pi y / H)` or `sin(m pi y / H)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum YFamily {
    /// `cos(m pi y/H)` for `m = 0..=mmax`
    Cos,
    /// `sin(m pi y/H)` for `m = 1..=mmax`
    Sin,
}

impl YFamily {
    pub fn len(self, mmax: usize) -> usize {
        match self {
            YFamily::Cos => mmax + 1,
            YFamily::Sin => mmax,
        }
    }

    /// Mode number of the `b`-th member.
    pub fn mode(self, b: usize) -> usize {
        match self {
            YFamily::Cos => b,
            YFamily::Sin => b + 1,
        }
    }

    pub fn eval(self, geometry: &Geometry, m: usize, y: f64) -> [f64; 3] {
        let kappa = geometry.ky(m);
        let (s, c) = (kappa * y).sin_cos();
        match self {
            YFamily::Cos => [c, -kappa * s, -kappa * kappa * c],
            YFamily::Sin => [s, kappa * c, -kappa * kappa * s],
        }
    }

    pub fn table(self, geometry: &Geometry, mmax: usize, nodes: &[f64]) -> Table {
        Table::build(nodes, self.len(mmax), |b, y| {
            self.eval(geometry, self.mode(b), y)
        })
    }
}

/// Values and derivatives of a function family at a set of nodes;
/// each matrix is `nodes x functions`.
#[derive(Debug, Clone)]
pub struct Table {
    pub val: DMatrix<f64>,
    pub d1: DMatrix<f64>,
    pub d2: DMatrix<f64>,
}

impl Table {
    fn build(nodes: &[f64], nfun: usize, f: impl Fn(usize, f64) -> [f64; 3]) -> Self {
        let mut val = DMatrix::zeros(nodes.len(), nfun);
        let mut d1 = val.clone();
        let mut d2 = val.clone();
        for (i, &x) in nodes.iter().enumerate() {
            for a in 0..nfun {
                let [v, d, dd] = f(a, x);
                val[(i, a)] = v;
                d1[(i, a)] = d;
                d2[(i, a)] = dd;
            }
        }
        Self { val, d1, d2 }
    }

    pub fn select(&self, order: usize) -> &DMatrix<f64> {
        match order {
            0 => &self.val,
            1 => &self.d1,
            2 => &self.d2,
            _ => panic!("derivative order {order} not tabulated"),
        }
    }
}

/// `sum_ab C_ab X_a(x_i) Y_b(y_j)` for all grid points.
pub fn synthesize(xt: &DMatrix<f64>, coeffs: &DMatrix<f64>, yt: &DMatrix<f64>) -> DMatrix<f64> {
    (xt * coeffs) * yt.transpose()
}

/// `sum_ij G_ij X_a(x_i) Y_b(y_j)` for already weighted grid data `G`.
pub fn analyze(xt: &DMatrix<f64>, weighted: &DMatrix<f64>, yt: &DMatrix<f64>) -> DMatrix<f64> {
    xt.tr_mul(weighted) * yt
}
