//! Convex `C^1` regularisation of the absolute value used for the wall
//! friction law:
//!
//! ```text
//! j(v) = |v|                    if |v| >  delta
//!        |v|^2/(2 delta) + delta/2  if |v| <= delta
//! ```
//!
//! Its gradient is `v/|v|` outside the ball and `v/delta` inside, so it is
//! bounded by one, aligned with `v`, and Lipschitz with constant `1/delta`.

use crate::error::{Error, Result};

/// Regularisation width, in velocity units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrictionReg {
    delta: f64,
}

impl FrictionReg {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Argument(format!(
                "friction regularisation delta must be positive, got {delta}"
            )));
        }
        Ok(Self { delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn value<const D: usize>(&self, v: &[f64; D]) -> f64 {
        let r = norm(v);
        if r > self.delta {
            r
        } else {
            r * r / (2.0 * self.delta) + 0.5 * self.delta
        }
    }

    pub fn grad<const D: usize>(&self, v: &[f64; D]) -> [f64; D] {
        let r = norm(v);
        let scale = if r > self.delta {
            1.0 / r
        } else {
            1.0 / self.delta
        };
        v.map(|x| x * scale)
    }

    /// Scalar (tangential) versions for the channel walls, where the slip
    /// velocity has a single component.
    pub fn value_1d(&self, v: f64) -> f64 {
        self.value(&[v])
    }

    pub fn grad_1d(&self, v: f64) -> f64 {
        self.grad(&[v])[0]
    }
}

fn norm<const D: usize>(v: &[f64; D]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `j_delta(v)`.
pub fn j_delta<const D: usize>(v: &[f64; D], delta: f64) -> Result<f64> {
    Ok(FrictionReg::new(delta)?.value(v))
}

/// `grad j_delta(v)`.
pub fn grad_j_delta<const D: usize>(v: &[f64; D], delta: f64) -> Result<[f64; D]> {
    Ok(FrictionReg::new(delta)?.grad(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn value_examples() {
        assert!((j_delta(&[0.0, 0.0], 0.1).unwrap() - 0.05).abs() < 1e-15);
        assert!((j_delta(&[3.0, 4.0], 1.0).unwrap() - 5.0).abs() < 1e-15);
        assert!((j_delta(&[0.06, 0.08], 0.2).unwrap() - 0.125).abs() < 1e-15);
    }

    #[test]
    fn gradient_examples() {
        let g = grad_j_delta(&[3.0, 4.0], 1.0).unwrap();
        assert!((g[0] - 0.6).abs() < 1e-15 && (g[1] - 0.8).abs() < 1e-15);
        assert_eq!(grad_j_delta(&[0.0, 0.0], 0.3).unwrap(), [0.0, 0.0]);
        let g = grad_j_delta(&[0.05, 0.0], 0.1).unwrap();
        assert!((g[0] - 0.5).abs() < 1e-15 && g[1] == 0.0);
    }

    #[test]
    fn rejects_nonpositive_delta() {
        assert!(j_delta(&[1.0], 0.0).is_err());
        assert!(grad_j_delta(&[1.0, 2.0], -1.0).is_err());
        assert!(FrictionReg::new(f64::NAN).is_err());
    }

    #[test]
    fn switching_sphere_uses_inner_branch_and_is_continuous() {
        let reg = FrictionReg::new(0.5).unwrap();
        let v = [0.3, 0.4];
        assert!((reg.value(&v) - 0.5).abs() < 1e-15);
        let g = reg.grad(&v);
        assert!((g[0] - 0.6).abs() < 1e-15 && (g[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let reg = FrictionReg::new(0.2).unwrap();
        for v in [[0.05, -0.03], [0.5, 0.1], [-1.0, 2.0], [0.01, 0.12]] {
            let g = reg.grad(&v);
            let mut errs = Vec::new();
            for h in [1e-4, 1e-5] {
                let mut e = 0.0f64;
                for d in 0..2 {
                    let mut p = v;
                    let mut m = v;
                    p[d] += h;
                    m[d] -= h;
                    let fd = (reg.value(&p) - reg.value(&m)) / (2.0 * h);
                    e = e.max((fd - g[d]).abs());
                }
                errs.push(e);
            }
            // O(h^2) away from the switching sphere: 1e-8 is generous.
            assert!(errs[0] < 1e-7 && errs[1] < 1e-8, "{v:?}: {errs:?}");
        }
    }

    proptest! {
        #[test]
        fn kernel_properties(vx in -3.0f64..3.0, vy in -3.0f64..3.0, wx in -3.0f64..3.0, wy in -3.0f64..3.0, delta in 1e-3f64..2.0) {
            let reg = FrictionReg::new(delta).unwrap();
            let v = [vx, vy];
            let w = [wx, wy];
            let g = reg.grad(&v);
            let r = vx.hypot(vy);
            prop_assert!(g[0].hypot(g[1]) <= 1.0 + 1e-12);
            prop_assert!(g[0] * vx + g[1] * vy >= -1e-15);
            prop_assert!((reg.value(&v) - r).abs() <= delta);
            prop_assert!(((g[0] * vx + g[1] * vy) - r).abs() <= delta / 4.0 + 1e-15);
            prop_assert!(reg.value(&v) >= delta / 2.0);
            let mid = [(vx + wx) / 2.0, (vy + wy) / 2.0];
            prop_assert!(reg.value(&mid) <= 0.5 * (reg.value(&v) + reg.value(&w)) + 1e-14);
        }
    }
}
