//! Second-order forward-mode jets in `n` variables.
//!
//! A [`MultiJet`] carries a value, its gradient and its (symmetric) Hessian.
//! Model immersions are written once as functions of `MultiJet` coordinates
//! and the arithmetic propagates exact first and second partial derivatives.

use std::ops::{Add, Mul, Neg, Sub};

use crate::dsl::Jet2Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct MultiJet {
    pub value: f64,
    pub grad: Vec<f64>,
    /// Row-major `n x n`, symmetric.
    pub hess: Vec<f64>,
}

impl MultiJet {
    pub fn constant(n: usize, value: f64) -> Self {
        Self { value, grad: vec![0.0; n], hess: vec![0.0; n * n] }
    }

    /// The `i`-th coordinate function evaluated at `x`.
    pub fn variable(n: usize, i: usize, x: f64) -> Self {
        let mut j = Self::constant(n, x);
        j.grad[i] = 1.0;
        j
    }

    /// All `n` coordinate functions at the point `u`.
    pub fn variables(u: &[f64]) -> Vec<Self> {
        (0..u.len()).map(|i| Self::variable(u.len(), i, u[i])).collect()
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    pub fn second(&self, i: usize, j: usize) -> f64 {
        self.hess[i * self.dim() + j]
    }

    /// `g(self)` for a scalar function with value `g`, derivative `dg` and
    /// second derivative `ddg` at `self.value`.
    pub fn chain(&self, g: f64, dg: f64, ddg: f64) -> Self {
        let n = self.dim();
        let mut hess = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                hess[i * n + j] = ddg * self.grad[i] * self.grad[j] + dg * self.hess[i * n + j];
            }
        }
        Self { value: g, grad: self.grad.iter().map(|d| dg * d).collect(), hess }
    }

    /// Compose with a one-variable jet already evaluated at `self.value`.
    pub fn compose(&self, outer: Jet2Scalar) -> Self {
        self.chain(outer.value, outer.d1, outer.d2)
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn sqrt(&self) -> Self {
        let s = self.value.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.value))
    }

    pub fn recip(&self) -> Self {
        let r = 1.0 / self.value;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            value: s * self.value,
            grad: self.grad.iter().map(|d| s * d).collect(),
            hess: self.hess.iter().map(|d| s * d).collect(),
        }
    }

    pub fn square(&self) -> Self {
        self * self
    }
}

impl Add for &MultiJet {
    type Output = MultiJet;
    fn add(self, o: &MultiJet) -> MultiJet {
        MultiJet {
            value: self.value + o.value,
            grad: self.grad.iter().zip(&o.grad).map(|(a, b)| a + b).collect(),
            hess: self.hess.iter().zip(&o.hess).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &MultiJet {
    type Output = MultiJet;
    fn sub(self, o: &MultiJet) -> MultiJet {
        MultiJet {
            value: self.value - o.value,
            grad: self.grad.iter().zip(&o.grad).map(|(a, b)| a - b).collect(),
            hess: self.hess.iter().zip(&o.hess).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &MultiJet {
    type Output = MultiJet;
    fn mul(self, o: &MultiJet) -> MultiJet {
        let n = self.dim();
        let mut hess = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let k = i * n + j;
                hess[k] = self.hess[k] * o.value
                    + self.grad[i] * o.grad[j]
                    + self.grad[j] * o.grad[i]
                    + self.value * o.hess[k];
            }
        }
        MultiJet {
            value: self.value * o.value,
            grad: self.grad.iter().zip(&o.grad).map(|(a, b)| a * o.value + self.value * b).collect(),
            hess,
        }
    }
}

impl Neg for &MultiJet {
    type Output = MultiJet;
    fn neg(self) -> MultiJet {
        self.scale(-1.0)
    }
}

impl Add for MultiJet {
    type Output = MultiJet;
    fn add(self, o: MultiJet) -> MultiJet {
        &self + &o
    }
}

impl Sub for MultiJet {
    type Output = MultiJet;
    fn sub(self, o: MultiJet) -> MultiJet {
        &self - &o
    }
}

impl Mul for MultiJet {
    type Output = MultiJet;
    fn mul(self, o: MultiJet) -> MultiJet {
        &self * &o
    }
}

/// Point of the unit sphere `S^d` in hyperspherical angles `phi[0..d]`:
/// `x_1 = cos phi_1`, `x_2 = sin phi_1 cos phi_2`, ...,
/// `x_{d+1} = sin phi_1 ... sin phi_{d-1} sin phi_d`.
pub fn hyperspherical(phi: &[MultiJet]) -> Vec<MultiJet> {
    let d = phi.len();
    let n = phi.first().map(MultiJet::dim).unwrap_or(0);
    let mut out = Vec::with_capacity(d + 1);
    let mut prefix = MultiJet::constant(n, 1.0);
    for (k, p) in phi.iter().enumerate() {
        out.push(&prefix * &p.cos());
        prefix = &prefix * &p.sin();
        if k == d - 1 {
            out.push(prefix.clone());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule() {
        let v = MultiJet::variables(&[2.0, 3.0]);
        let f = &(&v[0] * &v[0]) * &v[1]; // x^2 y
        assert_eq!(f.value, 12.0);
        assert_eq!(f.grad, vec![12.0, 4.0]);
        assert_eq!(f.hess, vec![6.0, 4.0, 4.0, 0.0]);
    }

    #[test]
    fn sphere_point_is_unit() {
        let v = MultiJet::variables(&[0.7, 1.1, 2.3]);
        let x = hyperspherical(&v);
        assert_eq!(x.len(), 4);
        let norm2 = x.iter().fold(MultiJet::constant(3, 0.0), |acc, c| &acc + &c.square());
        assert!((norm2.value - 1.0).abs() < 1e-15);
        assert!(norm2.grad.iter().all(|g| g.abs() < 1e-15));
        assert!(norm2.hess.iter().all(|h| h.abs() < 1e-14));
    }

    #[test]
    fn chain_matches_finite_difference() {
        let f = |u: &[f64]| {
            let v = MultiJet::variables(u);
            (&v[0].sin() * &v[1].cos().recip()).sqrt()
        };
        let u = [0.4, 0.3];
        let j = f(&u);
        let h = 1e-5;
        for i in 0..2 {
            let mut up = u;
            let mut dn = u;
            up[i] += h;
            dn[i] -= h;
            let d = (f(&up).value - f(&dn).value) / (2.0 * h);
            assert!((d - j.grad[i]).abs() < 1e-8);
            let dd: Vec<f64> = (0..2).map(|k| (f(&up).grad[k] - f(&dn).grad[k]) / (2.0 * h)).collect();
            for k in 0..2 {
                assert!((dd[k] - j.second(i, k)).abs() < 1e-7);
            }
        }
    }
}
