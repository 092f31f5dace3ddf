//! Rational kernel functions of the exchange relations and the transfer-matrix
//! coefficients, written once over any [`Field`] so the same code yields
//! values (`C<T>`) and exact first derivatives ([`Jet`]).

use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{cabs, cr, Real, C};

/// Denominators below this modulus are treated as poles.
pub const POLE_EPS: f64 = 1e-12;

/// Arithmetic needed by the kernel functions.
pub trait Field:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    type Real: Real;

    fn lift(z: C<Self::Real>) -> Self;
    fn value(self) -> C<Self::Real>;

    fn constant(x: f64) -> Self {
        Self::lift(cr(x))
    }
}

impl<T: Real> Field for Complex<T> {
    type Real = T;

    fn lift(z: C<T>) -> Self {
        z
    }
    fn value(self) -> C<T> {
        self
    }
}

/// Value together with its first derivative along one direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet<T: Real> {
    pub v: C<T>,
    pub d: C<T>,
}

impl<T: Real> Jet<T> {
    /// Independent variable: derivative 1.
    pub fn var(v: C<T>) -> Self {
        Self { v, d: C::one() }
    }

    pub fn cst(v: C<T>) -> Self {
        Self { v, d: C::zero() }
    }
}

impl<T: Real> Add for Jet<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            v: self.v + o.v,
            d: self.d + o.d,
        }
    }
}

impl<T: Real> Sub for Jet<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self {
            v: self.v - o.v,
            d: self.d - o.d,
        }
    }
}

impl<T: Real> Mul for Jet<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self {
            v: self.v * o.v,
            d: self.d * o.v + self.v * o.d,
        }
    }
}

impl<T: Real> Div for Jet<T> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let q = self.v / o.v;
        Self {
            v: q,
            d: (self.d - q * o.d) / o.v,
        }
    }
}

impl<T: Real> Neg for Jet<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            v: -self.v,
            d: -self.d,
        }
    }
}

impl<T: Real> Field for Jet<T> {
    type Real = T;

    fn lift(z: C<T>) -> Self {
        Self::cst(z)
    }
    fn value(self) -> C<T> {
        self.v
    }
}

fn k<S: Field>(x: f64) -> S {
    S::constant(x)
}

pub fn f<S: Field>(u: S, v: S) -> S {
    (u - v - k(1.0)) * (u + v) / ((u - v) * (u + v + k(1.0)))
}

pub fn g<S: Field>(u: S, v: S) -> S {
    k::<S>(2.0) * v / ((k::<S>(2.0) * v + k(1.0)) * (u - v))
}

pub fn w<S: Field>(u: S, v: S) -> S {
    -k::<S>(1.0) / (u + v + k(1.0))
}

pub fn h<S: Field>(u: S, v: S) -> S {
    (u - v + k(1.0)) * (u + v + k(2.0)) / ((u - v) * (u + v + k(1.0)))
}

#[doc(alias = "k")]
pub fn kk<S: Field>(u: S, v: S) -> S {
    k::<S>(-2.0) * (u + k(1.0)) / ((u - v) * (k::<S>(2.0) * u + k(1.0)))
}

pub fn n<S: Field>(u: S, v: S) -> S {
    k::<S>(4.0) * v * (u + k(1.0))
        / ((u + v + k(1.0)) * (k::<S>(2.0) * v + k(1.0)) * (k::<S>(2.0) * u + k(1.0)))
}

pub fn x<S: Field>(u: S, v: S) -> S {
    k::<S>(2.0) * u * (u - v + k(1.0))
        / ((k::<S>(2.0) * u + k(1.0)) * (u + v + k(1.0)) * (u - v))
}

pub fn s<S: Field>(u: S, v: S) -> S {
    k::<S>(-2.0) * u / ((k::<S>(2.0) * u + k(1.0)) * (k::<S>(2.0) * v + k(1.0)) * (u - v))
}

#[doc(alias = "q")]
pub fn qk<S: Field>(u: S, v: S) -> S {
    (u + v) / ((u + v + k(1.0)) * (u - v))
}

pub fn r<S: Field>(u: S, v: S) -> S {
    k::<S>(-2.0) * u / ((k::<S>(2.0) * u + k(1.0)) * (u - v))
}

pub fn y<S: Field>(u: S, v: S) -> S {
    -k::<S>(1.0) / ((u + v + k(1.0)) * (k::<S>(2.0) * v + k(1.0)))
}

/// `Q(u, v) = (u - v)(u + v + 1)`; invariant under `v -> -v - 1`.
pub fn big_q<S: Field>(u: S, v: S) -> S {
    (u - v) * (u + v + k(1.0))
}

pub fn phi<S: Field>(u: S) -> S {
    k::<S>(2.0) * (u + k(1.0)) / (k::<S>(2.0) * u + k(1.0))
}

pub fn big_f<S: Field>(u: S, v: S) -> S {
    -(phi(u) * (k::<S>(2.0) * u + k(1.0))) / (phi(v) * big_q(u, v))
}

/// `φ̃(u) = (u+1)(2u+1) / ((p+u)(p-u-1))`.
pub fn phi_tilde<S: Field>(u: S, p: S) -> S {
    (u + k(1.0)) * (k::<S>(2.0) * u + k(1.0)) / ((p + u) * (p - u - k(1.0)))
}

/// Product `Π_j kernel(u, v_j)`.
pub fn prod<S: Field>(kernel: fn(S, S) -> S, u: S, vs: &[S]) -> S {
    vs.iter().fold(k(1.0), |acc, &v| acc * kernel(u, v))
}

/// Product over the set with index `skip` removed.
pub fn prod_except<S: Field>(kernel: fn(S, S) -> S, u: S, vs: &[S], skip: &[usize]) -> S {
    vs.iter()
        .enumerate()
        .filter(|(j, _)| !skip.contains(j))
        .fold(k(1.0), |acc, (_, &v)| acc * kernel(u, v))
}

/// Spectral point pair with every kernel denominator away from zero.
#[derive(Clone, Copy, Debug)]
pub struct KernelPoint<T: Real> {
    pub u: C<T>,
    pub v: C<T>,
}

impl<T: Real> KernelPoint<T> {
    pub fn new(u: C<T>, v: C<T>) -> Result<Self> {
        let one = cr::<T>(1.0);
        let two = cr::<T>(2.0);
        let guards = [
            ("f", u - v, "u - v"),
            ("f", u + v + one, "u + v + 1"),
            ("k", two * u + one, "2u + 1"),
            ("g", two * v + one, "2v + 1"),
        ];
        for (kernel, den, what) in guards {
            if cabs(den).to_f64() < POLE_EPS {
                return Err(Error::Pole {
                    kernel,
                    detail: format!("{what} = 0"),
                });
            }
        }
        Ok(Self { u, v })
    }
}

/// Every kernel evaluated at one point.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Kernels {
    pub f: C<f64>,
    pub g: C<f64>,
    pub w: C<f64>,
    pub h: C<f64>,
    pub k: C<f64>,
    pub n: C<f64>,
    pub x: C<f64>,
    pub s: C<f64>,
    pub q: C<f64>,
    pub r: C<f64>,
    pub y: C<f64>,
    pub big_f: C<f64>,
    pub big_q: C<f64>,
    pub phi_u: C<f64>,
    pub phi_tilde_u: Option<C<f64>>,
}

/// Evaluate the full kernel record; `p` enables `φ̃(u)`.
pub fn kernels<T: Real>(point: KernelPoint<T>, p: Option<C<T>>) -> Result<Kernels> {
    let (u, v) = (point.u, point.v);
    let lo = crate::linalg::scalar::to_c64::<T>;
    let phi_tilde_u = match p {
        Some(p) => {
            let one = cr::<T>(1.0);
            let den = (p + u) * (p - u - one);
            if cabs(den).to_f64() < POLE_EPS {
                return Err(Error::Pole {
                    kernel: "phi_tilde",
                    detail: "(p + u)(p - u - 1) = 0".into(),
                });
            }
            Some(lo(phi_tilde(u, p)))
        }
        None => None,
    };
    Ok(Kernels {
        f: lo(f(u, v)),
        g: lo(g(u, v)),
        w: lo(w(u, v)),
        h: lo(h(u, v)),
        k: lo(kk(u, v)),
        n: lo(n(u, v)),
        x: lo(x(u, v)),
        s: lo(s(u, v)),
        q: lo(qk(u, v)),
        r: lo(r(u, v)),
        y: lo(y(u, v)),
        big_f: lo(big_f(u, v)),
        big_q: lo(big_q(u, v)),
        phi_u: lo(phi(u)),
        phi_tilde_u,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    
    type Z = C<f64>;

    fn c(re: f64, im: f64) -> Z {
        Z::new(re, im)
    }

    fn re(x: f64) -> Z {
        c(x, 0.0)
    }

    #[test]
    fn direct_values() {
        assert_eq!(f(re(2.0), re(1.0)), re(0.0));
        assert!((h(re(1.0), re(0.0)) - re(3.0)).norm() < 1e-15);
        assert_eq!(w(re(0.0), re(0.0)), re(-1.0));
        assert_eq!(big_q(re(2.0), re(1.0)), re(4.0));
        assert_eq!(phi(re(0.0)), re(2.0));
    }

    #[test]
    fn q_reflection_invariance() {
        let u = c(0.3, -0.7);
        let v = c(-1.1, 0.4);
        let reflected = -v - re(1.0);
        assert!((big_q(u, reflected) - big_q(u, v)).norm() < 1e-15);
    }

    #[test]
    fn jet_derivative_matches_central_difference() {
        let u = c(0.37, 0.21);
        let v = c(-0.62, 0.44);
        let eps = 1e-6;
        macro_rules! check {
            ($($kernel:ident),*) => {$(
                let jet = $kernel(Jet::var(u), Jet::cst(v));
                let fd = ($kernel(u + re(eps), v) - $kernel(u - re(eps), v)) / re(2.0 * eps);
                assert!((jet.d - fd).norm() <= 1e-7 * fd.norm().max(1.0));
                assert_eq!(jet.v, $kernel(u, v));
            )*};
        }
        check!(f, g, w, h, kk, n, x, s, qk, r, y, big_q, big_f);
    }

    #[test]
    fn pole_guard_names_kernel() {
        let err = KernelPoint::new(re(0.5), re(0.5)).unwrap_err();
        assert!(matches!(err, Error::Pole { kernel: "f", .. }));
        let err = KernelPoint::new(re(-0.5), re(0.2)).unwrap_err();
        assert!(matches!(err, Error::Pole { kernel: "k", .. }));
        let pt = KernelPoint::new(re(1.0), re(0.0)).unwrap();
        let ks = kernels(pt, Some(re(3.0))).unwrap();
        assert!((ks.h - re(3.0)).norm() < 1e-15);
        let bad = kernels(KernelPoint::new(re(1.0), re(0.0)).unwrap(), Some(re(-1.0)));
        assert!(matches!(bad, Err(Error::Pole { kernel: "phi_tilde", .. })));
    }
}
