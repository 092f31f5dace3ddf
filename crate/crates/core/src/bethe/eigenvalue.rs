//! Vacuum eigenvalues, transfer-matrix coefficients, the dressed and
//! inhomogeneous eigenvalue pieces and the Bethe-equation amplitudes.
//!
//! The generic functions take any [`Field`]; evaluating them on [`Jet`]s
//! gives exact derivatives with respect to whichever argument carries the
//! unit tangent.
//!
//! [`Jet`]: super::kernels::Jet

use serde::Serialize;

use super::kernels::{self, big_q, f, h, phi, prod, prod_except, Field, POLE_EPS};
use crate::chain::Chain;
use crate::error::{Error, Result};
use crate::linalg::scalar::to_c64;
use crate::linalg::{cabs64, cr, Real, C};

fn k<S: Field>(x: f64) -> S {
    S::constant(x)
}

pub fn lambda1<S: Field>(ch: &Chain<S::Real>, u: S) -> S {
    let p = S::lift(ch.boundary.p);
    ch.spec.thetas.iter().fold(u + p, |acc, &t| {
        let t = S::lift(t);
        acc * (u + k(1.0) - t) * (u + k(1.0) + t)
    })
}

pub fn lambda2<S: Field>(ch: &Chain<S::Real>, u: S) -> S {
    let p = S::lift(ch.boundary.p);
    let head = phi(-u - k(1.0)) * (p - u - k(1.0));
    ch.spec.thetas.iter().fold(head, |acc, &t| {
        let t = S::lift(t);
        acc * (u - t) * (u + t)
    })
}

pub fn alpha<S: Field>(ch: &Chain<S::Real>, u: S) -> S {
    phi(u) * (S::lift(ch.boundary.q) + u)
}

pub fn delta<S: Field>(ch: &Chain<S::Real>, u: S) -> S {
    S::lift(ch.boundary.q) - u - k(1.0)
}

pub fn beta<S: Field>(ch: &Chain<S::Real>, u: S) -> S {
    S::lift(ch.boundary.xi_minus) * (u + k(1.0))
}

pub fn gamma<S: Field>(ch: &Chain<S::Real>, u: S) -> S {
    S::lift(ch.boundary.xi_plus) * (u + k(1.0))
}

pub fn alpha_bar<S: Field>(ch: &Chain<S::Real>, u: S) -> S {
    let one_minus_rho = k::<S>(1.0) - S::lift(ch.boundary.rho);
    phi(u) * (S::lift(ch.boundary.q) + u * one_minus_rho)
}

pub fn delta_bar<S: Field>(ch: &Chain<S::Real>, u: S) -> S {
    let one_minus_rho = k::<S>(1.0) - S::lift(ch.boundary.rho);
    S::lift(ch.boundary.q) - (k::<S>(1.0) + u) * one_minus_rho
}

pub fn phi_tilde<S: Field>(ch: &Chain<S::Real>, u: S) -> S {
    kernels::phi_tilde(u, S::lift(ch.boundary.p))
}

fn others<S: Field>(roots: &[S], i: usize) -> Vec<S> {
    roots
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &r)| r)
        .collect()
}

/// `Λ_d^M(u, ū) = ᾱΛ₁ f(u, ū) + δ̄Λ₂ h(u, ū)`.
pub fn lambda_d<S: Field>(ch: &Chain<S::Real>, u: S, roots: &[S]) -> S {
    alpha_bar(ch, u) * lambda1(ch, u) * prod(f, u, roots)
        + delta_bar(ch, u) * lambda2(ch, u) * prod(h, u, roots)
}

/// The two terms of `E_d^M(u_i, ū_i)`.
pub fn e_d_terms<S: Field>(ch: &Chain<S::Real>, i: usize, roots: &[S]) -> [S; 2] {
    let ui = roots[i];
    let rest = others(roots, i);
    [
        -(phi(-ui - k(1.0)) * alpha_bar(ch, ui) * lambda1(ch, ui) * prod(f, ui, &rest)),
        phi(ui) * delta_bar(ch, ui) * lambda2(ch, ui) * prod(h, ui, &rest),
    ]
}

pub fn e_d<S: Field>(ch: &Chain<S::Real>, i: usize, roots: &[S]) -> S {
    let [a, b] = e_d_terms(ch, i, roots);
    a + b
}

/// `Λ_g^N(u, ū) = ρ φ̃(u) Λ₁Λ₂ / Q(u, ū)`.
pub fn lambda_g<S: Field>(ch: &Chain<S::Real>, u: S, roots: &[S]) -> S {
    S::lift(ch.boundary.rho) * phi_tilde(ch, u) * lambda1(ch, u) * lambda2(ch, u)
        / prod(big_q, u, roots)
}

pub fn e_g<S: Field>(ch: &Chain<S::Real>, i: usize, roots: &[S]) -> S {
    let ui = roots[i];
    S::lift(ch.boundary.rho) * phi_tilde(ch, ui) / (k::<S>(2.0) * ui + k(1.0))
        * lambda1(ch, ui)
        * lambda2(ch, ui)
        / prod_except(big_q, ui, roots, &[i])
}

pub fn lambda_total<S: Field>(ch: &Chain<S::Real>, u: S, roots: &[S]) -> S {
    lambda_d(ch, u, roots) + lambda_g(ch, u, roots)
}

pub fn e_total<S: Field>(ch: &Chain<S::Real>, i: usize, roots: &[S]) -> S {
    e_d(ch, i, roots) + e_g(ch, i, roots)
}

/// `|E_i|` divided by the sum of the moduli of its three terms.
pub fn scaled_residual<T: Real>(ch: &Chain<T>, i: usize, roots: &[C<T>]) -> f64 {
    let [a, b] = e_d_terms(ch, i, roots);
    let g = e_g(ch, i, roots);
    let scale = cabs64(a) + cabs64(b) + cabs64(g);
    let e = cabs64(a + b + g);
    if scale == 0.0 {
        e
    } else {
        e / scale
    }
}

/// Same scaling for the dressed amplitudes alone (diagonal sector equations).
pub fn scaled_residual_d<T: Real>(ch: &Chain<T>, i: usize, roots: &[C<T>]) -> f64 {
    let [a, b] = e_d_terms(ch, i, roots);
    let scale = cabs64(a) + cabs64(b);
    let e = cabs64(a + b);
    if scale == 0.0 {
        e
    } else {
        e / scale
    }
}

fn pole(kernel: &'static str, detail: impl Into<String>) -> Error {
    Error::Pole {
        kernel,
        detail: detail.into(),
    }
}

/// Pole guards for evaluating at `u` against `roots`.
pub fn guard_point<T: Real>(ch: &Chain<T>, u: C<T>, roots: &[C<T>]) -> Result<()> {
    let one = cr::<T>(1.0);
    let two = cr::<T>(2.0);
    if cabs64(two * u + one) < POLE_EPS {
        return Err(pole("phi", "2u + 1 = 0"));
    }
    for (j, &r) in roots.iter().enumerate() {
        if cabs64(u - r) < POLE_EPS {
            return Err(pole("f", format!("u - u_{j} = 0")));
        }
        if cabs64(u + r + one) < POLE_EPS {
            return Err(pole("f", format!("u + u_{j} + 1 = 0")));
        }
    }
    let p = ch.boundary.p;
    if !ch.is_diagonal() && (cabs64(p + u) < POLE_EPS || cabs64(p - u - one) < POLE_EPS) {
        return Err(pole("phi_tilde", "(p + u)(p - u - 1) = 0"));
    }
    Ok(())
}

/// Guards for the amplitudes `E(u_i, ū_i)`.
pub fn guard_roots<T: Real>(ch: &Chain<T>, roots: &[C<T>]) -> Result<()> {
    for i in 0..roots.len() {
        let rest: Vec<_> = others(roots, i);
        guard_point(ch, roots[i], &rest)?;
    }
    Ok(())
}

/// All coefficients and eigenvalue pieces at one spectral point.
#[derive(Clone, Debug, Serialize)]
pub struct EigenvalueData {
    pub lambda1: C<f64>,
    pub lambda2: C<f64>,
    pub lambda_d: C<f64>,
    pub lambda_g: C<f64>,
    pub lambda_total: C<f64>,
    pub alpha: C<f64>,
    pub delta: C<f64>,
    pub beta: C<f64>,
    pub gamma: C<f64>,
    pub alpha_bar: C<f64>,
    pub delta_bar: C<f64>,
    pub phi: C<f64>,
    pub phi_tilde: C<f64>,
}

pub fn eigenvalue_data<T: Real>(ch: &Chain<T>, u: C<T>, roots: &[C<T>]) -> Result<EigenvalueData> {
    guard_point(ch, u, roots)?;
    let lg = if roots.len() == ch.sites() {
        lambda_g(ch, u, roots)
    } else {
        C::new(T::zero(), T::zero())
    };
    let ld = lambda_d(ch, u, roots);
    let lo = to_c64::<T>;
    Ok(EigenvalueData {
        lambda1: lo(lambda1(ch, u)),
        lambda2: lo(lambda2(ch, u)),
        lambda_d: lo(ld),
        lambda_g: lo(lg),
        lambda_total: lo(ld + lg),
        alpha: lo(alpha(ch, u)),
        delta: lo(delta(ch, u)),
        beta: lo(beta(ch, u)),
        gamma: lo(gamma(ch, u)),
        alpha_bar: lo(alpha_bar(ch, u)),
        delta_bar: lo(delta_bar(ch, u)),
        phi: lo(phi(u)),
        phi_tilde: lo(phi_tilde(ch, u)),
    })
}

/// `(Λ₁(u), Λ₂(u))`.
pub fn vacuum_eigenvalues<T: Real>(ch: &Chain<T>, u: C<T>) -> Result<(C<T>, C<T>)> {
    if cabs64(cr::<T>(2.0) * u + cr(1.0)) < POLE_EPS {
        return Err(pole("phi", "2u + 1 = 0"));
    }
    Ok((lambda1(ch, u), lambda2(ch, u)))
}

/// `(Λ_d^M(u, ū), [E_d^M(u_i, ū_i)])` for any `M`.
pub fn eigenvalue_dressed<T: Real>(
    ch: &Chain<T>,
    u: C<T>,
    roots: &[C<T>],
) -> Result<(C<T>, Vec<C<T>>)> {
    guard_point(ch, u, roots)?;
    guard_roots(ch, roots)?;
    let amps = (0..roots.len()).map(|i| e_d(ch, i, roots)).collect();
    Ok((lambda_d(ch, u, roots), amps))
}

/// Inhomogeneous piece and total; needs exactly `N` roots.
#[derive(Clone, Debug)]
pub struct Inhomogeneous<T: Real> {
    pub lambda_g: C<T>,
    pub e_g: Vec<C<T>>,
    pub lambda_total: C<T>,
}

pub fn eigenvalue_inhomogeneous<T: Real>(
    ch: &Chain<T>,
    u: C<T>,
    roots: &[C<T>],
) -> Result<Inhomogeneous<T>> {
    require_full(ch, roots)?;
    guard_point(ch, u, roots)?;
    guard_roots(ch, roots)?;
    Ok(Inhomogeneous {
        lambda_g: lambda_g(ch, u, roots),
        e_g: (0..roots.len()).map(|i| e_g(ch, i, roots)).collect(),
        lambda_total: lambda_total(ch, u, roots),
    })
}

pub(crate) fn require_full<T: Real>(ch: &Chain<T>, roots: &[C<T>]) -> Result<()> {
    if roots.len() != ch.sites() {
        return Err(Error::InvalidRoots(format!(
            "{} roots given, the inhomogeneous term needs exactly N = {}",
            roots.len(),
            ch.sites()
        )));
    }
    Ok(())
}

/// `[E^N(u_i, ū_i)]`; in diagonal mode these are the dressed amplitudes.
pub fn bethe_residuals<T: Real>(ch: &Chain<T>, roots: &[C<T>]) -> Result<Vec<C<T>>> {
    if !ch.is_diagonal() {
        require_full(ch, roots)?;
    }
    guard_roots(ch, roots)?;
    Ok((0..roots.len()).map(|i| e_total(ch, i, roots)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{BoundaryParams, ChainSpec};
    use crate::bethe::kernels::Jet;
    
    type Z = C<f64>;

    fn c(re: f64, im: f64) -> Z {
        Z::new(re, im)
    }

    fn chain(thetas: Vec<Z>) -> Chain<f64> {
        let bp = BoundaryParams::new(c(2.1, 0.2), c(1.4, -0.3), c(0.7, 0.2), c(-0.5, 0.4)).unwrap();
        Chain::new(ChainSpec { sites: thetas.len(), thetas }, bp)
    }

    #[test]
    fn single_site_vacuum() {
        let ch = chain(vec![Z::new(0.0, 0.0)]);
        let u = c(0.3, -0.4);
        let p = ch.boundary.p;
        let want = (u + p) * (u + 1.0) * (u + 1.0);
        assert!((lambda1(&ch, u) - want).norm() < 1e-14);
        assert_eq!(lambda2(&ch, Z::new(0.0, 0.0)), Z::new(0.0, 0.0));
    }

    #[test]
    fn lambda_g_vanishes_at_theta() {
        let ch = chain(vec![c(0.2, 0.1), c(-0.3, 0.25)]);
        let roots = [c(0.4, 0.3), c(-0.7, 0.2)];
        assert!(lambda_g(&ch, ch.spec.thetas[0], &roots).norm() < 1e-15);
    }

    #[test]
    fn empty_roots_dressed() {
        let ch = chain(vec![c(0.2, 0.1)]);
        let u = c(0.5, 0.6);
        let want = alpha_bar(&ch, u) * lambda1(&ch, u) + delta_bar(&ch, u) * lambda2(&ch, u);
        assert_eq!(lambda_d(&ch, u, &[]), want);
    }

    #[test]
    fn reflection_of_a_root_leaves_lambda_unchanged() {
        let ch = chain(vec![c(0.2, 0.1), c(-0.3, 0.25)]);
        let roots = [c(0.4, 0.3), c(-0.7, 0.2)];
        let u = c(0.11, -0.6);
        let base = lambda_total(&ch, u, &roots);
        let refl = [roots[0], -roots[1] - 1.0];
        assert!((lambda_total(&ch, u, &refl) - base).norm() <= 1e-12 * base.norm());
    }

    #[test]
    fn residuals_permute_with_roots() {
        let ch = chain(vec![c(0.2, 0.1), c(-0.3, 0.25)]);
        let roots = [c(0.4, 0.3), c(-0.7, 0.2)];
        let swapped = [roots[1], roots[0]];
        let a = bethe_residuals(&ch, &roots).unwrap();
        let b = bethe_residuals(&ch, &swapped).unwrap();
        assert!((a[0] - b[1]).norm() < 1e-12 * a[0].norm());
        assert!((a[1] - b[0]).norm() < 1e-12 * a[1].norm());
        assert!(bethe_residuals(&ch, &roots[..1]).is_err());
    }

    #[test]
    fn jet_matches_difference_quotient() {
        let ch = chain(vec![c(0.2, 0.1), c(-0.3, 0.25)]);
        let roots = [c(0.4, 0.3), c(-0.7, 0.2)];
        let v = c(0.9, -0.35);
        let jr: Vec<Jet<f64>> = vec![Jet::var(roots[0]), Jet::cst(roots[1])];
        let d = lambda_total(&ch, Jet::cst(v), &jr).d;
        let h = 1e-6;
        let lp = lambda_total(&ch, v, &[roots[0] + h, roots[1]]);
        let lm = lambda_total(&ch, v, &[roots[0] - h, roots[1]]);
        let fd = (lp - lm) / (2.0 * h);
        assert!((d - fd).norm() <= 1e-7 * fd.norm());
    }

    #[test]
    fn guards_report_poles() {
        let ch = chain(vec![c(0.2, 0.1)]);
        let r = eigenvalue_dressed(&ch, c(0.4, 0.3), &[c(0.4, 0.3)]);
        assert!(matches!(r, Err(Error::Pole { kernel: "f", .. })));
        let r = vacuum_eigenvalues(&ch, c(-0.5, 0.0));
        assert!(matches!(r, Err(Error::Pole { kernel: "phi", .. })));
        let r = eigenvalue_inhomogeneous(&ch, -ch.boundary.p, &[c(0.4, 0.3)]);
        assert!(matches!(r, Err(Error::Pole { kernel: "phi_tilde", .. })));
    }
}
