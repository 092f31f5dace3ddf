//! R-matrix, boundary K-matrices, the similarity that diagonalizes `K⁺`,
//! and residual checks of the defining algebraic identities.

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::linalg::matrix::pauli;
use crate::linalg::scalar::{from_c64, to_c64};
use crate::linalg::{
    cabs64, cr, csqrt, embed_pair, inverse, kron, relative_residual, ComplexMatrix, Real, C,
};

/// `|ρ − 1|` below this is rejected.
pub const RHO_ONE_GUARD: f64 = 1e-8;
/// Minimum separation of `θ_i ± θ_j`.
pub const THETA_SEPARATION: f64 = 1e-8;
/// Minimum distance of `2θ ± 1` from zero.
pub const THETA_POLE_GUARD: f64 = 1e-6;

/// Boundary couplings with the derived `ρ = 1 − sqrt(1 + ξ⁺ξ⁻)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryParams<T: Real> {
    pub p: C<T>,
    pub q: C<T>,
    pub xi_plus: C<T>,
    pub xi_minus: C<T>,
    pub rho: C<T>,
    pub diagonal_mode: bool,
}

impl<T: Real> BoundaryParams<T> {
    /// Both `ξ` zero selects diagonal mode; exactly one zero is rejected.
    pub fn new(p: C<T>, q: C<T>, xi_plus: C<T>, xi_minus: C<T>) -> Result<Self> {
        let zp = xi_plus.is_zero();
        let zm = xi_minus.is_zero();
        if zp != zm {
            return Err(Error::InvalidBoundary(
                "xi_plus and xi_minus must both vanish or both be nonzero".into(),
            ));
        }
        if zp {
            return Ok(Self::diagonal(p, q));
        }
        let rho = rho_of(xi_plus, xi_minus);
        if cabs64(rho - C::one()) <= RHO_ONE_GUARD {
            return Err(Error::InvalidBoundary(
                "rho = 1 (xi_plus * xi_minus = -1) makes the modified operators singular".into(),
            ));
        }
        Ok(Self {
            p,
            q,
            xi_plus,
            xi_minus,
            rho,
            diagonal_mode: false,
        })
    }

    pub fn diagonal(p: C<T>, q: C<T>) -> Self {
        Self {
            p,
            q,
            xi_plus: C::zero(),
            xi_minus: C::zero(),
            rho: C::zero(),
            diagonal_mode: true,
        }
    }

    pub fn from_c64(p: C<f64>, q: C<f64>, xi_plus: C<f64>, xi_minus: C<f64>) -> Result<Self> {
        Self::new(from_c64(p), from_c64(q), from_c64(xi_plus), from_c64(xi_minus))
    }

    /// Same couplings in another backend; `ρ` is recomputed there.
    pub fn cast<U: Real>(&self) -> BoundaryParams<U> {
        let lift = |z: C<T>| from_c64::<U>(to_c64(z));
        let (xp, xm) = (lift(self.xi_plus), lift(self.xi_minus));
        BoundaryParams {
            p: lift(self.p),
            q: lift(self.q),
            xi_plus: xp,
            xi_minus: xm,
            rho: if self.diagonal_mode { C::zero() } else { rho_of(xp, xm) },
            diagonal_mode: self.diagonal_mode,
        }
    }

    /// `|ρ² − 2ρ − ξ⁺ξ⁻|`, branch independent.
    pub fn rho_quadratic_residual(&self) -> f64 {
        let two = cr::<T>(2.0);
        cabs64(self.rho * self.rho - two * self.rho - self.xi_plus * self.xi_minus)
    }
}

/// Principal-branch `1 − sqrt(1 + ξ⁺ξ⁻)`.
pub fn rho_of<T: Real>(xi_plus: C<T>, xi_minus: C<T>) -> C<T> {
    C::<T>::one() - csqrt(C::<T>::one() + xi_plus * xi_minus)
}

/// Site count and inhomogeneities.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainSpec<T: Real> {
    pub sites: usize,
    pub thetas: Vec<C<T>>,
}

impl<T: Real> ChainSpec<T> {
    pub fn new(thetas: Vec<C<T>>) -> Result<Self> {
        if thetas.is_empty() {
            return Err(Error::NotGeneric("a chain needs at least one site".into()));
        }
        let spec = Self {
            sites: thetas.len(),
            thetas,
        };
        spec.genericity()?;
        Ok(spec)
    }

    /// All `θ = 0`; used for the Hamiltonian and bypasses the genericity check.
    pub fn homogeneous(sites: usize) -> Self {
        Self {
            sites,
            thetas: vec![C::zero(); sites],
        }
    }

    pub fn is_generic(&self) -> bool {
        self.genericity().is_ok()
    }

    fn genericity(&self) -> Result<()> {
        let one = C::<T>::one();
        let two = cr::<T>(2.0);
        for (i, &a) in self.thetas.iter().enumerate() {
            for &b in &self.thetas[i + 1..] {
                if cabs64(a - b) <= THETA_SEPARATION || cabs64(a + b) <= THETA_SEPARATION {
                    return Err(Error::NotGeneric(format!(
                        "theta pair {:?}, {:?} coincides up to sign",
                        to_c64(a),
                        to_c64(b)
                    )));
                }
            }
            if cabs64(two * a + one) <= THETA_POLE_GUARD || cabs64(two * a - one) <= THETA_POLE_GUARD
            {
                return Err(Error::NotGeneric(format!(
                    "theta {:?} is at 2θ ± 1 = 0",
                    to_c64(a)
                )));
            }
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> ChainSpec<U> {
        ChainSpec {
            sites: self.sites,
            thetas: self.thetas.iter().map(|&t| from_c64(to_c64(t))).collect(),
        }
    }
}

/// Permutation operator on `C² ⊗ C²`.
pub fn permutation<T: Real>() -> ComplexMatrix<T> {
    let mut p = ComplexMatrix::zeros(4, 4);
    for (i, j) in [(0, 0), (1, 2), (2, 1), (3, 3)] {
        p[(i, j)] = C::one();
    }
    p
}

/// `R(u) = u + P`.
pub fn r_matrix<T: Real>(u: C<T>) -> ComplexMatrix<T> {
    let mut r = permutation();
    for i in 0..4 {
        r[(i, i)] = r[(i, i)] + u;
    }
    r
}

/// `K⁻(u) = diag(p + u, p − u)`.
pub fn k_minus<T: Real>(u: C<T>, bp: &BoundaryParams<T>) -> ComplexMatrix<T> {
    ComplexMatrix::diag(&[bp.p + u, bp.p - u])
}

pub fn k_plus<T: Real>(u: C<T>, bp: &BoundaryParams<T>) -> ComplexMatrix<T> {
    let v = u + C::one();
    ComplexMatrix::from_rows(vec![
        vec![bp.q + v, bp.xi_plus * v],
        vec![bp.xi_minus * v, bp.q - v],
    ])
}

/// `Q = [[ξ⁺, ρ], [−ρ, ξ⁻]]`, rejected when `det Q = ξ⁺ξ⁻ + ρ²` vanishes.
pub fn q_similarity<T: Real>(bp: &BoundaryParams<T>) -> Result<ComplexMatrix<T>> {
    let det = bp.xi_plus * bp.xi_minus + bp.rho * bp.rho;
    if bp.diagonal_mode || cabs64(det) <= 1e-12 {
        return Err(Error::Singular("similarity Q (xi_plus*xi_minus + rho^2 = 0)"));
    }
    Ok(ComplexMatrix::from_rows(vec![
        vec![bp.xi_plus, bp.rho],
        vec![-bp.rho, bp.xi_minus],
    ]))
}

/// `Q⁻¹ K⁺(u) Q` by direct conjugation.
pub fn k_plus_conjugated<T: Real>(u: C<T>, bp: &BoundaryParams<T>) -> Result<ComplexMatrix<T>> {
    let q = q_similarity(bp)?;
    Ok(&(&inverse(&q)? * &k_plus(u, bp)) * &q)
}

/// `diag(q + (1+u)(1−ρ), q − (1+u)(1−ρ))`.
pub fn k_plus_bar<T: Real>(u: C<T>, bp: &BoundaryParams<T>) -> ComplexMatrix<T> {
    let s = (C::<T>::one() + u) * (C::<T>::one() - bp.rho);
    ComplexMatrix::diag(&[bp.q + s, bp.q - s])
}

/// Largest elementwise deviation of `Q⁻¹K⁺Q` from [`k_plus_bar`].
pub fn check_k_plus_diagonalization<T: Real>(u: C<T>, bp: &BoundaryParams<T>) -> Result<f64> {
    let conj = k_plus_conjugated(u, bp)?;
    let want = k_plus_bar(u, bp);
    Ok(conj
        .as_slice()
        .iter()
        .zip(want.as_slice())
        .map(|(a, b)| cabs64(*a - *b))
        .fold(0.0, f64::max))
}

/// Yang-Baxter residual for an arbitrary R, spectral points `(u, v, 0)`.
pub fn check_ybe_with<T: Real>(r: impl Fn(C<T>) -> ComplexMatrix<T>, u: C<T>, v: C<T>) -> f64 {
    let ab = embed_pair(&r(u - v), 3, 0, 1);
    let ac = embed_pair(&r(u), 3, 0, 2);
    let bc = embed_pair(&r(v), 3, 1, 2);
    let lhs = &(&ab * &ac) * &bc;
    let rhs = &(&bc * &ac) * &ab;
    relative_residual(&lhs, &rhs)
}

pub fn check_ybe<T: Real>(u: C<T>, v: C<T>) -> f64 {
    check_ybe_with(r_matrix, u, v)
}

fn two_site_pair<T: Real>(k: &ComplexMatrix<T>) -> Result<(ComplexMatrix<T>, ComplexMatrix<T>)> {
    let id = pauli::id();
    Ok((kron(k, &id)?, kron(&id, k)?))
}

/// Reflection-equation residual for an arbitrary `K⁻`.
pub fn check_reflection_with<T: Real>(
    k: impl Fn(C<T>) -> ComplexMatrix<T>,
    u: C<T>,
    v: C<T>,
) -> f64 {
    let (ka, _) = two_site_pair(&k(u)).expect("2x2 K");
    let (_, kb) = two_site_pair(&k(v)).expect("2x2 K");
    let rm = r_matrix(u - v);
    let rp = r_matrix(u + v);
    let lhs = &(&(&rm * &ka) * &rp) * &kb;
    let rhs = &(&(&kb * &rp) * &ka) * &rm;
    relative_residual(&lhs, &rhs)
}

pub fn check_reflection<T: Real>(u: C<T>, v: C<T>, bp: &BoundaryParams<T>) -> f64 {
    check_reflection_with(|x| k_minus(x, bp), u, v)
}

/// Dual reflection residual (shifted arguments, partial transpositions).
pub fn check_dual_reflection_with<T: Real>(
    k: impl Fn(C<T>) -> ComplexMatrix<T>,
    u: C<T>,
    v: C<T>,
) -> f64 {
    let (ka, _) = two_site_pair(&k(u).transpose()).expect("2x2 K");
    let (_, kb) = two_site_pair(&k(v).transpose()).expect("2x2 K");
    let r1 = r_matrix(v - u);
    let r2 = r_matrix(-u - v - cr(2.0));
    let lhs = &(&(&r1 * &ka) * &r2) * &kb;
    let rhs = &(&(&kb * &r2) * &ka) * &r1;
    relative_residual(&lhs, &rhs)
}

pub fn check_dual_reflection<T: Real>(u: C<T>, v: C<T>, bp: &BoundaryParams<T>) -> f64 {
    check_dual_reflection_with(|x| k_plus(x, bp), u, v)
}

/// `‖R(u)(m⊗m) − (m⊗m)R(u)‖`, relative.
pub fn check_gl2_invariance_with<T: Real>(
    r: impl Fn(C<T>) -> ComplexMatrix<T>,
    u: C<T>,
    m: &ComplexMatrix<T>,
) -> f64 {
    let mm = kron(m, m).expect("2x2 m");
    let ru = r(u);
    relative_residual(&(&ru * &mm), &(&mm * &ru))
}

pub fn check_gl2_invariance<T: Real>(u: C<T>, m: &ComplexMatrix<T>) -> f64 {
    check_gl2_invariance_with(r_matrix, u, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    
    type Z = C<f64>;

    fn c(re: f64, im: f64) -> Z {
        Z::new(re, im)
    }

    fn bp() -> BoundaryParams<f64> {
        BoundaryParams::new(c(2.1, 0.2), c(1.4, -0.3), c(0.7, 0.2), c(-0.5, 0.4)).unwrap()
    }

    #[test]
    fn r_matrix_values() {
        assert_eq!(r_matrix::<f64>(Z::zero()), permutation());
        assert_eq!(r_matrix::<f64>(c(0.3, 0.9))[(1, 2)], Z::one());
        for u in [c(1.0, 0.0), c(0.4, -0.7)] {
            let prod = &r_matrix(u) * &r_matrix(-u);
            let want = ComplexMatrix::identity(4).scale(Z::one() - u * u);
            assert!(relative_residual(&prod, &want) < 1e-15);
        }
    }

    #[test]
    fn permutation_matches_pauli_form() {
        let half = c(0.5, 0.0);
        let sz = pauli::sz::<f64>();
        let id4 = ComplexMatrix::identity(4);
        let p = &(&kron(&pauli::sp(), &pauli::sm()).unwrap()
            + &kron(&pauli::sm(), &pauli::sp()).unwrap())
            + &(&id4 + &kron(&sz, &sz).unwrap()).scale(half);
        assert_eq!(p, permutation());
    }

    #[test]
    fn k_matrix_values() {
        let b = bp();
        assert_eq!(k_minus(Z::zero(), &b), ComplexMatrix::diag(&[b.p, b.p]));
        assert_eq!(k_minus(b.p, &b), ComplexMatrix::diag(&[b.p + b.p, Z::zero()]));
        assert_eq!(k_plus(c(-1.0, 0.0), &b), ComplexMatrix::diag(&[b.q, b.q]));
        let k0 = k_plus(Z::zero(), &b);
        assert_eq!(k0[(0, 0)], b.q + Z::one());
        assert_eq!(k0[(0, 1)], b.xi_plus);
        assert_eq!(k0[(1, 0)], b.xi_minus);
        assert_eq!(k0[(1, 1)], b.q - Z::one());
    }

    #[test]
    fn rho_branch_and_guards() {
        let b = bp();
        assert!(b.rho_quadratic_residual() < 1e-14);
        assert!((Z::one() - b.rho).re >= 0.0);
        let d = BoundaryParams::new(c(2.0, 0.0), c(1.0, 0.0), Z::zero(), Z::zero()).unwrap();
        assert!(d.diagonal_mode && d.rho == Z::zero());
        assert!(q_similarity(&d).is_err());
        assert!(BoundaryParams::new(c(2.0, 0.0), c(1.0, 0.0), Z::one(), Z::zero()).is_err());
        let bad = BoundaryParams::new(c(2.0, 0.0), c(1.0, 0.0), Z::one(), -Z::one());
        assert!(matches!(bad, Err(Error::InvalidBoundary(_))));
    }

    #[test]
    fn genericity_predicate() {
        assert!(ChainSpec::new(vec![c(0.1, 0.2), c(-0.1, -0.2)]).is_err());
        assert!(ChainSpec::new(vec![c(0.5, 0.0)]).is_err());
        assert!(ChainSpec::new(vec![c(0.1, 0.2), c(0.3, -0.1)]).is_ok());
        assert!(!ChainSpec::<f64>::homogeneous(2).is_generic());
    }

    #[test]
    fn identities_hold() {
        let b = bp();
        let pts = [(c(0.7, 0.0), c(-0.3, 0.0)), (c(0.2, 0.5), c(0.2, 0.5)), (c(-1.1, 0.3), c(0.4, -0.8))];
        for (u, v) in pts {
            assert!(check_ybe(u, v) <= 1e-14);
            assert!(check_reflection(u, v, &b) <= 1e-14);
            assert!(check_dual_reflection(u, v, &b) <= 1e-14);
            assert!(check_k_plus_diagonalization(u, &b).unwrap() <= 1e-13);
        }
        let m = ComplexMatrix::from_rows(vec![vec![c(0.3, 1.0), c(-2.0, 0.1)], vec![c(0.5, 0.5), c(1.2, -0.4)]]);
        assert_eq!(check_gl2_invariance(c(0.3, 0.0), &ComplexMatrix::identity(2)), 0.0);
        assert!(check_gl2_invariance(c(0.3, -0.2), &m) <= 1e-14);
    }

    #[test]
    fn mutations_are_detected() {
        let b = bp();
        let (u, v) = (c(0.7, 0.1), c(-0.3, 0.2));
        let bad_r = |x: Z| {
            let mut r = r_matrix(x);
            r[(1, 2)] += c(1e-3, 0.0);
            r
        };
        assert!(check_ybe_with(bad_r, u, v) > 1e-6);
        let bad_kp = |x: Z| {
            let mut k = k_plus(x, &b);
            k[(0, 0)] += c(1e-3, 0.0);
            k
        };
        assert!(check_dual_reflection_with(bad_kp, u, v) > 1e-6);
        let m = ComplexMatrix::from_rows(vec![vec![c(1.0, 0.0), c(0.4, 0.0)], vec![c(0.0, 0.0), c(2.0, 0.0)]]);
        assert!(check_gl2_invariance_with(bad_r, u, &m) > 1e-6);
    }
}
