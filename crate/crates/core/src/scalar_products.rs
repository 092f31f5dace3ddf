//! Scalar products of Bethe states: direct contraction, the modified Slavnov
//! determinant (either set on-shell), the modified Gaudin-Korepin norm, the
//! diagonal-boundary Slavnov formula and the single-site representations.
//!
//! Every derivative entering a determinant is taken with forward-mode jets,
//! so the product path never differences numerically. Finite differences are
//! exposed only as [`jacobian_fd`] for cross-checks.

use num_traits::{One, Zero};
use serde::Serialize;

use crate::bethe::eigenvalue::{
    alpha_bar, delta_bar, e_total, guard_point, guard_roots, lambda1, lambda2, lambda_d, lambda_g,
    lambda_total, phi_tilde,
};
use crate::bethe::kernels::{big_q, phi, qk, r, s, w, x, y, Jet};
use crate::bethe::solver::scaled_residual;
use crate::chain::Chain;
use crate::double_row::RelationResidual;
use crate::error::{Error, Result};
use crate::linalg::{cabs64, cr, det, dot, inverse, ComplexMatrix, Real, C};
use crate::vectors::{dual_state, state, w_coefficient, w_coefficients, Family};

type M<T> = ComplexMatrix<T>;

/// Largest scaled Bethe residual accepted for the on-shell set.
pub const ON_SHELL_TOLERANCE: f64 = 1e-10;
/// Below this `min |u_i − v_j|` or `min |u_i + v_j + 1|` a conditioning
/// warning is raised.
pub const CONDITIONING_SEPARATION: f64 = 1e-3;
/// Default cap on `N` for direct contractions.
pub const DIRECT_MAX_SITES: usize = 5;

/// Which of the two states is on-shell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Placement {
    /// `⟨Ψ(ū)|` on-shell, `|Ψ(v̄)⟩` free.
    BraOnShell,
    /// `|Ψ(v̄)⟩` on-shell, `⟨Ψ(ū)|` free.
    KetOnShell,
}

/// How close the two root sets come to the Cauchy poles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Conditioning {
    pub min_separation: f64,
    /// `log₁₀` of the Frobenius condition number of the Cauchy matrix.
    pub digits_lost: f64,
    pub warning: bool,
}

/// The determinant ingredients of the modified Slavnov formula.
#[derive(Clone, Debug)]
pub struct SlavnovMatrix<T: Real> {
    /// `J_ij = ∂Λ^N(free_j, on)/∂on_i`.
    pub jacobian: M<T>,
    /// `V_ij = V(free_i, on_j)`.
    pub cauchy: M<T>,
    pub prefactor: C<T>,
    pub w0: C<T>,
}

impl<T: Real> SlavnovMatrix<T> {
    pub fn size(&self) -> usize {
        self.jacobian.rows()
    }

    pub fn value(&self) -> Result<C<T>> {
        Ok(self.prefactor * self.w0 * det(&self.jacobian)? / det(&self.cauchy)?)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SlavnovValue<T: Real> {
    pub value: C<T>,
    pub conditioning: Conditioning,
}

fn k<T: Real>(x: f64) -> C<T> {
    cr(x)
}

fn powi<T: Real>(z: C<T>, n: usize) -> C<T> {
    (0..n).fold(C::one(), |acc, _| acc * z)
}

/// `((ρ−2)/(2(ρ−1)²))^N`.
pub fn prefactor<T: Real>(ch: &Chain<T>, n: usize) -> C<T> {
    let rho = ch.boundary.rho;
    let r1 = rho - C::one();
    powi((rho - k(2.0)) / (k::<T>(2.0) * r1 * r1), n)
}

/// `V(v, u) = (2u+1)·2(v+1)/Q(v, u)`.
pub fn cauchy_entry<T: Real>(v: C<T>, u: C<T>) -> C<T> {
    (k::<T>(2.0) * u + C::one()) * k(2.0) * (v + C::one()) / big_q(v, u)
}

pub fn cauchy_matrix<T: Real>(free: &[C<T>], on: &[C<T>]) -> M<T> {
    M::from_fn(free.len(), on.len(), |i, j| cauchy_entry(free[i], on[j]))
}

/// `det V(v_i, u_j)` in factorized form:
/// `Π(2u_i+1)2(v_i+1) Π_{i<j} Q(u_j,u_i)Q(v_i,v_j) / Π_{i,j} Q(v_j,u_i)`.
pub fn cauchy_det_closed<T: Real>(free: &[C<T>], on: &[C<T>]) -> C<T> {
    let n = on.len();
    let mut num = C::<T>::one();
    let mut den = C::<T>::one();
    for i in 0..n {
        num = num * (k::<T>(2.0) * on[i] + C::one()) * k(2.0) * (free[i] + C::one());
        for j in i + 1..n {
            num = num * big_q(on[j], on[i]) * big_q(free[i], free[j]);
        }
        for j in 0..n {
            den = den * big_q(free[j], on[i]);
        }
    }
    num / den
}

fn jet_column<T: Real, F>(on: &[C<T>], i: usize, eval: F) -> C<T>
where
    F: Fn(&[Jet<T>]) -> Jet<T>,
{
    let jets: Vec<Jet<T>> = on
        .iter()
        .enumerate()
        .map(|(m, &u)| if m == i { Jet::var(u) } else { Jet::cst(u) })
        .collect();
    eval(&jets).d
}

fn guard_sets<T: Real>(ch: &Chain<T>, free: &[C<T>], on: &[C<T>]) -> Result<()> {
    if free.len() != on.len() {
        return Err(Error::InvalidRoots(format!(
            "sets of sizes {} and {} cannot be paired",
            free.len(),
            on.len()
        )));
    }
    guard_roots(ch, on)?;
    for &v in free {
        guard_point(ch, v, on)?;
    }
    Ok(())
}

/// `J_ij = ∂Λ^N(free_j, on)/∂on_i`, by forward-mode differentiation.
pub fn jacobian<T: Real>(ch: &Chain<T>, free: &[C<T>], on: &[C<T>]) -> Result<M<T>> {
    guard_sets(ch, free, on)?;
    Ok(jacobian_of(on, free, |v, us| lambda_total(ch, v, us)))
}

fn jacobian_of<T: Real, F>(on: &[C<T>], free: &[C<T>], lambda: F) -> M<T>
where
    F: Fn(Jet<T>, &[Jet<T>]) -> Jet<T>,
{
    let n = on.len();
    M::from_fn(n, free.len(), |i, j| {
        jet_column(on, i, |us| lambda(Jet::cst(free[j]), us))
    })
}

/// Central-difference version of [`jacobian`].
pub fn jacobian_fd<T: Real>(ch: &Chain<T>, free: &[C<T>], on: &[C<T>], step: f64) -> Result<M<T>> {
    guard_sets(ch, free, on)?;
    let hstep = k::<T>(step);
    Ok(M::from_fn(on.len(), free.len(), |i, j| {
        let mut up = on.to_vec();
        let mut dn = on.to_vec();
        up[i] = up[i] + hstep;
        dn[i] = dn[i] - hstep;
        (lambda_total(ch, free[j], &up) - lambda_total(ch, free[j], &dn)) / (k::<T>(2.0) * hstep)
    }))
}

/// Relative residual of `det[∂_{on_i}Λ_g(free_j, on)] = Π Λ_g(free_i, on)/(2(free_i+1)) · det V(free_i, on_j)`,
/// the Jacobian with the dressed part `Λ_d` dropped.
pub fn leading_jacobian_residual<T: Real>(ch: &Chain<T>, free: &[C<T>], on: &[C<T>]) -> Result<f64> {
    guard_sets(ch, free, on)?;
    let jg = jacobian_of(on, free, |v, us| lambda_g(ch, v, us));
    let lhs = det(&jg)?;
    let rhs = free.iter().fold(det(&cauchy_matrix(free, on))?, |acc, &v| {
        acc * lambda_g(ch, v, on) / (k::<T>(2.0) * (v + C::one()))
    });
    Ok(rel(lhs, rhs))
}

fn rel<T: Real>(a: C<T>, b: C<T>) -> f64 {
    let scale = cabs64(a).max(cabs64(b));
    if scale == 0.0 {
        0.0
    } else {
        cabs64(a - b) / scale
    }
}

/// Separation of the two sets and the conditioning of their Cauchy matrix.
pub fn conditioning<T: Real>(free: &[C<T>], on: &[C<T>]) -> Conditioning {
    let mut min_separation = f64::INFINITY;
    for &a in free {
        for &b in on {
            min_separation = min_separation.min(cabs64(a - b)).min(cabs64(a + b + C::one()));
        }
    }
    let v = cauchy_matrix(free, on);
    let digits_lost = match inverse(&v) {
        Ok(inv) if !free.is_empty() => (v.frobenius_f64() * inv.frobenius_f64()).log10().max(0.0),
        Ok(_) => 0.0,
        Err(_) => f64::INFINITY,
    };
    Conditioning {
        min_separation,
        digits_lost,
        warning: min_separation < CONDITIONING_SEPARATION,
    }
}

fn require_generic<T: Real>(ch: &Chain<T>) -> Result<()> {
    if ch.is_diagonal() {
        return Err(Error::Singular("modified scalar product (needs xi != 0)"));
    }
    Ok(())
}

fn require_on_shell<T: Real>(ch: &Chain<T>, roots: &[C<T>]) -> Result<()> {
    let res = scaled_residual(ch, roots);
    if !(res <= ON_SHELL_TOLERANCE) {
        return Err(Error::InvalidRoots(format!(
            "set is not on-shell: scaled Bethe residual {res:.2e}"
        )));
    }
    Ok(())
}

/// `⟨Ψ(ū)|Ψ(v̄)⟩` by contracting the explicit covector and vector, with
/// `N` capped at [`DIRECT_MAX_SITES`].
pub fn scalar_product_direct<T: Real>(ch: &Chain<T>, u: &[C<T>], v: &[C<T>]) -> Result<C<T>> {
    scalar_product_direct_capped(ch, u, v, DIRECT_MAX_SITES)
}

pub fn scalar_product_direct_capped<T: Real>(
    ch: &Chain<T>,
    u: &[C<T>],
    v: &[C<T>],
    max_sites: usize,
) -> Result<C<T>> {
    if ch.sites() > max_sites {
        return Err(Error::DimensionOverflow {
            requested: ch.dim(),
            max: 1usize << max_sites.min(63),
        });
    }
    let bra = dual_state(ch, u, Family::Modified)?;
    let ket = state(ch, v, Family::Modified)?;
    Ok(dot(&bra, &ket))
}

/// Plain-operator product `⟨Ω|C(ū)B(v̄)|Ω⟩`.
pub fn scalar_product_plain<T: Real>(ch: &Chain<T>, u: &[C<T>], v: &[C<T>]) -> Result<C<T>> {
    let bra = dual_state(ch, u, Family::Plain)?;
    let ket = state(ch, v, Family::Plain)?;
    Ok(dot(&bra, &ket))
}

/// Ingredients for the on-shell set `on` and the free set `free`.
pub fn slavnov_matrix<T: Real>(ch: &Chain<T>, on: &[C<T>], free: &[C<T>]) -> Result<SlavnovMatrix<T>> {
    let jacobian = jacobian(ch, free, on)?;
    Ok(SlavnovMatrix {
        jacobian,
        cauchy: cauchy_matrix(free, on),
        prefactor: prefactor(ch, on.len()),
        w0: w_coefficients(ch, on)?.w0,
    })
}

/// The modified Slavnov formula for `⟨Ψ(ū)|Ψ(v̄)⟩`, with the set named by
/// `placement` on-shell.
pub fn slavnov_modified<T: Real>(
    ch: &Chain<T>,
    u: &[C<T>],
    v: &[C<T>],
    placement: Placement,
) -> Result<SlavnovValue<T>> {
    require_generic(ch)?;
    let (on, free) = match placement {
        Placement::BraOnShell => (u, v),
        Placement::KetOnShell => (v, u),
    };
    if on.len() != ch.sites() {
        return Err(Error::InvalidRoots(format!(
            "the modified formula needs N = {} roots, got {}",
            ch.sites(),
            on.len()
        )));
    }
    require_on_shell(ch, on)?;
    let m = slavnov_matrix(ch, on, free)?;
    Ok(SlavnovValue {
        value: m.value()?,
        conditioning: conditioning(free, on),
    })
}

fn q_prod<T: Real>(a: C<T>, set: &[C<T>]) -> C<T> {
    set.iter().fold(C::one(), |acc, &b| acc * big_q(a, b))
}

fn except<T: Real>(roots: &[C<T>], skip: &[usize]) -> Vec<C<T>> {
    roots
        .iter()
        .enumerate()
        .filter(|(j, _)| !skip.contains(j))
        .map(|(_, &r)| r)
        .collect()
}

fn d1<T: Real>(f: impl Fn(Jet<T>) -> Jet<T>, u: C<T>) -> C<T> {
    f(Jet::var(u)).d
}

/// Off-diagonal Gaudin entry `G_ij`, `i ≠ j`.
pub fn gaudin_offdiagonal<T: Real>(ch: &Chain<T>, roots: &[C<T>], i: usize, j: usize) -> C<T> {
    let uj = roots[j];
    let one = C::<T>::one();
    let rest = except(roots, &[i, j]);
    (k::<T>(2.0) * uj + one)
        * (phi(-uj - one) * alpha_bar(ch, uj) * lambda1(ch, uj) * q_prod(-uj, &rest)
            - phi(uj) * delta_bar(ch, uj) * lambda2(ch, uj) * q_prod(uj + one, &rest))
}

/// Diagonal Gaudin entry `G_ii` in the closed form obtained with the Bethe
/// equations.
pub fn gaudin_diagonal<T: Real>(ch: &Chain<T>, roots: &[C<T>], i: usize) -> C<T> {
    let u = roots[i];
    let one = C::<T>::one();
    let two = k::<T>(2.0);
    let rho = ch.boundary.rho;
    let rest = except(roots, &[i]);
    let pt = phi_tilde(ch, u);
    let dpt = d1(|z| phi_tilde(ch, z), u);
    let ab = alpha_bar(ch, u);
    let db = delta_bar(ch, u);
    let dab = d1(|z| alpha_bar(ch, z), u);
    let ddb = d1(|z| delta_bar(ch, z), u);
    let l1 = lambda1(ch, u);
    let l2 = lambda2(ch, u);
    let dl1 = d1(|z| lambda1(ch, z), u);
    let dl2 = d1(|z| lambda2(ch, z), u);
    let qm = q_prod(-u, &rest);
    let qp = q_prod(u + one, &rest);
    let sm = rest.iter().fold(C::zero(), |acc, &b| acc + one / big_q(-u, b));
    let sp = rest.iter().fold(C::zero(), |acc, &b| acc + one / big_q(u + one, b));
    let pm = phi(-u - one);
    let pu = phi(u);
    -(pm * ab * l1 * qm) * ((two * u - one) * sm + (one / u - dpt / pt + dab / ab))
        + pu * db * l2 * qp * ((two * u + k(3.0)) * sp + (one / (u + one) - dpt / pt + ddb / db))
        - dl1 * (pm * ab * qm - rho * pt * l2 / (two * u + one))
        + dl2 * (pu * db * qp + rho * pt * l1 / (two * u + one))
}

/// `Q(u_i, ū_i)·∂E^N(u_i, ū_i)/∂u_i`, the defining form of `G_ii`.
pub fn gaudin_diagonal_by_derivative<T: Real>(ch: &Chain<T>, roots: &[C<T>], i: usize) -> C<T> {
    let rest = except(roots, &[i]);
    q_prod(roots[i], &rest) * jet_column(roots, i, |us| e_total(ch, i, us))
}

pub fn gaudin_matrix<T: Real>(ch: &Chain<T>, roots: &[C<T>]) -> Result<M<T>> {
    guard_roots(ch, roots)?;
    let n = roots.len();
    Ok(M::from_fn(n, n, |i, j| {
        if i == j {
            gaudin_diagonal(ch, roots, i)
        } else {
            gaudin_offdiagonal(ch, roots, i, j)
        }
    }))
}

/// `⟨Ψ(ū)|Ψ(ū)⟩` from the modified Gaudin-Korepin determinant.
pub fn gaudin_korepin_norm<T: Real>(ch: &Chain<T>, roots: &[C<T>]) -> Result<C<T>> {
    require_generic(ch)?;
    if roots.len() != ch.sites() {
        return Err(Error::InvalidRoots(format!(
            "the norm formula needs N = {} roots, got {}",
            ch.sites(),
            roots.len()
        )));
    }
    require_on_shell(ch, roots)?;
    let g = gaudin_matrix(ch, roots)?;
    let n = roots.len();
    let mut den = C::<T>::one();
    for i in 0..n {
        den = den * k(2.0) * (roots[i] + C::one());
        for j in i + 1..n {
            den = den * big_q(roots[j], roots[i]) * big_q(roots[i], roots[j]);
        }
    }
    Ok(prefactor(ch, n) * w_coefficients(ch, roots)?.w0 * det(&g)? / den)
}

/// The diagonal-boundary Slavnov formula for `⟨Ω|C(ū)B(v̄)|Ω⟩` with `v̄`
/// on-shell for the dressed equations; `#ū = #v̄ = M ≤ N`.
pub fn slavnov_diagonal<T: Real>(ch: &Chain<T>, u: &[C<T>], v: &[C<T>]) -> Result<C<T>> {
    if !ch.is_diagonal() {
        return Err(Error::InvalidBoundary(
            "the diagonal Slavnov formula needs xi = 0".into(),
        ));
    }
    if v.len() > ch.sites() {
        return Err(Error::InvalidRoots(format!(
            "{} roots exceed N = {}",
            v.len(),
            ch.sites()
        )));
    }
    guard_sets(ch, u, v)?;
    if v.is_empty() {
        return Ok(C::one());
    }
    let res = scaled_residual(ch, v);
    if !(res <= ON_SHELL_TOLERANCE) {
        return Err(Error::InvalidRoots(format!(
            "set is not on-shell: scaled Bethe residual {res:.2e}"
        )));
    }
    let m = v.len();
    let one = C::<T>::one();
    let q = ch.boundary.q;
    let mut pre = one;
    for i in 0..m {
        pre = pre * lambda2(ch, v[i]) * (k::<T>(2.0) * v[i] + one) / (v[i] + q);
        for j in 0..i {
            pre = pre * (v[i] + v[j] + k(2.0)) / (v[i] + v[j]);
        }
    }
    let jac = jacobian_of(v, u, |a, vs| lambda_d(ch, a, vs));
    Ok(pre * det(&jac)? / det(&cauchy_matrix(u, v))?)
}

/// `S_d^1(u|v)`, the diagonal part of the single-site product.
pub fn n1_diagonal_part<T: Real>(ch: &Chain<T>, u: C<T>, v: C<T>) -> C<T> {
    let (l1u, l2u, l1v, l2v) = (lambda1(ch, u), lambda2(ch, u), lambda1(ch, v), lambda2(ch, v));
    (s(u, v) + x(u, v)) * l1u * l1v + y(u, v) * l2u * l1v + r(u, v) * l1u * l2v + qk(u, v) * l1v * l2u
        + w(u, v) * l2u * l2v
}

fn w0_1<T: Real>(ch: &Chain<T>, u: C<T>) -> C<T> {
    w_coefficient(ch, &[u], &[])
}

fn cross_term<T: Real>(ch: &Chain<T>, u: C<T>, v: C<T>) -> C<T> {
    lambda_g(ch, u, &[v]) * w0_1(ch, v) / (k::<T>(2.0) * (u + C::one()))
        + lambda_g(ch, v, &[u]) * w0_1(ch, u) / (k::<T>(2.0) * (v + C::one()))
}

/// Single-site representation built from `S_d^1` and the `Λ_g W₀` cross terms.
pub fn n1_cross_form<T: Real>(ch: &Chain<T>, u: C<T>, v: C<T>) -> C<T> {
    let rho = ch.boundary.rho;
    let r1 = rho - C::one();
    (rho - k(2.0)) / (k::<T>(2.0) * r1 * r1) * (r1 * n1_diagonal_part(ch, u, v) + cross_term(ch, u, v))
}

/// Single-site representation from the expansion over the unmodified basis.
pub fn n1_expansion_form<T: Real>(ch: &Chain<T>, u: C<T>, v: C<T>) -> C<T> {
    let rho = ch.boundary.rho;
    let r1 = rho - C::one();
    let a = (rho - k(2.0)) / (k::<T>(2.0) * r1);
    a * a * n1_diagonal_part(ch, u, v) + rho * (rho - k(2.0)) / (k::<T>(4.0) * r1 * r1) * w0_1(ch, u) * w0_1(ch, v)
}

/// Single-site representation from the `C̄` action.
pub fn n1_c_action_form<T: Real>(ch: &Chain<T>, u: C<T>, v: C<T>) -> C<T> {
    let rho = ch.boundary.rho;
    let r1 = rho - C::one();
    let one = C::<T>::one();
    let (l1u, l2u, l1v, l2v) = (lambda1(ch, u), lambda2(ch, u), lambda1(ch, v), lambda2(ch, v));
    let pu = phi(-u - one);
    let pv = phi(-v - one);
    let tail = pv * l1v * ((u + v - one) / (u + v + one) * pu * l1u - (u - v + k(2.0)) / (u - v) * l2u)
        - l2v * ((u - v - k(2.0)) / (u - v) * pu * l1u - (u + v + k(3.0)) / (u + v + one) * l2u);
    n1_diagonal_part(ch, u, v) - rho / (k::<T>(2.0) * r1 * r1) * cross_term(ch, u, v)
        + rho / (k::<T>(2.0) * r1) * tail
}

/// Both sides of the linear prescription for `Λ₁(v_i)Λ₂(v_i)`:
/// `(2v+1)Q(v, v̄_i)/(ρφ̃(v)) · (φ(−v−1)ᾱΛ₁f(v, v̄_i) − φ(v)δ̄Λ₂h(v, v̄_i))`.
/// The two agree exactly when `v̄` is on-shell.
pub fn linear_prescription<T: Real>(ch: &Chain<T>, roots: &[C<T>], i: usize) -> (C<T>, C<T>) {
    let v = roots[i];
    let one = C::<T>::one();
    let rest = except(roots, &[i]);
    let (l1, l2) = (lambda1(ch, v), lambda2(ch, v));
    let fprod = rest.iter().fold(one, |acc, &b| acc * crate::bethe::kernels::f(v, b));
    let hprod = rest.iter().fold(one, |acc, &b| acc * crate::bethe::kernels::h(v, b));
    let rhs = (k::<T>(2.0) * v + one) * q_prod(v, &rest) / (ch.boundary.rho * phi_tilde(ch, v))
        * (phi(-v - one) * alpha_bar(ch, v) * l1 * fprod - phi(v) * delta_bar(ch, v) * l2 * hprod);
    (l1 * l2, rhs)
}

/// [`n1_cross_form`] with `Λ₁(v)Λ₂(v)` replaced through [`linear_prescription`].
pub fn n1_cross_form_linear<T: Real>(ch: &Chain<T>, u: C<T>, v: C<T>) -> C<T> {
    let rho = ch.boundary.rho;
    let r1 = rho - C::one();
    let (_, l1l2) = linear_prescription(ch, &[v], 0);
    let lg_v = rho * phi_tilde(ch, v) * l1l2 / big_q(v, u);
    let cross = lambda_g(ch, u, &[v]) * w0_1(ch, v) / (k::<T>(2.0) * (u + C::one()))
        + lg_v * w0_1(ch, u) / (k::<T>(2.0) * (v + C::one()));
    (rho - k(2.0)) / (k::<T>(2.0) * r1 * r1) * (r1 * n1_diagonal_part(ch, u, v) + cross)
}

/// `(ρ−2)/(2(ρ−1)²) · W₀(v) · ∂_vΛ¹(u, v)/V(u, v)`.
pub fn n1_reduced<T: Real>(ch: &Chain<T>, u: C<T>, v: C<T>) -> C<T> {
    let dl = lambda_total(ch, Jet::cst(u), &[Jet::var(v)]).d;
    prefactor(ch, 1) * w0_1(ch, v) * dl / cauchy_entry(u, v)
}

/// Residuals of the single-site identities. The linear-prescription and
/// reduced-formula residuals are included when `v` is on-shell.
pub fn n1_identities<T: Real>(ch: &Chain<T>, u: C<T>, v: C<T>) -> Result<Vec<RelationResidual>> {
    require_generic(ch)?;
    if ch.sites() != 1 {
        return Err(Error::InvalidRoots(format!(
            "single-site identities need N = 1, got N = {}",
            ch.sites()
        )));
    }
    guard_sets(ch, &[u], &[v])?;
    guard_point(ch, v, &[u])?;
    let direct = scalar_product_direct(ch, &[u], &[v])?;
    let cross = n1_cross_form(ch, u, v);
    let mut out = vec![
        residual("cross_vs_direct", cross, direct),
        residual("expansion_vs_direct", n1_expansion_form(ch, u, v), direct),
        residual("c_action_vs_direct", n1_c_action_form(ch, u, v), direct),
        residual("cross_vs_expansion", cross, n1_expansion_form(ch, u, v)),
        residual("cross_vs_c_action", cross, n1_c_action_form(ch, u, v)),
    ];
    if scaled_residual(ch, &[v]) <= ON_SHELL_TOLERANCE {
        let (lhs, rhs) = linear_prescription(ch, &[v], 0);
        let reduced = n1_reduced(ch, u, v);
        out.push(residual("linear_prescription", lhs, rhs));
        out.push(residual("cross_linear_vs_reduced", n1_cross_form_linear(ch, u, v), reduced));
        out.push(residual("reduced_vs_direct", reduced, direct));
    }
    Ok(out)
}

fn residual<T: Real>(name: &str, a: C<T>, b: C<T>) -> RelationResidual {
    RelationResidual {
        name: name.to_string(),
        residual: rel(a, b),
    }
}

/// Richardson extrapolation to `h → 0` of values at `h, h/2, h/4, …`
/// whose error expands in integer powers of `h`.
///
/// The tableau entry with the smallest internal error estimate is returned,
/// and the sweep stops once roundoff makes higher orders worse.
pub fn richardson(values: &[C<f64>]) -> C<f64> {
    let Some(&first) = values.first() else {
        return C::new(f64::NAN, f64::NAN);
    };
    let mut best = first;
    let mut best_err = f64::INFINITY;
    let mut prev = vec![first];
    for (i, &v) in values.iter().enumerate().skip(1) {
        let mut row = vec![v];
        let mut factor = 2.0;
        for j in 1..=i {
            let t = (row[j - 1] * factor - prev[j - 1]) / (factor - 1.0);
            let err = (t - row[j - 1]).norm().max((t - prev[j - 1]).norm());
            if err <= best_err {
                best_err = err;
                best = t;
            }
            row.push(t);
            factor *= 2.0;
        }
        if (row[i] - prev[i - 1]).norm() >= 2.0 * best_err {
            break;
        }
        prev = row;
    }
    best
}

/// Limit of `eval(ε)` as `ε → 0` from `levels` halvings of `h0`.
pub fn epsilon_limit<F>(eval: F, h0: f64, levels: usize) -> Result<C<f64>>
where
    F: Fn(f64) -> Result<C<f64>>,
{
    let values = (0..levels.max(1))
        .map(|l| eval(h0 / f64::powi(2.0, l as i32)))
        .collect::<Result<Vec<_>>>()?;
    Ok(richardson(&values))
}

/// The modified Slavnov formula along `v̄ = ū + ε·d̄`, extrapolated to `ε → 0`.
pub fn slavnov_norm_limit(ch: &Chain<f64>, roots: &[C<f64>], direction: &[C<f64>], h0: f64, levels: usize) -> Result<C<f64>> {
    require_on_shell(ch, roots)?;
    epsilon_limit(
        |eps| {
            let free: Vec<C<f64>> = roots.iter().zip(direction).map(|(&u, &d)| u + d * eps).collect();
            slavnov_matrix(ch, roots, &free)?.value()
        },
        h0,
        levels,
    )
}

/// The diagonal formula along `ū = v̄ + ε·d̄`, extrapolated to `ε → 0`.
pub fn slavnov_diagonal_norm_limit(
    ch: &Chain<f64>,
    roots: &[C<f64>],
    direction: &[C<f64>],
    h0: f64,
    levels: usize,
) -> Result<C<f64>> {
    epsilon_limit(
        |eps| {
            let free: Vec<C<f64>> = roots.iter().zip(direction).map(|(&v, &d)| v + d * eps).collect();
            slavnov_diagonal(ch, &free, roots)
        },
        h0,
        levels,
    )
}

/// Single-site reduced formula along `v = u + ε`, extrapolated to `ε → 0`.
pub fn reduced_norm_limit(ch: &Chain<f64>, u: C<f64>, h0: f64, levels: usize) -> Result<C<f64>> {
    epsilon_limit(|eps| Ok(n1_reduced(ch, u + eps, u)), h0, levels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{BoundaryParams, ChainSpec};
    use crate::bethe::solver::{solve_bethe, SolveOptions};

    type Z = C<f64>;

    fn c(re: f64, im: f64) -> Z {
        Z::new(re, im)
    }

    fn chain(n: usize) -> Chain<f64> {
        let th = [c(0.21, -0.13), c(-0.34, 0.27), c(0.08, 0.41)];
        let spec = ChainSpec::new(th[..n].to_vec()).unwrap();
        let bp = BoundaryParams::new(c(2.1, 0.2), c(1.4, -0.3), c(0.7, 0.2), c(-0.5, 0.4)).unwrap();
        Chain::new(spec, bp)
    }

    fn diagonal_chain(n: usize) -> Chain<f64> {
        let th = [c(0.21, -0.13), c(-0.34, 0.27), c(0.08, 0.41)];
        let spec = ChainSpec::new(th[..n].to_vec()).unwrap();
        Chain::new(spec, BoundaryParams::diagonal(c(2.1, 0.2), c(1.4, -0.3)))
    }

    fn on_shell(ch: &Chain<f64>) -> Vec<Vec<Z>> {
        let out = solve_bethe(ch, &SolveOptions::default()).unwrap();
        assert!(out.is_complete());
        out.sets.into_iter().map(|s| s.roots).collect()
    }

    const FREE: [Z; 3] = [Z::new(0.37, 0.52), Z::new(-0.81, 0.23), Z::new(0.64, -0.47)];

    #[test]
    fn cauchy_closed_form() {
        let on = [c(0.1, 0.2), c(-0.7, 0.4), c(0.9, -0.3)];
        for n in 1..=3 {
            let a = det(&cauchy_matrix(&FREE[..n], &on[..n])).unwrap();
            let b = cauchy_det_closed(&FREE[..n], &on[..n]);
            assert!(rel(a, b) < 1e-12, "n={n}");
        }
    }

    #[test]
    fn jacobian_matches_differences() {
        let ch = chain(2);
        let on = [c(0.1, 0.2), c(-0.7, 0.4)];
        let a = jacobian(&ch, &FREE[..2], &on).unwrap();
        let b = jacobian_fd(&ch, &FREE[..2], &on, 1e-6).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!(rel(a[(i, j)], b[(i, j)]) < 1e-7);
            }
        }
    }

    #[test]
    fn leading_jacobian_term_factorizes() {
        let ch = chain(3);
        let on = [c(0.1, 0.2), c(-0.7, 0.4), c(0.9, -0.3)];
        assert!(leading_jacobian_residual(&ch, &FREE, &on).unwrap() < 1e-12);
    }

    #[test]
    fn slavnov_matches_direct_both_placements() {
        for n in 1..=3 {
            let ch = chain(n);
            for on in on_shell(&ch).iter().take(4) {
                let free = &FREE[..n];
                let bra = slavnov_modified(&ch, on, free, Placement::BraOnShell).unwrap();
                let direct = scalar_product_direct(&ch, on, free).unwrap();
                assert!(rel(bra.value, direct) < 1e-8, "n={n} bra");
                let ket = slavnov_modified(&ch, free, on, Placement::KetOnShell).unwrap();
                let direct = scalar_product_direct(&ch, free, on).unwrap();
                assert!(rel(ket.value, direct) < 1e-8, "n={n} ket");
            }
        }
    }

    #[test]
    fn off_shell_set_is_rejected() {
        let ch = chain(2);
        let err = slavnov_modified(&ch, &FREE[..2], &FREE[1..3], Placement::BraOnShell).unwrap_err();
        assert!(matches!(err, Error::InvalidRoots(_)));
    }

    #[test]
    fn norm_matches_direct_and_gaudin_diagonal_matches_derivative() {
        for n in 1..=3 {
            let ch = chain(n);
            for on in on_shell(&ch).iter().take(4) {
                let norm = gaudin_korepin_norm(&ch, on).unwrap();
                let direct = scalar_product_direct(&ch, on, on).unwrap();
                assert!(rel(norm, direct) < 1e-8, "n={n}");
                for i in 0..n {
                    let a = gaudin_diagonal(&ch, on, i);
                    let b = gaudin_diagonal_by_derivative(&ch, on, i);
                    assert!(rel(a, b) < 1e-8, "n={n} i={i}");
                }
            }
        }
    }

    #[test]
    fn slavnov_limit_reaches_norm() {
        let ch = chain(2);
        let on = &on_shell(&ch)[1];
        let dir = [c(0.6, 0.3), c(-0.4, 0.7)];
        let lim = slavnov_norm_limit(&ch, on, &dir, 1e-2, 8).unwrap();
        let norm = gaudin_korepin_norm(&ch, on).unwrap();
        assert!(rel(lim, norm) < 1e-6);
    }

    #[test]
    fn single_site_identities() {
        let ch = chain(1);
        let res = n1_identities(&ch, c(0.37, 0.52), c(-0.81, 0.23)).unwrap();
        assert_eq!(res.len(), 5);
        for r in &res {
            assert!(r.residual < 1e-11, "{} {}", r.name, r.residual);
        }
        for on in on_shell(&ch) {
            let res = n1_identities(&ch, c(0.37, 0.52), on[0]).unwrap();
            assert_eq!(res.len(), 8);
            for r in &res {
                assert!(r.residual < 1e-11, "{} {}", r.name, r.residual);
            }
            let lim = reduced_norm_limit(&ch, on[0], 1e-2, 8).unwrap();
            let norm = gaudin_korepin_norm(&ch, &on).unwrap();
            assert!(rel(lim, norm) < 1e-6);
        }
    }

    #[test]
    fn diagonal_formula_matches_plain_product() {
        for n in 1..=3 {
            let ch = diagonal_chain(n);
            for v in on_shell(&ch) {
                let u: Vec<Z> = FREE[..v.len()].to_vec();
                let formula = slavnov_diagonal(&ch, &u, &v).unwrap();
                let direct = scalar_product_plain(&ch, &u, &v).unwrap();
                assert!(rel(formula, direct) < 1e-8, "n={n} m={}", v.len());
                let w0 = w_coefficient(&ch, &v, &[]);
                let prod = crate::vectors::w0_diagonal_product(&ch, &v);
                assert!(rel(w0, prod) < 1e-10);
            }
        }
    }

    #[test]
    fn empty_diagonal_product_is_one() {
        let ch = diagonal_chain(2);
        assert_eq!(slavnov_diagonal(&ch, &[], &[]).unwrap(), Z::one());
        assert_eq!(scalar_product_plain(&ch, &[], &[]).unwrap(), Z::one());
    }

    #[test]
    fn richardson_removes_linear_and_quadratic_error() {
        let f = |h: f64| c(1.0 + 3.0 * h - 2.0 * h * h, 0.5 * h);
        let v: Vec<Z> = (0..3).map(|l| f(0.1 / 2f64.powi(l))).collect();
        assert!((richardson(&v) - c(1.0, 0.0)).norm() < 1e-13);
    }
}
