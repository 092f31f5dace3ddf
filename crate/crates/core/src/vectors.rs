//! Bethe vectors and their duals, the off-shell and central relations,
//! the expansion over the unmodified operator basis and the `C̄` action.
//!
//! In diagonal mode the modified operators do not exist; every routine here
//! then works with the plain `B` and `C`, and the `ρ`-proportional terms are
//! dropped.

use num_traits::{One, Zero};

use crate::bethe::eigenvalue::{
    e_d, e_g, e_total, guard_point, guard_roots, lambda1, lambda2, lambda_d, lambda_g,
    lambda_total, require_full,
};
use crate::bethe::kernels::{big_f, f, g, h, kk, n, phi, prod, qk, r, s, w, x, y};
use crate::chain::Chain;
use crate::double_row::RelationResidual;
use crate::error::{Error, Result};
use crate::linalg::{
    axpy, basis, cabs64, cdot, cr, relative_residual, relative_residual_vec, vnorm, vscale, ComplexMatrix,
    Real, C,
};

type M<T> = ComplexMatrix<T>;

/// Coordinates of `B̄(ū)|Ω⟩` or of the covector `⟨Ω|C̄(ū)`.
#[derive(Clone, Debug)]
pub struct BetheVector<T: Real> {
    pub roots: Vec<C<T>>,
    pub vector: Vec<C<T>>,
    pub dual: bool,
}

/// A residual measured on the ket side and on the bra side.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SidedResidual {
    pub ket: f64,
    pub bra: f64,
}

impl SidedResidual {
    pub fn max(&self) -> f64 {
        self.ket.max(self.bra)
    }
}

/// Which operator family builds the states.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    /// `B̄, C̄` (plain `B, C` in diagonal mode).
    Modified,
    /// `B, C`.
    Plain,
}

fn creation<T: Real>(ch: &Chain<T>, u: C<T>, family: Family) -> Result<M<T>> {
    if family == Family::Plain || ch.is_diagonal() {
        Ok(ch.double_row(u)?.b.into_matrix())
    } else {
        Ok(ch.modified_entries(u)?.b_bar.into_matrix())
    }
}

fn annihilation<T: Real>(ch: &Chain<T>, u: C<T>, family: Family) -> Result<M<T>> {
    if family == Family::Plain || ch.is_diagonal() {
        Ok(ch.double_row(u)?.c.into_matrix())
    } else {
        Ok(ch.modified_entries(u)?.c_bar.into_matrix())
    }
}

fn vacuum<T: Real>(ch: &Chain<T>) -> Vec<C<T>> {
    basis(ch.dim(), 0)
}

/// `X(u_1) ⋯ X(u_M)|Ω⟩` for the creation operator of `family`.
pub fn state<T: Real>(ch: &Chain<T>, roots: &[C<T>], family: Family) -> Result<Vec<C<T>>> {
    let mut v = vacuum(ch);
    for &u in roots.iter().rev() {
        v = creation(ch, u, family)?.apply(&v);
    }
    Ok(v)
}

/// `⟨Ω|Y(u_1) ⋯ Y(u_M)` for the annihilation operator of `family`.
pub fn dual_state<T: Real>(ch: &Chain<T>, roots: &[C<T>], family: Family) -> Result<Vec<C<T>>> {
    let mut v = vacuum(ch);
    for &u in roots {
        v = annihilation(ch, u, family)?.apply_left(&v);
    }
    Ok(v)
}

pub fn build_psi<T: Real>(ch: &Chain<T>, roots: &[C<T>]) -> Result<BetheVector<T>> {
    Ok(BetheVector {
        roots: roots.to_vec(),
        vector: state(ch, roots, Family::Modified)?,
        dual: false,
    })
}

pub fn build_dual_psi<T: Real>(ch: &Chain<T>, roots: &[C<T>]) -> Result<BetheVector<T>> {
    Ok(BetheVector {
        roots: roots.to_vec(),
        vector: dual_state(ch, roots, Family::Modified)?,
        dual: true,
    })
}

/// `ū` with `u_i` replaced by `u`.
pub fn replaced<T: Real>(roots: &[C<T>], i: usize, u: C<T>) -> Vec<C<T>> {
    let mut out = roots.to_vec();
    out[i] = u;
    out
}

fn without<T: Real>(roots: &[C<T>], skip: &[usize]) -> Vec<C<T>> {
    roots
        .iter()
        .enumerate()
        .filter(|(j, _)| !skip.contains(j))
        .map(|(_, &r)| r)
        .collect()
}

fn require_generic<T: Real>(ch: &Chain<T>, what: &str) -> Result<()> {
    if ch.is_diagonal() {
        return Err(Error::Singular(match what {
            "central" => "central relation (needs xi != 0)",
            "partial" => "partial off-shell action (needs xi != 0)",
            _ => "modified operators (needs xi != 0)",
        }));
    }
    Ok(())
}

/// Residual of `t(u)|Ψ⟩ = Λ|Ψ⟩ + Σ F(u,u_i)E(u_i,ū_i)|Ψ({u,ū_i})⟩` and its dual.
///
/// Needs `#ū = N` outside diagonal mode; in diagonal mode any `#ū` works with
/// the dressed eigenvalue.
pub fn check_offshell_action<T: Real>(ch: &Chain<T>, u: C<T>, roots: &[C<T>]) -> Result<SidedResidual> {
    if !ch.is_diagonal() {
        require_full(ch, roots)?;
    }
    guard_point(ch, u, roots)?;
    guard_roots(ch, roots)?;
    let t = ch.transfer_matrix(u)?;
    let lam = lambda_total(ch, u, roots);
    let amps: Vec<C<T>> = (0..roots.len()).map(|i| e_total(ch, i, roots)).collect();
    let side = |dual: bool| -> Result<f64> {
        let build = |rs: &[C<T>]| {
            if dual {
                dual_state(ch, rs, Family::Modified)
            } else {
                state(ch, rs, Family::Modified)
            }
        };
        let psi = build(roots)?;
        let lhs = if dual { t.apply_left(&psi) } else { t.apply(&psi) };
        let mut terms = vec![vscale(&psi, lam)];
        for (i, &ui) in roots.iter().enumerate() {
            let coeff = big_f(u, ui) * amps[i];
            terms.push(vscale(&build(&replaced(roots, i, u))?, coeff));
        }
        Ok(relative_residual_vec(&lhs, &terms))
    };
    Ok(SidedResidual {
        ket: side(false)?,
        bra: side(true)?,
    })
}

/// `ρ(ρ−1)/ξ · 2(u+1)`, the coefficient of the remainder term.
pub fn remainder_coefficient<T: Real>(ch: &Chain<T>, u: C<T>, dual: bool) -> C<T> {
    let b = &ch.boundary;
    let xi = if dual { b.xi_plus } else { b.xi_minus };
    b.rho * (b.rho - C::one()) / xi * cr::<T>(2.0) * (u + C::one())
}

/// Residual of the central relation for `#ū = N` and its dual.
pub fn check_central_relation<T: Real>(ch: &Chain<T>, u: C<T>, roots: &[C<T>]) -> Result<SidedResidual> {
    require_generic(ch, "central")?;
    require_full(ch, roots)?;
    guard_point(ch, u, roots)?;
    guard_roots(ch, roots)?;
    let me = ch.modified_entries(u)?;
    let lg = lambda_g(ch, u, roots);
    let eg: Vec<C<T>> = (0..roots.len()).map(|i| e_g(ch, i, roots)).collect();
    let side = |dual: bool| -> Result<f64> {
        let build = |rs: &[C<T>]| {
            if dual {
                dual_state(ch, rs, Family::Modified)
            } else {
                state(ch, rs, Family::Modified)
            }
        };
        let psi = build(roots)?;
        let acted = if dual {
            me.c_bar.apply_left(&psi)
        } else {
            me.b_bar.apply(&psi)
        };
        let lhs = vscale(&acted, remainder_coefficient(ch, u, dual));
        let mut terms = vec![vscale(&psi, lg)];
        for (i, &ui) in roots.iter().enumerate() {
            terms.push(vscale(&build(&replaced(roots, i, u))?, big_f(u, ui) * eg[i]));
        }
        Ok(relative_residual_vec(&lhs, &terms))
    };
    Ok(SidedResidual {
        ket: side(false)?,
        bra: side(true)?,
    })
}

fn product<T: Real>(ops: &[M<T>], dim: usize) -> M<T> {
    ops.iter().fold(M::identity(dim), |acc, m| acc.matmul(m))
}

/// Residuals of the multiple-action identities for `#ū = M` (any `M ≤ N`).
///
/// Reported entries: the `Ā` and `D̄` sweeps through `B̄(ū)`, the `C̄(ū)`
/// sweeps past `Ā` and `D̄`, the partial off-shell action with its trailing
/// remainder on both sides, and the remainder coefficient recovered by
/// projecting the defect onto `B̄(u)|Ψ⟩`.
pub fn check_multiple_actions<T: Real>(
    ch: &Chain<T>,
    u: C<T>,
    roots: &[C<T>],
) -> Result<Vec<RelationResidual>> {
    require_generic(ch, "partial")?;
    guard_point(ch, u, roots)?;
    guard_roots(ch, roots)?;
    let dim = ch.dim();
    let eu = ch.modified_entries(u)?;
    let ents: Vec<_> = roots
        .iter()
        .map(|&r| ch.modified_entries(r))
        .collect::<Result<_>>()?;
    let bs = |skip: Option<usize>| -> M<T> {
        let mut ops = vec![];
        if skip.is_some() {
            ops.push(eu.b_bar.matrix().clone());
        }
        for (j, e) in ents.iter().enumerate() {
            if Some(j) != skip {
                ops.push(e.b_bar.matrix().clone());
            }
        }
        product(&ops, dim)
    };
    let cs = |skip: Option<usize>| -> M<T> {
        let mut ops = vec![];
        if skip.is_some() {
            ops.push(eu.c_bar.matrix().clone());
        }
        for (j, e) in ents.iter().enumerate() {
            if Some(j) != skip {
                ops.push(e.c_bar.matrix().clone());
            }
        }
        product(&ops, dim)
    };
    let (a, d) = (eu.a_bar.matrix(), eu.d_bar.matrix());
    let b_all = bs(None);
    let c_all = cs(None);
    let mut a_rhs = (&b_all * a).scale(prod(f, u, roots));
    let mut d_rhs = (&b_all * d).scale(prod(h, u, roots));
    let mut ca_rhs = (a * &c_all).scale(prod(f, u, roots));
    let mut cd_rhs = (d * &c_all).scale(prod(h, u, roots));
    for (i, &ui) in roots.iter().enumerate() {
        let rest = without(roots, &[i]);
        let fi = prod(f, ui, &rest);
        let hi = prod(h, ui, &rest);
        let (ai, di) = (ents[i].a_bar.matrix(), ents[i].d_bar.matrix());
        let bi = bs(Some(i));
        let ci = cs(Some(i));
        a_rhs = &a_rhs + &(&(&bi * ai).scale(g(u, ui) * fi) + &(&bi * di).scale(w(u, ui) * hi));
        d_rhs = &d_rhs + &(&(&bi * di).scale(kk(u, ui) * hi) + &(&bi * ai).scale(n(u, ui) * fi));
        ca_rhs = &ca_rhs + &(&(ai * &ci).scale(g(u, ui) * fi) + &(di * &ci).scale(w(u, ui) * hi));
        cd_rhs = &cd_rhs + &(&(di * &ci).scale(kk(u, ui) * hi) + &(ai * &ci).scale(n(u, ui) * fi));
    }
    let mut out = vec![
        rel("a_sweep", relative_residual(&(a * &b_all), &a_rhs)),
        rel("d_sweep", relative_residual(&(d * &b_all), &d_rhs)),
        rel("c_sweep_a", relative_residual(&(&c_all * a), &ca_rhs)),
        rel("c_sweep_d", relative_residual(&(&c_all * d), &cd_rhs)),
    ];

    let t = ch.transfer_matrix(u)?;
    let ld = lambda_d(ch, u, roots);
    let ed: Vec<C<T>> = (0..roots.len()).map(|i| e_d(ch, i, roots)).collect();
    let vac = vacuum(ch);
    for dual in [false, true] {
        let (psi, lhs, rem) = if dual {
            let psi = c_all.apply_left(&vac);
            let lhs = t.apply_left(&psi);
            let rem = eu.c_bar.apply_left(&psi);
            (psi, lhs, rem)
        } else {
            let psi = b_all.apply(&vac);
            let lhs = t.apply(&psi);
            let rem = eu.b_bar.apply(&psi);
            (psi, lhs, rem)
        };
        let mut terms = vec![vscale(&psi, ld)];
        for (i, &ui) in roots.iter().enumerate() {
            let other = if dual {
                cs(Some(i)).apply_left(&vac)
            } else {
                bs(Some(i)).apply(&vac)
            };
            terms.push(vscale(&other, big_f(u, ui) * ed[i]));
        }
        let coeff = remainder_coefficient(ch, u, dual);
        let mut with_rem = terms.clone();
        with_rem.push(vscale(&rem, coeff));
        let name = if dual { "partial_bra" } else { "partial_ket" };
        out.push(rel(name, relative_residual_vec(&lhs, &with_rem)));
        if !dual {
            let mut defect = lhs.clone();
            for t in &terms {
                axpy(&mut defect, -C::<T>::one(), t);
            }
            let projected = cdot(&rem, &defect) / cdot(&rem, &rem);
            let err = cabs64(projected - coeff) / cabs64(coeff);
            out.push(rel("remainder_coefficient", err));
        }
    }
    Ok(out)
}

fn rel(name: &str, residual: f64) -> RelationResidual {
    RelationResidual {
        name: name.to_string(),
        residual,
    }
}

/// `φ(−u−1)Λ₁(u)f(u, rest) − Λ₂(u)h(u, rest)`, the single-level factor.
pub fn w_level<T: Real>(ch: &Chain<T>, first: C<T>, rest: &[C<T>]) -> C<T> {
    phi(-first - C::one()) * lambda1(ch, first) * prod(f, first, rest)
        - lambda2(ch, first) * prod(h, first, rest)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![];
    let mut perm: Vec<usize> = (0..n).collect();
    permute(&mut perm, 0, &mut out);
    out
}

fn permute(perm: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == perm.len() {
        out.push(perm.clone());
        return;
    }
    for i in k..perm.len() {
        perm.swap(k, i);
        permute(perm, k + 1, out);
        perm.swap(k, i);
    }
}

/// `W^N_i(ū_I | ū_II)`: the level product symmetrized over `ū_I`.
pub fn w_coefficient<T: Real>(ch: &Chain<T>, first: &[C<T>], second: &[C<T>]) -> C<T> {
    let perms = permutations(first.len());
    let count = perms.len();
    let total = perms.into_iter().fold(C::<T>::zero(), |acc, p| {
        let seq: Vec<C<T>> = p.iter().map(|&k| first[k]).chain(second.iter().copied()).collect();
        let term = (0..first.len()).fold(C::<T>::one(), |t, j| t * w_level(ch, seq[j], &seq[j + 1..]));
        acc + term
    });
    total / cr::<T>(count as f64)
}

/// One ordered partition `ū → {ū_I, ū_II}` and its coefficient.
#[derive(Clone, Debug)]
pub struct PartitionTerm<T: Real> {
    /// `#ū_II`.
    pub level: usize,
    /// Indices into the root list forming `ū_I`.
    pub first: Vec<usize>,
    /// Indices forming `ū_II`.
    pub second: Vec<usize>,
    pub value: C<T>,
}

#[derive(Clone, Debug)]
pub struct ExpansionCoefficients<T: Real> {
    pub terms: Vec<PartitionTerm<T>>,
    pub w0: C<T>,
}

/// Partitions in order of `#ū_II`, then lexicographically by subset mask.
fn partitions(n: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut masks: Vec<usize> = (0..1usize << n).collect();
    masks.sort_by_key(|m| (m.count_ones(), *m));
    masks
        .into_iter()
        .map(|m| {
            let second: Vec<usize> = (0..n).filter(|k| m >> k & 1 == 1).collect();
            let first: Vec<usize> = (0..n).filter(|k| m >> k & 1 == 0).collect();
            (first, second)
        })
        .collect()
}

pub fn w_coefficients<T: Real>(ch: &Chain<T>, roots: &[C<T>]) -> Result<ExpansionCoefficients<T>> {
    guard_roots(ch, roots)?;
    let pick = |ix: &[usize]| ix.iter().map(|&k| roots[k]).collect::<Vec<_>>();
    let terms: Vec<PartitionTerm<T>> = partitions(roots.len())
        .into_iter()
        .map(|(first, second)| PartitionTerm {
            level: second.len(),
            value: w_coefficient(ch, &pick(&first), &pick(&second)),
            first,
            second,
        })
        .collect();
    let w0 = terms[0].value;
    Ok(ExpansionCoefficients { terms, w0 })
}

/// `W₀` from the matrix element `(2(ρ−1)/ξ⁻)^N ⟨Ω|B̄(ū)|Ω⟩`.
pub fn w0_from_matrix<T: Real>(ch: &Chain<T>, roots: &[C<T>]) -> Result<C<T>> {
    require_generic(ch, "modified")?;
    let b = &ch.boundary;
    let psi = state(ch, roots, Family::Modified)?;
    let k = cr::<T>(2.0) * (b.rho - C::one()) / b.xi_minus;
    Ok(psi[0] * powi(k, roots.len()))
}

/// `Π (−2v−1)/(v+q) Λ₂(v) · Π_{i<j} (v_i+v_j+2)/(v_i+v_j)`.
pub fn w0_diagonal_product<T: Real>(ch: &Chain<T>, roots: &[C<T>]) -> C<T> {
    let q = ch.boundary.q;
    let one = C::<T>::one();
    let two = cr::<T>(2.0);
    let mut out = one;
    for (i, &v) in roots.iter().enumerate() {
        out = out * (-two * v - one) / (v + q) * lambda2(ch, v);
        for &vj in &roots[i + 1..] {
            out = out * (v + vj + two) / (v + vj);
        }
    }
    out
}

pub(crate) fn powi<T: Real>(z: C<T>, k: usize) -> C<T> {
    (0..k).fold(C::one(), |acc, _| acc * z)
}

/// Relative residuals of the expansion of `B̄(ū)|Ω⟩` over `B(ū_II)|Ω⟩`
/// and of the dual expansion over `⟨Ω|C(ū_II)`.
pub fn check_expansion<T: Real>(ch: &Chain<T>, roots: &[C<T>]) -> Result<SidedResidual> {
    require_generic(ch, "modified")?;
    let coeffs = w_coefficients(ch, roots)?;
    let b = &ch.boundary;
    let nn = roots.len();
    let (rho, xp, xm) = (b.rho, b.xi_plus, b.xi_minus);
    let two_r1 = cr::<T>(2.0) * (rho - C::one());
    let side = |dual: bool| -> Result<f64> {
        let (xi_a, xi_b) = if dual { (xp, xm) } else { (xm, xp) };
        let pref = powi((rho - cr(2.0)) * xi_a / (two_r1 * xi_b), nn);
        let lhs = if dual {
            dual_state(ch, roots, Family::Modified)?
        } else {
            state(ch, roots, Family::Modified)?
        };
        let mut terms = vec![];
        for t in &coeffs.terms {
            let second: Vec<C<T>> = t.second.iter().map(|&k| roots[k]).collect();
            let v = if dual {
                dual_state(ch, &second, Family::Plain)?
            } else {
                state(ch, &second, Family::Plain)?
            };
            let k = pref * powi(rho / xi_a, nn - t.level) * t.value;
            terms.push(vscale(&v, k));
        }
        Ok(relative_residual_vec(&lhs, &terms))
    };
    Ok(SidedResidual {
        ket: side(false)?,
        bra: side(true)?,
    })
}

/// `H_k(u, v̄)`.
pub fn h_single<T: Real>(ch: &Chain<T>, u: C<T>, vs: &[C<T>], k: usize) -> C<T> {
    let vk = vs[k];
    let o = without(vs, &[k]);
    let (l1u, l2u) = (lambda1(ch, u), lambda2(ch, u));
    let (l1k, l2k) = (lambda1(ch, vk), lambda2(ch, vk));
    let (fu, hu) = (prod(f, u, &o), prod(h, u, &o));
    let (fk, hk) = (prod(f, vk, &o), prod(h, vk, &o));
    l1u * (l1k * (s(u, vk) + x(u, vk)) * fu * fk + l2k * r(u, vk) * fu * hk)
        + l2u * (l1k * (qk(u, vk) + y(u, vk)) * hu * fk + l2k * w(u, vk) * hu * hk)
}

pub fn alpha11<T: Real>(u: C<T>, a: C<T>, b: C<T>) -> C<T> {
    g(u, b) * (s(u, a) * f(a, b) + f(a, u) * x(u, a))
        + n(u, b) * (y(u, a) * f(a, b) + f(a, u) * qk(u, a))
        + g(u, a) * (s(u, a) * g(a, b) + r(u, a) * n(a, b))
        + n(u, a) * (y(u, a) * g(a, b) + w(u, a) * n(a, b))
}

pub fn alpha12<T: Real>(u: C<T>, a: C<T>, b: C<T>) -> C<T> {
    kk(u, b) * (f(a, u) * qk(u, a) + f(a, b) * y(u, a))
        + w(u, b) * (f(a, b) * s(u, a) + f(a, u) * x(u, a))
        + g(u, a) * (kk(a, b) * r(u, a) + s(u, a) * w(a, b))
        + n(u, a) * (kk(a, b) * w(u, a) + y(u, a) * w(a, b))
}

pub fn alpha21<T: Real>(u: C<T>, a: C<T>, b: C<T>) -> C<T> {
    r(u, a) * (g(u, b) * h(a, b) + n(a, b) * w(u, a))
        + g(a, b) * (kk(u, a) * y(u, a) + s(u, a) * w(u, a))
        + w(u, a) * (h(a, b) * n(u, b) + kk(u, a) * n(a, b))
}

pub fn alpha22<T: Real>(u: C<T>, a: C<T>, b: C<T>) -> C<T> {
    r(u, a) * (h(a, b) * w(u, b) + kk(a, b) * w(u, a))
        + w(u, a) * (h(a, b) * kk(u, b) + kk(u, a) * kk(a, b))
        + w(a, b) * (kk(u, a) * y(u, a) + s(u, a) * w(u, a))
}

/// `H_kl(u, v̄)`; the `Λ₂Λ₂` weight takes its arguments as `α₂₂(u, v_l, v_k)`.
pub fn h_pair<T: Real>(ch: &Chain<T>, u: C<T>, vs: &[C<T>], k: usize, l: usize) -> C<T> {
    let (a, b) = (vs[k], vs[l]);
    let o = without(vs, &[k, l]);
    let (fa, ha) = (prod(f, a, &o), prod(h, a, &o));
    let (fb, hb) = (prod(f, b, &o), prod(h, b, &o));
    let (l1a, l2a) = (lambda1(ch, a), lambda2(ch, a));
    let (l1b, l2b) = (lambda1(ch, b), lambda2(ch, b));
    l1a * (l1b * alpha11(u, a, b) * fa * fb + l2b * alpha12(u, a, b) * fa * hb)
        + l2a * (l1b * alpha21(u, a, b) * ha * fb + l2b * alpha22(u, b, a) * ha * hb)
}

/// Relative residual of the five-group expansion of `C̄(u)|Ψ^N(v̄)⟩`.
///
/// In diagonal mode only the `H_k`, `H_kl` groups remain and any `#v̄` is
/// accepted.
pub fn check_c_action<T: Real>(ch: &Chain<T>, u: C<T>, vs: &[C<T>]) -> Result<f64> {
    if !ch.is_diagonal() {
        require_full(ch, vs)?;
    }
    guard_point(ch, u, vs)?;
    guard_roots(ch, vs)?;
    let fam = Family::Modified;
    let psi = state(ch, vs, fam)?;
    let lhs = annihilation(ch, u, fam)?.apply(&psi);
    let mut terms = vec![];
    if !ch.is_diagonal() {
        let b = &ch.boundary;
        let k = b.rho / b.xi_minus;
        let one = C::<T>::one();
        let two = cr::<T>(2.0);
        terms.push(vscale(&creation(ch, u, fam)?.apply(&psi), -(k * k)));
        let diag = phi(-u - one) * lambda1(ch, u) * prod(f, u, vs) - lambda2(ch, u) * prod(h, u, vs);
        terms.push(vscale(&psi, k * diag));
        for (i, &vi) in vs.iter().enumerate() {
            let o = without(vs, &[i]);
            let weight = w(u, vi)
                * (two * vi * lambda1(ch, vi) * g(u, vi) * prod(f, vi, &o)
                    + (one + two * vi) * lambda2(ch, vi) * kk(vi, u) * prod(h, vi, &o));
            terms.push(vscale(&state(ch, &replaced(vs, i, u), fam)?, -(k * weight)));
        }
    }
    for i in 0..vs.len() {
        terms.push(vscale(&state(ch, &without(vs, &[i]), fam)?, h_single(ch, u, vs, i)));
    }
    for i in 0..vs.len() {
        for j in i + 1..vs.len() {
            let mut rest = vec![u];
            rest.extend(without(vs, &[i, j]));
            terms.push(vscale(&state(ch, &rest, fam)?, h_pair(ch, u, vs, i, j)));
        }
    }
    Ok(relative_residual_vec(&lhs, &terms))
}

/// `‖v‖` as `f64`.
pub fn norm64<T: Real>(v: &[C<T>]) -> f64 {
    vnorm(v).to_f64()
}
