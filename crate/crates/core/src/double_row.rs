//! Bulk and double-row monodromies, the operators `A, B, C, D` and their
//! modified counterparts, the transfer matrix and the Hamiltonian.

use num_traits::{One, Zero};

use crate::algebra::{k_minus, k_plus, q_similarity, BoundaryParams, ChainSpec};
use crate::bethe::eigenvalue::{alpha, alpha_bar, beta, delta, delta_bar, gamma};
use crate::bethe::kernels::{f, g, h, kk, n, phi, qk, r, s, w, x, y, POLE_EPS};
use crate::chain::Chain;
use crate::error::{Error, Result};
use crate::linalg::matrix::pauli;
use crate::linalg::{
    aux_blocks, cabs64, cr, embed_site, inverse, kron, relative_residual, trace_aux,
    ComplexMatrix, QuantumOperator, Real, C,
};

/// Relative tolerance for the internal agreement of the two transfer forms.
pub const TRANSFER_AGREEMENT: f64 = 1e-11;

type M<T> = ComplexMatrix<T>;

/// `A(u), B(u), C(u), D(u)` with `D` already separated from `A/(2u+1)`.
#[derive(Clone, Debug)]
pub struct DoubleRowEntries<T: Real> {
    pub u: C<T>,
    pub a: QuantumOperator<T>,
    pub b: QuantumOperator<T>,
    pub c: QuantumOperator<T>,
    pub d: QuantumOperator<T>,
}

/// `Ā(u), B̄(u), C̄(u), D̄(u)`.
#[derive(Clone, Debug)]
pub struct ModifiedEntries<T: Real> {
    pub u: C<T>,
    pub a_bar: QuantumOperator<T>,
    pub b_bar: QuantumOperator<T>,
    pub c_bar: QuantumOperator<T>,
    pub d_bar: QuantumOperator<T>,
}

impl<T: Real> ModifiedEntries<T> {
    pub fn matrices(&self) -> [&M<T>; 4] {
        [
            self.a_bar.matrix(),
            self.b_bar.matrix(),
            self.c_bar.matrix(),
            self.d_bar.matrix(),
        ]
    }
}

impl<T: Real> DoubleRowEntries<T> {
    pub fn matrices(&self) -> [&M<T>; 4] {
        [self.a.matrix(), self.b.matrix(), self.c.matrix(), self.d.matrix()]
    }
}

/// `m · R_{a,site}(u)` on `C²_a ⊗ (C²)^{⊗N}`, using `R = u + P`.
fn mul_r<T: Real>(m: &M<T>, u: C<T>, site: usize, sites: usize) -> M<T> {
    let dim = m.rows();
    let ba = sites;
    let bs = sites - 1 - site;
    let swap = |s: usize| {
        let a = (s >> ba) & 1;
        let b = (s >> bs) & 1;
        if a == b {
            s
        } else {
            s ^ ((1 << ba) | (1 << bs))
        }
    };
    M::from_fn(dim, dim, |i, j| m[(i, j)] * u + m[(i, swap(j))])
}

fn pole_half<T: Real>(u: C<T>) -> Result<()> {
    if cabs64(cr::<T>(2.0) * u + cr(1.0)) < POLE_EPS {
        return Err(Error::Pole {
            kernel: "phi",
            detail: "2u + 1 = 0".into(),
        });
    }
    Ok(())
}

fn op<T: Real>(sites: usize, m: M<T>) -> QuantumOperator<T> {
    QuantumOperator::new(sites, m).expect("block of a 2^(N+1) matrix")
}

fn split<T: Real>(u: C<T>, sites: usize, k: &M<T>) -> [QuantumOperator<T>; 4] {
    let [[a, b], [c, d2]] = aux_blocks(k).expect("even dimension");
    let d = &d2 - &a.scale(C::<T>::one() / (cr::<T>(2.0) * u + cr(1.0)));
    [op(sites, a), op(sites, b), op(sites, c), op(sites, d)]
}

impl<T: Real> Chain<T> {
    /// `T(u) = R_{a1}(u − θ₁) ⋯ R_{aN}(u − θ_N)`.
    pub fn bulk_monodromy(&self, u: C<T>) -> M<T> {
        let n = self.sites();
        let mut m = M::identity(2 << n);
        for (i, &t) in self.spec.thetas.iter().enumerate() {
            m = mul_r(&m, u - t, i, n);
        }
        m
    }

    /// `T̂(u) = R_{aN}(u + θ_N) ⋯ R_{a1}(u + θ₁)`.
    pub fn hat_monodromy(&self, u: C<T>) -> M<T> {
        let n = self.sites();
        let mut m = M::identity(2 << n);
        for (i, &t) in self.spec.thetas.iter().enumerate().rev() {
            m = mul_r(&m, u + t, i, n);
        }
        m
    }

    /// `K_a(u) = T(u) K⁻_a(u) T̂(u)` as a `2^{N+1}` matrix.
    pub fn double_row_matrix(&self, u: C<T>) -> M<T> {
        let km = kron(&k_minus(u, &self.boundary), &M::identity(self.dim())).expect("small chain");
        &(&self.bulk_monodromy(u) * &km) * &self.hat_monodromy(u)
    }

    pub fn double_row(&self, u: C<T>) -> Result<DoubleRowEntries<T>> {
        pole_half(u)?;
        let [a, b, c, d] = split(u, self.sites(), &self.double_row_matrix(u));
        Ok(DoubleRowEntries { u, a, b, c, d })
    }

    fn require_modified(&self) -> Result<()> {
        if self.is_diagonal() {
            return Err(Error::InvalidBoundary(
                "modified operators are undefined in diagonal mode".into(),
            ));
        }
        Ok(())
    }

    /// The displayed linear combinations of `A, B, C, D`.
    pub fn modified_entries(&self, u: C<T>) -> Result<ModifiedEntries<T>> {
        self.require_modified()?;
        let e = self.double_row(u)?;
        let BoundaryParams {
            rho, xi_plus: xp, xi_minus: xm, ..
        } = self.boundary;
        let one = C::<T>::one();
        let two = cr::<T>(2.0);
        let ph = phi(u);
        let phm = phi(-u - one);
        let pre = one / (two * (rho - one));
        let [a, b, c, d] = e.matrices();
        let comb = |ca: C<T>, cb: C<T>, cc: C<T>, cd: C<T>| {
            let m = &(&(&a.scale(ca) + &b.scale(cb)) + &c.scale(cc)) + &d.scale(cd);
            op(self.sites(), m.scale(pre))
        };
        Ok(ModifiedEntries {
            u,
            a_bar: comb(rho * ph - two, -xm, -xp, rho),
            d_bar: comb(rho * ph * phm, xm * ph, xp * ph, rho * phm - two),
            b_bar: comb(xm * phm, xm * xm / rho, -rho, -xm),
            c_bar: comb(xp * phm, -rho, xp * xp / rho, -xp),
        })
    }

    /// Same operators from the blocks of `Q_a⁻¹ K_a(u) Q_a`.
    pub fn modified_entries_by_conjugation(&self, u: C<T>) -> Result<ModifiedEntries<T>> {
        self.require_modified()?;
        pole_half(u)?;
        let q = q_similarity(&self.boundary)?;
        let id = M::identity(self.dim());
        let qa = kron(&q, &id)?;
        let qi = kron(&inverse(&q)?, &id)?;
        let kbar = &(&qi * &self.double_row_matrix(u)) * &qa;
        let [a_bar, b_bar, c_bar, d_bar] = split(u, self.sites(), &kbar);
        Ok(ModifiedEntries {
            u,
            a_bar,
            b_bar,
            c_bar,
            d_bar,
        })
    }

    /// `α A + δ D + β B + γ C`.
    pub fn transfer_original(&self, u: C<T>) -> Result<M<T>> {
        let e = self.double_row(u)?;
        let [a, b, c, d] = e.matrices();
        Ok(&(&(&a.scale(alpha(self, u)) + &d.scale(delta(self, u))) + &b.scale(beta(self, u)))
            + &c.scale(gamma(self, u)))
    }

    /// `ᾱ Ā + δ̄ D̄`.
    pub fn transfer_modified(&self, u: C<T>) -> Result<M<T>> {
        let e = self.modified_entries(u)?;
        Ok(&e.a_bar.matrix().scale(alpha_bar(self, u)) + &e.d_bar.matrix().scale(delta_bar(self, u)))
    }

    /// Literal `Tr_a(K⁺_a(u) K_a(u))`.
    pub fn transfer_trace(&self, u: C<T>) -> Result<M<T>> {
        pole_half(u)?;
        let kp = kron(&k_plus(u, &self.boundary), &M::identity(self.dim()))?;
        trace_aux(&(&kp * &self.double_row_matrix(u)))
    }

    /// Transfer matrix, cross-checked between two constructions.
    pub fn transfer_matrix(&self, u: C<T>) -> Result<QuantumOperator<T>> {
        let orig = self.transfer_original(u)?;
        let other = if self.is_diagonal() {
            self.transfer_trace(u)?
        } else {
            self.transfer_modified(u)?
        };
        let res = relative_residual(&orig, &other);
        if !(res <= TRANSFER_AGREEMENT) {
            return Err(Error::Inconsistent(format!(
                "transfer constructions disagree at relative {res:.3e}"
            )));
        }
        QuantumOperator::new(self.sites(), orig)
    }
}

/// Open-chain Hamiltonian with boundary fields at sites 1 and N.
pub fn hamiltonian<T: Real>(spec: &ChainSpec<T>, bp: &BoundaryParams<T>) -> Result<QuantumOperator<T>> {
    if bp.p.is_zero() || bp.q.is_zero() {
        return Err(Error::InvalidBoundary("the Hamiltonian needs p != 0 and q != 0".into()));
    }
    let n = spec.sites;
    let dim = 1usize << n;
    let one = C::<T>::one();
    let first = &(&pauli::sz() + &pauli::sp().scale(bp.xi_plus)) + &pauli::sm().scale(bp.xi_minus);
    let mut hm = &embed_site(&first, n, 0).scale(one / bp.q)
        + &embed_site(&pauli::sz(), n, n - 1).scale(one / bp.p);
    let pair = {
        let xx = kron(&pauli::sx(), &pauli::sx())?;
        let yy = kron(&pauli::sy(), &pauli::sy())?;
        let zz = kron(&pauli::sz(), &pauli::sz())?;
        &(&xx + &yy) + &zz
    };
    for i in 0..n.saturating_sub(1) {
        hm = &hm + &crate::linalg::embed_pair(&pair, n, i, i + 1);
    }
    debug_assert_eq!(hm.rows(), dim);
    QuantumOperator::new(n, hm)
}

/// One named exchange-relation residual.
#[derive(Clone, Debug)]
pub struct RelationResidual {
    pub name: String,
    pub residual: f64,
}

fn relations<T: Real>(u: C<T>, v: C<T>, eu: [&M<T>; 4], ev: [&M<T>; 4], prefix: &str) -> Vec<RelationResidual> {
    let [a, b, c, d] = eu;
    let [a2, b2, c2, d2] = ev;
    let lin = |terms: &[(C<T>, M<T>)]| {
        terms
            .iter()
            .skip(1)
            .fold(terms[0].1.scale(terms[0].0), |acc, (k, m)| &acc + &m.scale(*k))
    };
    let one = C::<T>::one();
    let pairs: Vec<(&str, M<T>, M<T>)> = vec![
        ("BB", b * b2, b2 * b),
        ("CC", c * c2, c2 * c),
        (
            "AB",
            a * b2,
            lin(&[(f(u, v), b2 * a), (g(u, v), b * a2), (w(u, v), b * d2)]),
        ),
        (
            "CA",
            c2 * a,
            lin(&[(f(u, v), a * c2), (g(u, v), a2 * c), (w(u, v), d2 * c)]),
        ),
        (
            "DB",
            d * b2,
            lin(&[(h(u, v), b2 * d), (kk(u, v), b * d2), (n(u, v), b * a2)]),
        ),
        (
            "CD",
            c2 * d,
            lin(&[(h(u, v), d * c2), (kk(u, v), d2 * c), (n(u, v), a2 * c)]),
        ),
        (
            "CB",
            c * b2,
            lin(&[
                (one, b2 * c),
                (s(u, v), a * a2),
                (x(u, v), a2 * a),
                (y(u, v), d * a2),
                (r(u, v), a * d2),
                (qk(u, v), a2 * d),
                (w(u, v), d * d2),
            ]),
        ),
    ];
    pairs
        .into_iter()
        .map(|(name, l, rr)| RelationResidual {
            name: format!("{prefix}{name}"),
            residual: relative_residual(&l, &rr),
        })
        .collect()
}

/// Residuals of the seven exchange relations for the plain operators and,
/// outside diagonal mode, for the modified ones (names prefixed `bar_`).
pub fn check_exchange_relations<T: Real>(ch: &Chain<T>, u: C<T>, v: C<T>) -> Result<Vec<RelationResidual>> {
    crate::bethe::kernels::KernelPoint::new(u, v)?;
    let eu = ch.double_row(u)?;
    let ev = ch.double_row(v)?;
    let mut out = relations(u, v, eu.matrices(), ev.matrices(), "");
    if !ch.is_diagonal() {
        let mu = ch.modified_entries(u)?;
        let mv = ch.modified_entries(v)?;
        out.extend(relations(u, v, mu.matrices(), mv.matrices(), "bar_"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bethe::eigenvalue::{lambda1, lambda2};
    use crate::linalg::{basis, embed_pair, vnorm};
    use crate::algebra::r_matrix;

    type Z = C<f64>;

    fn c(re: f64, im: f64) -> Z {
        Z::new(re, im)
    }

    fn bp() -> BoundaryParams<f64> {
        BoundaryParams::new(c(2.1, 0.2), c(1.4, -0.3), c(0.7, 0.2), c(-0.5, 0.4)).unwrap()
    }

    fn chain(thetas: Vec<Z>) -> Chain<f64> {
        Chain::new(ChainSpec::new(thetas).unwrap(), bp())
    }

    #[test]
    fn single_factor_monodromy() {
        let ch = Chain::new(ChainSpec::<f64>::homogeneous(1), bp());
        let u = c(0.3, 0.7);
        assert!(relative_residual(&ch.bulk_monodromy(u), &r_matrix(u)) < 1e-15);
    }

    #[test]
    fn monodromy_matches_embedded_product() {
        let ch = chain(vec![c(0.2, 0.1), c(-0.3, 0.25), c(0.15, -0.4)]);
        let u = c(0.4, -0.2);
        let mut want = M::identity(16);
        for (i, &t) in ch.spec.thetas.iter().enumerate() {
            want = &want * &embed_pair(&r_matrix(u - t), 4, 0, i + 1);
        }
        assert!(relative_residual(&ch.bulk_monodromy(u), &want) < 1e-15);
        let mut inv = M::identity(16);
        for (i, &t) in ch.spec.thetas.iter().enumerate().rev() {
            inv = &inv * &embed_pair(&r_matrix(-(u - t)), 4, 0, i + 1);
        }
        let scale = ch
            .spec
            .thetas
            .iter()
            .fold(Z::one(), |acc, &t| acc * (Z::one() - (u - t) * (u - t)));
        let prod = &ch.bulk_monodromy(u) * &inv;
        assert!(relative_residual(&prod, &M::identity(16).scale(scale)) < 1e-14);
    }

    #[test]
    fn vacuum_actions() {
        let ch = chain(vec![c(0.2, 0.1), c(-0.3, 0.25)]);
        let u = c(0.37, -0.52);
        let e = ch.double_row(u).unwrap();
        let om = basis::<f64>(4, 0);
        let [a, b, cc, d] = e.matrices();
        let l1 = lambda1(&ch, u);
        let l2 = lambda2(&ch, u);
        let diff = |v: Vec<Z>, s: Z| vnorm(&v.iter().zip(&om).map(|(x, o)| x - o * s).collect::<Vec<_>>());
        assert!(diff(a.apply(&om), l1) < 1e-12 * l1.norm());
        assert!(diff(d.apply(&om), l2) < 1e-12 * l1.norm());
        assert!(vnorm(&cc.apply(&om)) < 1e-12 * l1.norm());
        assert!(vnorm(&b.apply_left(&om)) < 1e-12 * l1.norm());
    }

    #[test]
    fn two_modified_constructions_agree() {
        let ch = chain(vec![c(0.2, 0.1), c(-0.3, 0.25)]);
        for u in [c(0.37, -0.52), c(-1.2, 0.3)] {
            let a = ch.modified_entries(u).unwrap();
            let b = ch.modified_entries_by_conjugation(u).unwrap();
            for (x, y) in a.matrices().iter().zip(b.matrices()) {
                assert!(relative_residual(x, y) < 1e-12);
            }
        }
    }

    #[test]
    fn transfer_forms_and_commutation() {
        let ch = chain(vec![c(0.2, 0.1), c(-0.3, 0.25), c(0.15, -0.4)]);
        let (u, v) = (c(0.37, -0.52), c(-0.8, 0.9));
        let tu = ch.transfer_matrix(u).unwrap().into_matrix();
        let tv = ch.transfer_matrix(v).unwrap().into_matrix();
        assert!(relative_residual(&tu, &ch.transfer_trace(u).unwrap()) < 1e-12);
        let comm = tu.commutator(&tv).frobenius_f64();
        assert!(comm <= 1e-12 * tu.frobenius_f64() * tv.frobenius_f64());
    }

    #[test]
    fn hamiltonian_two_sites() {
        let bd = BoundaryParams::diagonal(c(2.0, 0.0), c(4.0, 0.0));
        let hm = hamiltonian(&ChainSpec::homogeneous(2), &bd).unwrap().into_matrix();
        let want = M::from_rows(vec![
            vec![c(1.0 + 0.25 + 0.5, 0.0), Z::zero(), Z::zero(), Z::zero()],
            vec![Z::zero(), c(-1.0 + 0.25 - 0.5, 0.0), c(2.0, 0.0), Z::zero()],
            vec![Z::zero(), c(2.0, 0.0), c(-1.0 - 0.25 + 0.5, 0.0), Z::zero()],
            vec![Z::zero(), Z::zero(), Z::zero(), c(1.0 - 0.25 - 0.5, 0.0)],
        ]);
        assert!(relative_residual(&hm, &want) < 1e-15);
    }

    #[test]
    fn hamiltonian_commutes_with_homogeneous_transfer() {
        let ch = Chain::new(ChainSpec::<f64>::homogeneous(3), bp());
        let hm = hamiltonian(&ch.spec, &ch.boundary).unwrap().into_matrix();
        let t = ch.transfer_matrix(c(0.3, 0.45)).unwrap().into_matrix();
        assert!(hm.commutator(&t).frobenius_f64() <= 1e-12 * hm.frobenius_f64() * t.frobenius_f64());
        let swapped = BoundaryParams::new(bp().p, bp().q, bp().xi_minus, bp().xi_plus).unwrap();
        let hs = hamiltonian(&ch.spec, &swapped).unwrap().into_matrix();
        assert!(relative_residual(&hs, &hm.transpose()) < 1e-15);
    }

    #[test]
    fn exchange_relations_hold() {
        let ch = chain(vec![c(0.2, 0.1), c(-0.3, 0.25)]);
        let res = check_exchange_relations(&ch, c(0.37, -0.52), c(-0.8, 0.9)).unwrap();
        assert_eq!(res.len(), 14);
        for r in res {
            assert!(r.residual <= 1e-12, "{} {}", r.name, r.residual);
        }
    }

    #[test]
    fn diagonal_mode_bypasses_modified_form() {
        let ch = Chain::new(
            ChainSpec::new(vec![c(0.2, 0.1)]).unwrap(),
            BoundaryParams::diagonal(c(2.0, 0.1), c(1.5, 0.0)),
        );
        assert!(ch.modified_entries(c(0.3, 0.0)).is_err());
        assert!(ch.transfer_matrix(c(0.3, 0.0)).is_ok());
        assert!(ch.double_row(c(-0.5, 0.0)).is_err());
    }
}
