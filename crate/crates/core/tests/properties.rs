//! Randomized invariants. Structured draws (chains, generic point sets) come
//! from a proptest-chosen seed fed to the crate sampler so pole margins are
//! respected; plain matrices come straight from proptest strategies.

use proptest::prelude::*;
use segment_bethe_core::algebra::{check_dual_reflection, check_reflection, check_ybe, rho_of, BoundaryParams};
use segment_bethe_core::bethe::eigenvalue::lambda_total;
use segment_bethe_core::bethe::kernels::big_q;
use segment_bethe_core::linalg::{
    det, eigenvalues, kron, relative_residual, relative_residual_vec, trace_aux, vnorm, ComplexMatrix,
};
use segment_bethe_core::sampling::Sampler;
use segment_bethe_core::scalar_products::{
    cauchy_det_closed, cauchy_matrix, conditioning, richardson, scalar_product_direct, slavnov_modified, Placement,
};
use segment_bethe_core::vectors::{build_psi, check_central_relation};
use segment_bethe_core::bethe::solver::{solve_bethe, SolveOptions};
use segment_bethe_core::{Chain, C};

type Z = C<f64>;

fn complex() -> impl Strategy<Value = Z> {
    (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(re, im)| Z::new(re, im))
}

fn matrix(n: usize) -> impl Strategy<Value = ComplexMatrix<f64>> {
    prop::collection::vec(complex(), n * n).prop_map(move |d| ComplexMatrix::from_vec(n, n, d))
}

fn rel(a: Z, b: Z) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(f64::MIN_POSITIVE)
}

fn max_abs_diff(a: &ComplexMatrix<f64>, b: &ComplexMatrix<f64>) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kron_is_associative(a in matrix(2), b in matrix(2), c in matrix(2)) {
        let left = kron(&kron(&a, &b).unwrap(), &c).unwrap();
        let right = kron(&a, &kron(&b, &c).unwrap()).unwrap();
        prop_assert!(max_abs_diff(&left, &right) <= 1e-13 * 8.0);
    }

    #[test]
    fn kron_is_bilinear(a in matrix(2), a2 in matrix(2), b in matrix(3), s in complex()) {
        let sum = ComplexMatrix::from_fn(2, 2, |i, j| a[(i, j)] * s + a2[(i, j)]);
        let lhs = kron(&sum, &b).unwrap();
        let ka = kron(&a, &b).unwrap();
        let ka2 = kron(&a2, &b).unwrap();
        let rhs = ComplexMatrix::from_fn(6, 6, |i, j| ka[(i, j)] * s + ka2[(i, j)]);
        prop_assert!(max_abs_diff(&lhs, &rhs) <= 1e-13 * 16.0);
    }

    #[test]
    fn partial_trace_of_product(b in matrix(2), a in matrix(4)) {
        let lhs = trace_aux(&kron(&b, &a).unwrap()).unwrap();
        let rhs = a.scale(b.trace());
        prop_assert!(max_abs_diff(&lhs, &rhs) <= 1e-13 * 8.0);
    }

    #[test]
    fn determinant_is_multiplicative(a in matrix(5), b in matrix(5)) {
        let lhs = det(&a.matmul(&b)).unwrap();
        let rhs = det(&a).unwrap() * det(&b).unwrap();
        prop_assume!(rhs.norm() > 1e-6);
        prop_assert!(rel(lhs, rhs) <= 1e-10, "{lhs} vs {rhs}");
    }

    #[test]
    fn eigenvalues_sum_to_trace(a in matrix(6)) {
        let sum: Z = eigenvalues(&a).unwrap().into_iter().sum();
        let tr = a.trace();
        let scale = a.frobenius_f64();
        prop_assert!((sum - tr).norm() <= 1e-10 * scale.max(tr.norm()));
    }

    #[test]
    fn rho_solves_its_quadratic(xp in complex(), xm in complex()) {
        let rho = rho_of(xp, xm);
        let r = (rho * rho - rho * 2.0 - xp * xm).norm();
        prop_assert!(r <= 1e-13 * (1.0 + (xp * xm).norm()));
    }

    #[test]
    fn q_kernel_is_reflection_invariant(u in complex(), v in complex()) {
        // Literally the same product; only operand rounding differs.
        let scale = (u.norm() + v.norm() + 1.0).powi(2);
        prop_assert!((big_q(u, -v - 1.0) - big_q(u, v)).norm() <= 8.0 * f64::EPSILON * scale);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn algebraic_identities(seed in any::<u64>()) {
        let mut s = Sampler::new(seed);
        let ch = s.chain(1);
        let u = s.spectral_point(&ch, 2.0, &[]);
        let v = s.spectral_point(&ch, 2.0, &[u]);
        prop_assert!(check_ybe(u, v) <= 1e-12);
        prop_assert!(check_reflection(u, v, &ch.boundary) <= 1e-12);
        prop_assert!(check_dual_reflection(u, v, &ch.boundary) <= 1e-12);
    }

    #[test]
    fn eigenvalue_is_reflection_invariant(seed in any::<u64>(), n in 1usize..=4, i in 0usize..4) {
        let mut s = Sampler::new(seed);
        let ch = s.chain(n);
        let roots = s.points(&ch, n, 1.0, &[]);
        let u = s.spectral_point(&ch, 1.0, &roots);
        let mut flipped = roots.clone();
        let i = i % n;
        flipped[i] = -flipped[i] - 1.0;
        prop_assert!(rel(lambda_total(&ch, u, &roots), lambda_total(&ch, u, &flipped)) <= 1e-12);
    }

    #[test]
    fn bethe_vector_is_permutation_symmetric(seed in any::<u64>(), n in 2usize..=3) {
        let mut s = Sampler::new(seed);
        let ch = s.chain(n);
        let roots = s.points(&ch, n, 1.0, &[]);
        let mut rotated = roots.clone();
        rotated.rotate_left(1);
        let a = build_psi(&ch, &roots).unwrap().vector;
        let b = build_psi(&ch, &rotated).unwrap().vector;
        prop_assert!(relative_residual_vec(&a, &[b]) <= 1e-11);
    }

    #[test]
    fn cauchy_determinant_closed_form(seed in any::<u64>(), n in 1usize..=4) {
        let mut s = Sampler::new(seed);
        let ch = s.chain(1);
        let on = s.points(&ch, n, 1.0, &[]);
        let free = s.points(&ch, n, 1.0, &on);
        prop_assume!(!conditioning(&free, &on).warning);
        let d = det(&cauchy_matrix(&free, &on)).unwrap();
        prop_assert!(rel(d, cauchy_det_closed(&free, &on)) <= 1e-10);
    }

    #[test]
    fn richardson_is_exact_on_polynomials(c0 in complex(), c1 in complex(), c2 in complex()) {
        let values: Vec<Z> = (0..4)
            .map(|l| {
                let h = 0.1 / f64::powi(2.0, l);
                c0 + c1 * h + c2 * h * h
            })
            .collect();
        prop_assert!((richardson(&values) - c0).norm() <= 1e-12 * (1.0 + c0.norm() + c1.norm() + c2.norm()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn slavnov_placements_match_direct(seed in any::<u64>(), n in 1usize..=3) {
        let mut s = Sampler::new(seed);
        let ch = s.chain(n);
        let out = solve_bethe(&ch, &SolveOptions { seed, ..SolveOptions::default() }).unwrap();
        let on = out.sets[0].roots.clone();
        let free = s.points(&ch, n, 1.0, &on);
        prop_assume!(!conditioning(&free, &on).warning);
        let bra = slavnov_modified(&ch, &on, &free, Placement::BraOnShell).unwrap().value;
        let ket = slavnov_modified(&ch, &free, &on, Placement::KetOnShell).unwrap().value;
        prop_assert!(rel(bra, scalar_product_direct(&ch, &on, &free).unwrap()) <= 1e-8);
        prop_assert!(rel(ket, scalar_product_direct(&ch, &free, &on).unwrap()) <= 1e-8);
    }
}

/// Both sides of the central relation carry a factor of `ρ`: shrinking
/// `ξ^±` along a ray scales `ρ` quadratically while the relation keeps
/// holding.
#[test]
fn central_relation_scales_with_rho() {
    let mut s = Sampler::new(17);
    let ch = s.chain(2);
    let roots = s.points(&ch, 2, 1.0, &[]);
    let u = s.spectral_point(&ch, 1.0, &roots);
    let b = ch.boundary;
    let mut lhs_norms = vec![];
    for scale in [1e-1, 1e-2, 1e-3] {
        let bp = BoundaryParams::new(b.p, b.q, b.xi_plus * scale, b.xi_minus * scale).unwrap();
        let scaled = Chain::new(ch.spec.clone(), bp);
        assert!(check_central_relation(&scaled, u, &roots).unwrap().max() <= 1e-9);
        let lg = segment_bethe_core::bethe::eigenvalue::lambda_g(&scaled, u, &roots);
        let psi = build_psi(&scaled, &roots).unwrap().vector;
        lhs_norms.push((lg * vnorm(&psi)).norm() / bp.rho.norm());
    }
    // Λ_g |Ψ⟩ / ρ stays bounded and converges as ρ → 0.
    assert!(rel(Z::new(lhs_norms[1], 0.0), Z::new(lhs_norms[2], 0.0)) < 0.05, "{lhs_norms:?}");
}

#[test]
fn transfer_matrices_commute() {
    let mut s = Sampler::new(3);
    for n in 1..=4 {
        let ch = s.chain(n);
        for _ in 0..5 {
            let u = s.spectral_point(&ch, 1.0, &[]);
            let v = s.spectral_point(&ch, 1.0, &[u]);
            let tu = ch.transfer_matrix(u).unwrap().into_matrix();
            let tv = ch.transfer_matrix(v).unwrap().into_matrix();
            let r = tu.commutator(&tv).frobenius_f64() / (tu.frobenius_f64() * tv.frobenius_f64());
            assert!(r <= 1e-10, "N={n}: {r}");
            assert!(relative_residual(&tu.matmul(&tv), &tv.matmul(&tu)) <= 1e-10);
        }
    }
}
