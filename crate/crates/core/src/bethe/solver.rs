//! Damped complex Newton solver for the Bethe equations, with multistart
//! seeding and a brute-force spectrum-matching oracle.
//!
//! Spectrum matching diagonalizes `t(w₀)` once. Because the transfer matrices
//! commute, the same eigenvectors diagonalize `t(w)` at every `w`, which
//! gives each eigenvalue branch `λ_b(w)` as a function. The roots of branch
//! `b` are then found by solving `Λ(w_k, ū) = λ_b(w_k)` at `#ū` nodes and
//! refining on the Bethe equations themselves. The first candidate comes
//! from the TQ relation, which is linear in the coefficients of `Q`; random
//! Newton seeds follow only if that candidate is rejected.

use num_traits::{One, Zero};
use rayon::prelude::*;

use super::eigenvalue::{
    alpha_bar, delta_bar, e_d_terms, e_g, guard_roots, lambda1, lambda2, lambda_d, lambda_total, phi_tilde,
};
use super::kernels::{Field, Jet};
use crate::chain::Chain;
use crate::error::{Error, Result};
use crate::linalg::scalar::{from_c64, to_c64};
use crate::linalg::{cabs64, cr, csqrt, eig, inverse, solve, ComplexMatrix, Real, C};
use crate::sampling::{is_clear, Sampler};
use crate::vectors::{norm64, state, Family};

/// Minimum `|u_i − u_j|` and `|u_i + u_j + 1|` inside a root set.
pub const ROOT_SEPARATION: f64 = 1e-6;
/// Tolerance on reflection-normalized, sorted root sets when deduplicating.
pub const DEDUP_TOL: f64 = 1e-6;

/// Newton iteration limits.
#[derive(Clone, Copy, Debug)]
pub struct NewtonOptions {
    pub max_iterations: usize,
    pub max_halvings: usize,
    /// Stop once the scaled residual is below this.
    pub tolerance: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            max_halvings: 30,
            tolerance: 1e-12,
        }
    }
}

/// Seeding strategy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    /// Perturbed `±θ_i − 1/2` lattice points and random disc samples.
    Multistart { starts: usize },
    /// One root set per eigenvalue branch of the brute-force transfer matrix.
    SpectrumMatching,
}

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    pub strategy: Strategy,
    pub seed: u64,
    pub newton: NewtonOptions,
    /// Scaled residual below which a set counts as on shell.
    pub on_shell_tolerance: f64,
    /// Relative eigenvalue agreement required to match a branch.
    pub match_tolerance: f64,
    /// Random test points (besides `w₀`) used for branch agreement.
    pub test_points: usize,
    /// Seeds tried per branch in spectrum matching.
    pub attempts: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            strategy: Strategy::SpectrumMatching,
            seed: 0,
            newton: NewtonOptions::default(),
            on_shell_tolerance: 1e-10,
            match_tolerance: 1e-8,
            test_points: 5,
            attempts: 400,
        }
    }
}

/// A candidate solution of the Bethe equations.
#[derive(Clone, Debug)]
pub struct BetheRoots<T: Real> {
    pub roots: Vec<C<T>>,
    /// `E(u_i, ū_i)` (dressed amplitudes in diagonal mode).
    pub residuals: Vec<C<T>>,
    /// Largest `|E_i|` relative to the sum of the moduli of its terms.
    pub scaled_residual: f64,
    pub on_shell: bool,
    pub matched_eigenvalue_index: Option<usize>,
    /// Worst relative eigenvalue disagreement over the test points, when matched.
    pub eigenvalue_agreement: Option<f64>,
}

/// A branch for which no admissible root set was found.
#[derive(Clone, Debug)]
pub struct BranchFailure {
    pub branch: usize,
    pub eigenvalue: C<f64>,
    pub reason: String,
}

#[derive(Clone, Debug)]
pub struct SolveOutcome<T: Real> {
    pub sets: Vec<BetheRoots<T>>,
    pub failures: Vec<BranchFailure>,
    pub spectrum: Spectrum<T>,
    /// Points at which branch agreement was measured (`w₀` first).
    pub test_points: Vec<C<T>>,
}

impl<T: Real> SolveOutcome<T> {
    /// Each branch matched by exactly one set.
    pub fn is_complete(&self) -> bool {
        let n = self.spectrum.values.len();
        let mut hits = vec![0usize; n];
        for s in &self.sets {
            if let Some(b) = s.matched_eigenvalue_index {
                hits[b] += 1;
            }
        }
        self.failures.is_empty() && hits.iter().all(|&h| h == 1)
    }

    /// Worst branch agreement over all matched sets.
    pub fn worst_agreement(&self) -> f64 {
        self.sets
            .iter()
            .filter_map(|s| s.eigenvalue_agreement)
            .fold(0.0, f64::max)
    }
}

/// Eigen-decomposition of `t(w₀)` reused as a common eigenbasis.
#[derive(Clone, Debug)]
pub struct Spectrum<T: Real> {
    pub w0: C<T>,
    pub values: Vec<C<T>>,
    pub vectors: ComplexMatrix<T>,
    pub inverse: ComplexMatrix<T>,
    /// Number of flipped spins carried by each eigenvector (diagonal mode).
    pub magnons: Vec<Option<usize>>,
}

impl<T: Real> Spectrum<T> {
    pub fn new(ch: &Chain<T>, w0: C<T>) -> Result<Self> {
        let t = ch.transfer_matrix(w0)?;
        let e = eig(t.matrix(), true)?;
        let vectors = e.vectors.expect("requested eigenvectors");
        let inverse = inverse(&vectors)?;
        let magnons = (0..vectors.cols())
            .map(|b| ch.is_diagonal().then(|| dominant_sector(&vectors, b, ch.sites())))
            .collect();
        Ok(Self {
            w0,
            values: e.values,
            vectors,
            inverse,
            magnons,
        })
    }

    /// `λ_b(w)` for every branch: the diagonal of `V⁻¹ t(w) V`.
    pub fn branch_values(&self, ch: &Chain<T>, w: C<T>) -> Result<Vec<C<T>>> {
        let t = ch.transfer_matrix(w)?;
        let tv = t.matrix().matmul(&self.vectors);
        Ok((0..self.values.len())
            .map(|b| {
                (0..tv.rows()).fold(C::zero(), |acc, k| acc + self.inverse[(b, k)] * tv[(k, b)])
            })
            .collect())
    }
}

fn dominant_sector<T: Real>(v: &ComplexMatrix<T>, col: usize, sites: usize) -> usize {
    let mut weight = vec![0.0; sites + 1];
    for k in 0..v.rows() {
        weight[k.count_ones() as usize] += cabs64(v[(k, col)]).powi(2);
    }
    weight
        .iter()
        .enumerate()
        .fold((0, -1.0), |best, (m, &w)| if w > best.1 { (m, w) } else { best })
        .0
}

/// A square analytic system `F(x) = 0` in complex unknowns.
trait System<T: Real>: Sync {
    fn eval<S: Field<Real = T>>(&self, x: &[S]) -> Vec<S>;
    /// Scale-free size of the residual at `x`.
    fn scaled(&self, x: &[C<T>]) -> f64;
}

fn jacobian<T: Real, Sys: System<T>>(sys: &Sys, x: &[C<T>]) -> ComplexMatrix<T> {
    let n = x.len();
    let mut jac = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        let xj: Vec<Jet<T>> = x
            .iter()
            .enumerate()
            .map(|(k, &v)| if k == j { Jet::var(v) } else { Jet::cst(v) })
            .collect();
        for (i, fi) in sys.eval(&xj).into_iter().enumerate() {
            jac[(i, j)] = fi.d;
        }
    }
    jac
}

fn sq_norm<T: Real>(v: &[C<T>]) -> Option<f64> {
    let s: f64 = v.iter().map(|z| cabs64(*z).powi(2)).sum();
    s.is_finite().then_some(s)
}

/// Damped Newton; returns the last iterate and its scaled residual.
fn newton<T: Real, Sys: System<T>>(sys: &Sys, x0: &[C<T>], opts: &NewtonOptions) -> Option<(Vec<C<T>>, f64)> {
    let mut x = x0.to_vec();
    let mut fx = sys.eval(&x);
    let mut norm = sq_norm(&fx)?;
    if x.is_empty() {
        return Some((x, sys.scaled(&[])));
    }
    // Tolerances are stated for f64; wider types iterate correspondingly further.
    let eps_ratio = T::epsilon().to_f64() / f64::EPSILON;
    for _ in 0..opts.max_iterations {
        if sys.scaled(&x) <= opts.tolerance * eps_ratio {
            break;
        }
        let jac = jacobian(sys, &x);
        let rhs: Vec<C<T>> = fx.iter().map(|z| -*z).collect();
        let dx = solve(&jac, &rhs).ok()?;
        let mut step = C::<T>::one();
        let half = from_c64::<T>(C::new(0.5, 0.0));
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let xn: Vec<C<T>> = x.iter().zip(&dx).map(|(a, d)| *a + step * *d).collect();
            let fnew = sys.eval(&xn);
            if let Some(nn) = sq_norm(&fnew) {
                if nn < norm {
                    accepted = Some((xn, fnew, nn));
                    break;
                }
            }
            step = step * half;
        }
        let Some((xn, fnew, nn)) = accepted else { break };
        let moved = xn
            .iter()
            .zip(&x)
            .map(|(a, b)| cabs64(*a - *b) / (1.0 + cabs64(*b)))
            .fold(0.0, f64::max);
        x = xn;
        fx = fnew;
        norm = nn;
        if moved < 1e-15 * eps_ratio {
            break;
        }
    }
    let sc = sys.scaled(&x);
    sc.is_finite().then_some((x, sc))
}

/// The Bethe equations `E(u_i, ū_i) = 0`.
struct BetheSystem<'a, T: Real> {
    ch: &'a Chain<T>,
}

/// `E_i` evaluated on any field, dressed-only in diagonal mode.
pub fn amplitude<S: Field>(ch: &Chain<S::Real>, i: usize, roots: &[S]) -> S {
    let [a, b] = e_d_terms(ch, i, roots);
    if ch.is_diagonal() {
        a + b
    } else {
        a + b + e_g(ch, i, roots)
    }
}

/// `Λ(u, ū)`, dressed-only in diagonal mode.
pub fn eigenvalue<S: Field>(ch: &Chain<S::Real>, u: S, roots: &[S]) -> S {
    if ch.is_diagonal() {
        lambda_d(ch, u, roots)
    } else {
        lambda_total(ch, u, roots)
    }
}

/// Largest scaled Bethe residual of `roots`.
pub fn scaled_residual<T: Real>(ch: &Chain<T>, roots: &[C<T>]) -> f64 {
    (0..roots.len())
        .map(|i| {
            let [a, b] = e_d_terms(ch, i, roots);
            let g = if ch.is_diagonal() { C::zero() } else { e_g(ch, i, roots) };
            let scale = cabs64(a) + cabs64(b) + cabs64(g);
            let e = cabs64(a + b + g);
            if scale == 0.0 {
                e
            } else {
                e / scale
            }
        })
        .fold(0.0, |m, r| if r.is_nan() || m.is_nan() { f64::NAN } else { m.max(r) })
}

impl<T: Real> System<T> for BetheSystem<'_, T> {
    fn eval<S: Field<Real = T>>(&self, x: &[S]) -> Vec<S> {
        (0..x.len()).map(|i| amplitude(self.ch, i, x)).collect()
    }
    fn scaled(&self, x: &[C<T>]) -> f64 {
        scaled_residual(self.ch, x)
    }
}

/// `Λ(w_k, ū) = λ_k` at the nodes.
struct MatchSystem<'a, T: Real> {
    ch: &'a Chain<T>,
    nodes: Vec<C<T>>,
    targets: Vec<C<T>>,
}

impl<T: Real> System<T> for MatchSystem<'_, T> {
    fn eval<S: Field<Real = T>>(&self, x: &[S]) -> Vec<S> {
        self.nodes
            .iter()
            .zip(&self.targets)
            .map(|(&w, &l)| eigenvalue(self.ch, S::lift(w), x) - S::lift(l))
            .collect()
    }
    fn scaled(&self, x: &[C<T>]) -> f64 {
        self.nodes
            .iter()
            .zip(&self.targets)
            .map(|(&w, &l)| cabs64(eigenvalue(self.ch, w, x) - l) / cabs64(l).max(1e-300))
            .fold(0.0, f64::max)
    }
}

/// Newton-refine `roots` on the Bethe equations.
pub fn refine<T: Real>(ch: &Chain<T>, roots: &[C<T>], opts: &SolveOptions) -> Option<BetheRoots<T>> {
    let (x, sc) = newton(&BetheSystem { ch }, roots, &opts.newton)?;
    Some(bethe_roots(ch, x, sc, opts.on_shell_tolerance))
}

fn bethe_roots<T: Real>(ch: &Chain<T>, roots: Vec<C<T>>, scaled: f64, tol: f64) -> BetheRoots<T> {
    let residuals = (0..roots.len()).map(|i| amplitude(ch, i, &roots)).collect();
    BetheRoots {
        roots,
        residuals,
        scaled_residual: scaled,
        on_shell: scaled <= tol,
        matched_eigenvalue_index: None,
        eigenvalue_agreement: None,
    }
}

/// Distinct roots with no reflected coincidence.
pub fn roots_are_separated<T: Real>(roots: &[C<T>]) -> bool {
    let one = C::<T>::one();
    for i in 0..roots.len() {
        for j in i + 1..roots.len() {
            if cabs64(roots[i] - roots[j]) <= ROOT_SEPARATION
                || cabs64(roots[i] + roots[j] + one) <= ROOT_SEPARATION
            {
                return false;
            }
        }
    }
    true
}

/// Root set normalized for comparison: each root reflected so that
/// `Im(2u+1) ≥ 0`, then sorted.
pub fn normalized_key<T: Real>(roots: &[C<T>]) -> Vec<C<f64>> {
    let mut key: Vec<C<f64>> = roots
        .iter()
        .map(|&r| {
            let z = to_c64(r);
            let s = 2.0 * z + 1.0;
            if s.im < 0.0 || (s.im == 0.0 && s.re < 0.0) {
                -z - 1.0
            } else {
                z
            }
        })
        .collect();
    key.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    key
}

fn same_set(a: &[C<f64>], b: &[C<f64>]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).norm() <= DEDUP_TOL)
}

/// One representative per distinct set, in first-seen order.
pub fn deduplicate<T: Real>(sets: Vec<BetheRoots<T>>) -> Vec<BetheRoots<T>> {
    let mut keys: Vec<Vec<C<f64>>> = vec![];
    let mut out = vec![];
    for s in sets {
        let k = normalized_key(&s.roots);
        if !keys.iter().any(|q| same_set(q, &k)) {
            keys.push(k);
            out.push(s);
        }
    }
    out
}

/// `‖t(w)Ψ − ΛΨ‖ / (|Λ| ‖Ψ‖)` together with `‖Ψ‖`.
pub fn eigenvector_defect<T: Real>(ch: &Chain<T>, roots: &[C<T>], w: C<T>) -> Result<(f64, f64)> {
    let psi = state(ch, roots, Family::Modified)?;
    let t = ch.transfer_matrix(w)?;
    let lam = eigenvalue(ch, w, roots);
    let tp = t.apply(&psi);
    let diff: Vec<C<T>> = tp.iter().zip(&psi).map(|(a, b)| *a - lam * *b).collect();
    let np = norm64(&psi);
    Ok((norm64(&diff) / (cabs64(lam) * np).max(f64::MIN_POSITIVE), np))
}

/// Reject spurious solutions: the Bethe vector must be a nonzero eigenvector.
fn admissible<T: Real>(ch: &Chain<T>, roots: &[C<T>], w: C<T>) -> bool {
    if !roots_are_separated(roots) || guard_roots(ch, roots).is_err() {
        return false;
    }
    let scale: f64 = roots
        .iter()
        .map(|&r| match state(ch, &[r], Family::Modified) {
            Ok(v) => norm64(&v),
            Err(_) => 0.0,
        })
        .product();
    match eigenvector_defect(ch, roots, w) {
        Ok((defect, np)) => defect <= 1e-6 && np > 1e-8 * scale,
        Err(_) => false,
    }
}

fn agreement<T: Real>(ch: &Chain<T>, roots: &[C<T>], branch: usize, table: &[(C<T>, Vec<C<T>>)]) -> f64 {
    table
        .iter()
        .map(|(w, vals)| {
            let l = vals[branch];
            cabs64(eigenvalue(ch, *w, roots) - l) / cabs64(l).max(f64::MIN_POSITIVE)
        })
        .fold(0.0, |m, r| if r.is_nan() { f64::NAN } else { m.max(r) })
}

fn num_unknowns<T: Real>(ch: &Chain<T>, spec: &Spectrum<T>, branch: usize) -> usize {
    spec.magnons[branch].unwrap_or(ch.sites())
}

/// Solve the Bethe equations of `ch`.
///
/// Outside diagonal mode every set has `N` roots; in diagonal mode the
/// number of roots of a branch is its magnon number.
pub fn solve_bethe<T: Real>(ch: &Chain<T>, opts: &SolveOptions) -> Result<SolveOutcome<T>> {
    let mut sampler = Sampler::new(opts.seed);
    let ch64: Chain<f64> = ch.cast();
    let w0 = from_c64::<T>(sampler.spectral_point(&ch64, 1.0, &[]));
    let spectrum = Spectrum::new(ch, w0)?;
    let mut test_points = vec![w0];
    let mut avoid = vec![to_c64(w0)];
    for _ in 0..opts.test_points {
        let w = sampler.spectral_point(&ch64, 1.5, &avoid);
        avoid.push(w);
        test_points.push(from_c64(w));
    }
    let table: Vec<(C<T>, Vec<C<T>>)> = test_points
        .iter()
        .map(|&w| Ok((w, spectrum.branch_values(ch, w)?)))
        .collect::<Result<_>>()?;

    let (sets, failures) = match opts.strategy {
        Strategy::SpectrumMatching => {
            let results: Vec<std::result::Result<BetheRoots<T>, BranchFailure>> = (0..spectrum.values.len())
                .into_par_iter()
                .map(|b| match_branch(ch, &spectrum, b, &table, opts))
                .collect();
            let mut sets = vec![];
            let mut failures = vec![];
            for r in results {
                match r {
                    Ok(s) => sets.push(s),
                    Err(f) => failures.push(f),
                }
            }
            (deduplicate(sets), failures)
        }
        Strategy::Multistart { starts } => {
            let sets = multistart(ch, starts, &spectrum, &table, opts);
            let mut hit = vec![false; spectrum.values.len()];
            for s in &sets {
                if let Some(b) = s.matched_eigenvalue_index {
                    hit[b] = true;
                }
            }
            let failures = hit
                .iter()
                .enumerate()
                .filter(|(_, &h)| !h)
                .map(|(b, _)| BranchFailure {
                    branch: b,
                    eigenvalue: to_c64(spectrum.values[b]),
                    reason: "no multistart solution matched this branch".into(),
                })
                .collect();
            (sets, failures)
        }
    };
    Ok(SolveOutcome {
        sets,
        failures,
        spectrum,
        test_points,
    })
}

/// Roots of `#ū = m` whose eigenvalue takes `targets` at `nodes`, from the
/// TQ relation `Λ(w)Q(w) = ᾱΛ₁Q(w−1) + δ̄Λ₂Q(w+1) + ρφ̃Λ₁Λ₂`.
///
/// `Q(w) = Π_j Q(w, u_j)` is a monic polynomial of degree `m` in
/// `z = w(w+1)`, so its coefficients solve a linear least-squares problem
/// (one row per node) and the roots come from its companion matrix. Powers
/// of `z` are rescaled by the largest `|z|` at the nodes.
fn tq_roots<T: Real>(ch: &Chain<T>, m: usize, nodes: &[C<T>], targets: &[C<T>]) -> Option<Vec<C<T>>> {
    if m == 0 {
        return Some(Vec::new());
    }
    let one = C::<T>::one();
    let z = |w: C<T>| w * (w + one);
    let scale = nodes
        .iter()
        .flat_map(|&w| [z(w), z(w - one), z(w + one)])
        .map(cabs64)
        .fold(1.0, f64::max);
    let inv = cr::<T>(1.0 / scale);
    let rho = ch.boundary.rho;
    let rows = nodes.len();
    let mut a = ComplexMatrix::<T>::zeros(rows, m);
    let mut rhs = vec![C::<T>::zero(); rows];
    for (r, (&w, &l)) in nodes.iter().zip(targets).enumerate() {
        let l1 = lambda1(ch, w);
        let l2 = lambda2(ch, w);
        let ad = alpha_bar(ch, w) * l1;
        let dd = delta_bar(ch, w) * l2;
        let (z0, zm, zp) = (z(w) * inv, z(w - one) * inv, z(w + one) * inv);
        let (mut p0, mut pm, mut pp) = (one, one, one);
        for col in 0..=m {
            let coeff = l * p0 - ad * pm - dd * pp;
            if col < m {
                a[(r, col)] = coeff;
            } else {
                rhs[r] = rho * phi_tilde(ch, w) * l1 * l2 * inv.powi(m as i32) - coeff;
            }
            p0 = p0 * z0;
            pm = pm * zm;
            pp = pp * zp;
        }
    }
    let c = least_squares(a, rhs)?;
    let companion = ComplexMatrix::from_fn(m, m, |i, j| {
        if j == m - 1 {
            -c[i]
        } else if i == j + 1 {
            one
        } else {
            C::zero()
        }
    });
    let zs = eig(&companion, false).ok()?.values;
    let half = cr::<T>(0.5);
    let four = cr::<T>(4.0 * scale);
    let roots: Vec<C<T>> = zs.iter().map(|&zj| (csqrt(one + four * zj) - one) * half).collect();
    roots.iter().all(|r| cabs64(*r).is_finite()).then_some(roots)
}

/// `argmin ‖Ax − b‖` by modified Gram–Schmidt with one reorthogonalization.
fn least_squares<T: Real>(mut a: ComplexMatrix<T>, mut b: Vec<C<T>>) -> Option<Vec<C<T>>> {
    let (rows, cols) = (a.rows(), a.cols());
    let mut r = ComplexMatrix::<T>::zeros(cols, cols);
    for j in 0..cols {
        for _ in 0..2 {
            for i in 0..j {
                let proj = (0..rows).fold(C::zero(), |acc, k| acc + a[(k, i)].conj() * a[(k, j)]);
                r[(i, j)] = r[(i, j)] + proj;
                for k in 0..rows {
                    let qi = a[(k, i)];
                    a[(k, j)] = a[(k, j)] - proj * qi;
                }
            }
        }
        let norm = (0..rows).fold(T::zero(), |acc, k| acc + a[(k, j)].norm_sqr()).sqrt();
        if !(norm.to_f64() > 0.0) {
            return None;
        }
        r[(j, j)] = C::new(norm, T::zero());
        for k in 0..rows {
            a[(k, j)] = a[(k, j)] / norm;
        }
    }
    let mut qtb = vec![C::<T>::zero(); cols];
    for i in 0..cols {
        let proj = (0..rows).fold(C::zero(), |acc, k| acc + a[(k, i)].conj() * b[k]);
        for k in 0..rows {
            b[k] = b[k] - proj * a[(k, i)];
        }
        qtb[i] = proj;
    }
    let mut x = vec![C::<T>::zero(); cols];
    for i in (0..cols).rev() {
        let s = (i + 1..cols).fold(qtb[i], |acc, j| acc - r[(i, j)] * x[j]);
        x[i] = s / r[(i, i)];
    }
    Some(x)
}

fn match_branch<T: Real>(
    ch: &Chain<T>,
    spec: &Spectrum<T>,
    b: usize,
    table: &[(C<T>, Vec<C<T>>)],
    opts: &SolveOptions,
) -> std::result::Result<BetheRoots<T>, BranchFailure> {
    let m = num_unknowns(ch, spec, b);
    let fail = |reason: String| BranchFailure {
        branch: b,
        eigenvalue: to_c64(spec.values[b]),
        reason,
    };
    let mut sampler = Sampler::stream(opts.seed, 1 + b as u64);
    let ch64: Chain<f64> = ch.cast();
    let nodes: Vec<C<T>> = sampler
        .points(&ch64, m, 1.5, &[])
        .into_iter()
        .map(from_c64)
        .collect();
    let targets: Vec<C<T>> = nodes
        .iter()
        .map(|&w| spec.branch_values(ch, w).map(|v| v[b]))
        .collect::<Result<_>>()
        .map_err(|e| fail(e.to_string()))?;
    let sys = MatchSystem { ch, nodes, targets };
    let loose = NewtonOptions {
        tolerance: 1e-13,
        ..opts.newton
    };
    let mut best: Option<(f64, BetheRoots<T>)> = None;
    // Rejections by stage: match not converged, off-shell after refinement, not an eigenvector.
    let mut rejected = [0usize; 3];
    let extra: Vec<C<T>> = sampler
        .points(&ch64, 2 * m + 2, 1.5, &[])
        .into_iter()
        .map(from_c64)
        .collect();
    let extra_targets = extra
        .iter()
        .map(|&w| spec.branch_values(ch, w).map(|v| v[b]))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| fail(e.to_string()))?;
    let tq_nodes: Vec<C<T>> = sys.nodes.iter().chain(&extra).copied().collect();
    let tq_targets: Vec<C<T>> = sys.targets.iter().chain(&extra_targets).copied().collect();
    if let Some(mut cand) = tq_roots(ch, m, &tq_nodes, &tq_targets)
        .and_then(|x| refine(ch, &x, opts))
        .filter(|c| c.on_shell && admissible(ch, &c.roots, spec.w0))
    {
        let agree = agreement(ch, &cand.roots, b, table);
        cand.matched_eigenvalue_index = Some(b);
        cand.eigenvalue_agreement = Some(agree);
        if agree <= opts.match_tolerance {
            return Ok(cand);
        }
        best = Some((agree, cand));
    }
    for attempt in 0..opts.attempts.max(1) {
        // The second half of the attempts draws from wider boxes to reach far roots.
        let total = opts.attempts.max(1);
        let half = if 2 * attempt < total {
            3.0
        } else {
            3.0 * (1.0 + (4 * (2 * attempt - total) / total) as f64)
        };
        let seed: Vec<C<T>> = (0..m)
            .map(|_| from_c64(C::new(sampler.uniform(-half, half), sampler.uniform(-half, half))))
            .collect();
        let Some((x, _)) = newton(&sys, &seed, &loose).filter(|(_, sc)| *sc <= 1e-8) else {
            rejected[0] += 1;
            continue;
        };
        let Some(mut cand) = refine(ch, &x, opts).filter(|c| c.on_shell) else {
            rejected[1] += 1;
            continue;
        };
        if !admissible(ch, &cand.roots, spec.w0) {
            rejected[2] += 1;
            continue;
        }
        let agree = agreement(ch, &cand.roots, b, table);
        cand.matched_eigenvalue_index = Some(b);
        cand.eigenvalue_agreement = Some(agree);
        if agree <= opts.match_tolerance {
            return Ok(cand);
        }
        if best.as_ref().is_none_or(|(a, _)| agree < *a) {
            best = Some((agree, cand));
        }
        if m == 0 {
            break;
        }
    }
    match best {
        Some((agree, _)) => Err(fail(format!(
            "best root set agrees with the branch only to {agree:.2e}"
        ))),
        None => Err(fail(format!(
            "no admissible on-shell set in {} attempts (unmatched {}, off-shell {}, not an eigenvector {})",
            opts.attempts, rejected[0], rejected[1], rejected[2]
        ))),
    }
}

fn multistart<T: Real>(
    ch: &Chain<T>,
    starts: usize,
    spec: &Spectrum<T>,
    table: &[(C<T>, Vec<C<T>>)],
    opts: &SolveOptions,
) -> Vec<BetheRoots<T>> {
    let n = ch.sites();
    let sectors: Vec<usize> = if ch.is_diagonal() { (0..=n).collect() } else { vec![n] };
    let ch64: Chain<f64> = ch.cast();
    let lattice: Vec<C<f64>> = ch64
        .spec
        .thetas
        .iter()
        .flat_map(|&t| [t - 0.5, -t - 0.5])
        .collect();
    let jobs: Vec<(usize, usize)> = sectors
        .iter()
        .flat_map(|&m| (0..starts).map(move |s| (m, s)))
        .collect();
    let found: Vec<BetheRoots<T>> = jobs
        .par_iter()
        .filter_map(|&(m, s)| {
            let mut sm = Sampler::stream(opts.seed, 1_000_000 + (m * starts + s) as u64);
            let seed: Vec<C<T>> = (0..m)
                .map(|_| {
                    let z = if s % 2 == 0 {
                        let k = (sm.uniform(0.0, lattice.len() as f64) as usize).min(lattice.len() - 1);
                        lattice[k] + sm.in_disc(0.5) + C::new(0.0, sm.uniform(-2.0, 2.0))
                    } else {
                        sm.in_disc(3.0)
                    };
                    from_c64(z)
                })
                .collect();
            if !seed.iter().all(|&z| is_clear(&ch64, to_c64(z), &[], 1e-6)) {
                return None;
            }
            let cand = refine(ch, &seed, opts)?;
            (cand.on_shell && admissible(ch, &cand.roots, spec.w0)).then_some(cand)
        })
        .collect();
    let mut sets = deduplicate(found);
    for s in &mut sets {
        let m = s.roots.len();
        let best = (0..spec.values.len())
            .filter(|&b| num_unknowns(ch, spec, b) == m)
            .map(|b| (b, agreement(ch, &s.roots, b, table)))
            .fold(None, |acc: Option<(usize, f64)>, (b, a)| match acc {
                Some((_, x)) if x <= a => acc,
                _ => Some((b, a)),
            });
        if let Some((b, a)) = best {
            s.eigenvalue_agreement = Some(a);
            if a <= opts.match_tolerance {
                s.matched_eigenvalue_index = Some(b);
            }
        }
    }
    sets
}

/// Check that a root set is admissible for `ch`: right count and separated.
pub fn validate_roots<T: Real>(ch: &Chain<T>, roots: &[C<T>]) -> Result<()> {
    if !ch.is_diagonal() && roots.len() != ch.sites() {
        return Err(Error::InvalidRoots(format!(
            "expected {} roots, got {}",
            ch.sites(),
            roots.len()
        )));
    }
    if !roots_are_separated(roots) {
        return Err(Error::InvalidRoots(
            "roots coincide or are reflections of each other".into(),
        ));
    }
    guard_roots(ch, roots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{BoundaryParams, ChainSpec};

    type Z = C<f64>;

    fn c(re: f64, im: f64) -> Z {
        Z::new(re, im)
    }

    fn chain(n: usize) -> Chain<f64> {
        let thetas = [c(0.21, -0.13), c(-0.34, 0.27), c(0.08, 0.41)][..n].to_vec();
        let bp = BoundaryParams::new(c(2.1, 0.2), c(1.4, -0.3), c(0.7, 0.2), c(-0.5, 0.4)).unwrap();
        Chain::new(ChainSpec::new(thetas).unwrap(), bp)
    }

    #[test]
    fn key_is_reflection_and_order_invariant() {
        let a = [c(0.3, 0.4), c(-0.2, -0.7)];
        let b = [-a[1] - 1.0, a[0]];
        assert!(same_set(&normalized_key(&a), &normalized_key(&b)));
    }

    #[test]
    fn single_site_matches_both_branches() {
        let ch = chain(1);
        let out = solve_bethe(&ch, &SolveOptions::default()).unwrap();
        assert!(out.is_complete(), "{:?}", out.failures);
        assert_eq!(out.sets.len(), 2);
        for s in &out.sets {
            assert!(s.on_shell);
            assert!(s.eigenvalue_agreement.unwrap() <= 1e-8);
        }
    }

    #[test]
    fn two_sites_complete() {
        let out = solve_bethe(&chain(2), &SolveOptions::default()).unwrap();
        assert!(out.is_complete(), "{:?}", out.failures);
        assert_eq!(out.sets.len(), 4);
    }

    #[test]
    fn multistart_finds_on_shell_sets() {
        let opts = SolveOptions {
            strategy: Strategy::Multistart { starts: 60 },
            ..SolveOptions::default()
        };
        let out = solve_bethe(&chain(1), &opts).unwrap();
        assert!(!out.sets.is_empty());
        assert!(out.sets.iter().all(|s| s.on_shell));
    }
}
