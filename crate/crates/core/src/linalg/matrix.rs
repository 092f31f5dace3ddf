//! Dense complex matrices with the tensor-product helpers used for spin chains.

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex;
use num_traits::{One, Zero};

use super::scalar::{cabs, cr, is_finite, Real, C};
use crate::error::{Error, Result};

/// Largest dimension [`kron`] will build (2^12, i.e. 11 sites plus auxiliary).
pub const MAX_DIM: usize = 1 << 12;

/// Row-major dense complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix<T: Real> {
    rows: usize,
    cols: usize,
    data: Vec<C<T>>,
}

impl<T: Real> ComplexMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "empty matrix");
        Self {
            rows,
            cols,
            data: vec![C::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<C<T>>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self::from_vec(r, c, rows.into_iter().flatten().collect())
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C<T>>) -> Self {
        assert!(rows >= 1 && cols >= 1, "empty matrix");
        assert_eq!(data.len(), rows * cols, "shape mismatch");
        Self { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::from_vec(rows, cols, data)
    }

    pub fn diag(entries: &[C<T>]) -> Self {
        let mut m = Self::zeros(entries.len(), entries.len());
        for (i, &e) in entries.iter().enumerate() {
            m[(i, i)] = e;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C<T>] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[C<T>] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|&z| is_finite(z))
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: C<T>) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn frobenius(&self) -> T {
        let mut acc = T::zero();
        let mut scale = T::zero();
        for z in &self.data {
            scale = scale.max(cabs(*z));
        }
        if scale == T::zero() {
            return scale;
        }
        for z in &self.data {
            let a = cabs(*z) / scale;
            acc += a * a;
        }
        scale * acc.sqrt()
    }

    pub fn frobenius_f64(&self) -> f64 {
        self.frobenius().to_f64()
    }

    pub fn trace(&self) -> C<T> {
        (0..self.rows.min(self.cols)).fold(C::zero(), |acc, i| acc + self[(i, i)])
    }

    /// Sub-block with the given top-left corner and shape.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |i, j| self[(r0 + i, c0 + j)])
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                let rrow = rhs.row(k);
                let orow = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, &b) in orow.iter_mut().zip(rrow) {
                    *o = *o + a * b;
                }
            }
        }
        out
    }

    /// `self * v` for a column vector.
    pub fn apply(&self, v: &[C<T>]) -> Vec<C<T>> {
        assert_eq!(self.cols, v.len(), "apply shape mismatch");
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(C::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect()
    }

    /// `v^T * self` for a row vector (no conjugation).
    pub fn apply_left(&self, v: &[C<T>]) -> Vec<C<T>> {
        assert_eq!(self.rows, v.len(), "apply_left shape mismatch");
        let mut out = vec![C::zero(); self.cols];
        for (i, &vi) in v.iter().enumerate() {
            if vi.is_zero() {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o = *o + vi * a;
            }
        }
        out
    }

    pub fn commutator(&self, other: &Self) -> Self {
        &self.matmul(other) - &other.matmul(self)
    }
}

impl<T: Real> Index<(usize, usize)> for ComplexMatrix<T> {
    type Output = C<T>;
    fn index(&self, (i, j): (usize, usize)) -> &C<T> {
        &self.data[i * self.cols + j]
    }
}

impl<T: Real> IndexMut<(usize, usize)> for ComplexMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C<T> {
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Real> Add for &ComplexMatrix<T> {
    type Output = ComplexMatrix<T>;
    fn add(self, rhs: Self) -> ComplexMatrix<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a + b).collect(),
        }
    }
}

impl<T: Real> Sub for &ComplexMatrix<T> {
    type Output = ComplexMatrix<T>;
    fn sub(self, rhs: Self) -> ComplexMatrix<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a - b).collect(),
        }
    }
}

impl<T: Real> Mul for &ComplexMatrix<T> {
    type Output = ComplexMatrix<T>;
    fn mul(self, rhs: Self) -> ComplexMatrix<T> {
        self.matmul(rhs)
    }
}

impl<T: Real> Neg for &ComplexMatrix<T> {
    type Output = ComplexMatrix<T>;
    fn neg(self) -> ComplexMatrix<T> {
        self.scale(-C::one())
    }
}

/// Kronecker product `a ⊗ b`; the first factor is the slowest index.
pub fn kron<T: Real>(a: &ComplexMatrix<T>, b: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
    let rows = a.rows.checked_mul(b.rows).filter(|&r| r <= MAX_DIM);
    let cols = a.cols.checked_mul(b.cols).filter(|&c| c <= MAX_DIM);
    let (rows, cols) = match (rows, cols) {
        (Some(r), Some(c)) => (r, c),
        _ => {
            return Err(Error::DimensionOverflow {
                requested: a.rows.saturating_mul(b.rows).max(a.cols.saturating_mul(b.cols)),
                max: MAX_DIM,
            })
        }
    };
    let mut out = ComplexMatrix::zeros(rows, cols);
    for i in 0..a.rows {
        for j in 0..a.cols {
            let s = a[(i, j)];
            if s.is_zero() {
                continue;
            }
            for k in 0..b.rows {
                for l in 0..b.cols {
                    out[(i * b.rows + k, j * b.cols + l)] = s * b[(k, l)];
                }
            }
        }
    }
    Ok(out)
}

/// Kronecker product of a list of factors, left to right.
pub fn kron_all<T: Real>(factors: &[ComplexMatrix<T>]) -> Result<ComplexMatrix<T>> {
    let (first, rest) = factors.split_first().expect("at least one factor");
    rest.iter().try_fold(first.clone(), |acc, f| kron(&acc, f))
}

/// Embed a two-site operator (4×4, factor `i` slowest) acting on tensor
/// factors `i` and `j` of an `n`-fold product of `C^2`. Factor 0 is slowest.
pub fn embed_pair<T: Real>(op: &ComplexMatrix<T>, n: usize, i: usize, j: usize) -> ComplexMatrix<T> {
    assert!(op.rows() == 4 && op.cols() == 4 && i != j && i < n && j < n);
    let dim = 1usize << n;
    let bi = n - 1 - i;
    let bj = n - 1 - j;
    let mask = !((1usize << bi) | (1usize << bj));
    let mut out = ComplexMatrix::zeros(dim, dim);
    for s in 0..dim {
        let row = ((s >> bi) & 1) * 2 + ((s >> bj) & 1);
        for col in 0..4 {
            let e = op[(row, col)];
            if e.is_zero() {
                continue;
            }
            let t = (s & mask) | ((col >> 1) << bi) | ((col & 1) << bj);
            out[(s, t)] = e;
        }
    }
    out
}

/// Embed a single-site operator acting on factor `i` of `n`.
pub fn embed_site<T: Real>(op: &ComplexMatrix<T>, n: usize, i: usize) -> ComplexMatrix<T> {
    assert!(op.rows() == 2 && op.cols() == 2 && i < n);
    let dim = 1usize << n;
    let b = n - 1 - i;
    let mut out = ComplexMatrix::zeros(dim, dim);
    for s in 0..dim {
        let r = (s >> b) & 1;
        for c in 0..2 {
            let e = op[(r, c)];
            if e.is_zero() {
                continue;
            }
            out[(s, (s & !(1 << b)) | (c << b))] = e;
        }
    }
    out
}

/// Partial trace over a leading two-dimensional auxiliary factor.
///
/// For `m` acting on `C^2 ⊗ C^d` this returns block(0,0) + block(1,1).
pub fn trace_aux<T: Real>(m: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.rows,
            cols: m.cols,
        });
    }
    if !m.rows.is_multiple_of(2) {
        return Err(Error::OddDimension(m.rows));
    }
    let d = m.rows / 2;
    Ok(ComplexMatrix::from_fn(d, d, |i, j| m[(i, j)] + m[(d + i, d + j)]))
}

/// The four `d × d` blocks of a `2d × 2d` matrix, auxiliary index slowest.
pub fn aux_blocks<T: Real>(m: &ComplexMatrix<T>) -> Result<[[ComplexMatrix<T>; 2]; 2]> {
    if !m.is_square() || !m.rows.is_multiple_of(2) {
        return Err(Error::OddDimension(m.rows));
    }
    let d = m.rows / 2;
    Ok([
        [m.block(0, 0, d, d), m.block(0, d, d, d)],
        [m.block(d, 0, d, d), m.block(d, d, d, d)],
    ])
}

/// LU factorization with partial pivoting, packed in place.
struct Lu<T: Real> {
    lu: ComplexMatrix<T>,
    perm: Vec<usize>,
    sign: C<T>,
    singular: bool,
}

fn lu<T: Real>(m: &ComplexMatrix<T>) -> Lu<T> {
    let n = m.rows;
    let mut a = m.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sign = C::one();
    let mut singular = false;
    for k in 0..n {
        let mut p = k;
        let mut best = cabs(a[(k, k)]);
        for i in k + 1..n {
            let v = cabs(a[(i, k)]);
            if v > best {
                best = v;
                p = i;
            }
        }
        if best == T::zero() {
            singular = true;
            continue;
        }
        if p != k {
            for j in 0..n {
                a.data.swap(k * n + j, p * n + j);
            }
            perm.swap(k, p);
            sign = -sign;
        }
        let pivot = a[(k, k)];
        for i in k + 1..n {
            let factor = a[(i, k)] / pivot;
            a[(i, k)] = factor;
            if factor.is_zero() {
                continue;
            }
            for j in k + 1..n {
                let t = a[(k, j)];
                a[(i, j)] = a[(i, j)] - factor * t;
            }
        }
    }
    Lu {
        lu: a,
        perm,
        sign,
        singular,
    }
}

/// Determinant by pivoted elimination.
pub fn det<T: Real>(m: &ComplexMatrix<T>) -> Result<C<T>> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.rows,
            cols: m.cols,
        });
    }
    // Triangular inputs: product of the diagonal, no elimination round-off.
    let n = m.rows;
    let upper = (0..n).all(|i| (0..i).all(|j| m[(i, j)].is_zero()));
    let lower = (0..n).all(|i| (i + 1..n).all(|j| m[(i, j)].is_zero()));
    if upper || lower {
        return Ok((0..n).fold(C::one(), |acc, i| acc * m[(i, i)]));
    }
    let f = lu(m);
    if f.singular {
        return Ok(C::zero());
    }
    Ok((0..n).fold(f.sign, |acc, i| acc * f.lu[(i, i)]))
}

/// Solve `m x = b` for a single right-hand side.
pub fn solve<T: Real>(m: &ComplexMatrix<T>, b: &[C<T>]) -> Result<Vec<C<T>>> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.rows,
            cols: m.cols,
        });
    }
    let n = m.rows;
    assert_eq!(b.len(), n);
    let f = lu(m);
    if f.singular {
        return Err(Error::Singular("linear solve"));
    }
    let mut x: Vec<C<T>> = f.perm.iter().map(|&p| b[p]).collect();
    for i in 0..n {
        for j in 0..i {
            let t = f.lu[(i, j)] * x[j];
            x[i] = x[i] - t;
        }
    }
    for i in (0..n).rev() {
        for j in i + 1..n {
            let t = f.lu[(i, j)] * x[j];
            x[i] = x[i] - t;
        }
        x[i] = x[i] / f.lu[(i, i)];
    }
    Ok(x)
}

pub fn inverse<T: Real>(m: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
    let n = m.rows;
    let mut out = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = vec![C::zero(); n];
        e[j] = C::one();
        let col = solve(m, &e)?;
        for (i, v) in col.into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    Ok(out)
}

/// Euclidean norm of a vector.
pub fn vnorm<T: Real>(v: &[C<T>]) -> T {
    let scale = v.iter().fold(T::zero(), |acc, z| acc.max(cabs(*z)));
    if scale == T::zero() {
        return scale;
    }
    let acc = v.iter().fold(T::zero(), |acc, z| {
        let a = cabs(*z) / scale;
        acc + a * a
    });
    scale * acc.sqrt()
}

/// Bilinear contraction `Σ a_i b_i` (no conjugation).
pub fn dot<T: Real>(a: &[C<T>], b: &[C<T>]) -> C<T> {
    a.iter().zip(b).fold(C::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Hermitian inner product `Σ conj(a_i) b_i`.
pub fn cdot<T: Real>(a: &[C<T>], b: &[C<T>]) -> C<T> {
    a.iter().zip(b).fold(C::zero(), |acc, (&x, &y)| acc + x.conj() * y)
}

pub fn axpy<T: Real>(acc: &mut [C<T>], s: C<T>, x: &[C<T>]) {
    for (a, &b) in acc.iter_mut().zip(x) {
        *a = *a + s * b;
    }
}

pub fn vsub<T: Real>(a: &[C<T>], b: &[C<T>]) -> Vec<C<T>> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

pub fn vscale<T: Real>(a: &[C<T>], s: C<T>) -> Vec<C<T>> {
    a.iter().map(|&x| x * s).collect()
}

/// Basis vector `e_k` in dimension `n`.
pub fn basis<T: Real>(n: usize, k: usize) -> Vec<C<T>> {
    let mut v = vec![C::zero(); n];
    v[k] = Complex::one();
    v
}

/// `‖l − r‖ / max(‖l‖, ‖r‖)` in Frobenius norm; 0 when both vanish.
pub fn relative_residual<T: Real>(l: &ComplexMatrix<T>, r: &ComplexMatrix<T>) -> f64 {
    let scale = l.frobenius_f64().max(r.frobenius_f64());
    if scale == 0.0 {
        return 0.0;
    }
    (l - r).frobenius_f64() / scale
}

/// `‖lhs − Σ terms‖` normalized by the largest of `‖lhs‖`, `‖term_k‖`.
pub fn relative_residual_vec<T: Real>(lhs: &[C<T>], terms: &[Vec<C<T>>]) -> f64 {
    let mut acc = lhs.to_vec();
    let mut scale = vnorm(lhs).to_f64();
    for t in terms {
        scale = scale.max(vnorm(t).to_f64());
        for (a, b) in acc.iter_mut().zip(t) {
            *a = *a - *b;
        }
    }
    if scale == 0.0 {
        return 0.0;
    }
    vnorm(&acc).to_f64() / scale
}

/// The Pauli-type 2×2 matrices in the `|↑⟩ = (1,0)` convention.
pub mod pauli {
    use super::*;
    use crate::linalg::scalar::c;

    pub fn id<T: Real>() -> ComplexMatrix<T> {
        ComplexMatrix::identity(2)
    }
    pub fn sz<T: Real>() -> ComplexMatrix<T> {
        ComplexMatrix::diag(&[cr(1.0), cr(-1.0)])
    }
    pub fn sp<T: Real>() -> ComplexMatrix<T> {
        ComplexMatrix::from_rows(vec![vec![cr(0.0), cr(1.0)], vec![cr(0.0), cr(0.0)]])
    }
    pub fn sm<T: Real>() -> ComplexMatrix<T> {
        ComplexMatrix::from_rows(vec![vec![cr(0.0), cr(0.0)], vec![cr(1.0), cr(0.0)]])
    }
    pub fn sx<T: Real>() -> ComplexMatrix<T> {
        &sp() + &sm()
    }
    pub fn sy<T: Real>() -> ComplexMatrix<T> {
        (&sm() - &sp()).scale(c(0.0, 1.0))
    }
    /// Elementary matrix `E_{ab}`.
    pub fn unit<T: Real>(a: usize, b: usize) -> ComplexMatrix<T> {
        let mut m = ComplexMatrix::zeros(2, 2);
        m[(a, b)] = C::one();
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::scalar::c;

    type M = ComplexMatrix<f64>;

    fn sample(n: usize, seed: u64) -> M {
        // small deterministic LCG so the unit tests stay self-contained
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        M::from_fn(n, n, |_, _| c(next(), next()))
    }

    #[test]
    fn kron_identity_and_sz() {
        let i4 = kron(&M::identity(2), &M::identity(2)).unwrap();
        assert_eq!(i4, M::identity(4));
        let z = kron(&pauli::sz(), &pauli::id()).unwrap();
        assert_eq!(z, M::diag(&[c(1., 0.), c(1., 0.), c(-1., 0.), c(-1., 0.)]));
    }

    #[test]
    fn kron_overflow_is_reported() {
        let tall = M::zeros(MAX_DIM, 1);
        let err = kron(&tall, &M::zeros(2, 1)).unwrap_err();
        assert!(matches!(err, Error::DimensionOverflow { .. }));
    }

    #[test]
    fn trace_aux_cases() {
        assert_eq!(trace_aux(&M::identity(4)).unwrap(), M::identity(2).scale(c(2., 0.)));
        let a = sample(3, 1);
        let t = trace_aux(&kron(&pauli::sz(), &a).unwrap()).unwrap();
        assert!(t.frobenius() < 1e-15);
        assert!(matches!(trace_aux(&M::identity(3)), Err(Error::OddDimension(3))));
    }

    #[test]
    fn trace_aux_matches_direct_summation() {
        let b = sample(2, 5);
        let a = sample(3, 9);
        let m = kron(&b, &a).unwrap();
        let got = trace_aux(&m).unwrap();
        // direct summation over the auxiliary index
        let mut want = M::zeros(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = c(0.0, 0.0);
                for x in 0..2 {
                    acc += m[(x * 3 + i, x * 3 + j)];
                }
                want[(i, j)] = acc;
            }
        }
        assert!((&got - &want).frobenius() < 1e-13);
        assert!((&got - &a.scale(b.trace())).frobenius() < 1e-13);
    }

    #[test]
    fn embeddings_match_kron() {
        let a = sample(2, 21);
        let b = sample(2, 22);
        let ab = kron(&a, &b).unwrap();
        let i2 = M::identity(2);
        let want = kron_all(&[a.clone(), i2.clone(), b.clone()]).unwrap();
        assert_eq!(embed_pair(&ab, 3, 0, 2), want);
        let want = kron_all(&[b.clone(), i2.clone(), a.clone()]).unwrap();
        assert_eq!(embed_pair(&ab, 3, 2, 0), want);
        let want = kron_all(&[i2.clone(), a.clone(), i2.clone()]).unwrap();
        assert_eq!(embed_site(&a, 3, 1), want);
    }

    #[test]
    fn det_simple() {
        assert_eq!(det(&M::identity(5)).unwrap(), c(1.0, 0.0));
        let d = M::diag(&[c(2., 0.), c(3., 0.), c(4., 0.)]);
        assert_eq!(det(&d).unwrap(), c(24.0, 0.0));
        let z = M::zeros(3, 3);
        assert_eq!(det(&z).unwrap(), c(0.0, 0.0));
        assert!(det(&M::zeros(2, 3)).is_err());
    }

    #[test]
    fn det_is_multiplicative() {
        let a = sample(5, 3);
        let b = sample(5, 4);
        let lhs = det(&a.matmul(&b)).unwrap();
        let rhs = det(&a).unwrap() * det(&b).unwrap();
        assert!((lhs - rhs).norm() <= 1e-10 * rhs.norm());
    }

    #[test]
    fn solve_and_inverse() {
        let a = sample(6, 11);
        let x: Vec<_> = (0..6).map(|k| c(k as f64, 1.0)).collect();
        let b = a.apply(&x);
        let y = solve(&a, &b).unwrap();
        assert!(vnorm(&vsub(&x, &y)) < 1e-12);
        let inv = inverse(&a).unwrap();
        assert!((&inv.matmul(&a) - &M::identity(6)).frobenius() < 1e-12);
    }

    #[test]
    fn left_and_right_application_agree_with_transpose() {
        let a = sample(4, 2);
        let v: Vec<_> = (0..4).map(|k| c(1.0, k as f64)).collect();
        let l = a.apply_left(&v);
        let r = a.transpose().apply(&v);
        assert!(vnorm(&vsub(&l, &r)) < 1e-14);
    }
}
