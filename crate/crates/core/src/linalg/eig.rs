//! General complex eigensolver: Householder reduction to Hessenberg form,
//! shifted QR to complex Schur form, eigenvectors by back-substitution.

use num_complex::Complex;
use num_traits::{One, Zero};

use super::matrix::ComplexMatrix;
use super::scalar::{cabs, csqrt, Real, C};
use crate::error::{Error, Result};

/// Eigenvalues and (optionally) right eigenvectors stored as columns.
#[derive(Clone, Debug)]
pub struct Eigen<T: Real> {
    pub values: Vec<C<T>>,
    pub vectors: Option<ComplexMatrix<T>>,
}

impl<T: Real> Eigen<T> {
    pub fn vector(&self, k: usize) -> Option<Vec<C<T>>> {
        let v = self.vectors.as_ref()?;
        Some((0..v.rows()).map(|i| v[(i, k)]).collect())
    }
}

pub fn eigenvalues<T: Real>(m: &ComplexMatrix<T>) -> Result<Vec<C<T>>> {
    Ok(eig(m, false)?.values)
}

pub fn eig<T: Real>(m: &ComplexMatrix<T>, want_vectors: bool) -> Result<Eigen<T>> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    if !m.is_finite() {
        return Err(Error::NonFinite("eigensolver input"));
    }
    let n = m.rows();
    let (mut h, mut z) = hessenberg(m);
    schur(&mut h, &mut z)?;
    let values: Vec<C<T>> = (0..n).map(|i| h[(i, i)]).collect();
    let vectors = want_vectors.then(|| schur_vectors(&h, &z));
    Ok(Eigen { values, vectors })
}

fn hessenberg<T: Real>(m: &ComplexMatrix<T>) -> (ComplexMatrix<T>, ComplexMatrix<T>) {
    let n = m.rows();
    let mut h = m.clone();
    let mut q = ComplexMatrix::identity(n);
    for k in 0..n.saturating_sub(2) {
        let x: Vec<C<T>> = (k + 1..n).map(|i| h[(i, k)]).collect();
        let norm = x.iter().fold(T::zero(), |acc, z| acc.hypot(cabs(*z)));
        if norm == T::zero() {
            continue;
        }
        let a0 = cabs(x[0]);
        let phase = if a0 == T::zero() {
            C::one()
        } else {
            x[0] / Complex::new(a0, T::zero())
        };
        let alpha = -phase * Complex::new(norm, T::zero());
        let mut v = x;
        v[0] = v[0] - alpha;
        let vn = v.iter().fold(T::zero(), |acc, z| acc.hypot(cabs(*z)));
        if vn == T::zero() {
            continue;
        }
        for e in v.iter_mut() {
            *e = *e / Complex::new(vn, T::zero());
        }
        let two = Complex::new(T::from_f64(2.0), T::zero());
        // h <- (I - 2 v v^H) h
        for j in 0..n {
            let s = v
                .iter()
                .enumerate()
                .fold(C::zero(), |acc, (i, vi)| acc + vi.conj() * h[(k + 1 + i, j)]);
            for (i, vi) in v.iter().enumerate() {
                let t = two * *vi * s;
                h[(k + 1 + i, j)] = h[(k + 1 + i, j)] - t;
            }
        }
        // h <- h (I - 2 v v^H), q <- q (I - 2 v v^H)
        for mat in [&mut h, &mut q] {
            for i in 0..n {
                let s = v
                    .iter()
                    .enumerate()
                    .fold(C::zero(), |acc, (j, vj)| acc + mat[(i, k + 1 + j)] * *vj);
                for (j, vj) in v.iter().enumerate() {
                    let t = two * s * vj.conj();
                    mat[(i, k + 1 + j)] = mat[(i, k + 1 + j)] - t;
                }
            }
        }
        for i in k + 2..n {
            h[(i, k)] = C::zero();
        }
    }
    (h, q)
}

/// Rotation with `U^H [a; b] = [r; 0]`, stored as `(c, s)`.
fn givens<T: Real>(a: C<T>, b: C<T>) -> (C<T>, C<T>) {
    let r = cabs(a).hypot(cabs(b));
    if r == T::zero() {
        return (C::one(), C::zero());
    }
    let r = Complex::new(r, T::zero());
    (a / r, b / r)
}

fn wilkinson_shift<T: Real>(a: C<T>, b: C<T>, c: C<T>, d: C<T>) -> C<T> {
    let half = Complex::new(T::from_f64(0.5), T::zero());
    let mean = (a + d) * half;
    let diff = (a - d) * half;
    let disc = csqrt(diff * diff + b * c);
    let l1 = mean + disc;
    let l2 = mean - disc;
    if cabs(l1 - d) <= cabs(l2 - d) {
        l1
    } else {
        l2
    }
}

fn schur<T: Real>(h: &mut ComplexMatrix<T>, z: &mut ComplexMatrix<T>) -> Result<()> {
    let n = h.rows();
    if n == 1 {
        return Ok(());
    }
    let eps = T::epsilon();
    let max_iter = 100 * n;
    let mut hi = n - 1;
    let mut iter = 0usize;
    let mut total = 0usize;
    while hi > 0 {
        let mut lo = hi;
        while lo > 0 {
            let sub = cabs(h[(lo, lo - 1)]);
            let mut scale = cabs(h[(lo - 1, lo - 1)]) + cabs(h[(lo, lo)]);
            if scale == T::zero() {
                scale = h.frobenius();
            }
            if sub <= eps * scale {
                h[(lo, lo - 1)] = C::zero();
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        total += 1;
        if total > max_iter * n {
            return Err(Error::NonConvergence {
                what: "QR eigenvalue iteration",
                iterations: total,
            });
        }
        let mu = if iter % 11 == 10 {
            // exceptional shift to break cycles
            let t = cabs(h[(hi, hi - 1)]) + cabs(h[(hi - 1, hi.saturating_sub(2))]);
            h[(hi, hi)] + Complex::new(T::from_f64(0.75) * t, T::from_f64(0.4375) * t)
        } else {
            wilkinson_shift(
                h[(hi - 1, hi - 1)],
                h[(hi - 1, hi)],
                h[(hi, hi - 1)],
                h[(hi, hi)],
            )
        };
        for k in lo..=hi {
            h[(k, k)] = h[(k, k)] - mu;
        }
        let mut rots = Vec::with_capacity(hi - lo);
        for k in lo..hi {
            let (c, s) = givens(h[(k, k)], h[(k + 1, k)]);
            for j in k..n {
                let x = h[(k, j)];
                let y = h[(k + 1, j)];
                h[(k, j)] = c.conj() * x + s.conj() * y;
                h[(k + 1, j)] = -s * x + c * y;
            }
            h[(k + 1, k)] = C::zero();
            rots.push((k, c, s));
        }
        for &(k, c, s) in &rots {
            let rows = (k + 2).min(hi) + 1;
            for i in 0..rows {
                let p = h[(i, k)];
                let q = h[(i, k + 1)];
                h[(i, k)] = p * c + q * s;
                h[(i, k + 1)] = -p * s.conj() + q * c.conj();
            }
            for i in 0..n {
                let p = z[(i, k)];
                let q = z[(i, k + 1)];
                z[(i, k)] = p * c + q * s;
                z[(i, k + 1)] = -p * s.conj() + q * c.conj();
            }
        }
        for k in lo..=hi {
            h[(k, k)] = h[(k, k)] + mu;
        }
    }
    for i in 1..n {
        for j in 0..i {
            h[(i, j)] = C::zero();
        }
    }
    Ok(())
}

fn schur_vectors<T: Real>(t: &ComplexMatrix<T>, z: &ComplexMatrix<T>) -> ComplexMatrix<T> {
    let n = t.rows();
    let smin = T::epsilon() * t.frobenius().max(T::from_f64(f64::MIN_POSITIVE));
    let mut out = ComplexMatrix::zeros(n, n);
    for k in 0..n {
        let lambda = t[(k, k)];
        let mut x = vec![C::<T>::zero(); n];
        x[k] = C::one();
        for j in (0..k).rev() {
            let s = (j + 1..=k).fold(C::<T>::zero(), |acc, m| acc + t[(j, m)] * x[m]);
            let mut d = t[(j, j)] - lambda;
            if cabs(d) < smin {
                d = Complex::new(smin, T::zero());
            }
            x[j] = -s / d;
        }
        let v = z.apply(&x);
        let norm = v.iter().fold(T::zero(), |acc, e| acc.hypot(cabs(*e)));
        for (i, e) in v.into_iter().enumerate() {
            out[(i, k)] = e / Complex::new(norm, T::zero());
        }
    }
    out
}
