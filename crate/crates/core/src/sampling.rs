//! Seeded random draws of boundary couplings, inhomogeneities and spectral
//! points.
//!
//! The generator is ChaCha8 (`rand_chacha`), whose output stream is fixed by
//! the seed on every platform. Independent streams for parallel work are
//! derived with [`Sampler::stream`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::{q_similarity, BoundaryParams, ChainSpec};
use crate::chain::Chain;
use crate::linalg::{det, C};

/// Minimum distance kept from kernel poles when drawing spectral points.
pub const POLE_MARGIN: f64 = 1e-3;

type Z = C<f64>;

#[derive(Clone, Debug)]
pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent generator for sub-task `stream` of run `seed`.
    pub fn stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.gen_range(lo..hi)
    }

    /// Uniform in the disc `|z| < radius`.
    pub fn in_disc(&mut self, radius: f64) -> Z {
        let r = radius * self.uniform(0.0, 1.0).sqrt();
        let a = self.uniform(0.0, std::f64::consts::TAU);
        Z::from_polar(r, a)
    }

    /// Uniform in the annulus `lo ≤ |z| ≤ hi`.
    pub fn in_annulus(&mut self, lo: f64, hi: f64) -> Z {
        let r = (self.uniform(lo * lo, hi * hi)).sqrt();
        let a = self.uniform(0.0, std::f64::consts::TAU);
        Z::from_polar(r, a)
    }

    /// `[1, 3] + i[−0.5, 0.5]`.
    pub fn coupling(&mut self) -> Z {
        Z::new(self.uniform(1.0, 3.0), self.uniform(-0.5, 0.5))
    }

    /// Generic boundary: `p, q` couplings, `ξ^±` in the annulus `0.2..1.5`,
    /// redrawn until `ρ ≠ 1` and `Q` is invertible.
    pub fn boundary(&mut self) -> BoundaryParams<f64> {
        loop {
            let (p, q) = (self.coupling(), self.coupling());
            let (xp, xm) = (self.in_annulus(0.2, 1.5), self.in_annulus(0.2, 1.5));
            if let Ok(bp) = BoundaryParams::new(p, q, xp, xm) {
                let ok = q_similarity(&bp)
                    .ok()
                    .and_then(|m| det(&m).ok())
                    .is_some_and(|d| d.norm() > 1e-6);
                if ok && (bp.rho - 1.0).norm() > 1e-3 {
                    return bp;
                }
            }
        }
    }

    pub fn diagonal_boundary(&mut self) -> BoundaryParams<f64> {
        BoundaryParams::diagonal(self.coupling(), self.coupling())
    }

    /// `N` inhomogeneities in the disc of radius 0.5, redrawn until generic.
    pub fn thetas(&mut self, n: usize) -> ChainSpec<f64> {
        loop {
            let th: Vec<Z> = (0..n).map(|_| self.in_disc(0.5)).collect();
            if let Ok(spec) = ChainSpec::new(th) {
                return spec;
            }
        }
    }

    pub fn chain(&mut self, n: usize) -> Chain<f64> {
        let spec = self.thetas(n);
        Chain::new(spec, self.boundary())
    }

    pub fn diagonal_chain(&mut self, n: usize) -> Chain<f64> {
        let spec = self.thetas(n);
        Chain::new(spec, self.diagonal_boundary())
    }

    /// Point in the disc of `radius` at least [`POLE_MARGIN`] away from
    /// `2u+1 = 0`, from `u = v`, `u + v + 1 = 0` for every `v` in `avoid`,
    /// and from the `φ̃` poles `u = −p`, `u = p − 1` of `ch`.
    pub fn spectral_point(&mut self, ch: &Chain<f64>, radius: f64, avoid: &[Z]) -> Z {
        loop {
            let u = self.in_disc(radius);
            if is_clear(ch, u, avoid, POLE_MARGIN) {
                return u;
            }
        }
    }

    /// `m` mutually generic off-shell points.
    pub fn points(&mut self, ch: &Chain<f64>, m: usize, radius: f64, avoid: &[Z]) -> Vec<Z> {
        let mut out: Vec<Z> = Vec::with_capacity(m);
        while out.len() < m {
            let mut all = avoid.to_vec();
            all.extend(&out);
            let u = self.spectral_point(ch, radius, &all);
            out.push(u);
        }
        out
    }
}

/// Whether `u` keeps `margin` from every pole relevant to `ch` and `avoid`.
pub fn is_clear(ch: &Chain<f64>, u: Z, avoid: &[Z], margin: f64) -> bool {
    let p = ch.boundary.p;
    let mut dens = vec![2.0 * u + 1.0, u + p, p - u - 1.0, u, u + 1.0];
    for &v in avoid {
        dens.push(u - v);
        dens.push(u + v + 1.0);
    }
    dens.iter().all(|d| d.norm() > margin)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_draws() {
        let mut a = Sampler::new(42);
        let mut b = Sampler::new(42);
        for _ in 0..10 {
            assert_eq!(a.in_disc(2.0), b.in_disc(2.0));
        }
        assert_eq!(Sampler::stream(42, 3).uniform(0.0, 1.0), Sampler::stream(42, 3).uniform(0.0, 1.0));
        assert_ne!(Sampler::stream(42, 3).uniform(0.0, 1.0), Sampler::stream(42, 4).uniform(0.0, 1.0));
    }

    #[test]
    fn draws_respect_ranges() {
        let mut s = Sampler::new(1);
        for _ in 0..50 {
            let bp = s.boundary();
            assert!((1.0..3.0).contains(&bp.p.re) && bp.p.im.abs() <= 0.5);
            assert!((0.2..=1.5).contains(&bp.xi_plus.norm()));
            assert!(!bp.diagonal_mode);
            let spec = s.thetas(3);
            assert!(spec.thetas.iter().all(|t| t.norm() < 0.5));
        }
    }

    #[test]
    fn spectral_points_avoid_poles() {
        let mut s = Sampler::new(9);
        let ch = s.chain(2);
        let pts = s.points(&ch, 3, 2.0, &[Z::new(0.1, 0.1)]);
        for (i, &u) in pts.iter().enumerate() {
            assert!(u.norm() < 2.0);
            let mut others: Vec<Z> = pts.clone();
            others.remove(i);
            others.push(Z::new(0.1, 0.1));
            assert!(is_clear(&ch, u, &others, POLE_MARGIN));
        }
    }
}
