//! Fixtures shared by the benchmarks.

use segment_bethe_core::bethe::solver::{solve_bethe, SolveOptions};
use segment_bethe_core::sampling::Sampler;
use segment_bethe_core::{Chain, C};

pub struct Fixture {
    pub chain: Chain<f64>,
    pub on_shell: Vec<C<f64>>,
    pub free: Vec<C<f64>>,
}

/// A generic-boundary chain of `n` sites with one solved root set and an
/// off-shell partner set.
pub fn fixture(n: usize, seed: u64) -> Fixture {
    let mut s = Sampler::new(seed);
    let chain = s.chain(n);
    let out = solve_bethe(&chain, &SolveOptions { seed, ..SolveOptions::default() }).expect("solvable chain");
    let on_shell = out.sets[0].roots.clone();
    let free = s.points(&chain, n, 1.0, &on_shell);
    Fixture { chain, on_shell, free }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_has_full_sets() {
        let f = fixture(2, 5);
        assert_eq!(f.on_shell.len(), 2);
        assert_eq!(f.free.len(), 2);
    }
}
