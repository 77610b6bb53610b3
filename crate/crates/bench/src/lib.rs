//! Inputs shared by the benchmarks.

use qqc_core::matlin::{random_hermitian, HermitianMatrix};
use qqc_core::problem::{fixtures, QueryProblem};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Fixture instances with the query counts at which they are benchmarked.
pub fn solve_cases() -> Vec<(&'static str, QueryProblem, usize)> {
    vec![
        ("deutsch-xor2", fixtures::deutsch_xor2(), 0),
        ("deutsch-xor2", fixtures::deutsch_xor2(), 1),
        ("identity-vs-x", fixtures::identity_vs_x(), 1),
        ("or2", fixtures::or2(), 2),
    ]
}

pub fn hermitian_of_size(dim: usize, seed: u64) -> HermitianMatrix {
    random_hermitian(&mut ChaCha8Rng::seed_from_u64(seed), dim)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inputs_are_reproducible() {
        assert_eq!(hermitian_of_size(5, 1), hermitian_of_size(5, 1));
        assert!(solve_cases().iter().all(|(_, p, _)| p.validate().is_valid()));
    }
}
