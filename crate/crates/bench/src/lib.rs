//! Shared fixtures for the benchmarks.

use bdnf_core::cayley::regular_wiring;
use bdnf_core::dynamics::random_wiring;
use bdnf_core::{GameInstance, Wiring};

/// Uniform game with a circulant wiring on offsets `1..=k`.
pub fn circulant_fixture(n: usize, k: usize) -> (GameInstance, Wiring) {
    let offsets: Vec<usize> = (1..=k).collect();
    let g = GameInstance::uniform(n, k).expect("valid size");
    (g, regular_wiring(n, &offsets).expect("valid offsets"))
}

/// Uniform game with a seeded random wiring.
pub fn random_fixture(n: usize, k: usize, seed: u64) -> (GameInstance, Wiring) {
    let g = GameInstance::uniform(n, k).expect("valid size");
    (g, random_wiring(n, k, seed))
}
