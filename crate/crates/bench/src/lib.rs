//! Shared inputs for the criterion benchmarks.

use macpomdp_core::minimax::ExtendedGame;
use macpomdp_core::{parse_model, random_instance, Dims, Model};

/// Random instance at the default dimensions (two agents, two states, one constraint).
pub fn instance(seed: u64) -> Model {
    random_instance(seed, Dims::default()).expect("default dimensions are valid")
}

pub fn switch() -> Model {
    parse_model(include_str!("../../core/fixtures/switch.dcpomdp")).expect("fixture parses")
}

/// Square game with entries in quarters, deterministic in `seed`.
pub fn game(size: usize, seed: u64) -> ExtendedGame {
    let mut x = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let values: Vec<f64> = (0..size * size)
        .map(|_| {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((x >> 33) % 41) as f64 / 4.0 - 5.0
        })
        .collect();
    ExtendedGame::from_matrix(size, size, &values).expect("finite game")
}
