//! Seeded randomness for hidden-layer initialisation.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type ModelRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> ModelRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finaliser; used to derive independent per-layer seeds from
/// one master seed.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Matrix with entries drawn uniformly from [-1, 1], filled row by row.
pub fn uniform_matrix(rng: &mut ModelRng, rows: usize, cols: usize) -> DMatrix<f64> {
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-1.0..=1.0)).collect();
    DMatrix::from_row_slice(rows, cols, &data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_differ_and_repeat() {
        let a: Vec<u64> = (1..=5).map(|l| derive_seed(42, l)).collect();
        let b: Vec<u64> = (1..=5).map(|l| derive_seed(42, l)).collect();
        assert_eq!(a, b);
        let mut sorted = a.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 5);
    }

    #[test]
    fn uniform_range() {
        let m = uniform_matrix(&mut seeded(7), 20, 30);
        assert!(m.iter().all(|v| (-1.0..=1.0).contains(v)));
        assert_eq!(m, uniform_matrix(&mut seeded(7), 20, 30));
    }
}
