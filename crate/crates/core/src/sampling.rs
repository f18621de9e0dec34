//! Deterministic random sampling helpers for certification and tests.

use crate::simplex::{PayoffVector, PopulationState};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Seeded RNG used everywhere sampling must be reproducible.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform sample from the simplex (normalized exponential draws).
pub fn simplex_point<R: Rng>(n: usize, rng: &mut R) -> PopulationState {
    loop {
        let draws: Vec<f64> = (0..n)
            .map(|_| -(1.0 - rng.gen::<f64>()).ln())
            .collect();
        let sum: f64 = draws.iter().sum();
        if sum > 0.0 {
            let mut entries: Vec<f64> = draws.iter().map(|d| d / sum).collect();
            let s: f64 = entries.iter().sum();
            for e in &mut entries {
                *e /= s;
            }
            if let Ok(state) = PopulationState::new(entries) {
                return state;
            }
        }
    }
}

/// Payoff vector with i.i.d. entries uniform on `[-scale, scale]`.
pub fn payoff_vector<R: Rng>(n: usize, scale: f64, rng: &mut R) -> PayoffVector {
    PayoffVector::new((0..n).map(|_| rng.gen_range(-scale..=scale)).collect())
        .expect("finite draws")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_samples_are_valid_and_reproducible() {
        let mut a = seeded_rng(7);
        let mut b = seeded_rng(7);
        for _ in 0..100 {
            let xa = simplex_point(4, &mut a);
            let xb = simplex_point(4, &mut b);
            assert_eq!(xa, xb);
            let sum: f64 = xa.entries().iter().sum();
            assert!((sum - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn payoff_samples_respect_scale() {
        let mut rng = seeded_rng(11);
        for _ in 0..100 {
            let p = payoff_vector(3, 2.0, &mut rng);
            assert!(p.entries().iter().all(|v| v.abs() <= 2.0));
        }
    }
}
