//! Random-key encoding: a real vector decodes to the permutation that sorts
//! it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::JobId;

/// Closed search interval shared by every dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: f64,
    pub max: f64,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds { min: 0.0, max: 1.0 }
    }
}

impl Bounds {
    pub fn new(min: f64, max: f64) -> Self {
        assert!(min <= max, "empty bounds [{min}, {max}]");
        Bounds { min, max }
    }

    #[inline]
    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.min, self.max)
    }

    pub fn contains(&self, v: f64) -> bool {
        (self.min..=self.max).contains(&v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub keys: Vec<f64>,
    pub bounds: Bounds,
}

impl Position {
    pub fn new(keys: Vec<f64>, bounds: Bounds) -> Self {
        Position { keys, bounds }
    }

    pub fn dim(&self) -> usize {
        self.keys.len()
    }

    /// Projects every key into the bounds. Idempotent.
    pub fn clamp(mut self) -> Self {
        let b = self.bounds;
        self.keys.iter_mut().for_each(|k| *k = b.clamp(*k));
        self
    }

    pub fn in_bounds(&self) -> bool {
        self.keys.iter().all(|&k| self.bounds.contains(k))
    }

    pub fn to_sequence(&self) -> Vec<JobId> {
        keys_to_sequence(&self.keys)
    }
}

/// Jobs ordered by ascending key; equal keys keep ascending job id.
pub fn keys_to_sequence(keys: &[f64]) -> Vec<JobId> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    // Stable sort preserves the id order among ties.
    order.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]));
    order.into_iter().map(JobId::from_index).collect()
}

/// Keys drawn i.i.d. uniform on the bounds.
pub fn random_position<R: Rng + ?Sized>(n: usize, bounds: Bounds, rng: &mut R) -> Position {
    let keys = (0..n)
        .map(|_| {
            if bounds.min == bounds.max {
                bounds.min
            } else {
                rng.random_range(bounds.min..bounds.max)
            }
        })
        .collect();
    Position { keys, bounds }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn seq(v: &[u32]) -> Vec<JobId> {
        v.iter().map(|&i| JobId(i)).collect()
    }

    #[test]
    fn ascending_keys() {
        assert_eq!(keys_to_sequence(&[0.3, 0.1, 0.2]), seq(&[2, 3, 1]));
        assert_eq!(keys_to_sequence(&[0.5, 0.5]), seq(&[1, 2]));
        assert_eq!(keys_to_sequence(&[0.1, 0.2, 0.7, 0.9]), seq(&[1, 2, 3, 4]));
    }

    #[test]
    fn clamp_examples() {
        let p = Position::new(vec![1.7, -0.2, 0.4], Bounds::default()).clamp();
        assert_eq!(p.keys, vec![1.0, 0.0, 0.4]);
    }

    #[test]
    fn random_positions_are_seeded() {
        let a = random_position(8, Bounds::default(), &mut ChaCha8Rng::seed_from_u64(9));
        let b = random_position(8, Bounds::default(), &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
        assert!(a.in_bounds());
    }

    #[test]
    fn degenerate_bounds() {
        let p = random_position(5, Bounds::new(2.0, 2.0), &mut ChaCha8Rng::seed_from_u64(1));
        assert!(p.keys.iter().all(|&k| k == 2.0));
    }

    #[test]
    fn uniform_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let samples = 100_000;
        let mean = (0..samples)
            .map(|_| random_position(1, Bounds::default(), &mut rng).keys[0])
            .sum::<f64>()
            / samples as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
    }

    proptest! {
        #[test]
        fn sequence_is_a_permutation(keys in proptest::collection::vec(-2.0f64..2.0, 1..30)) {
            let mut s: Vec<u32> = keys_to_sequence(&keys).into_iter().map(|j| j.0).collect();
            s.sort_unstable();
            prop_assert_eq!(s, (1..=keys.len() as u32).collect::<Vec<_>>());
        }

        #[test]
        fn only_ranks_matter(keys in proptest::collection::vec(0.0f64..1.0, 1..20), scale in 0.1f64..5.0, shift in -3.0f64..3.0) {
            let moved: Vec<f64> = keys.iter().map(|k| (k * scale + shift).exp()).collect();
            prop_assert_eq!(keys_to_sequence(&keys), keys_to_sequence(&moved));
        }

        #[test]
        fn clamp_is_idempotent(keys in proptest::collection::vec(-5.0f64..5.0, 0..10)) {
            let once = Position::new(keys, Bounds::default()).clamp();
            prop_assert!(once.in_bounds());
            prop_assert_eq!(once.clone().clamp(), once);
        }
    }
}
