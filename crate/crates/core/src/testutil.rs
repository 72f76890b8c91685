use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::simplex::{Dataset, ProbVector, Sample};

/// Random canonical dataset with predictions spread over the simplex.
pub fn random_dataset(n: usize, d: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..n)
        .map(|_| {
            let w: Vec<f64> = (0..d).map(|_| -rng.gen_range(1e-3f64..1.0).ln()).collect();
            let total: f64 = w.iter().sum();
            let p = ProbVector::renormalized(w.iter().map(|v| v / total).collect(), 1e-9).unwrap();
            Sample::new(p, rng.gen_range(0..d)).unwrap()
        })
        .collect();
    Dataset::canonical(samples).unwrap()
}
