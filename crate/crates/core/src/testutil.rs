use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::sim::sampling::standard_normal;

pub use crate::sim::sampling::{random_orthogonal, random_psd};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_dataset<R: rand::Rng>(r: &mut R, p: usize, n: usize) -> Dataset {
    Dataset::new(standard_normal(r, p, n)).unwrap()
}
