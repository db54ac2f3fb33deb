//! Seeded randomness.
//!
//! Every random draw in the crate comes from ChaCha8 seeded with
//! `seed_from_u64(seed)`. Independent consumers of the same seed use
//! disjoint ChaCha streams selected by [`Stream`]; a stream id is never
//! reused for two purposes, so adding a consumer never perturbs the draws
//! of an existing one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::FeatureBatch;
use crate::error::{Error, Result};

/// Stream ids for [`stream_rng`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Plain N(0, I) reference draws.
    Normal,
    TrainData,
    HeldOutData,
    TrunkInit,
    ClassifierHeadInit,
    RestrictionHeadInit,
    ClassifierBatches,
    RestrictionBatches,
    /// Extra stream for callers outside the built-in pipeline.
    Custom(u64),
}

impl Stream {
    pub fn id(self) -> u64 {
        match self {
            Stream::Normal => 0,
            Stream::TrainData => 1,
            Stream::HeldOutData => 2,
            Stream::TrunkInit => 3,
            Stream::ClassifierHeadInit => 4,
            Stream::RestrictionHeadInit => 5,
            Stream::ClassifierBatches => 6,
            Stream::RestrictionBatches => 7,
            Stream::Custom(k) => 1 << 32 | k,
        }
    }
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}

/// `n × d` draws from N(0, I) on the [`Stream::Normal`] stream.
pub fn seeded_standard_normal(n: usize, d: usize, seed: u64) -> Result<FeatureBatch> {
    if n == 0 || d == 0 {
        return Err(Error::invalid(format!(
            "seeded_standard_normal needs n >= 1 and d >= 1, got n={n}, d={d}"
        )));
    }
    let mut rng = stream_rng(seed, Stream::Normal);
    let data = (0..n * d)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    FeatureBatch::new(n, d, data)
}
