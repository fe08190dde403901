use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{Error, Result};

/// Draws `count` indices with replacement, each sample weighted by the inverse
/// frequency of its class, so every class is drawn equally often in expectation.
pub fn weighted_sample_indices<R: Rng + ?Sized>(
    labels: &[usize],
    count: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if labels.is_empty() {
        return Err(Error::Invalid("cannot sample from an empty dataset".into()));
    }
    let mut freq: BTreeMap<usize, usize> = BTreeMap::new();
    for &l in labels {
        *freq.entry(l).or_default() += 1;
    }
    let weights: Vec<f64> = labels.iter().map(|l| 1.0 / freq[l] as f64).collect();
    let dist = WeightedIndex::new(&weights).map_err(|e| Error::Invalid(e.to_string()))?;
    Ok((0..count).map(|_| dist.sample(rng)).collect())
}

/// Uniform draws with replacement.
pub fn uniform_sample_indices<R: Rng + ?Sized>(
    len: usize,
    count: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if len == 0 {
        return Err(Error::Invalid("cannot sample from an empty dataset".into()));
    }
    Ok((0..count).map(|_| rng.random_range(0..len)).collect())
}
