//! In-process chart service: a popularity-weighted sample of the corpus.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::synth::SyntheticVideo;

/// Minimum number of entries a chart carries when the corpus allows.
pub const MIN_CHART_LEN: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartEntry {
    pub video_id: String,
    /// Seconds.
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChartService {
    entries: Vec<ChartEntry>,
}

impl ChartService {
    /// Ranks the corpus by a seeded Zipf (s = 1) popularity and samples a
    /// chart of `len` entries without replacement, most popular first.
    pub fn zipf(corpus: &[SyntheticVideo], len: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Popularity rank r (1-based) gets weight 1/r; ranks are a random
        // permutation of the corpus.
        let mut order: Vec<usize> = (0..corpus.len()).collect();
        for i in (1..order.len()).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        // Weighted sampling without replacement via keys u^(1/w).
        let mut keyed: Vec<(f64, usize)> = order
            .iter()
            .enumerate()
            .map(|(rank, &idx)| {
                let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
                (u.ln() * (rank + 1) as f64, idx)
            })
            .collect();
        keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let entries = keyed
            .into_iter()
            .take(len.min(corpus.len()))
            .map(|(_, idx)| ChartEntry { video_id: corpus[idx].id.clone(), duration: corpus[idx].duration })
            .collect();
        Self { entries }
    }

    pub fn from_entries(entries: Vec<ChartEntry>) -> Self {
        Self { entries }
    }

    pub fn fetch(&self) -> &[ChartEntry] {
        &self.entries
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synth_corpus_metadata, PopulationProfile};

    #[test]
    fn chart_is_deterministic_and_unique() {
        let corpus = synth_corpus_metadata(300, &PopulationProfile::default(), 1).unwrap();
        let a = ChartService::zipf(&corpus, 100, 5);
        assert_eq!(a, ChartService::zipf(&corpus, 100, 5));
        assert_eq!(a.fetch().len(), 100);
        let mut ids: Vec<&str> = a.fetch().iter().map(|e| e.video_id.as_str()).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 100);
        assert_eq!(ChartService::zipf(&corpus[..10], 100, 5).fetch().len(), 10);
    }
}
