//! Shared corpus generators for the benchmarks.

use rand::Rng;

use btsampler_core::corpus::Corpus;
use btsampler_core::loss_stats::TokenLossRecord;
use btsampler_core::sampler::sampling_rng;

pub fn synthetic_corpus(seed: u64, sentences: usize, vocab: usize) -> Corpus {
    let mut rng = sampling_rng(seed);
    let lists: Vec<Vec<String>> = (0..sentences)
        .map(|_| {
            let len = rng.gen_range(5..=20);
            (0..len).map(|_| format!("w{}", rng.gen_range(0..vocab))).collect()
        })
        .collect();
    Corpus::from_token_lists(lists).expect("generated tokens are valid")
}

pub fn synthetic_records(seed: u64, count: usize, vocab: usize) -> Vec<TokenLossRecord> {
    let mut rng = sampling_rng(seed);
    (0..count)
        .map(|i| {
            TokenLossRecord::new(
                i / 20,
                i % 20,
                format!("w{}", rng.gen_range(0..vocab)),
                rng.gen_range(0.0..20.0),
            )
        })
        .collect()
}
