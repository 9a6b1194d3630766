use criterion::{black_box, criterion_group, criterion_main, Criterion};

use btsampler_bench::{synthetic_corpus, synthetic_records};
use btsampler_core::difficulty::{by_mean_loss, difficult_occurrences};
use btsampler_core::loss_stats::aggregate;
use btsampler_core::ngram::{score_corpus, train_lm};
use btsampler_core::sampler::{context_sampling, diff_sampling, ContextSpec, SimilaritySpec};

fn bench_aggregate(c: &mut Criterion) {
    let records = synthetic_records(1, 100_000, 2000);
    c.bench_function("aggregate_100k_records", |b| {
        b.iter(|| aggregate(black_box(&records)).unwrap())
    });
}

fn bench_ngram(c: &mut Criterion) {
    let corpus = synthetic_corpus(2, 2000, 500);
    c.bench_function("train_bigram_2k_sentences", |b| {
        b.iter(|| train_lm(black_box(&corpus), 2, 0.5).unwrap())
    });
    let lm = train_lm(&corpus, 2, 0.5).unwrap();
    c.bench_function("score_2k_sentences", |b| {
        b.iter(|| score_corpus(black_box(&lm), black_box(&corpus)))
    });
}

fn bench_samplers(c: &mut Criterion) {
    let corpus = synthetic_corpus(3, 10_000, 800);
    let lm = train_lm(&corpus, 2, 0.5).unwrap();
    let records = score_corpus(&lm, &corpus);
    let stats = aggregate(&records).unwrap();
    // Thresholds at the 90th percentile of the observed losses, so the
    // difficulty sets are non-empty whatever the corpus shape.
    let mut means: Vec<f64> = stats.iter().map(|s| s.mean_loss).collect();
    means.sort_by(f64::total_cmp);
    let mu = means[(means.len() - 1) * 9 / 10];
    let difficult = by_mean_loss(&stats, mu);
    assert!(!difficult.is_empty());
    c.bench_function("diff_sampling_10k_corpus", |b| {
        b.iter(|| diff_sampling(black_box(&difficult), black_box(&corpus), 1000, 7).unwrap())
    });

    let bitext = synthetic_corpus(4, 500, 800);
    let bitext_records = score_corpus(&lm, &bitext);
    let mut losses: Vec<f64> = bitext_records.iter().map(|r| r.loss).collect();
    losses.sort_by(f64::total_cmp);
    let theta = losses[(losses.len() - 1) * 9 / 10];
    let occurrences = difficult_occurrences(&bitext_records, theta);
    assert!(!occurrences.is_empty());
    c.bench_function("context_sampling_window_match", |b| {
        b.iter(|| {
            context_sampling(
                black_box(&occurrences),
                black_box(&bitext),
                black_box(&corpus),
                &ContextSpec::Window { width: 4 },
                &SimilaritySpec::Match,
                0.75,
                200,
                7,
            )
            .unwrap()
        })
    });
}

criterion_group!(benches, bench_aggregate, bench_ngram, bench_samplers);
criterion_main!(benches);
