//! Selection of monolingual sentences for back-translation.
//!
//! Back-translation augments machine-translation training data by
//! translating target-language monolingual sentences into the source
//! language with a reverse model. Which sentences get back-translated
//! matters: tokens the model predicts poorly benefit most from fresh
//! contexts. This crate provides the machinery to find those tokens and
//! sample for them:
//!
//! * [`corpus`] — tokenized corpora, subword-unit word boundaries;
//! * [`loss_stats`] — per-token loss statistics, diffs, reports, and the
//!   `#btsampler-loss-v1` record format;
//! * [`difficulty`] — difficulty criteria (frequency, mean loss,
//!   mean + standard deviation) and difficult occurrences;
//! * [`context`] — context windows and similarity (exact match, averaged
//!   embedding cosine), word2vec text-format loading;
//! * [`sampler`] — random, difficulty-targeted, ratio-preserving, and
//!   context-aware sampling, all deterministic under a seed;
//! * [`ngram`] — an additive-smoothing n-gram model that generates loss
//!   records at desk scale;
//! * [`pipeline`] — real:synthetic corpus mixing, epoch shuffles, and run
//!   manifests for byte-exact reproducibility.

pub mod context;
pub mod corpus;
pub mod difficulty;
pub mod error;
pub mod loss_stats;
pub mod ngram;
pub mod pipeline;
pub mod sampler;

pub use context::{ContextWindow, EmbeddingTable};
pub use corpus::{Corpus, Sentence, SubwordConvention};
pub use difficulty::{DifficultOccurrence, DifficultyCriterion, DifficultySet, SamplingConfig};
pub use error::{Error, Result, Warning};
pub use loss_stats::{StatsTable, TokenLossRecord, TokenStats};
pub use ngram::NGramLm;
pub use pipeline::{Bitext, MixRatio, RunManifest};
pub use sampler::{Provenance, QuotaTable, SampleSet, SampledSentence};
