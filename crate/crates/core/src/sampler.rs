//! Sampling algorithms over a monolingual corpus.
//!
//! Four strategies select sentences for back-translation:
//!
//! * [`random_sampling`] — the uniform baseline;
//! * [`diff_sampling`] — accept sentences containing at least one token of a
//!   [`DifficultySet`];
//! * [`ratio_sampling`] — accept under per-token quotas proportional to how
//!   often each token appeared in difficult contexts, so the sample mirrors
//!   the distribution of difficult occurrences;
//! * [`context_sampling`] — accept sentences in which a difficult token
//!   appears in a context similar (strictly above a threshold) to a context
//!   where it was hard to predict.
//!
//! # Determinism
//!
//! All draws come from a ChaCha8 stream seeded with `seed_from_u64`; indices
//! are drawn uniformly over the monolingual corpus and filtered against a
//! pre-built eligibility index, with sentences accepted at most once. For a
//! fixed (inputs, config, seed) the result is byte-identical across runs and
//! platforms. Drawing uniformly from the corpus and skipping ineligible or
//! already-accepted sentences consumes the same random stream as a literal
//! rejection-sampling loop, so the two are interchangeable draw for draw;
//! the index only makes eligibility checks O(1) and detects exhaustion,
//! turning the non-terminating corner cases into a partial result plus a
//! [`Warning::Exhausted`].

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::context::{
    sentence_context, sim_embedding, sim_match_aligned, subword_context, token_window,
    ContextWindow, EmbeddingTable,
};
use crate::corpus::{Corpus, Sentence, SubwordConvention};
use crate::difficulty::{DifficultOccurrence, DifficultySet};
use crate::error::{Error, Result, Warning};

/// The pseudo-random generator used by every sampler: ChaCha8 seeded with
/// `seed_from_u64`. Fixed and documented so results replicate.
pub fn sampling_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// How and why one sentence entered a sample.
#[derive(Clone, Debug, PartialEq)]
pub enum Provenance {
    Random,
    /// First difficult token (by position) found in the sentence.
    Difficult { trigger: String },
    /// Every quota token credited when the sentence was accepted.
    Ratio { credited: Vec<String> },
    /// Best-matching difficult occurrence and its similarity score.
    Context {
        trigger: String,
        matched_sentence_id: usize,
        matched_position: usize,
        similarity: f64,
        /// True when the compared windows had to be truncated to align.
        truncated: bool,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampledSentence {
    pub sentence_id: usize,
    pub provenance: Provenance,
}

/// Ordered, de-duplicated sample with per-sentence provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    entries: Vec<SampledSentence>,
    warnings: Vec<Warning>,
}

impl SampleSet {
    fn new(entries: Vec<SampledSentence>, warnings: Vec<Warning>) -> Self {
        SampleSet { entries, warnings }
    }

    pub fn entries(&self) -> &[SampledSentence] {
        &self.entries
    }

    pub fn sentence_ids(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.sentence_id).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Diagnostics accumulated while sampling; not part of the data output.
    pub fn warnings(&self) -> &[Warning] {
        &self.warnings
    }

    /// Write the sampled sentences, one per line, in acceptance order.
    pub fn write_sentences<W: Write>(&self, corpus: &Corpus, mut writer: W) -> Result<()> {
        for entry in &self.entries {
            let sentence = corpus
                .get(entry.sentence_id)
                .ok_or(Error::UnknownSentenceId {
                    sentence_id: entry.sentence_id,
                })?;
            writeln!(writer, "{}", sentence.text()).map_err(|e| Error::io("<writer>", e))?;
        }
        Ok(())
    }

    /// Write the provenance sidecar TSV. Columns that do not apply to the
    /// sampling algorithm are left empty; ratio sampling lists every
    /// credited token in the trigger column, space separated.
    pub fn write_provenance<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        writeln!(
            writer,
            "sentence_id\ttrigger_token\tmatched_sentence_id\tmatched_position\tsimilarity"
        )?;
        for entry in &self.entries {
            match &entry.provenance {
                Provenance::Random => {
                    writeln!(writer, "{}\t\t\t\t", entry.sentence_id)?;
                }
                Provenance::Difficult { trigger } => {
                    writeln!(writer, "{}\t{trigger}\t\t\t", entry.sentence_id)?;
                }
                Provenance::Ratio { credited } => {
                    writeln!(writer, "{}\t{}\t\t\t", entry.sentence_id, credited.join(" "))?;
                }
                Provenance::Context {
                    trigger,
                    matched_sentence_id,
                    matched_position,
                    similarity,
                    ..
                } => {
                    writeln!(
                        writer,
                        "{}\t{trigger}\t{matched_sentence_id}\t{matched_position}\t{similarity}",
                        entry.sentence_id
                    )?;
                }
            }
        }
        Ok(())
    }

    pub fn sentences_to_string(&self, corpus: &Corpus) -> Result<String> {
        let mut out = Vec::new();
        self.write_sentences(corpus, &mut out)?;
        Ok(String::from_utf8(out).expect("sentences are UTF-8"))
    }

    pub fn provenance_to_string(&self) -> String {
        let mut out = Vec::new();
        self.write_provenance(&mut out)
            .expect("writing to Vec cannot fail");
        String::from_utf8(out).expect("provenance is UTF-8")
    }

    pub fn save(
        &self,
        corpus: &Corpus,
        sentences_path: impl AsRef<Path>,
        provenance_path: impl AsRef<Path>,
    ) -> Result<()> {
        let sentences_path = sentences_path.as_ref();
        fs::write(sentences_path, self.sentences_to_string(corpus)?)
            .map_err(|e| Error::io(sentences_path, e))?;
        let provenance_path = provenance_path.as_ref();
        fs::write(provenance_path, self.provenance_to_string())
            .map_err(|e| Error::io(provenance_path, e))
    }
}

/// Draw distinct eligible indices uniformly from `0..universe` until
/// `want.min(eligible_total)` have been accepted. The caller guarantees that
/// exactly `eligible_total` indices satisfy `is_eligible`.
pub(crate) fn draw_distinct<F>(
    rng: &mut ChaCha8Rng,
    universe: usize,
    want: usize,
    eligible_total: usize,
    mut is_eligible: F,
) -> Vec<usize>
where
    F: FnMut(usize) -> bool,
{
    let target = want.min(eligible_total);
    let mut picked = Vec::with_capacity(target);
    let mut taken = vec![false; universe];
    while picked.len() < target {
        let index = rng.gen_range(0..universe);
        if taken[index] || !is_eligible(index) {
            continue;
        }
        taken[index] = true;
        picked.push(index);
    }
    picked
}

fn check_sampling_args(corpus: &Corpus, n: usize) -> Result<()> {
    if corpus.is_empty() {
        return Err(Error::empty_input("cannot sample from an empty corpus"));
    }
    if n == 0 {
        return Err(Error::invalid_argument("sample size must be positive"));
    }
    Ok(())
}

/// Uniform sampling without replacement; the baseline. Requests larger than
/// the corpus return the whole corpus, ordered by the seeded draw.
pub fn random_sampling(corpus: &Corpus, n: usize, seed: u64) -> Result<SampleSet> {
    check_sampling_args(corpus, n)?;
    let mut rng = sampling_rng(seed);
    let picked = draw_distinct(&mut rng, corpus.len(), n, corpus.len(), |_| true);
    let entries = picked
        .into_iter()
        .map(|sentence_id| SampledSentence {
            sentence_id,
            provenance: Provenance::Random,
        })
        .collect();
    Ok(SampleSet::new(entries, Vec::new()))
}

/// Sampling for difficult tokens: uniform over the sentences of `corpus`
/// that contain at least one token of `difficult`, without replacement.
/// When fewer eligible sentences exist than requested, all of them are
/// returned along with an exhaustion warning.
pub fn diff_sampling(
    difficult: &DifficultySet,
    corpus: &Corpus,
    n: usize,
    seed: u64,
) -> Result<SampleSet> {
    if difficult.is_empty() {
        return Err(Error::empty_input("difficulty set is empty"));
    }
    check_sampling_args(corpus, n)?;
    // Eligibility index: the first difficult token of each eligible sentence.
    let triggers: Vec<Option<&String>> = corpus
        .sentences()
        .iter()
        .map(|sentence| sentence.tokens().iter().find(|t| difficult.contains(t)))
        .collect();
    let eligible_total = triggers.iter().filter(|t| t.is_some()).count();
    let mut rng = sampling_rng(seed);
    let picked = draw_distinct(&mut rng, corpus.len(), n, eligible_total, |i| {
        triggers[i].is_some()
    });
    let entries = picked
        .into_iter()
        .map(|sentence_id| SampledSentence {
            sentence_id,
            provenance: Provenance::Difficult {
                trigger: triggers[sentence_id]
                    .expect("picked sentences are eligible")
                    .clone(),
            },
        })
        .collect();
    let mut warnings = Vec::new();
    if eligible_total < n {
        warnings.push(Warning::Exhausted {
            requested: n,
            available: eligible_total,
        });
    }
    Ok(SampleSet::new(entries, warnings))
}

/// Per-token sampling quotas derived from difficult occurrences:
/// `H(y) = n * |occurrences of y| / |occurrences|`, plus the running count
/// of how often each token has appeared in accepted sentences.
#[derive(Clone, Debug, PartialEq)]
pub struct QuotaTable {
    quotas: BTreeMap<String, f64>,
    counts: BTreeMap<String, u64>,
}

impl QuotaTable {
    pub fn from_occurrences(occurrences: &[DifficultOccurrence], n: usize) -> Result<Self> {
        if occurrences.is_empty() {
            return Err(Error::empty_input("no difficult occurrences"));
        }
        let mut occurrence_counts: BTreeMap<String, u64> = BTreeMap::new();
        for occurrence in occurrences {
            *occurrence_counts
                .entry(occurrence.token.clone())
                .or_insert(0) += 1;
        }
        let total = occurrences.len() as f64;
        let quotas = occurrence_counts
            .iter()
            .map(|(token, &count)| (token.clone(), n as f64 * count as f64 / total))
            .collect();
        let counts = occurrence_counts.keys().map(|t| (t.clone(), 0)).collect();
        Ok(QuotaTable { quotas, counts })
    }

    pub fn quota(&self, token: &str) -> Option<f64> {
        self.quotas.get(token).copied()
    }

    pub fn count(&self, token: &str) -> u64 {
        self.counts.get(token).copied().unwrap_or(0)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.quotas.contains_key(token)
    }

    /// Strict quota check: the token still accepts sentences while its
    /// running count is strictly below its quota.
    pub fn is_open(&self, token: &str) -> bool {
        match self.quota(token) {
            Some(quota) => (self.count(token) as f64) < quota,
            None => false,
        }
    }

    pub fn credit(&mut self, token: &str, occurrences_in_sentence: u64) {
        if let Some(count) = self.counts.get_mut(token) {
            *count += occurrences_in_sentence;
        }
    }

    pub fn quotas(&self) -> &BTreeMap<String, f64> {
        &self.quotas
    }

    pub fn counts(&self) -> &BTreeMap<String, u64> {
        &self.counts
    }
}

/// Sampling with ratio preservation: a candidate is accepted when it
/// contains some difficult token whose running count is strictly below its
/// quota; on acceptance every contained difficult token is credited with its
/// number of occurrences in the sentence, so counts can overshoot quotas
/// through co-occurrence.
pub fn ratio_sampling(
    occurrences: &[DifficultOccurrence],
    corpus: &Corpus,
    n: usize,
    seed: u64,
) -> Result<SampleSet> {
    check_sampling_args(corpus, n)?;
    let mut quotas = QuotaTable::from_occurrences(occurrences, n)?;

    // Inverted index over quota tokens, and the pool of sentences that
    // currently contain at least one open token.
    let mut postings: HashMap<&str, Vec<usize>> = HashMap::new();
    for (id, sentence) in corpus.sentences().iter().enumerate() {
        let mut seen: HashSet<&str> = HashSet::new();
        for token in sentence.tokens() {
            if quotas.contains(token) && seen.insert(token) {
                postings.entry(token.as_str()).or_default().push(id);
            }
        }
    }
    let mut accepted = vec![false; corpus.len()];
    let rebuild_pool = |quotas: &QuotaTable, accepted: &[bool]| -> HashSet<usize> {
        let mut pool = HashSet::new();
        for (token, ids) in &postings {
            if quotas.is_open(token) {
                pool.extend(ids.iter().copied().filter(|&id| !accepted[id]));
            }
        }
        pool
    };
    let mut pool = rebuild_pool(&quotas, &accepted);

    let mut rng = sampling_rng(seed);
    let mut entries: Vec<SampledSentence> = Vec::new();
    let mut warnings = Vec::new();
    while entries.len() < n {
        if pool.is_empty() {
            warnings.push(Warning::Exhausted {
                requested: n,
                available: entries.len(),
            });
            break;
        }
        let index = rng.gen_range(0..corpus.len());
        if accepted[index] || !pool.contains(&index) {
            continue;
        }
        // Credit every contained difficult token, in first-occurrence order.
        let sentence = &corpus.sentences()[index];
        let mut credited: Vec<(String, u64)> = Vec::new();
        for token in sentence.tokens() {
            if quotas.contains(token) {
                match credited.iter_mut().find(|(t, _)| t == token) {
                    Some((_, count)) => *count += 1,
                    None => credited.push((token.clone(), 1)),
                }
            }
        }
        let mut closed_any = false;
        for (token, count) in &credited {
            let was_open = quotas.is_open(token);
            quotas.credit(token, *count);
            if was_open && !quotas.is_open(token) {
                closed_any = true;
            }
        }
        accepted[index] = true;
        pool.remove(&index);
        entries.push(SampledSentence {
            sentence_id: index,
            provenance: Provenance::Ratio {
                credited: credited.into_iter().map(|(t, _)| t).collect(),
            },
        });
        if closed_any {
            pool = rebuild_pool(&quotas, &accepted);
        }
    }
    Ok(SampleSet::new(entries, warnings))
}

/// Context definition for [`context_sampling`].
#[derive(Clone, Debug)]
pub enum ContextSpec {
    /// Up to `width` tokens on each side of the target.
    Window { width: usize },
    /// The subword units of the word containing the target.
    Subword(SubwordConvention),
    /// The whole sentence minus the target.
    Sentence,
}

impl ContextSpec {
    fn extract(&self, sentence: &Sentence, position: usize) -> Result<ContextWindow> {
        match self {
            ContextSpec::Window { width } => token_window(sentence, position, *width),
            ContextSpec::Subword(convention) => subword_context(sentence, position, convention),
            ContextSpec::Sentence => sentence_context(sentence, position),
        }
    }
}

/// Similarity measure for [`context_sampling`].
#[derive(Clone, Debug)]
pub enum SimilaritySpec<'a> {
    /// Exact positional match over aligned windows.
    Match,
    /// Cosine of averaged embeddings.
    Embedding(&'a EmbeddingTable),
}

struct RecordedContext {
    sentence_id: usize,
    position: usize,
    window: ContextWindow,
}

struct ContextMatch {
    trigger: String,
    matched_sentence_id: usize,
    matched_position: usize,
    similarity: f64,
    truncated: bool,
}

/// Sampling with context: a candidate sentence is eligible when some
/// occurrence of a difficult token in it has context similarity strictly
/// greater than `threshold` against at least one recorded difficult context
/// of that token. Provenance records the best-matching occurrence. The
/// no-match signal from embedding similarity counts as below any threshold.
///
/// Every recorded context of every difficult token in the candidate is
/// evaluated, so cost grows with the occurrence list; worst case is
/// quadratic in corpus size times occurrences.
#[allow(clippy::too_many_arguments)]
pub fn context_sampling(
    occurrences: &[DifficultOccurrence],
    bitext_target: &Corpus,
    monolingual: &Corpus,
    context: &ContextSpec,
    similarity: &SimilaritySpec,
    threshold: f64,
    n: usize,
    seed: u64,
) -> Result<SampleSet> {
    check_sampling_args(monolingual, n)?;
    if occurrences.is_empty() {
        return Err(Error::empty_input("no difficult occurrences"));
    }
    match similarity {
        SimilaritySpec::Match if !(0.0..=1.0).contains(&threshold) => {
            return Err(Error::invalid_argument(format!(
                "match similarity threshold must be in [0, 1], got {threshold}"
            )))
        }
        SimilaritySpec::Embedding(_) if !(-1.0..=1.0).contains(&threshold) => {
            return Err(Error::invalid_argument(format!(
                "embedding similarity threshold must be in [-1, 1], got {threshold}"
            )))
        }
        _ => {}
    }

    // Record the difficult contexts from the bitext target side, per token,
    // in occurrence order.
    let mut recorded: HashMap<&str, Vec<RecordedContext>> = HashMap::new();
    for occurrence in occurrences {
        let sentence = bitext_target
            .get(occurrence.sentence_id)
            .ok_or(Error::UnknownSentenceId {
                sentence_id: occurrence.sentence_id,
            })?;
        if occurrence.position >= sentence.len() {
            return Err(Error::PositionOutOfRange {
                position: occurrence.position,
                len: sentence.len(),
            });
        }
        let at_position = &sentence.tokens()[occurrence.position];
        if at_position != &occurrence.token {
            return Err(Error::invalid_argument(format!(
                "occurrence token {:?} does not match corpus token {:?} at sentence {}, position {}",
                occurrence.token, at_position, occurrence.sentence_id, occurrence.position
            )));
        }
        let window = context.extract(sentence, occurrence.position)?;
        recorded
            .entry(occurrence.token.as_str())
            .or_default()
            .push(RecordedContext {
                sentence_id: occurrence.sentence_id,
                position: occurrence.position,
                window,
            });
    }

    // Eligibility is static: evaluate every candidate once, keeping the
    // best-scoring (position, recorded-context) pair.
    let mut matches: Vec<Option<ContextMatch>> = Vec::with_capacity(monolingual.len());
    for sentence in monolingual.sentences() {
        let mut best: Option<ContextMatch> = None;
        for (position, token) in sentence.tokens().iter().enumerate() {
            let Some(contexts) = recorded.get(token.as_str()) else {
                continue;
            };
            let candidate_window = context.extract(sentence, position)?;
            if candidate_window.is_empty() {
                continue;
            }
            for recorded_context in contexts {
                if recorded_context.window.is_empty() {
                    continue;
                }
                let (score, truncated) = match similarity {
                    SimilaritySpec::Match => {
                        match sim_match_aligned(&candidate_window, &recorded_context.window) {
                            Ok(aligned) => (aligned.score, aligned.truncated),
                            Err(_) => continue,
                        }
                    }
                    SimilaritySpec::Embedding(table) => {
                        match sim_embedding(&candidate_window, &recorded_context.window, table)? {
                            Some(score) => (score, false),
                            None => continue,
                        }
                    }
                };
                if best.as_ref().is_none_or(|b| score > b.similarity) {
                    best = Some(ContextMatch {
                        trigger: token.clone(),
                        matched_sentence_id: recorded_context.sentence_id,
                        matched_position: recorded_context.position,
                        similarity: score,
                        truncated,
                    });
                }
            }
        }
        matches.push(best.filter(|b| b.similarity > threshold));
    }

    let eligible_total = matches.iter().filter(|m| m.is_some()).count();
    let mut rng = sampling_rng(seed);
    let picked = draw_distinct(&mut rng, monolingual.len(), n, eligible_total, |i| {
        matches[i].is_some()
    });
    let entries = picked
        .into_iter()
        .map(|sentence_id| {
            let m = matches[sentence_id]
                .as_ref()
                .expect("picked sentences are eligible");
            SampledSentence {
                sentence_id,
                provenance: Provenance::Context {
                    trigger: m.trigger.clone(),
                    matched_sentence_id: m.matched_sentence_id,
                    matched_position: m.matched_position,
                    similarity: m.similarity,
                    truncated: m.truncated,
                },
            }
        })
        .collect();
    let mut warnings = Vec::new();
    if eligible_total < n {
        warnings.push(Warning::Exhausted {
            requested: n,
            available: eligible_total,
        });
    }
    Ok(SampleSet::new(entries, warnings))
}
