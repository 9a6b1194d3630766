//! Additive-smoothing n-gram language model.
//!
//! A desk-scale stand-in for a neural trainer: it assigns every token of a
//! corpus a prediction loss (negative log-likelihood in nats) so the full
//! selection pipeline can run end to end without any neural machinery.
//! Add-k smoothing keeps every probability hand-checkable:
//!
//! ```text
//! p(y | h) = (count(h, y) + k) / (count(h) + k * |V|)
//! ```
//!
//! where `count(h)` is the number of times history `h` preceded a
//! vocabulary token, and `|V|` is the number of distinct tokens seen in
//! training. Histories are padded with begin markers; the end marker is
//! counted in the gram tables but is never scored, so the probabilities of
//! the vocabulary tokens sum to exactly 1 for any history. Tokens unseen in
//! training map to an unknown symbol that carries the smoothed escape mass
//! `k / (count(h) + k * |V|)`.
//!
//! The marker strings `<s>`, `</s>`, and `<unk>` are reserved; corpora that
//! use them as ordinary tokens will conflate counts.

use std::collections::{BTreeSet, HashMap};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::loss_stats::TokenLossRecord;

pub const BEGIN_MARKER: &str = "<s>";
pub const END_MARKER: &str = "</s>";
pub const UNKNOWN_TOKEN: &str = "<unk>";

#[derive(Clone, Debug)]
pub struct NGramLm {
    order: usize,
    smoothing: f64,
    vocab: BTreeSet<String>,
    /// `grams[j]` counts windows of length `j + 1` ending at each predicted
    /// position of the padded sentences, for all orders up to `order`.
    grams: Vec<HashMap<Vec<String>, u64>>,
    /// Counts of length `order - 1` histories, marginalized over vocabulary
    /// outcomes (end-marker events excluded).
    histories: HashMap<Vec<String>, u64>,
}

/// Train an order-`order` model with add-`smoothing` counts over the corpus.
pub fn train_lm(corpus: &Corpus, order: usize, smoothing: f64) -> Result<NGramLm> {
    if order == 0 {
        return Err(Error::invalid_argument("n-gram order must be at least 1"));
    }
    if smoothing.is_nan() || smoothing <= 0.0 || !smoothing.is_finite() {
        return Err(Error::invalid_argument(
            "smoothing constant must be positive and finite",
        ));
    }
    if corpus.is_empty() {
        return Err(Error::empty_input("cannot train on an empty corpus"));
    }
    let mut lm = NGramLm {
        order,
        smoothing,
        vocab: BTreeSet::new(),
        grams: vec![HashMap::new(); order],
        histories: HashMap::new(),
    };
    for sentence in corpus.sentences() {
        for token in sentence.tokens() {
            lm.vocab.insert(token.clone());
        }
        let padded = padded_sentence(sentence.tokens(), order);
        for t in (order - 1)..padded.len() {
            for j in 1..=order {
                let gram: Vec<String> = padded[t + 1 - j..=t].to_vec();
                *lm.grams[j - 1].entry(gram).or_insert(0) += 1;
            }
            if padded[t] != END_MARKER {
                let history: Vec<String> = padded[t + 1 - order..t].to_vec();
                *lm.histories.entry(history).or_insert(0) += 1;
            }
        }
    }
    Ok(lm)
}

fn padded_sentence(tokens: &[String], order: usize) -> Vec<String> {
    let mut padded = Vec::with_capacity(tokens.len() + order);
    padded.extend(std::iter::repeat_n(BEGIN_MARKER.to_string(), order - 1));
    padded.extend(tokens.iter().cloned());
    padded.push(END_MARKER.to_string());
    padded
}

impl NGramLm {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn vocab(&self) -> impl Iterator<Item = &str> {
        self.vocab.iter().map(String::as_str)
    }

    /// Raw count of a gram of any length up to the model order.
    pub fn gram_count(&self, gram: &[&str]) -> u64 {
        if gram.is_empty() || gram.len() > self.order {
            return 0;
        }
        let key: Vec<String> = gram.iter().map(|t| t.to_string()).collect();
        self.grams[gram.len() - 1].get(&key).copied().unwrap_or(0)
    }

    /// Smoothed probability of `token` after `history`.
    ///
    /// A history shorter than `order - 1` is left-padded with begin markers;
    /// a longer one is truncated to its last `order - 1` entries. Tokens
    /// outside the training vocabulary are mapped to the unknown symbol.
    pub fn prob<S: AsRef<str>>(&self, history: &[S], token: &str) -> f64 {
        let context = self.normalized_history(history);
        let history_count = self
            .histories
            .get(&context)
            .copied()
            .unwrap_or(0);
        let gram_count = if self.vocab.contains(token) {
            let mut key = context;
            key.push(token.to_string());
            self.grams[self.order - 1].get(&key).copied().unwrap_or(0)
        } else {
            0
        };
        (gram_count as f64 + self.smoothing)
            / (history_count as f64 + self.smoothing * self.vocab.len() as f64)
    }

    fn normalized_history<S: AsRef<str>>(&self, history: &[S]) -> Vec<String> {
        let need = self.order - 1;
        let mut context = Vec::with_capacity(need);
        if history.len() < need {
            context.extend(std::iter::repeat_n(BEGIN_MARKER.to_string(), need - history.len()));
        }
        let start = history.len().saturating_sub(need);
        context.extend(history[start..].iter().map(|s| s.as_ref().to_string()));
        context
    }
}

/// Score every token of `corpus`: one record per token, in sentence and
/// position order, with `loss = -ln p(token | history)`. Unknown tokens
/// receive the smoothed unknown mass, so every loss is finite.
pub fn score_corpus(lm: &NGramLm, corpus: &Corpus) -> Vec<TokenLossRecord> {
    let mut records = Vec::new();
    for sentence in corpus.sentences() {
        let padded = padded_sentence(sentence.tokens(), lm.order);
        for (position, token) in sentence.tokens().iter().enumerate() {
            let t = position + lm.order - 1;
            let history = &padded[t + 1 - lm.order..t];
            let p = lm.prob(history, token);
            let loss = (-p.ln()).max(0.0);
            records.push(TokenLossRecord::new(sentence.id(), position, token, loss));
        }
    }
    records
}
