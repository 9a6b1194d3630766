//! Context extraction and context similarity.
//!
//! A [`ContextWindow`] holds the tokens around one position of a sentence,
//! with the center token itself excluded; the window remembers how many of
//! its tokens came from the left side so that boundary-truncated windows can
//! still be aligned around their centers. Three extractors are provided —
//! a fixed token window, the subword units of the center's word, and the
//! whole remaining sentence — plus two similarity measures: exact positional
//! match and cosine of averaged embeddings.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::corpus::{Sentence, SubwordConvention};
use crate::error::{Error, Result};

/// Ordered tokens around a center position, center excluded.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContextWindow {
    tokens: Vec<String>,
    /// Number of tokens that precede the center.
    split: usize,
}

impl ContextWindow {
    pub fn new(left: Vec<String>, right: Vec<String>) -> Self {
        let split = left.len();
        let mut tokens = left;
        tokens.extend(right);
        ContextWindow { tokens, split }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn left(&self) -> &[String] {
        &self.tokens[..self.split]
    }

    pub fn right(&self) -> &[String] {
        &self.tokens[self.split..]
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

fn check_position(sentence: &Sentence, position: usize) -> Result<()> {
    if position >= sentence.len() {
        return Err(Error::PositionOutOfRange {
            position,
            len: sentence.len(),
        });
    }
    Ok(())
}

/// Up to `width` tokens on each side of `position`, truncated at sentence
/// boundaries, order preserved, center excluded.
pub fn token_window(sentence: &Sentence, position: usize, width: usize) -> Result<ContextWindow> {
    check_position(sentence, position)?;
    if width == 0 {
        return Err(Error::invalid_argument("window width must be positive"));
    }
    let tokens = sentence.tokens();
    let left = tokens[position.saturating_sub(width)..position].to_vec();
    let right = tokens[position + 1..(position + 1 + width).min(tokens.len())].to_vec();
    Ok(ContextWindow::new(left, right))
}

/// The subword units belonging to the same word as the unit at `position`,
/// center excluded. A standalone word yields an empty window.
pub fn subword_context(
    sentence: &Sentence,
    position: usize,
    convention: &SubwordConvention,
) -> Result<ContextWindow> {
    check_position(sentence, position)?;
    let span = sentence
        .word_spans(convention)
        .into_iter()
        .find(|span| span.contains(&position))
        .expect("word spans partition all positions");
    let tokens = sentence.tokens();
    let left = tokens[span.start..position].to_vec();
    let right = tokens[position + 1..span.end].to_vec();
    Ok(ContextWindow::new(left, right))
}

/// Every token of the sentence except the one at `position`.
pub fn sentence_context(sentence: &Sentence, position: usize) -> Result<ContextWindow> {
    check_position(sentence, position)?;
    let tokens = sentence.tokens();
    Ok(ContextWindow::new(
        tokens[..position].to_vec(),
        tokens[position + 1..].to_vec(),
    ))
}

/// Fraction of positions at which the two windows carry identical tokens.
///
/// Requires equal lengths; for boundary-truncated windows of unequal length
/// use [`sim_match_aligned`].
pub fn sim_match(a: &ContextWindow, b: &ContextWindow) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::WindowLengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let matches = a
        .tokens()
        .iter()
        .zip(b.tokens())
        .filter(|(x, y)| x == y)
        .count();
    Ok(matches as f64 / a.len() as f64)
}

/// Result of [`sim_match_aligned`]: the match fraction over the compared
/// positions and whether truncation was necessary to align the windows.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlignedMatch {
    pub score: f64,
    pub truncated: bool,
}

/// Positional match for possibly boundary-truncated windows: each side is
/// symmetrically truncated to the shorter of the two windows' sides, keeping
/// the tokens adjacent to the center, and the pair is flagged when any token
/// was dropped. Equal-shape windows reduce to [`sim_match`].
pub fn sim_match_aligned(a: &ContextWindow, b: &ContextWindow) -> Result<AlignedMatch> {
    let left = a.left().len().min(b.left().len());
    let right = a.right().len().min(b.right().len());
    let compared = left + right;
    if compared == 0 {
        return Err(Error::EmptyWindow);
    }
    let truncated = compared != a.len() || compared != b.len();
    let a_left = &a.left()[a.left().len() - left..];
    let b_left = &b.left()[b.left().len() - left..];
    let a_right = &a.right()[..right];
    let b_right = &b.right()[..right];
    let matches = a_left
        .iter()
        .zip(b_left)
        .chain(a_right.iter().zip(b_right))
        .filter(|(x, y)| x == y)
        .count();
    Ok(AlignedMatch {
        score: matches as f64 / compared as f64,
        truncated,
    })
}

/// Token embeddings of a fixed dimension, loaded from word2vec text format.
#[derive(Clone, Debug)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid_argument(
                "embedding dimension must be positive",
            ));
        }
        Ok(EmbeddingTable {
            dim,
            vectors: HashMap::new(),
        })
    }

    pub fn insert(&mut self, token: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        let token = token.into();
        if vector.len() != self.dim {
            return Err(Error::invalid_argument(format!(
                "vector for {token:?} has {} values, expected {}",
                vector.len(),
                self.dim
            )));
        }
        if self.vectors.contains_key(&token) {
            return Err(Error::invalid_argument(format!(
                "duplicate token {token:?}"
            )));
        }
        self.vectors.insert(token, vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.vectors.contains_key(token)
    }

    /// Arithmetic mean of the vectors of the in-vocabulary tokens, or `None`
    /// when no token is in vocabulary.
    pub fn mean_vector(&self, tokens: &[String]) -> Option<Vec<f64>> {
        let mut sum = vec![0.0; self.dim];
        let mut found = 0usize;
        for token in tokens {
            if let Some(vector) = self.vectors.get(token) {
                for (acc, v) in sum.iter_mut().zip(vector) {
                    *acc += v;
                }
                found += 1;
            }
        }
        if found == 0 {
            return None;
        }
        for acc in &mut sum {
            *acc /= found as f64;
        }
        Some(sum)
    }

    /// Load word2vec text format: a `count dim` header line, then one token
    /// followed by `dim` reals per line, whitespace separated.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let text = String::from_utf8(bytes).map_err(|_| Error::NotUtf8 {
            path: path.to_path_buf(),
        })?;
        let fail = |line: usize, message: String| Error::EmbeddingFormat {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate();
        let (count, dim) = match lines.next() {
            Some((_, header)) => {
                let fields: Vec<&str> = header.split_whitespace().collect();
                if fields.len() != 2 {
                    return Err(fail(1, format!("expected \"count dim\" header, found {header:?}")));
                }
                let count: usize = fields[0]
                    .parse()
                    .map_err(|_| fail(1, format!("bad count {:?}", fields[0])))?;
                let dim: usize = fields[1]
                    .parse()
                    .map_err(|_| fail(1, format!("bad dimension {:?}", fields[1])))?;
                (count, dim)
            }
            None => return Err(fail(1, "empty file".to_string())),
        };
        let mut table = EmbeddingTable::new(dim).map_err(|e| fail(1, e.to_string()))?;
        for (i, line) in lines {
            let mut fields = line.split_whitespace();
            let token = fields
                .next()
                .ok_or_else(|| fail(i + 1, "blank row".to_string()))?;
            let values: Vec<f64> = fields
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| fail(i + 1, format!("bad value {v:?}")))
                })
                .collect::<Result<_>>()?;
            if values.len() != dim {
                return Err(fail(
                    i + 1,
                    format!("row has {} values, expected {dim}", values.len()),
                ));
            }
            table
                .insert(token, values)
                .map_err(|e| fail(i + 1, e.to_string()))?;
        }
        if table.len() != count {
            return Err(fail(
                1,
                format!("header declares {count} entries, file has {}", table.len()),
            ));
        }
        Ok(table)
    }
}

fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let norm_a: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let norm_b: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm_a == 0.0 || norm_b == 0.0 {
        return None;
    }
    Some((dot / (norm_a * norm_b)).clamp(-1.0, 1.0))
}

/// Cosine similarity of the averaged embeddings of the two windows.
///
/// Out-of-vocabulary tokens are skipped. Returns `Ok(None)` — the no-match
/// signal, to be treated as similarity below any threshold — when either
/// window has no in-vocabulary token or a zero mean vector.
pub fn sim_embedding(
    a: &ContextWindow,
    b: &ContextWindow,
    embeddings: &EmbeddingTable,
) -> Result<Option<f64>> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let mean_a = embeddings.mean_vector(a.tokens());
    let mean_b = embeddings.mean_vector(b.tokens());
    match (mean_a, mean_b) {
        (Some(va), Some(vb)) => Ok(cosine(&va, &vb)),
        _ => Ok(None),
    }
}
