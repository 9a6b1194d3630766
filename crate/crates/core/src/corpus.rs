//! Tokenized corpora and subword-unit word boundaries.
//!
//! A corpus file is UTF-8 text with LF line endings, one tokenized sentence
//! per line, tokens separated by single spaces. Sentences are identified by
//! their 0-based line number. Subword segmentation (BPE) is expected to have
//! happened upstream; a [`SubwordConvention`] only describes how segmented
//! units are marked so word boundaries can be recovered.

use std::fs;
use std::io::Write;
use std::ops::Range;
use std::path::Path;

use crate::error::{Error, Result};

/// Marker convention linking subword units that belong to one word.
///
/// The default is the suffix marker `@@`: a token carrying the marker joins
/// the token that follows it, so `B@@ ahr` is one word of two units.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubwordConvention {
    marker: String,
}

impl SubwordConvention {
    pub fn new(marker: impl Into<String>) -> Result<Self> {
        let marker = marker.into();
        if marker.is_empty() {
            return Err(Error::invalid_argument("subword marker must be non-empty"));
        }
        Ok(SubwordConvention { marker })
    }

    pub fn marker(&self) -> &str {
        &self.marker
    }

    /// True when `token` is marked as joining the unit that follows it.
    pub fn joins_next(&self, token: &str) -> bool {
        token.ends_with(&self.marker)
    }
}

impl Default for SubwordConvention {
    fn default() -> Self {
        SubwordConvention {
            marker: "@@".to_string(),
        }
    }
}

/// One tokenized sentence. Tokens are non-empty, contain no whitespace, and
/// are compared as exact byte strings (BPE output is case-bearing).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sentence {
    id: usize,
    tokens: Vec<String>,
}

impl Sentence {
    pub fn new(id: usize, tokens: Vec<String>) -> Result<Self> {
        validate_tokens(&tokens).map_err(Error::invalid_argument)?;
        Ok(Sentence { id, tokens })
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// The sentence as it appears in a corpus file (without the newline).
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }

    /// Maximal runs of positions forming one word: every position in a run
    /// except the last carries the join marker. The spans partition
    /// `0..len()`; a trailing marker on the last token closes its span.
    pub fn word_spans(&self, convention: &SubwordConvention) -> Vec<Range<usize>> {
        let mut spans = Vec::new();
        let mut start = 0;
        for i in 0..self.tokens.len() {
            let last = i + 1 == self.tokens.len();
            if last || !convention.joins_next(&self.tokens[i]) {
                spans.push(start..i + 1);
                start = i + 1;
            }
        }
        spans
    }
}

fn validate_tokens(tokens: &[String]) -> std::result::Result<(), String> {
    if tokens.is_empty() {
        return Err("sentence has no tokens".to_string());
    }
    for token in tokens {
        if token.is_empty() {
            return Err("empty token (doubled, leading, or trailing space)".to_string());
        }
        if token.chars().any(char::is_whitespace) {
            return Err(format!("token {token:?} contains whitespace"));
        }
    }
    Ok(())
}

/// An immutable, ordered collection of sentences with ids `0..len()`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Corpus {
    sentences: Vec<Sentence>,
    source_path: String,
}

impl Corpus {
    /// Load a corpus file. Line numbers in errors are 1-based; sentence ids
    /// are 0-based line indices. Subword markers are not stripped at load.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let text = String::from_utf8(bytes).map_err(|_| Error::NotUtf8 {
            path: path.to_path_buf(),
        })?;
        let mut sentences = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                return Err(Error::EmptySentence {
                    path: path.to_path_buf(),
                    line: i + 1,
                });
            }
            let tokens: Vec<String> = line.split(' ').map(str::to_string).collect();
            validate_tokens(&tokens).map_err(|message| Error::CorpusFormat {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            })?;
            sentences.push(Sentence { id: i, tokens });
        }
        Ok(Corpus {
            sentences,
            source_path: path.display().to_string(),
        })
    }

    /// Build a corpus from token lists, assigning ids in order.
    pub fn from_token_lists<I, T>(lists: I) -> Result<Self>
    where
        I: IntoIterator<Item = Vec<T>>,
        T: Into<String>,
    {
        let mut sentences = Vec::new();
        for (id, list) in lists.into_iter().enumerate() {
            let tokens: Vec<String> = list.into_iter().map(Into::into).collect();
            sentences.push(Sentence::new(id, tokens)?);
        }
        Ok(Corpus {
            sentences,
            source_path: String::new(),
        })
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub fn get(&self, id: usize) -> Option<&Sentence> {
        self.sentences.get(id)
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn source_path(&self) -> &str {
        &self.source_path
    }

    /// Serialize in the corpus file format: every sentence on its own
    /// LF-terminated line. Loading a file in this canonical form and
    /// re-serializing it reproduces the input byte for byte.
    pub fn write_to<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        for sentence in &self.sentences {
            writer.write_all(sentence.text().as_bytes())?;
            writer.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to Vec cannot fail");
        String::from_utf8(out).expect("corpus text is UTF-8")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}
