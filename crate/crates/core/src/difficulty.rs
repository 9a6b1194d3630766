//! Difficulty criteria over token statistics.
//!
//! A token is *difficult* when the trained model struggles to predict it.
//! Three criteria, applied to a [`StatsTable`], each yield a token-level
//! [`DifficultySet`]: raw frequency below a threshold, mean prediction loss
//! above a threshold, or the conjunction of high mean and high standard
//! deviation. At the occurrence level, individual records whose loss exceeds
//! a threshold become [`DifficultOccurrence`]s — the same token may appear
//! many times, once per context in which it was hard to predict.
//!
//! All thresholds are strict inequalities; boundary values are excluded.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::loss_stats::{StatsTable, TokenLossRecord};

const DIFFICULTY_FILE_HEADER: &str = "#btsampler-difficulty-v1";

/// The predicate that selected a difficulty set, with its thresholds.
#[derive(Clone, Debug, PartialEq)]
pub enum DifficultyCriterion {
    /// `freq(y) < eta`
    Frequency { eta: u64 },
    /// `mean_loss(y) > mu`
    MeanLoss { mu: f64 },
    /// `mean_loss(y) > mu && std_loss(y) > rho`
    MeanAndStd { mu: f64, rho: f64 },
}

impl DifficultyCriterion {
    pub fn matches(&self, freq: u64, mean_loss: f64, std_loss: f64) -> bool {
        match *self {
            DifficultyCriterion::Frequency { eta } => freq < eta,
            DifficultyCriterion::MeanLoss { mu } => mean_loss > mu,
            DifficultyCriterion::MeanAndStd { mu, rho } => mean_loss > mu && std_loss > rho,
        }
    }

    fn header_fields(&self) -> String {
        match *self {
            DifficultyCriterion::Frequency { eta } => format!("criterion=freq\teta={eta}"),
            DifficultyCriterion::MeanLoss { mu } => format!("criterion=mean_loss\tmu={mu}"),
            DifficultyCriterion::MeanAndStd { mu, rho } => {
                format!("criterion=mean_std\tmu={mu}\trho={rho}")
            }
        }
    }
}

/// Set of difficult tokens together with the criterion that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct DifficultySet {
    tokens: BTreeSet<String>,
    criterion: DifficultyCriterion,
}

impl DifficultySet {
    pub fn tokens(&self) -> &BTreeSet<String> {
        &self.tokens
    }

    pub fn contains(&self, token: &str) -> bool {
        self.tokens.contains(token)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn criterion(&self) -> &DifficultyCriterion {
        &self.criterion
    }

    pub fn is_subset(&self, other: &DifficultySet) -> bool {
        self.tokens.is_subset(&other.tokens)
    }

    /// Serialize as a sorted token list, one per line, preceded by a header
    /// recording the criterion and thresholds.
    pub fn write_to<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        writeln!(
            writer,
            "{DIFFICULTY_FILE_HEADER}\t{}",
            self.criterion.header_fields()
        )?;
        for token in &self.tokens {
            writeln!(writer, "{token}")?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let header = match lines.next() {
            Some((_, Ok(line))) => line,
            _ => {
                return Err(Error::RecordFormat {
                    line: 1,
                    message: format!("empty file, expected header {DIFFICULTY_FILE_HEADER:?}"),
                })
            }
        };
        let criterion = parse_difficulty_header(&header)?;
        let mut tokens = BTreeSet::new();
        for (i, line) in lines {
            let token = line.map_err(|e| Error::RecordFormat {
                line: i + 1,
                message: e.to_string(),
            })?;
            if token.is_empty() || token.chars().any(char::is_whitespace) {
                return Err(Error::RecordFormat {
                    line: i + 1,
                    message: format!("bad token {token:?}"),
                });
            }
            tokens.insert(token);
        }
        Ok(DifficultySet { tokens, criterion })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to Vec cannot fail");
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(bytes.as_slice())
    }
}

fn parse_difficulty_header(header: &str) -> Result<DifficultyCriterion> {
    let fail = |message: String| Error::RecordFormat { line: 1, message };
    let mut fields = header.split('\t');
    if fields.next() != Some(DIFFICULTY_FILE_HEADER) {
        return Err(fail(format!(
            "expected header {DIFFICULTY_FILE_HEADER:?}, found {header:?}"
        )));
    }
    let mut criterion = None;
    let mut eta = None;
    let mut mu = None;
    let mut rho = None;
    for field in fields {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| fail(format!("bad header field {field:?}")))?;
        match key {
            "criterion" => criterion = Some(value.to_string()),
            "eta" => {
                eta = Some(
                    value
                        .parse::<u64>()
                        .map_err(|_| fail(format!("bad eta {value:?}")))?,
                )
            }
            "mu" => {
                mu = Some(
                    value
                        .parse::<f64>()
                        .map_err(|_| fail(format!("bad mu {value:?}")))?,
                )
            }
            "rho" => {
                rho = Some(
                    value
                        .parse::<f64>()
                        .map_err(|_| fail(format!("bad rho {value:?}")))?,
                )
            }
            other => return Err(fail(format!("unknown header field {other:?}"))),
        }
    }
    match criterion.as_deref() {
        Some("freq") => Ok(DifficultyCriterion::Frequency {
            eta: eta.ok_or_else(|| fail("freq criterion requires eta".into()))?,
        }),
        Some("mean_loss") => Ok(DifficultyCriterion::MeanLoss {
            mu: mu.ok_or_else(|| fail("mean_loss criterion requires mu".into()))?,
        }),
        Some("mean_std") => Ok(DifficultyCriterion::MeanAndStd {
            mu: mu.ok_or_else(|| fail("mean_std criterion requires mu".into()))?,
            rho: rho.ok_or_else(|| fail("mean_std criterion requires rho".into()))?,
        }),
        other => Err(fail(format!("unknown criterion {other:?}"))),
    }
}

fn select(stats: &StatsTable, criterion: DifficultyCriterion) -> DifficultySet {
    let tokens = stats
        .iter()
        .filter(|s| criterion.matches(s.freq, s.mean_loss, s.std_loss))
        .map(|s| s.token.clone())
        .collect();
    DifficultySet { tokens, criterion }
}

/// Tokens whose frequency is strictly below `eta`.
pub fn by_frequency(stats: &StatsTable, eta: u64) -> DifficultySet {
    select(stats, DifficultyCriterion::Frequency { eta })
}

/// Tokens whose mean prediction loss is strictly above `mu`.
pub fn by_mean_loss(stats: &StatsTable, mu: f64) -> DifficultySet {
    select(stats, DifficultyCriterion::MeanLoss { mu })
}

/// Tokens with mean loss strictly above `mu` and loss standard deviation
/// strictly above `rho` — high average difficulty with skewed behaviour
/// across contexts.
pub fn by_mean_and_std(stats: &StatsTable, mu: f64, rho: f64) -> DifficultySet {
    select(stats, DifficultyCriterion::MeanAndStd { mu, rho })
}

/// One (token, sentence, position) whose prediction loss exceeded the
/// occurrence threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct DifficultOccurrence {
    pub token: String,
    pub sentence_id: usize,
    pub position: usize,
    pub loss: f64,
}

/// Records with loss strictly above `theta`, in input order. A token can
/// occur several times: once per context in which it was difficult.
pub fn difficult_occurrences(records: &[TokenLossRecord], theta: f64) -> Vec<DifficultOccurrence> {
    records
        .iter()
        .filter(|r| r.loss > theta)
        .map(|r| DifficultOccurrence {
            token: r.token.clone(),
            sentence_id: r.sentence_id,
            position: r.position,
            loss: r.loss,
        })
        .collect()
}

/// Knobs for difficulty selection and sampling, pre-filled with the
/// defaults used throughout: `mu = 5`, `rho = 10`, `eta = 5000`,
/// `s = 0.75`, `w = 4`.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingConfig {
    /// Mean-loss threshold.
    pub mu: f64,
    /// Loss standard-deviation threshold.
    pub rho: f64,
    /// Frequency threshold.
    pub eta: u64,
    /// Context-similarity threshold.
    pub s: f64,
    /// Context window size (tokens on each side).
    pub w: usize,
    /// Number of sentences to sample; `None` defaults to the bitext size at
    /// the point of use (a one-to-one ratio of sampled to original data).
    pub n: Option<usize>,
    /// Seed for all pseudo-random draws.
    pub seed: u64,
    /// Occurrence-loss threshold; `None` ties it to `mu` so token-level and
    /// occurrence-level difficulty share one scale.
    pub theta: Option<f64>,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            mu: 5.0,
            rho: 10.0,
            eta: 5000,
            s: 0.75,
            w: 4,
            n: None,
            seed: 0,
            theta: None,
        }
    }
}

impl SamplingConfig {
    /// Effective occurrence threshold: explicit `theta`, else `mu`.
    pub fn theta(&self) -> f64 {
        self.theta.unwrap_or(self.mu)
    }
}
