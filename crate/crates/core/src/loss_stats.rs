//! Per-token prediction-loss statistics.
//!
//! A loss record carries the negative log-likelihood, in nats, that a model
//! assigned to one token occurrence. Records typically come from an external
//! trainer or from the built-in n-gram scorer; this module aggregates them
//! into per-token frequency / mean / standard-deviation tables, diffs tables
//! produced by two models, and reads and writes the `#btsampler-loss-v1`
//! record format and the tabular report format.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Header line of the loss-record TSV format. Columns are
/// `sentence_id`, `position`, `token`, `loss` (nats, natural log).
pub const LOSS_FILE_HEADER: &str = "#btsampler-loss-v1";

/// One token occurrence and the prediction loss it received.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenLossRecord {
    pub sentence_id: usize,
    /// 0-based position of the token within its sentence.
    pub position: usize,
    pub token: String,
    /// Negative log-likelihood in nats; non-negative and finite.
    pub loss: f64,
}

impl TokenLossRecord {
    pub fn new(sentence_id: usize, position: usize, token: impl Into<String>, loss: f64) -> Self {
        TokenLossRecord {
            sentence_id,
            position,
            token: token.into(),
            loss,
        }
    }
}

/// Aggregated statistics for one token.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenStats {
    pub token: String,
    /// Number of contributing records (the token frequency).
    pub freq: u64,
    pub mean_loss: f64,
    /// Population standard deviation; exactly 0 when `freq == 1`.
    pub std_loss: f64,
}

/// Per-token statistics table, one entry per token.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StatsTable {
    entries: BTreeMap<String, TokenStats>,
}

impl StatsTable {
    pub fn get(&self, token: &str) -> Option<&TokenStats> {
        self.entries.get(token)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.entries.contains_key(token)
    }

    /// Entries in lexicographic token order.
    pub fn iter(&self) -> impl Iterator<Item = &TokenStats> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sum of `freq` over all tokens; equals the number of aggregated records.
    pub fn total_freq(&self) -> u64 {
        self.entries.values().map(|s| s.freq).sum()
    }

    fn insert(&mut self, stats: TokenStats) {
        self.entries.insert(stats.token.clone(), stats);
    }
}

/// Compensated (Kahan) summation.
fn kahan_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut compensation = 0.0;
    for value in values {
        let y = value - compensation;
        let t = sum + y;
        compensation = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Aggregate loss records into per-token statistics.
///
/// Each token's losses are summed with compensated summation in a canonical
/// (sorted) order, so the result is identical under any permutation of the
/// input records and under any partition-and-merge evaluation.
pub fn aggregate(records: &[TokenLossRecord]) -> Result<StatsTable> {
    if records.is_empty() {
        return Err(Error::empty_input("no loss records to aggregate"));
    }
    let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (index, record) in records.iter().enumerate() {
        if !record.loss.is_finite() || record.loss < 0.0 {
            return Err(Error::InvalidLoss {
                index,
                sentence_id: record.sentence_id,
                position: record.position,
                token: record.token.clone(),
                loss: record.loss,
            });
        }
        groups.entry(&record.token).or_default().push(record.loss);
    }
    let mut table = StatsTable::default();
    for (token, mut losses) in groups {
        losses.sort_by(f64::total_cmp);
        let freq = losses.len() as u64;
        let mean = kahan_sum(losses.iter().copied()) / freq as f64;
        let m2 = kahan_sum(losses.iter().map(|l| (l - mean) * (l - mean)));
        let std = (m2 / freq as f64).sqrt();
        table.insert(TokenStats {
            token: token.to_string(),
            freq,
            mean_loss: mean,
            std_loss: std,
        });
    }
    Ok(table)
}

/// Mean-loss changes between a base table and a retrained table.
///
/// Tokens absent from either side are listed separately rather than being
/// given a fabricated delta of zero; vocabulary mismatch is signal.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StatsDiff {
    /// `retrained.mean_loss - base.mean_loss` for tokens present in both.
    pub delta: BTreeMap<String, f64>,
    /// Tokens present in base only.
    pub missing_in_retrained: Vec<String>,
    /// Tokens present in retrained only.
    pub missing_in_base: Vec<String>,
}

pub fn diff_stats(base: &StatsTable, retrained: &StatsTable) -> StatsDiff {
    let mut diff = StatsDiff::default();
    for stats in base.iter() {
        match retrained.get(&stats.token) {
            Some(other) => {
                diff.delta
                    .insert(stats.token.clone(), other.mean_loss - stats.mean_loss);
            }
            None => diff.missing_in_retrained.push(stats.token.clone()),
        }
    }
    for stats in retrained.iter() {
        if !base.contains(&stats.token) {
            diff.missing_in_base.push(stats.token.clone());
        }
    }
    diff
}

/// Row order for [`loss_report`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportOrder {
    /// Descending mean loss, ties broken by lexicographic token order.
    MeanLossDesc,
    /// Ascending frequency, ties broken by lexicographic token order.
    FreqAsc,
}

/// Stable, totally ordered report rows.
pub fn loss_report(stats: &StatsTable, order: ReportOrder) -> Vec<&TokenStats> {
    let mut rows: Vec<&TokenStats> = stats.iter().collect();
    match order {
        ReportOrder::MeanLossDesc => rows.sort_by(|a, b| {
            b.mean_loss
                .total_cmp(&a.mean_loss)
                .then_with(|| a.token.cmp(&b.token))
        }),
        ReportOrder::FreqAsc => {
            rows.sort_by(|a, b| a.freq.cmp(&b.freq).then_with(|| a.token.cmp(&b.token)))
        }
    }
    rows
}

pub fn write_loss_records<W: Write>(mut writer: W, records: &[TokenLossRecord]) -> std::io::Result<()> {
    writeln!(writer, "{LOSS_FILE_HEADER}")?;
    for r in records {
        writeln!(writer, "{}\t{}\t{}\t{}", r.sentence_id, r.position, r.token, r.loss)?;
    }
    Ok(())
}

pub fn read_loss_records<R: BufRead>(reader: R) -> Result<Vec<TokenLossRecord>> {
    let mut lines = reader.lines().enumerate();
    match lines.next() {
        Some((_, Ok(header))) if header == LOSS_FILE_HEADER => {}
        Some((_, Ok(header))) => {
            return Err(Error::RecordFormat {
                line: 1,
                message: format!("expected header {LOSS_FILE_HEADER:?}, found {header:?}"),
            })
        }
        Some((_, Err(e))) => {
            return Err(Error::RecordFormat {
                line: 1,
                message: e.to_string(),
            })
        }
        None => {
            return Err(Error::RecordFormat {
                line: 1,
                message: format!("empty file, expected header {LOSS_FILE_HEADER:?}"),
            })
        }
    }
    let mut records = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(|e| Error::RecordFormat {
            line: i + 1,
            message: e.to_string(),
        })?;
        let fail = |message: String| Error::RecordFormat {
            line: i + 1,
            message,
        };
        let columns: Vec<&str> = line.split('\t').collect();
        if columns.len() != 4 {
            return Err(fail(format!("expected 4 columns, found {}", columns.len())));
        }
        let sentence_id: usize = columns[0]
            .parse()
            .map_err(|_| fail(format!("bad sentence id {:?}", columns[0])))?;
        let position: usize = columns[1]
            .parse()
            .map_err(|_| fail(format!("bad position {:?}", columns[1])))?;
        let token = columns[2];
        if token.is_empty() || token.chars().any(char::is_whitespace) {
            return Err(fail(format!("bad token {token:?}")));
        }
        let loss: f64 = columns[3]
            .parse()
            .map_err(|_| fail(format!("bad loss {:?}", columns[3])))?;
        if !loss.is_finite() || loss < 0.0 {
            return Err(fail(format!("loss {loss} is negative or not finite")));
        }
        records.push(TokenLossRecord::new(sentence_id, position, token, loss));
    }
    Ok(records)
}

pub fn load_loss_file(path: impl AsRef<Path>) -> Result<Vec<TokenLossRecord>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_loss_records(bytes.as_slice())
}

pub fn save_loss_file(path: impl AsRef<Path>, records: &[TokenLossRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    write_loss_records(&mut out, records).expect("writing to Vec cannot fail");
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

const REPORT_HEADER: &str = "token\tfreq\tmean_loss\tstd_loss";

/// Write report rows as TSV. The emitted file re-parses to an identical
/// table via [`read_stats_report`]; floats use Rust's shortest round-trip
/// formatting.
pub fn write_stats_report<W: Write>(mut writer: W, rows: &[&TokenStats]) -> std::io::Result<()> {
    writeln!(writer, "{REPORT_HEADER}")?;
    for row in rows {
        writeln!(
            writer,
            "{}\t{}\t{}\t{}",
            row.token, row.freq, row.mean_loss, row.std_loss
        )?;
    }
    Ok(())
}

pub fn read_stats_report<R: BufRead>(reader: R) -> Result<StatsTable> {
    let mut lines = reader.lines().enumerate();
    match lines.next() {
        Some((_, Ok(header))) if header == REPORT_HEADER => {}
        _ => {
            return Err(Error::RecordFormat {
                line: 1,
                message: format!("expected header {REPORT_HEADER:?}"),
            })
        }
    }
    let mut table = StatsTable::default();
    for (i, line) in lines {
        let line = line.map_err(|e| Error::RecordFormat {
            line: i + 1,
            message: e.to_string(),
        })?;
        let fail = |message: String| Error::RecordFormat {
            line: i + 1,
            message,
        };
        let columns: Vec<&str> = line.split('\t').collect();
        if columns.len() != 4 {
            return Err(fail(format!("expected 4 columns, found {}", columns.len())));
        }
        let token = columns[0].to_string();
        if table.contains(&token) {
            return Err(fail(format!("duplicate token {token:?}")));
        }
        let freq: u64 = columns[1]
            .parse()
            .map_err(|_| fail(format!("bad frequency {:?}", columns[1])))?;
        let mean_loss: f64 = columns[2]
            .parse()
            .map_err(|_| fail(format!("bad mean loss {:?}", columns[2])))?;
        let std_loss: f64 = columns[3]
            .parse()
            .map_err(|_| fail(format!("bad std loss {:?}", columns[3])))?;
        table.insert(TokenStats {
            token,
            freq,
            mean_loss,
            std_loss,
        });
    }
    Ok(table)
}

pub fn load_stats_file(path: impl AsRef<Path>) -> Result<StatsTable> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_stats_report(bytes.as_slice())
}

pub fn save_stats_file(path: impl AsRef<Path>, stats: &StatsTable, order: ReportOrder) -> Result<()> {
    let path = path.as_ref();
    let rows = loss_report(stats, order);
    let mut out = Vec::new();
    write_stats_report(&mut out, &rows).expect("writing to Vec cannot fail");
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(token: &str, loss: f64) -> TokenLossRecord {
        TokenLossRecord::new(0, 0, token, loss)
    }

    #[test]
    fn aggregate_two_point_mean_and_population_std() {
        let table = aggregate(&[record("x", 1.0), record("x", 3.0)]).unwrap();
        let stats = table.get("x").unwrap();
        assert_eq!(stats.freq, 2);
        assert_eq!(stats.mean_loss, 2.0);
        assert_eq!(stats.std_loss, 1.0);
    }

    #[test]
    fn aggregate_single_zero_loss() {
        let table = aggregate(&[record("x", 0.0)]).unwrap();
        let stats = table.get("x").unwrap();
        assert_eq!(stats.freq, 1);
        assert_eq!(stats.mean_loss, 0.0);
        assert_eq!(stats.std_loss, 0.0);
    }

    #[test]
    fn aggregate_rejects_negative_loss() {
        let err = aggregate(&[record("x", 1.0), record("y", -0.5)]).unwrap_err();
        match err {
            Error::InvalidLoss { index, token, .. } => {
                assert_eq!(index, 1);
                assert_eq!(token, "y");
            }
            other => panic!("expected InvalidLoss, got {other:?}"),
        }
    }

    #[test]
    fn aggregate_rejects_nan_and_infinity() {
        assert!(aggregate(&[record("x", f64::NAN)]).is_err());
        assert!(aggregate(&[record("x", f64::INFINITY)]).is_err());
    }

    #[test]
    fn aggregate_rejects_empty_input() {
        assert!(matches!(aggregate(&[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn aggregate_matches_brute_force_on_random_records() {
        // Independent second-pass oracle: plain two-pass mean/std per token.
        let mut records = Vec::new();
        let mut state = 0x2545f4914f6cdd1d_u64;
        for i in 0..500 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let token = format!("t{}", state % 37);
            let loss = (state >> 11) as f64 / (1u64 << 53) as f64 * 20.0;
            records.push(TokenLossRecord::new(i, 0, token, loss));
        }
        let table = aggregate(&records).unwrap();
        let mut by_token: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for r in &records {
            by_token.entry(&r.token).or_default().push(r.loss);
        }
        assert_eq!(table.len(), by_token.len());
        for (token, losses) in by_token {
            let stats = table.get(token).unwrap();
            let mean: f64 = losses.iter().sum::<f64>() / losses.len() as f64;
            let var: f64 =
                losses.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / losses.len() as f64;
            assert_eq!(stats.freq, losses.len() as u64);
            assert!((stats.mean_loss - mean).abs() < 1e-9);
            assert!((stats.std_loss - var.sqrt()).abs() < 1e-9);
        }
    }

    #[test]
    fn diff_reports_delta_and_missing_tokens() {
        let base = aggregate(&[record("x", 5.0), record("gone", 1.0)]).unwrap();
        let retrained = aggregate(&[record("x", 4.2), record("new", 2.0)]).unwrap();
        let diff = diff_stats(&base, &retrained);
        assert!((diff.delta["x"] - (-0.8)).abs() < 1e-12);
        assert!(!diff.delta.contains_key("gone"));
        assert_eq!(diff.missing_in_retrained, ["gone"]);
        assert_eq!(diff.missing_in_base, ["new"]);
    }

    #[test]
    fn report_orders_by_mean_desc() {
        let table = aggregate(&[record("a", 1.0), record("b", 3.0)]).unwrap();
        let rows = loss_report(&table, ReportOrder::MeanLossDesc);
        let tokens: Vec<&str> = rows.iter().map(|r| r.token.as_str()).collect();
        assert_eq!(tokens, ["b", "a"]);
    }

    #[test]
    fn report_breaks_ties_lexicographically() {
        let table = aggregate(&[record("b", 2.0), record("a", 2.0), record("c", 2.0)]).unwrap();
        let rows = loss_report(&table, ReportOrder::MeanLossDesc);
        let tokens: Vec<&str> = rows.iter().map(|r| r.token.as_str()).collect();
        assert_eq!(tokens, ["a", "b", "c"]);
        let rows = loss_report(&table, ReportOrder::FreqAsc);
        let tokens: Vec<&str> = rows.iter().map(|r| r.token.as_str()).collect();
        assert_eq!(tokens, ["a", "b", "c"]);
    }

    #[test]
    fn report_round_trips_through_tsv() {
        let table = aggregate(&[
            record("a", 1.5),
            record("a", 2.25),
            record("b", 0.2876820724517809),
        ])
        .unwrap();
        let rows = loss_report(&table, ReportOrder::FreqAsc);
        let mut out = Vec::new();
        write_stats_report(&mut out, &rows).unwrap();
        let reparsed = read_stats_report(out.as_slice()).unwrap();
        assert_eq!(reparsed, table);
    }

    #[test]
    fn loss_file_round_trips_and_validates_header() {
        let records = vec![
            TokenLossRecord::new(3, 7, "Bahr", 7.2),
            TokenLossRecord::new(0, 1, "x", 0.2876820724517809),
        ];
        let mut out = Vec::new();
        write_loss_records(&mut out, &records).unwrap();
        assert!(out.starts_with(LOSS_FILE_HEADER.as_bytes()));
        let reparsed = read_loss_records(out.as_slice()).unwrap();
        assert_eq!(reparsed, records);

        let bad = b"#wrong-header\n0\t0\ta\t1.0\n";
        assert!(matches!(
            read_loss_records(&bad[..]),
            Err(Error::RecordFormat { line: 1, .. })
        ));
        let bad_loss = format!("{LOSS_FILE_HEADER}\n0\t0\ta\t-1.0\n");
        assert!(read_loss_records(bad_loss.as_bytes()).is_err());
    }

    prop_compose! {
        fn arb_records()(raw in prop::collection::vec(
            (0usize..50, 0usize..30, 0u8..12, 0.0f64..20.0), 1..300))
            -> Vec<TokenLossRecord> {
            raw.into_iter()
                .map(|(sid, pos, tok, loss)| TokenLossRecord::new(sid, pos, format!("t{tok}"), loss))
                .collect()
        }
    }

    proptest! {
        #[test]
        fn aggregate_is_permutation_invariant(records in arb_records(), seed in 0u64..1000) {
            let table = aggregate(&records).unwrap();
            let mut shuffled = records.clone();
            // Deterministic shuffle driven by the proptest seed input.
            let mut state = seed.wrapping_add(0x9e3779b97f4a7c15);
            for i in (1..shuffled.len()).rev() {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let j = (state >> 33) as usize % (i + 1);
                shuffled.swap(i, j);
            }
            prop_assert_eq!(aggregate(&shuffled).unwrap(), table);
        }

        #[test]
        fn aggregate_total_freq_equals_record_count(records in arb_records()) {
            let table = aggregate(&records).unwrap();
            prop_assert_eq!(table.total_freq(), records.len() as u64);
        }

        #[test]
        fn aggregate_mean_bounded_by_extremes(records in arb_records()) {
            let table = aggregate(&records).unwrap();
            for stats in table.iter() {
                let losses: Vec<f64> = records
                    .iter()
                    .filter(|r| r.token == stats.token)
                    .map(|r| r.loss)
                    .collect();
                let min = losses.iter().cloned().fold(f64::INFINITY, f64::min);
                let max = losses.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(min - 1e-12 <= stats.mean_loss && stats.mean_loss <= max + 1e-12);
            }
        }

        #[test]
        fn loss_records_round_trip(records in arb_records()) {
            let mut out = Vec::new();
            write_loss_records(&mut out, &records).unwrap();
            prop_assert_eq!(read_loss_records(out.as_slice()).unwrap(), records);
        }
    }
}
