//! Corpus mixing and run reproducibility.
//!
//! [`mix`] combines a real bitext with back-translated synthetic pairs at a
//! requested `real:syn` ratio: all real pairs are kept, the required number
//! of synthetic pairs is drawn without replacement, and the combined corpus
//! is shuffled deterministically. The shuffle for training epoch `e` is
//! derived from `(seed, e)` so every epoch order is reproducible.
//!
//! [`RunManifest`] snapshots everything needed to reproduce an output file
//! byte for byte: tool version, command, effective configuration, seed, and
//! SHA-256 digests of the input files.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{Corpus, Sentence};
use crate::error::{Error, Result, Warning};
use crate::sampler::{draw_distinct, sampling_rng};

/// Proportion of real to synthetic pairs, e.g. `1:4`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MixRatio {
    real_part: u64,
    syn_part: u64,
}

impl MixRatio {
    pub fn new(real_part: u64, syn_part: u64) -> Result<Self> {
        if real_part == 0 || syn_part == 0 {
            return Err(Error::invalid_argument(
                "mix ratio parts must both be at least 1",
            ));
        }
        Ok(MixRatio {
            real_part,
            syn_part,
        })
    }

    /// Parse the `R:S` notation, e.g. `1:4`.
    pub fn parse(text: &str) -> Result<Self> {
        let (real, syn) = text
            .split_once(':')
            .ok_or_else(|| Error::invalid_argument(format!("bad ratio {text:?}, expected R:S")))?;
        let real_part: u64 = real
            .trim()
            .parse()
            .map_err(|_| Error::invalid_argument(format!("bad ratio part {real:?}")))?;
        let syn_part: u64 = syn
            .trim()
            .parse()
            .map_err(|_| Error::invalid_argument(format!("bad ratio part {syn:?}")))?;
        MixRatio::new(real_part, syn_part)
    }

    pub fn real_part(&self) -> u64 {
        self.real_part
    }

    pub fn syn_part(&self) -> u64 {
        self.syn_part
    }

    /// Number of synthetic pairs required for `real_len` real pairs
    /// (rounded down when the ratio does not divide evenly).
    pub fn synthetic_for(&self, real_len: usize) -> usize {
        (real_len as u64 * self.syn_part / self.real_part) as usize
    }
}

impl fmt::Display for MixRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.real_part, self.syn_part)
    }
}

/// An aligned pair of corpora (source side, target side).
#[derive(Clone, Debug, PartialEq)]
pub struct Bitext {
    source: Corpus,
    target: Corpus,
}

impl Bitext {
    pub fn new(source: Corpus, target: Corpus) -> Result<Self> {
        if source.len() != target.len() {
            return Err(Error::MisalignedBitext {
                left: source.len(),
                right: target.len(),
            });
        }
        Ok(Bitext { source, target })
    }

    pub fn load(source_path: impl AsRef<Path>, target_path: impl AsRef<Path>) -> Result<Self> {
        Bitext::new(Corpus::load(source_path)?, Corpus::load(target_path)?)
    }

    pub fn source(&self) -> &Corpus {
        &self.source
    }

    pub fn target(&self) -> &Corpus {
        &self.target
    }

    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }

    pub fn save(
        &self,
        source_path: impl AsRef<Path>,
        target_path: impl AsRef<Path>,
    ) -> Result<()> {
        self.source.save(source_path)?;
        self.target.save(target_path)
    }
}

/// SplitMix64 finalizer; decorrelates nearby seeds.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Seed for the epoch-`epoch` shuffle derived from the run seed.
pub fn epoch_seed(seed: u64, epoch: u64) -> u64 {
    splitmix64(seed ^ splitmix64(epoch))
}

/// Shuffle in place with the generator for `(seed, epoch)`.
pub fn shuffle_for_epoch<T>(items: &mut [T], seed: u64, epoch: u64) {
    let mut rng = sampling_rng(epoch_seed(seed, epoch));
    items.shuffle(&mut rng);
}

/// Result of [`mix`]: the combined bitext plus diagnostics.
#[derive(Clone, Debug)]
pub struct MixOutput {
    pub bitext: Bitext,
    pub warnings: Vec<Warning>,
    /// Ids of the synthetic pairs that were selected, in draw order.
    pub synthetic_ids: Vec<usize>,
}

/// Combine all real pairs with `ratio.synthetic_for(|real|)` synthetic pairs
/// drawn without replacement, then shuffle with the epoch-`epoch` order.
/// When the synthetic bitext is too small, all of it is used and a warning
/// is emitted.
pub fn mix(
    real: &Bitext,
    synthetic: &Bitext,
    ratio: MixRatio,
    seed: u64,
    epoch: u64,
) -> Result<MixOutput> {
    if real.is_empty() {
        return Err(Error::empty_input("real bitext is empty"));
    }
    let want = ratio.synthetic_for(real.len());
    let mut warnings = Vec::new();
    let synthetic_ids = if want > synthetic.len() {
        warnings.push(Warning::SyntheticShort {
            requested: want,
            available: synthetic.len(),
        });
        if synthetic.is_empty() {
            Vec::new()
        } else {
            let mut rng = sampling_rng(seed);
            draw_distinct(&mut rng, synthetic.len(), synthetic.len(), synthetic.len(), |_| true)
        }
    } else if want == 0 {
        Vec::new()
    } else {
        let mut rng = sampling_rng(seed);
        draw_distinct(&mut rng, synthetic.len(), want, synthetic.len(), |_| true)
    };

    // Pair order: real pairs first, then the drawn synthetic pairs, then one
    // deterministic epoch shuffle over the whole set.
    let mut pairs: Vec<(&Sentence, &Sentence)> = Vec::with_capacity(real.len() + synthetic_ids.len());
    for i in 0..real.len() {
        pairs.push((&real.source().sentences()[i], &real.target().sentences()[i]));
    }
    for &i in &synthetic_ids {
        pairs.push((
            &synthetic.source().sentences()[i],
            &synthetic.target().sentences()[i],
        ));
    }
    shuffle_for_epoch(&mut pairs, seed, epoch);

    let source = Corpus::from_token_lists(pairs.iter().map(|(s, _)| s.tokens().to_vec()))?;
    let target = Corpus::from_token_lists(pairs.iter().map(|(_, t)| t.tokens().to_vec()))?;
    Ok(MixOutput {
        bitext: Bitext::new(source, target)?,
        warnings,
        synthetic_ids,
    })
}

/// Everything needed to reproduce a run's outputs byte-exactly: re-running
/// the recorded command with the recorded configuration, seed, and the input
/// files matching the recorded digests yields identical output files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    /// Effective configuration after defaults, config file, and flags.
    pub config: BTreeMap<String, String>,
    /// Input path → SHA-256 digest (hex).
    pub inputs: BTreeMap<String, String>,
    /// Paths written by the run.
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(tool: impl Into<String>, version: impl Into<String>, command: impl Into<String>, seed: u64) -> Self {
        RunManifest {
            tool: tool.into(),
            version: version.into(),
            command: command.into(),
            seed,
            config: BTreeMap::new(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    pub fn set_config(&mut self, key: impl Into<String>, value: impl ToString) {
        self.config.insert(key.into(), value.to_string());
    }

    pub fn add_input(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let digest = file_digest(path)?;
        self.inputs.insert(path.display().to_string(), digest);
        Ok(())
    }

    pub fn add_output(&mut self, path: impl AsRef<Path>) {
        self.outputs.push(path.as_ref().display().to_string());
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut json = self.to_json();
        json.push('\n');
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_slice(&bytes).map_err(|e| Error::RecordFormat {
            line: 1,
            message: format!("bad manifest: {e}"),
        })
    }
}

/// SHA-256 digest of a file, lowercase hex.
pub fn file_digest(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    Ok(hex)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn numbered_bitext(prefix: &str, len: usize) -> Bitext {
        let source =
            Corpus::from_token_lists((0..len).map(|i| vec![format!("{prefix}src{i}")])).unwrap();
        let target =
            Corpus::from_token_lists((0..len).map(|i| vec![format!("{prefix}tgt{i}")])).unwrap();
        Bitext::new(source, target).unwrap()
    }

    #[test]
    fn ratio_parses_and_rejects() {
        let ratio = MixRatio::parse("1:4").unwrap();
        assert_eq!(ratio.real_part(), 1);
        assert_eq!(ratio.syn_part(), 4);
        assert_eq!(ratio.to_string(), "1:4");
        assert!(MixRatio::parse("0:4").is_err());
        assert!(MixRatio::parse("4").is_err());
        assert!(MixRatio::parse("a:b").is_err());
    }

    #[test]
    fn mix_one_to_four_produces_five_hundred_pairs() {
        let real = numbered_bitext("r", 100);
        let synthetic = numbered_bitext("s", 600);
        let output = mix(&real, &synthetic, MixRatio::new(1, 4).unwrap(), 11, 0).unwrap();
        assert_eq!(output.bitext.len(), 500);
        assert!(output.warnings.is_empty());
        // All real pairs present.
        let sources: Vec<String> = output
            .bitext
            .source()
            .sentences()
            .iter()
            .map(|s| s.text())
            .collect();
        for i in 0..100 {
            assert!(sources.contains(&format!("rsrc{i}")));
        }
    }

    #[test]
    fn mix_one_to_one_doubles_real() {
        let real = numbered_bitext("r", 100);
        let synthetic = numbered_bitext("s", 150);
        let output = mix(&real, &synthetic, MixRatio::new(1, 1).unwrap(), 3, 0).unwrap();
        assert_eq!(output.bitext.len(), 200);
    }

    #[test]
    fn mix_keeps_pairs_aligned() {
        let real = numbered_bitext("r", 20);
        let synthetic = numbered_bitext("s", 40);
        let output = mix(&real, &synthetic, MixRatio::new(1, 1).unwrap(), 5, 0).unwrap();
        for (src, tgt) in output
            .bitext
            .source()
            .sentences()
            .iter()
            .zip(output.bitext.target().sentences())
        {
            let src_text = src.text();
            let tgt_text = tgt.text();
            assert_eq!(
                src_text.replace("src", "tgt"),
                tgt_text,
                "pair desynchronized: {src_text} / {tgt_text}"
            );
        }
    }

    #[test]
    fn mix_is_deterministic_and_seed_sensitive() {
        let real = numbered_bitext("r", 30);
        let synthetic = numbered_bitext("s", 90);
        let ratio = MixRatio::new(1, 2).unwrap();
        let a = mix(&real, &synthetic, ratio, 7, 0).unwrap();
        let b = mix(&real, &synthetic, ratio, 7, 0).unwrap();
        assert_eq!(a.bitext, b.bitext);
        let c = mix(&real, &synthetic, ratio, 8, 0).unwrap();
        assert_ne!(a.bitext, c.bitext);
    }

    #[test]
    fn mix_epochs_reorder_the_same_pairs() {
        let real = numbered_bitext("r", 30);
        let synthetic = numbered_bitext("s", 30);
        let ratio = MixRatio::new(1, 1).unwrap();
        let e0 = mix(&real, &synthetic, ratio, 7, 0).unwrap();
        let e1 = mix(&real, &synthetic, ratio, 7, 1).unwrap();
        assert_ne!(e0.bitext, e1.bitext);
        let mut a: Vec<String> = e0.bitext.source().sentences().iter().map(|s| s.text()).collect();
        let mut b: Vec<String> = e1.bitext.source().sentences().iter().map(|s| s.text()).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b, "epochs must reorder, not reselect");
    }

    #[test]
    fn mix_short_synthetic_warns_and_uses_all() {
        let real = numbered_bitext("r", 10);
        let synthetic = numbered_bitext("s", 3);
        let output = mix(&real, &synthetic, MixRatio::new(1, 1).unwrap(), 2, 0).unwrap();
        assert_eq!(output.bitext.len(), 13);
        assert_eq!(
            output.warnings,
            [Warning::SyntheticShort {
                requested: 10,
                available: 3
            }]
        );
    }

    #[test]
    fn bitext_rejects_misaligned_sides() {
        let source = Corpus::from_token_lists([vec!["a"], vec!["b"]]).unwrap();
        let target = Corpus::from_token_lists([vec!["x"]]).unwrap();
        assert!(matches!(
            Bitext::new(source, target),
            Err(Error::MisalignedBitext { left: 2, right: 1 })
        ));
    }

    #[test]
    fn manifest_round_trips_through_json() {
        let mut manifest = RunManifest::new("btsampler", "0.1.0", "sample", 7);
        manifest.set_config("mu", 5.0);
        manifest.set_config("algo", "diffsampling");
        manifest.add_output("out.txt");
        let file = tempfile::NamedTempFile::new().unwrap();
        manifest.save(file.path()).unwrap();
        let reloaded = RunManifest::load(file.path()).unwrap();
        assert_eq!(reloaded, manifest);
    }

    #[test]
    fn file_digest_is_stable_sha256() {
        let file = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(file.path(), b"abc").unwrap();
        assert_eq!(
            file_digest(file.path()).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn epoch_seeds_differ() {
        let seeds: Vec<u64> = (0..10).map(|e| epoch_seed(42, e)).collect();
        let mut unique = seeds.clone();
        unique.sort_unstable();
        unique.dedup();
        assert_eq!(unique.len(), seeds.len());
    }
}
