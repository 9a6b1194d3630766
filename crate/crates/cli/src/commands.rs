//! Subcommand implementations: load inputs, call into the core library,
//! write outputs plus a run manifest, route warnings to stderr.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use btsampler_core::corpus::{Corpus, SubwordConvention};
use btsampler_core::difficulty::{
    by_frequency, by_mean_and_std, by_mean_loss, difficult_occurrences, DifficultySet,
};
use btsampler_core::loss_stats::{
    aggregate, diff_stats, load_loss_file, load_stats_file, save_loss_file, save_stats_file,
    ReportOrder, StatsDiff, StatsTable,
};
use btsampler_core::ngram::{score_corpus, train_lm};
use btsampler_core::pipeline::{mix as mix_bitexts, Bitext, MixRatio, RunManifest};
use btsampler_core::sampler::{
    context_sampling, diff_sampling, random_sampling, ratio_sampling, ContextSpec, SampleSet,
    SimilaritySpec,
};
use btsampler_core::{EmbeddingTable, Warning};

use crate::config::Config;
use crate::{usage, AlgoArg, CriterionArg, CtxArg, OrderByArg, SampleArgs, SimArg};

fn manifest_for(config: &Config, command: &str) -> RunManifest {
    let mut manifest = RunManifest::new(
        "btsampler",
        env!("CARGO_PKG_VERSION"),
        command,
        config.sampling.seed,
    );
    for line in config.dump().lines() {
        if let Some((key, value)) = line.split_once('=') {
            manifest.set_config(key, value);
        }
    }
    manifest
}

fn manifest_path(out: &Path) -> PathBuf {
    PathBuf::from(format!("{}.manifest.json", out.display()))
}

fn report_warnings(warnings: &[Warning]) {
    for warning in warnings {
        eprintln!("warning: {warning}");
    }
}

pub fn score(
    config: &Config,
    input: &Path,
    train: Option<&Path>,
    order: Option<usize>,
    smoothing: Option<f64>,
    out: &Path,
) -> Result<()> {
    let order = order.unwrap_or(config.order);
    let smoothing = smoothing.unwrap_or(config.smoothing);
    let input_corpus = Corpus::load(input)?;
    let lm = match train {
        Some(path) => train_lm(&Corpus::load(path)?, order, smoothing)?,
        None => train_lm(&input_corpus, order, smoothing)?,
    };
    let records = score_corpus(&lm, &input_corpus);
    save_loss_file(out, &records)?;

    let mut manifest = manifest_for(config, "score");
    manifest.set_config("order", order);
    manifest.set_config("smoothing", smoothing);
    manifest.add_input(input)?;
    if let Some(path) = train {
        manifest.add_input(path)?;
    }
    manifest.add_output(out);
    manifest.save(manifest_path(out))?;
    Ok(())
}

pub fn stats(config: &Config, records: &Path, order_by: OrderByArg, out: &Path) -> Result<()> {
    let records_data = load_loss_file(records)?;
    let table = aggregate(&records_data)?;
    let order = match order_by {
        OrderByArg::MeanLossDesc => ReportOrder::MeanLossDesc,
        OrderByArg::FreqAsc => ReportOrder::FreqAsc,
    };
    save_stats_file(out, &table, order)?;

    let mut manifest = manifest_for(config, "stats");
    manifest.set_config("order_by", format!("{order_by:?}"));
    manifest.add_input(records)?;
    manifest.add_output(out);
    manifest.save(manifest_path(out))?;
    Ok(())
}

pub fn diff(config: &Config, base: &Path, retrained: &Path, out: &Path) -> Result<()> {
    let base_table = load_stats_file(base)?;
    let retrained_table = load_stats_file(retrained)?;
    let diff = diff_stats(&base_table, &retrained_table);
    write_diff_report(out, &diff, &base_table, &retrained_table)?;

    let mut manifest = manifest_for(config, "diff");
    manifest.add_input(base)?;
    manifest.add_input(retrained)?;
    manifest.add_output(out);
    manifest.save(manifest_path(out))?;
    Ok(())
}

/// Diff TSV: one row per token with a status column; missing sides stay
/// empty rather than being reported as a zero delta.
fn write_diff_report(
    out: &Path,
    diff: &StatsDiff,
    base: &StatsTable,
    retrained: &StatsTable,
) -> Result<()> {
    let mut text = String::from("token\tstatus\tbase_mean\tretrained_mean\tdelta\n");
    for (token, delta) in &diff.delta {
        let base_mean = base.get(token).expect("token in both tables").mean_loss;
        let retrained_mean = retrained.get(token).expect("token in both tables").mean_loss;
        text.push_str(&format!(
            "{token}\tboth\t{base_mean}\t{retrained_mean}\t{delta}\n"
        ));
    }
    for token in &diff.missing_in_retrained {
        let base_mean = base.get(token).expect("token in base").mean_loss;
        text.push_str(&format!("{token}\tbase_only\t{base_mean}\t\t\n"));
    }
    for token in &diff.missing_in_base {
        let retrained_mean = retrained.get(token).expect("token in retrained").mean_loss;
        text.push_str(&format!("{token}\tretrained_only\t\t{retrained_mean}\t\n"));
    }
    fs::write(out, text).with_context(|| format!("writing {}", out.display()))
}

fn resolve_criterion(
    config: &Config,
    criterion: CriterionArg,
    eta: Option<u64>,
    mu: Option<f64>,
    rho: Option<f64>,
) -> (String, DifficultySetBuilder) {
    let eta = eta.unwrap_or(config.sampling.eta);
    let mu = mu.unwrap_or(config.sampling.mu);
    let rho = rho.unwrap_or(config.sampling.rho);
    match criterion {
        CriterionArg::Freq => (
            format!("freq eta={eta}"),
            Box::new(move |stats| by_frequency(stats, eta)),
        ),
        CriterionArg::MeanLoss => (
            format!("mean_loss mu={mu}"),
            Box::new(move |stats| by_mean_loss(stats, mu)),
        ),
        CriterionArg::MeanStd => (
            format!("mean_std mu={mu} rho={rho}"),
            Box::new(move |stats| by_mean_and_std(stats, mu, rho)),
        ),
    }
}

type DifficultySetBuilder = Box<dyn Fn(&StatsTable) -> DifficultySet>;

pub fn difficulty(
    config: &Config,
    stats: &Path,
    criterion: CriterionArg,
    eta: Option<u64>,
    mu: Option<f64>,
    rho: Option<f64>,
    out: &Path,
) -> Result<()> {
    let table = load_stats_file(stats)?;
    let (description, build) = resolve_criterion(config, criterion, eta, mu, rho);
    let set = build(&table);
    set.save(out)?;

    let mut manifest = manifest_for(config, "difficulty");
    manifest.set_config("criterion", description);
    manifest.add_input(stats)?;
    manifest.add_output(out);
    manifest.save(manifest_path(out))?;
    Ok(())
}

pub fn sample(config: &Config, args: SampleArgs) -> Result<()> {
    let corpus = Corpus::load(&args.corpus)?;
    let seed = config.sampling.seed;
    let mut manifest = manifest_for(config, "sample");
    manifest.add_input(&args.corpus)?;

    let resolve_n = |fallback: Option<usize>| -> Result<usize> {
        args.n
            .or(config.sampling.n)
            .or(fallback)
            .ok_or_else(|| usage("specify --n: the sample size cannot be inferred"))
    };

    let sample: SampleSet = match args.algo {
        AlgoArg::Random => {
            let n = resolve_n(None)?;
            manifest.set_config("algo", "random");
            manifest.set_config("n", n);
            random_sampling(&corpus, n, seed)?
        }
        AlgoArg::Diffsampling => {
            let n = resolve_n(None)?;
            let set = if let Some(path) = &args.difficulty {
                manifest.add_input(path)?;
                DifficultySet::load(path)?
            } else if let Some(stats_path) = &args.stats {
                let criterion = args
                    .criterion
                    .ok_or_else(|| usage("--stats requires --criterion"))?;
                let table = load_stats_file(stats_path)?;
                let (description, build) =
                    resolve_criterion(config, criterion, args.eta, args.mu, args.rho);
                manifest.set_config("criterion", description);
                manifest.add_input(stats_path)?;
                build(&table)
            } else {
                return Err(usage("diffsampling requires --difficulty or --stats"));
            };
            manifest.set_config("algo", "diffsampling");
            manifest.set_config("n", n);
            diff_sampling(&set, &corpus, n, seed)?
        }
        AlgoArg::Ratio => {
            let n = resolve_n(None)?;
            let records_path = args
                .records
                .as_ref()
                .ok_or_else(|| usage("ratio sampling requires --records"))?;
            let records = load_loss_file(records_path)?;
            let theta = args.theta.unwrap_or_else(|| config.sampling.theta());
            let occurrences = difficult_occurrences(&records, theta);
            manifest.set_config("algo", "ratio");
            manifest.set_config("theta", theta);
            manifest.set_config("n", n);
            manifest.add_input(records_path)?;
            ratio_sampling(&occurrences, &corpus, n, seed)?
        }
        AlgoArg::Context => {
            let records_path = args
                .records
                .as_ref()
                .ok_or_else(|| usage("context sampling requires --records"))?;
            let bitext_path = args
                .bitext_target
                .as_ref()
                .ok_or_else(|| usage("context sampling requires --bitext-target"))?;
            let records = load_loss_file(records_path)?;
            let bitext_target = Corpus::load(bitext_path)?;
            let n = resolve_n(Some(bitext_target.len()))?;
            let theta = args.theta.unwrap_or_else(|| config.sampling.theta());
            let occurrences = difficult_occurrences(&records, theta);
            let width = args.w.unwrap_or(config.sampling.w);
            let threshold = args.s.unwrap_or(config.sampling.s);
            let marker = args.marker.clone().unwrap_or_else(|| config.marker.clone());
            let ctx = match args.ctx.unwrap_or(CtxArg::Window) {
                CtxArg::Window => ContextSpec::Window { width },
                CtxArg::Subword => ContextSpec::Subword(SubwordConvention::new(marker.clone())?),
                CtxArg::Sentence => ContextSpec::Sentence,
            };
            let embeddings = match args.sim.unwrap_or(SimArg::Match) {
                SimArg::Match => None,
                SimArg::Emb => {
                    let path = args
                        .embeddings
                        .as_ref()
                        .ok_or_else(|| usage("--sim emb requires --embeddings"))?;
                    manifest.add_input(path)?;
                    Some(EmbeddingTable::load(path)?)
                }
            };
            let sim = match &embeddings {
                Some(table) => SimilaritySpec::Embedding(table),
                None => SimilaritySpec::Match,
            };
            manifest.set_config("algo", "context");
            manifest.set_config("ctx", format!("{:?}", args.ctx.unwrap_or(CtxArg::Window)));
            manifest.set_config("sim", format!("{:?}", args.sim.unwrap_or(SimArg::Match)));
            manifest.set_config("w", width);
            manifest.set_config("s", threshold);
            manifest.set_config("theta", theta);
            manifest.set_config("n", n);
            manifest.add_input(records_path)?;
            manifest.add_input(bitext_path)?;
            context_sampling(
                &occurrences,
                &bitext_target,
                &corpus,
                &ctx,
                &sim,
                threshold,
                n,
                seed,
            )?
        }
    };

    report_warnings(sample.warnings());
    let sentences_path = PathBuf::from(format!("{}.txt", args.out.display()));
    let provenance_path = PathBuf::from(format!("{}.prov.tsv", args.out.display()));
    sample.save(&corpus, &sentences_path, &provenance_path)?;
    manifest.add_output(&sentences_path);
    manifest.add_output(&provenance_path);
    manifest.save(manifest_path(&args.out))?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn mix(
    config: &Config,
    real_source: &Path,
    real_target: &Path,
    syn_source: &Path,
    syn_target: &Path,
    ratio: &str,
    epoch: u64,
    out: &Path,
) -> Result<()> {
    let ratio = MixRatio::parse(ratio).map_err(|e| usage(e.to_string()))?;
    let real = Bitext::load(real_source, real_target)?;
    let synthetic = Bitext::load(syn_source, syn_target)?;
    let output = mix_bitexts(&real, &synthetic, ratio, config.sampling.seed, epoch)?;
    report_warnings(&output.warnings);

    let source_path = PathBuf::from(format!("{}.source", out.display()));
    let target_path = PathBuf::from(format!("{}.target", out.display()));
    output.bitext.save(&source_path, &target_path)?;

    let mut manifest = manifest_for(config, "mix");
    manifest.set_config("ratio", ratio);
    manifest.set_config("epoch", epoch);
    for path in [real_source, real_target, syn_source, syn_target] {
        manifest.add_input(path)?;
    }
    manifest.add_output(&source_path);
    manifest.add_output(&target_path);
    manifest.save(manifest_path(out))?;
    Ok(())
}
