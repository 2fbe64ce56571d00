use std::fs;
use std::io;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use spoilkit_core::cleaner::{clean_corpus, RuleSet};
use spoilkit_core::corpus::{ingest_dump, Corpus, DumpFormat, IngestOptions, Source};
use spoilkit_core::dataset::{
    export_abstractive, export_extractive, predictions_template, split_corpus, tag_title, DataSplit, ExportOptions,
    Part,
};
use spoilkit_core::evalrun::{evaluate_all, references_for, render_report, EvalError, EvalReport, PredictionSet, ReportFormat};
use spoilkit_core::jsonl;
use spoilkit_core::metrics::{EmbeddingProvider, MetricError, MetricRegistry, ProviderError, ProviderRegistry};
use spoilkit_core::review::{apply_decisions, read_log, ReviewError};
use spoilkit_core::spanlab::{label_all, LabelSummary, LabeledExample};
use spoilkit_review_server::ServerError;

use crate::config::PipelineConfig;
use crate::{Cli, Command, ExportFormat, InputFormat, ReportFormatArg};

pub const EXIT_VALIDATION: u8 = 1;
pub const EXIT_IO: u8 = 2;

const DEFAULT_SEED: u64 = 42;
const DEFAULT_BIND: &str = "127.0.0.1:8080";

/// 2 for anything that failed on the file system or network, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        let io_like = cause.is::<io::Error>()
            || matches!(cause.downcast_ref::<ProviderError>(), Some(ProviderError::Http(_)))
            || matches!(
                cause.downcast_ref::<EvalError>(),
                Some(EvalError::Metric(MetricError::Provider(ProviderError::Http(_))))
            )
            || matches!(cause.downcast_ref::<MetricError>(), Some(MetricError::Provider(ProviderError::Http(_))))
            || matches!(cause.downcast_ref::<ReviewError>(), Some(ReviewError::Io { .. }))
            || matches!(cause.downcast_ref::<ServerError>(), Some(ServerError::Bind { .. } | ServerError::Io(_)));
        if io_like {
            return EXIT_IO;
        }
    }
    EXIT_VALIDATION
}

fn pick(flag: Option<PathBuf>, config: &Option<PathBuf>, default: &str) -> PathBuf {
    flag.or_else(|| config.clone()).unwrap_or_else(|| PathBuf::from(default))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("cannot create {}", parent.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

/// Refuses to overwrite any input file.
fn check_distinct(inputs: &[&Path], output: &Path) -> Result<()> {
    let Ok(out) = output.canonicalize() else {
        return Ok(());
    };
    for input in inputs {
        if input.canonicalize().ok().as_deref() == Some(out.as_path()) {
            bail!("output {} would overwrite an input file", output.display());
        }
    }
    Ok(())
}

fn read_labeled(path: &Path) -> Result<Vec<LabeledExample>> {
    jsonl::read_jsonl(path).with_context(|| format!("reading labeled examples {}", path.display()))
}

fn read_split(path: &Path) -> Result<DataSplit> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read split {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("malformed split file {}", path.display()))
}

fn parse_part(s: &str) -> Result<Part> {
    Ok(s.parse::<Part>()?)
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    match cli.command {
        Command::Ingest {
            inputs,
            format,
            split_on_delimiter,
            out,
            stats_out,
        } => {
            let out = pick(out, &cfg.paths.corpus, "corpus.jsonl");
            let options = IngestOptions { split_on_delimiter };
            let mut parts = Vec::new();
            let mut paths = Vec::new();
            for spec in &inputs {
                let (source, path) = spec
                    .split_once('=')
                    .ok_or_else(|| anyhow!("--in expects SOURCE=PATH, got {spec:?}"))?;
                let source: Source = source.parse()?;
                let path = PathBuf::from(path);
                let format = match format {
                    Some(InputFormat::Jsonl) => DumpFormat::Jsonl,
                    Some(InputFormat::Csv) => DumpFormat::Csv,
                    None => DumpFormat::from_path(&path)
                        .ok_or_else(|| anyhow!("cannot tell the format of {}; pass --format", path.display()))?,
                };
                parts.push(ingest_dump(&path, source, format, &options)?);
                paths.push(path);
            }
            check_distinct(&paths.iter().map(PathBuf::as_path).collect::<Vec<_>>(), &out)?;
            let corpus = Corpus::merge(parts)?;
            let stats = jsonl::to_canonical_string(corpus.stats());
            eprintln!("{stats}");
            write_file(&out, &corpus.to_jsonl())?;
            if let Some(p) = stats_out {
                write_file(&p, &format!("{stats}\n"))?;
            }
        }
        Command::Clean {
            input,
            rules,
            out,
            outcomes_out,
        } => {
            let input = pick(input, &cfg.paths.corpus, "corpus.jsonl");
            let out = pick(out, &cfg.paths.cleaned, "cleaned.jsonl");
            check_distinct(&[&input], &out)?;
            let rules = match rules.or_else(|| cfg.paths.rules.clone()) {
                Some(path) => RuleSet::load(&path)?,
                None => RuleSet::default_rules(),
            };
            let corpus = Corpus::read_jsonl(&input)?;
            let cleaned = clean_corpus(&corpus, &rules)?;
            eprintln!(
                "kept {} of {} posts, flagged fraction {:.4}",
                cleaned.corpus.len(),
                corpus.len(),
                cleaned.flagged_fraction
            );
            write_file(&out, &cleaned.corpus.to_jsonl())?;
            if let Some(p) = outcomes_out {
                write_file(&p, &jsonl::to_jsonl(&cleaned.outcomes))?;
            }
        }
        Command::Label {
            input,
            out,
            tau,
            delta,
            window_slack,
            tags_out,
        } => {
            let labeler = cfg.labeler_config(tau, delta, window_slack)?;
            let input = pick(input, &cfg.paths.cleaned, "cleaned.jsonl");
            let out = pick(out, &cfg.paths.labeled, "labeled.jsonl");
            check_distinct(&[&input], &out)?;
            let corpus = Corpus::read_jsonl(&input)?;
            let examples = label_all(corpus.posts(), &labeler);
            eprint!("{}", LabelSummary::from_examples(&examples));
            write_file(&out, &jsonl::to_jsonl(&examples))?;
            if let Some(p) = tags_out.or_else(|| cfg.paths.tags.clone()) {
                let tags = corpus
                    .posts()
                    .iter()
                    .map(|post| tag_title(&post.id, &post.question))
                    .collect::<Result<Vec<_>, _>>()?;
                write_file(&p, &jsonl::to_jsonl(&tags))?;
            }
        }
        Command::Split { input, seed, out } => {
            let input = pick(input, &cfg.paths.labeled, "labeled.jsonl");
            let out = pick(out, &cfg.paths.split, "split.json");
            check_distinct(&[&input], &out)?;
            let seed = seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
            let examples = read_labeled(&input)?;
            let outcome = split_corpus(&examples, seed)?;
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            let s = &outcome.split;
            eprintln!("train {} / validation {} / test {}", s.train.len(), s.validation.len(), s.test.len());
            write_file(&out, &s.to_json())?;
        }
        Command::Export {
            input,
            split,
            part,
            format,
            decisions,
            include_flagged,
            allow_pending,
            out,
        } => {
            let part = parse_part(&part)?;
            let input = pick(input, &cfg.paths.labeled, "labeled.jsonl");
            let split_path = pick(split, &cfg.paths.split, "split.json");
            let default_out = match format {
                ExportFormat::Extractive => "extractive.json",
                ExportFormat::Abstractive => "abstractive.jsonl",
                ExportFormat::PredictionsTemplate => "predictions.jsonl",
            };
            let out = pick(out, &cfg.paths.export, default_out);
            let decisions = decisions.or_else(|| cfg.paths.decisions.clone());
            let mut inputs = vec![input.as_path(), split_path.as_path()];
            if let Some(d) = &decisions {
                inputs.push(d);
            }
            check_distinct(&inputs, &out)?;

            let mut examples = read_labeled(&input)?;
            if let Some(log) = &decisions {
                let log_entries = read_log(log, &examples)?;
                examples = apply_decisions(&examples, &log_entries);
            }
            let split = read_split(&split_path)?;
            let options = ExportOptions {
                include_flagged,
                allow_pending,
            };
            let text = match format {
                ExportFormat::Extractive => {
                    let file = export_extractive(&examples, &split, part, options)?;
                    file.check_consistency()?;
                    eprintln!("exported {} extractive examples", file.data.len());
                    file.to_canonical_string()
                }
                ExportFormat::Abstractive => export_abstractive(&examples, &split, part, options)?,
                ExportFormat::PredictionsTemplate => predictions_template(&examples, &split, part, options)?,
            };
            write_file(&out, &text)?;
        }
        Command::Eval {
            input,
            split,
            part,
            predictions,
            include_flagged,
            provider,
            out,
        } => {
            let part = parse_part(&part)?;
            let input = pick(input, &cfg.paths.labeled, "labeled.jsonl");
            let split_path = pick(split, &cfg.paths.split, "split.json");
            let out = pick(out, &cfg.paths.report, "report.json");
            let specs = if predictions.is_empty() {
                cfg.paths.predictions.clone()
            } else {
                predictions
            };
            if specs.is_empty() {
                bail!("no prediction files given; pass --predictions");
            }
            let mut sets = Vec::new();
            let mut inputs = vec![input.clone(), split_path.clone()];
            for spec in &specs {
                let (name, path) = match spec.split_once('=') {
                    Some((n, p)) => (Some(n), PathBuf::from(p)),
                    None => (None, PathBuf::from(spec)),
                };
                sets.push(
                    PredictionSet::load(&path, name)
                        .with_context(|| format!("reading predictions {}", path.display()))?,
                );
                inputs.push(path);
            }
            check_distinct(&inputs.iter().map(PathBuf::as_path).collect::<Vec<_>>(), &out)?;

            let provider_name = provider.provider.clone().or_else(|| cfg.provider.name.clone());
            let embedder: Option<Arc<dyn EmbeddingProvider>> = match provider_name {
                Some(name) => {
                    let settings = cfg.provider_settings(&provider);
                    if let Some(f) = &settings.lookup_file {
                        fs::metadata(f).with_context(|| format!("cannot read lookup file {}", f.display()))?;
                    }
                    Some(Arc::from(ProviderRegistry::builtin().create(&name, &settings)?))
                }
                None => None,
            };
            let examples = read_labeled(&input)?;
            let split = read_split(&split_path)?;
            let references = references_for(&examples, &split, part, include_flagged)?;
            let metrics = MetricRegistry::standard(embedder);
            let split_id = format!("{part}@seed{}", split.seed);
            let report = evaluate_all(&split_id, &sets, &references, &metrics)?;
            eprint!("{}", render_report(&report, ReportFormat::TextTable));
            let mut text = jsonl::to_canonical_string(&report);
            text.push('\n');
            write_file(&out, &text)?;
        }
        Command::Report { input, format, out } => {
            let input = pick(input, &cfg.paths.report, "report.json");
            let text = fs::read_to_string(&input).with_context(|| format!("cannot read report {}", input.display()))?;
            let report: EvalReport =
                serde_json::from_str(&text).with_context(|| format!("malformed report {}", input.display()))?;
            let format = match format {
                ReportFormatArg::Text => ReportFormat::TextTable,
                ReportFormatArg::Csv => ReportFormat::Csv,
                ReportFormatArg::Jsonl => ReportFormat::Jsonl,
            };
            let rendered = render_report(&report, format);
            match out {
                Some(p) => {
                    check_distinct(&[&input], &p)?;
                    write_file(&p, &rendered)?
                }
                None => print!("{rendered}"),
            }
        }
        Command::ServeReview {
            input,
            log,
            bind,
            static_dir,
        } => {
            let input = pick(input, &cfg.paths.labeled, "labeled.jsonl");
            let log = pick(log, &cfg.paths.decisions, "decisions.jsonl");
            check_distinct(&[&input], &log)?;
            let bind = bind
                .or_else(|| cfg.review.bind.clone())
                .unwrap_or_else(|| DEFAULT_BIND.to_string());
            let addr: SocketAddr = bind.parse().with_context(|| format!("invalid bind address {bind:?}"))?;
            let static_dir = static_dir.or_else(|| cfg.review.static_dir.clone());
            let store = Arc::new(spoilkit_review_server::open_store(&input, &log)?);
            eprintln!("{} examples awaiting review", store.stats().pending);
            let _ = tracing_subscriber::fmt().with_writer(io::stderr).try_init();
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(spoilkit_review_server::serve(
                store,
                addr,
                static_dir,
                spoilkit_review_server::ctrl_c(),
            ))?;
        }
    }
    Ok(())
}
