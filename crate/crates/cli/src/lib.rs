//! Command line driver and HTTP inference service.
//!
//! `emobench prepare` turns a raw dataset into prepared JSON-lines splits,
//! `train` fits a configured representation and learner into a model
//! artifact, `evaluate` scores a prepared split, `hierarchy` clusters the
//! model's confusion matrix, `annotate` runs the reader-annotation
//! analyses, `serve` exposes the artifact over HTTP and `predict` scores
//! text read from stdin.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 unknown flag or bad command
//! line, 3 invalid configuration, 4 missing input file.

pub mod config;
pub mod error;
pub mod pipeline;
pub mod service;

use std::collections::HashMap;
use std::ffi::OsString;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use emobench::annotation::{
    agreement_stats, confusion_delta_bootstrap, cross_predict_f1, load_annotations_csv, screen_submissions,
    AnnotationRecord, AnnotationStudy, DeltaConfig, ReaderAggregation,
};
use emobench::artifact::ModelArtifact;
use emobench::corpus::{
    filter_by_length, filter_stable_emotions, load_goemotions_tsv, load_jsonl, load_vent_jsonl, load_word_list,
    sample_annotation_set, save_jsonl, split_random, split_temporal, Corpus,
};
use emobench::eval::{compute_metrics, per_category_report};
use emobench::hierarchy::{
    build_confusion, category_activation_dendrogram, emotion_dendrogram, ConfusionMode, Linkage,
};
use emobench::synthetic::{vent_like_corpus, VentLikeConfig};
use emobench::taxonomy::{goemotions, GOEMOTIONS_ID_ORDER};
use emobench::EmotionTaxonomy;
use serde_json::json;

use crate::config::{load_config, PrepareConfig, RunConfig, SourceConfig, SplitMethod};
use crate::error::{require_file, CliError, CliResult, EXIT_OK, EXIT_USAGE};
use crate::pipeline::{score_corpus, train_run};
use crate::service::ModelInfo;

#[derive(Debug, Parser)]
#[command(name = "emobench", version, about = "Multi-label emotion classification benchmark")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LinkageArg {
    Single,
    Complete,
    Average,
}

impl From<LinkageArg> for Linkage {
    fn from(l: LinkageArg) -> Self {
        match l {
            LinkageArg::Single => Linkage::Single,
            LinkageArg::Complete => Linkage::Complete,
            LinkageArg::Average => Linkage::Average,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConfusionModeArg {
    Decided,
    Argmax,
}

impl From<ConfusionModeArg> for ConfusionMode {
    fn from(m: ConfusionModeArg) -> Self {
        match m {
            ConfusionModeArg::Decided => ConfusionMode::Decided,
            ConfusionModeArg::Argmax => ConfusionMode::Argmax,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AggregationArg {
    Unaggregated,
    MajorityVote,
}

impl From<AggregationArg> for ReaderAggregation {
    fn from(a: AggregationArg) -> Self {
        match a {
            AggregationArg::Unaggregated => ReaderAggregation::Unaggregated,
            AggregationArg::MajorityVote => ReaderAggregation::MajorityVote,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load, filter and split a dataset into prepared JSON-lines files.
    Prepare {
        #[arg(long)]
        config: PathBuf,
        /// Output directory for taxonomy.json and the split files.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model artifact from a run configuration.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Per-epoch training log (neural learners), as JSON lines.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Score a prepared split and report multi-label metrics.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Also write the metrics JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write per-example scores as JSON lines.
        #[arg(long)]
        predictions: Option<PathBuf>,
        /// Include the per-category table.
        #[arg(long)]
        per_category: bool,
    },
    /// Build the confusion matrix and emotion/category dendrograms.
    Hierarchy {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, value_enum, default_value = "average")]
        linkage: LinkageArg,
        #[arg(long, value_enum, default_value = "decided")]
        mode: ConfusionModeArg,
        /// Store the emotion dendrogram in the model artifact.
        #[arg(long)]
        attach: bool,
    },
    /// Reader-annotation analyses.
    Annotate {
        #[command(subcommand)]
        command: AnnotateCommand,
    },
    /// Serve the model over HTTP.
    Serve {
        #[arg(long)]
        model: PathBuf,
        /// Overrides EMOBENCH_BIND and the default 127.0.0.1:8080.
        #[arg(long)]
        bind: Option<String>,
        #[arg(long, default_value_t = service::DEFAULT_MAX_TEXT_BYTES)]
        max_text_bytes: usize,
    },
    /// Score text read from stdin and print the prediction JSON.
    Predict {
        #[arg(long)]
        model: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum AnnotateCommand {
    /// Modal-label overlap among readers of each snippet.
    Agreement {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        taxonomy: PathBuf,
        /// Prepared corpus with writer labels; drops rejected submissions first.
        #[arg(long)]
        screen_with: Option<PathBuf>,
    },
    /// Writer, reader and model labels predicting one another.
    CrossF1 {
        #[arg(long)]
        annotations: PathBuf,
        /// Prepared corpus with the writer labels of the annotated snippets.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value = "unaggregated")]
        aggregation: AggregationArg,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Bootstrapped model-minus-reader category confusion differences.
    Delta {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        runs: usize,
        /// Defaults to the number of annotated snippets.
        #[arg(long)]
        sample_size: Option<usize>,
        #[arg(long, default_value_t = 0.001)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let mut stdout = std::io::stdout().lock();
    match execute(cli.command, &mut std::io::stdin().lock(), &mut stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn print_json(out: &mut impl Write, value: &impl serde::Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(emobench::Error::from)?;
    writeln!(out, "{text}").map_err(|e| CliError::Other(format!("writing output: {e}")))
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| emobench::Error::Io {
            path: parent.to_path_buf(),
            source: e,
        })?;
    }
    std::fs::write(path, contents).map_err(|e| {
        CliError::Core(emobench::Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    })
}

fn load_model(path: &Path) -> CliResult<ModelArtifact> {
    require_file(path)?;
    Ok(ModelArtifact::load(path)?)
}

fn load_corpus(path: &Path, taxonomy: &EmotionTaxonomy) -> CliResult<Corpus> {
    require_file(path)?;
    Ok(load_jsonl(path, taxonomy)?)
}

fn load_taxonomy(path: &Path) -> CliResult<EmotionTaxonomy> {
    require_file(path)?;
    Ok(EmotionTaxonomy::load(path)?)
}

fn config_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// Runs one command with explicit I/O, for embedding and tests.
pub fn execute(command: Command, stdin: &mut impl Read, out: &mut impl Write) -> CliResult<()> {
    match command {
        Command::Prepare { config, out: dir } => {
            let cfg: PrepareConfig = load_config(&config)?;
            let cfg = cfg.finalize(&config_dir(&config))?;
            print_json(out, &prepare(&cfg, &dir)?)
        }
        Command::Train { config, out: path, log } => {
            let cfg: RunConfig = load_config(&config)?;
            let cfg = cfg.finalize(&config_dir(&config))?;
            let taxonomy = load_taxonomy(&cfg.data.taxonomy)?;
            let train = load_corpus(&cfg.data.train, &taxonomy)?;
            let validation = load_corpus(&cfg.data.validation, &taxonomy)?;
            let run = train_run(&cfg, &train, &validation)?;
            run.artifact.save(&path)?;
            if let (Some(log_path), Some(log)) = (log, &run.log) {
                write_file(&log_path, &log.to_jsonl())?;
            }
            let summary = json!({
                "artifact": path.display().to_string(),
                "model": ModelInfo::of(&run.artifact),
                "train_examples": train.len(),
                "validation_examples": validation.len(),
                "best_epoch": run.log.as_ref().map(|l| l.best_epoch),
            });
            print_json(out, &summary)
        }
        Command::Evaluate {
            model,
            data,
            out: metrics_path,
            predictions,
            per_category,
        } => {
            let artifact = load_model(&model)?;
            let corpus = load_corpus(&data, &artifact.taxonomy)?;
            let preds = score_corpus(&artifact, &corpus)?;
            let mut report = compute_metrics(&preds, &artifact.thresholds)?;
            if per_category {
                report.per_category = Some(per_category_report(&preds, &artifact.thresholds, &artifact.taxonomy)?);
            }
            if let Some(p) = predictions {
                preds.save_jsonl(&p)?;
            }
            if let Some(p) = metrics_path {
                let text = serde_json::to_string_pretty(&report).map_err(emobench::Error::from)?;
                write_file(&p, &text)?;
            }
            print_json(out, &report)
        }
        Command::Hierarchy {
            model,
            data,
            out_dir,
            linkage,
            mode,
            attach,
        } => {
            let mut artifact = load_model(&model)?;
            let corpus = load_corpus(&data, &artifact.taxonomy)?;
            let preds = score_corpus(&artifact, &corpus)?;
            let labels = artifact.taxonomy.emotions().to_vec();
            let matrix = build_confusion(&preds, &artifact.thresholds, labels, mode.into())?;
            let emotions = emotion_dendrogram(&matrix, linkage.into())?;
            let categories = category_activation_dendrogram(&matrix, &artifact.taxonomy, linkage.into())?;
            write_file(&out_dir.join("confusion.csv"), &matrix.to_csv())?;
            write_file(&out_dir.join("emotion_dendrogram.json"), &emotions.dendrogram.to_json().to_string())?;
            write_file(&out_dir.join("category_dendrogram.json"), &categories.to_json().to_string())?;
            if attach {
                artifact.hierarchy = Some(emotions.dendrogram.clone());
                artifact.save(&model)?;
            }
            let (left, right) = emotions.dendrogram.top_split();
            let name = |ids: Vec<usize>| -> Vec<String> {
                ids.into_iter().map(|i| emotions.dendrogram.leaves[i].clone()).collect()
            };
            print_json(
                out,
                &json!({
                    "excluded": emotions.excluded,
                    "top_split": [name(left), name(right)],
                    "attached": attach,
                }),
            )
        }
        Command::Annotate { command } => annotate(command, out),
        Command::Serve {
            model,
            bind,
            max_text_bytes,
        } => {
            let artifact = load_model(&model)?;
            let addr = service::resolve_bind(bind.as_deref()).map_err(CliError::Invalid)?;
            let _ = tracing_subscriber::fmt()
                .with_env_filter(
                    tracing_subscriber::EnvFilter::try_from_default_env()
                        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
                )
                .with_writer(std::io::stderr)
                .try_init();
            let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Other(e.to_string()))?;
            runtime
                .block_on(service::serve(artifact, addr, max_text_bytes))
                .map_err(|e| CliError::Other(format!("serving on {addr}: {e}")))
        }
        Command::Predict { model } => {
            let artifact = load_model(&model)?;
            let mut text = String::new();
            stdin
                .read_to_string(&mut text)
                .map_err(|e| CliError::Other(format!("reading stdin: {e}")))?;
            let text = text.trim_end_matches(['\n', '\r']);
            let info = ModelInfo::of(&artifact);
            print_json(out, &service::predict_response(&artifact, &info, text)?)
        }
    }
}

fn load_study(annotations: &Path, data: &Path, model: &Path) -> CliResult<(ModelArtifact, AnnotationStudy)> {
    let artifact = load_model(model)?;
    require_file(annotations)?;
    let records = load_annotations_csv(annotations, &artifact.taxonomy)?;
    let writer = load_corpus(data, &artifact.taxonomy)?;
    let annotated: std::collections::HashSet<&str> = records.iter().map(|r| r.example_id.as_str()).collect();
    let subset = writer.with_examples(
        writer
            .examples
            .iter()
            .filter(|e| annotated.contains(e.id.as_str()))
            .cloned()
            .collect(),
        "annotated",
    );
    let preds = score_corpus(&artifact, &subset)?;
    let study = AnnotationStudy::align(&writer, &records, &preds, &artifact.thresholds)?;
    Ok((artifact, study))
}

fn annotate(command: AnnotateCommand, out: &mut impl Write) -> CliResult<()> {
    match command {
        AnnotateCommand::Agreement {
            annotations,
            taxonomy,
            screen_with,
        } => {
            let tax = load_taxonomy(&taxonomy)?;
            require_file(&annotations)?;
            let mut records = load_annotations_csv(&annotations, &tax)?;
            let mut rejected = Vec::new();
            if let Some(path) = screen_with {
                let writer = load_corpus(&path, &tax)?;
                let labels: HashMap<String, Vec<usize>> =
                    writer.examples.iter().map(|e| (e.id.clone(), e.writer_labels.clone())).collect();
                let verdicts = screen_submissions(&records, &labels, &tax)?;
                rejected = verdicts.iter().filter(|(_, v)| !v.accepted).map(|(k, _)| k.clone()).collect();
                records.retain(|r: &AnnotationRecord| verdicts.get(&r.submission_id).is_some_and(|v| v.accepted));
            }
            let stats = agreement_stats(&records)?;
            print_json(
                out,
                &json!({
                    "readers_per_snippet": stats.readers_per_snippet,
                    "snippets": stats.snippets.len(),
                    "emotion_mean": stats.emotion_mean,
                    "emotion_std": stats.emotion_std,
                    "category_mean": stats.category_mean,
                    "category_std": stats.category_std,
                    "rejected_submissions": rejected,
                }),
            )
        }
        AnnotateCommand::CrossF1 {
            annotations,
            data,
            model,
            aggregation,
            csv,
        } => {
            let (artifact, study) = load_study(&annotations, &data, &model)?;
            let table = cross_predict_f1(&study, &artifact.taxonomy, aggregation.into())?;
            if let Some(p) = csv {
                write_file(&p, &table.to_csv())?;
            }
            print_json(out, &table)
        }
        AnnotateCommand::Delta {
            annotations,
            data,
            model,
            runs,
            sample_size,
            alpha,
            seed,
            csv,
        } => {
            let (artifact, study) = load_study(&annotations, &data, &model)?;
            let cfg = DeltaConfig {
                runs,
                sample_size,
                alpha,
                seed,
            };
            let delta = confusion_delta_bootstrap(&study, &artifact.taxonomy, &cfg)?;
            if let Some(p) = csv {
                write_file(&p, &delta.to_csv())?;
            }
            print_json(out, &delta)
        }
    }
}

/// Loads, filters and splits the configured source into `dir`.
pub fn prepare(cfg: &PrepareConfig, dir: &Path) -> CliResult<serde_json::Value> {
    let filter = |c: Corpus| -> CliResult<Corpus> {
        let Some(f) = &cfg.filter else { return Ok(c) };
        let mut c = filter_by_length(&c, f.min_tokens, f.max_tokens)?;
        if let Some(cutoff) = &f.stable_cutoff {
            c = filter_stable_emotions(&c, cutoff, f.stable_order)?;
        }
        Ok(c)
    };
    let split = |c: Corpus| -> CliResult<(Corpus, Corpus, Corpus)> {
        let s = cfg.split.as_ref().expect("checked by PrepareConfig::finalize");
        Ok(match s.method {
            SplitMethod::Random => split_random(&c, s.fractions(), s.seed)?,
            SplitMethod::Temporal => split_temporal(&c, s.fractions())?,
        })
    };
    let (train, validation, test) = match &cfg.source {
        SourceConfig::GoemotionsTsv { dir: src } => {
            let tax = goemotions();
            let load = |name: &str| -> CliResult<Corpus> {
                let p = src.join(name);
                require_file(&p)?;
                Ok(load_goemotions_tsv(&p, &tax, &GOEMOTIONS_ID_ORDER)?)
            };
            let (tr, va, te) = (load("train.tsv")?, load("dev.tsv")?, load("test.tsv")?);
            if cfg.split.is_some() {
                let mut all = tr.examples;
                all.extend(va.examples);
                all.extend(te.examples);
                split(filter(Corpus::new(tax, all, "goemotions")?)?)?
            } else {
                (filter(tr)?, filter(va)?, filter(te)?)
            }
        }
        SourceConfig::VentJsonl {
            path,
            taxonomy,
            skip_unknown,
        } => {
            let tax = load_taxonomy(taxonomy)?;
            require_file(path)?;
            split(filter(load_vent_jsonl(path, &tax, *skip_unknown)?)?)?
        }
        SourceConfig::Jsonl { path, taxonomy } => {
            let tax = load_taxonomy(taxonomy)?;
            split(filter(load_corpus(path, &tax)?)?)?
        }
        SourceConfig::SyntheticVent {
            examples,
            emotions,
            seed,
        } => {
            let gen = VentLikeConfig {
                num_examples: *examples,
                num_emotions: *emotions,
                seed: *seed,
                ..VentLikeConfig::default()
            };
            split(filter(vent_like_corpus(&gen)?)?)?
        }
    };
    let taxonomy = train.taxonomy.clone();
    write_file(&dir.join("taxonomy.json"), &taxonomy.to_json_value().to_string())?;
    for (name, c) in [("train", &train), ("validation", &validation), ("test", &test)] {
        save_jsonl(c, dir.join(format!("{name}.jsonl")))?;
    }
    let mut summary = json!({
        "emotions": taxonomy.len(),
        "categories": taxonomy.num_categories(),
        "train": train.len(),
        "validation": validation.len(),
        "test": test.len(),
    });
    if let Some(a) = &cfg.annotation_sample {
        let excluded = match &a.excluded_terms {
            Some(p) => {
                require_file(p)?;
                load_word_list(p)?
            }
            None => Default::default(),
        };
        let sample = sample_annotation_set(&test, a.per_emotion, &excluded, a.seed)?;
        save_jsonl(&sample, dir.join("annotation_sample.jsonl"))?;
        summary["annotation_sample"] = sample.len().into();
    }
    Ok(summary)
}
