use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use discofact::aggregate::Strategy;
use discofact::align::{align_sentences, AlignmentRecord};
use discofact::config::RunConfig;
use discofact::corpus::{ingest_corpus, read_manifest};
use discofact::error::exit_code;
use discofact::eval::{Metric, NodeSet};
use discofact::features::{compute_edu_features, feature_records};
use discofact::pipeline::{analyze, evaluate, run_score};
use discofact::report::ScoreReport;
use discofact::rst::parse_tree_file;
use discofact::scorer::ScorerSpec;
use discofact::segment::{plan_document, plan_records};
use discofact::text::Document;

#[derive(Debug, Parser)]
#[command(name = "discofact", version, about = "Discourse-aware factual consistency scoring")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Dump per-EDU discourse features of tree files.
    Features {
        trees: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Align one-sentence-per-line text to a tree's EDUs.
    Align {
        #[arg(long)]
        text: PathBuf,
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print segmentation plans for a document or every manifest pair.
    Segment(SegmentArgs),
    /// Score every pair of a manifest.
    Score(RunArgs),
    /// Compare a score report with the manifest labels.
    Eval(EvalArgs),
    /// Depth-category histograms, feature t-tests and ASPL over an annotated manifest.
    Analyze {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        nodes: NodeChoice,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum NodeChoice {
    All,
    Leaves,
}

#[derive(Debug, Args)]
struct SegmentArgs {
    #[arg(long, conflicts_with = "doc")]
    manifest: Option<PathBuf>,
    #[arg(long)]
    doc: Option<PathBuf>,
    #[arg(long, requires = "doc")]
    tree: Option<PathBuf>,
    /// 1-based sentence indices where a new article starts.
    #[arg(long, value_delimiter = ',', requires = "doc")]
    article_starts: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    level: u32,
    /// Sentence windows even when a tree is available.
    #[arg(long)]
    fallback: bool,
    #[arg(long, default_value_t = discofact::segment::DEFAULT_CAPACITY)]
    capacity: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Settings shared by `score` and `eval`; each overrides the config file.
#[derive(Debug, Args)]
struct ConfigArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    common: ConfigArgs,
    /// Output directory for scores.jsonl and failures.jsonl.
    #[arg(long)]
    out: Option<PathBuf>,
    /// builtin, subprocess:<command line> or http:<url>.
    #[arg(long)]
    scorer: Option<String>,
    #[arg(long)]
    scorer_id: Option<String>,
    #[arg(long)]
    strategy: Option<Strategy>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    level: Option<u32>,
    #[arg(long)]
    fallback: bool,
    #[arg(long)]
    capacity: Option<usize>,
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    common: ConfigArgs,
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    baseline: Option<PathBuf>,
    #[arg(long)]
    metric: Option<Metric>,
    #[arg(long)]
    bootstrap: Option<usize>,
    /// Add a macro-average row across dataset tags.
    #[arg(long = "macro")]
    macro_average: bool,
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the text table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn base_config(args: &ConfigArgs) -> Result<RunConfig> {
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(m) = &args.manifest {
        config.manifest = Some(m.clone());
    }
    if let Some(s) = args.seed {
        config.eval.seed = s;
    }
    Ok(config)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            io::stdout().lock().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn jsonl<T: serde::Serialize>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|r| serde_json::to_string(&r).expect("record serializes") + "\n").collect()
}

fn read_tree(path: &Path) -> Result<Option<discofact::rst::DiscourseTree>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_tree_file(&text).with_context(|| path.display().to_string())
}

fn features(trees: &[PathBuf], out: Option<&Path>) -> Result<u8> {
    let mut text = String::new();
    for path in trees {
        match read_tree(path)? {
            Some(tree) => text.push_str(&jsonl(feature_records(&tree, &compute_edu_features(&tree)))),
            None => log::warn!("{}: tree absent, skipped", path.display()),
        }
    }
    emit(out, &text)?;
    Ok(exit_code::SUCCESS)
}

fn align(text: &Path, tree: &Path, out: Option<&Path>) -> Result<u8> {
    let doc = Document::from_lines(fs::read_to_string(text).with_context(|| text.display().to_string())?)?;
    let tree = read_tree(tree)?.context("tree file marks the tree as absent")?;
    let id = tree.source_id().to_string();
    let alignments = align_sentences(&doc, &tree)?;
    emit(out, &jsonl(alignments.iter().map(|a| AlignmentRecord::new(&id, a))))?;
    Ok(exit_code::SUCCESS)
}

fn segment(args: &SegmentArgs) -> Result<u8> {
    let level = (!args.fallback).then_some(args.level);
    let mut text = String::new();
    if let Some(manifest) = &args.manifest {
        for rec in ingest_corpus(manifest)? {
            let plan = plan_document(&rec.document, rec.doc_tree.as_ref(), level, args.capacity)?;
            text.push_str(&jsonl(plan_records(&rec.pair_id, &plan)));
        }
    } else {
        let path = args.doc.as_ref().context("give --doc or --manifest")?;
        let mut doc = Document::from_lines(fs::read_to_string(path).with_context(|| path.display().to_string())?)?;
        if !args.article_starts.is_empty() {
            doc = doc.with_article_starts(args.article_starts.clone())?;
        }
        let tree = match &args.tree {
            Some(t) => read_tree(t)?,
            None => None,
        };
        let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let plan = plan_document(&doc, tree.as_ref(), level, args.capacity)?;
        text.push_str(&jsonl(plan_records(&id, &plan)));
    }
    emit(args.out.as_deref(), &text)?;
    Ok(exit_code::SUCCESS)
}

fn score(args: &RunArgs) -> Result<u8> {
    let mut config = base_config(&args.common)?;
    if let Some(s) = &args.scorer {
        let spec = ScorerSpec::parse(s)?;
        config.scorer = ScorerSpec { max_in_flight: config.scorer.max_in_flight, ..spec };
    }
    if let Some(id) = &args.scorer_id {
        config.scorer.scorer_id = id.clone();
    }
    if let Some(s) = args.strategy {
        config.aggregation.strategy = s;
    }
    if let Some(a) = args.alpha {
        config.aggregation.alpha = a;
    }
    if let Some(l) = args.level {
        config.segmentation.level = l;
        config.segmentation.fallback = false;
    }
    if args.fallback {
        config.segmentation.fallback = true;
    }
    if let Some(c) = args.capacity {
        config.segmentation.capacity = c;
    }
    if let Some(c) = &args.cache {
        config.cache = Some(c.clone());
    }
    if let Some(w) = args.workers {
        config.workers = w;
    }
    if let Some(o) = &args.out {
        config.output_dir = o.clone();
    }
    let run = run_score(&config)?;
    eprintln!(
        "scored {} pair(s), {} failed, {} backend call(s); report at {}",
        run.scored,
        run.failures.len(),
        run.dispatched,
        run.report_path.display()
    );
    if let Some(f) = run.failures.first() {
        eprintln!("first failure: {}: {}", f.pair_id, f.error);
    }
    Ok(run.exit_code())
}

fn eval(args: &EvalArgs) -> Result<u8> {
    let mut config = base_config(&args.common)?;
    if let Some(m) = args.metric {
        config.eval.metric = Some(m);
    }
    if let Some(b) = args.bootstrap {
        config.eval.bootstrap = b;
    }
    if args.macro_average {
        config.eval.macro_average = true;
    }
    config.validate()?;
    let manifest = read_manifest(config.manifest()?)?;
    let report = ScoreReport::read(&args.report)?;
    let baseline = args.baseline.as_deref().map(ScoreReport::read).transpose()?;
    let table = evaluate(&manifest, &report, baseline.as_ref(), &config.eval)?;
    emit(args.out.as_deref(), &table.to_text())?;
    if let Some(csv) = &args.csv {
        fs::write(csv, table.to_csv()).with_context(|| format!("writing {}", csv.display()))?;
    }
    Ok(exit_code::SUCCESS)
}

fn run(cli: Cli) -> Result<u8> {
    match &cli.command {
        Command::Features { trees, out } => features(trees, out.as_deref()),
        Command::Align { text, tree, out } => align(text, tree, out.as_deref()),
        Command::Segment(args) => segment(args),
        Command::Score(args) => score(args),
        Command::Eval(args) => eval(args),
        Command::Analyze { manifest, nodes, out } => {
            let nodes = match nodes {
                NodeChoice::All => NodeSet::AllNodes,
                NodeChoice::Leaves => NodeSet::Leaves,
            };
            let analysis = analyze(&ingest_corpus(manifest)?, nodes)?;
            emit(out.as_deref(), &analysis.to_text())?;
            Ok(exit_code::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // usage errors are input errors, not clap's default status 2
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit_code::INPUT } else { exit_code::SUCCESS });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.chain().find_map(|c| c.downcast_ref::<discofact::Error>()).map_or(exit_code::INPUT, |e| e.exit_code());
            ExitCode::from(code)
        }
    }
}
