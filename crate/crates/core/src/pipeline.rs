//! End-to-end runs: scoring a corpus, evaluating reports against labels and
//! the discourse-feature analysis over annotated summaries.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;

use crate::aggregate::{aggregate_summary, max_over_segments, score_sentences};
use crate::align::{align_sentences, histogram_of, DepthCategory, DepthHistogram};
use crate::config::{EvalConfig, RunConfig};
use crate::corpus::{load_record, manifest_base, read_manifest, CorpusRecord, LabelKind, ManifestRecord};
use crate::error::{Error, Result};
use crate::eval::{aspl, paired_bootstrap, welch_t_test, Metric, NodeSet};
use crate::features::{compute_edu_features, sentence_features, FeatureValues};
use crate::report::{
    write_failures, write_pair, FailureRecord, PairScores, ReportHeader, ScoreReport, SentenceLine, SummaryLine,
    FAILURES_FILE, SCORES_FILE,
};
use crate::rst::DiscourseTree;
use crate::scorer::{ScoreCache, ScoreRequest, Scorer};
use crate::segment::plan_document;
use crate::text::Document;

/// Per-sentence `(depth_norm, height)` from the summary's own tree; `None`
/// for sentences that are unaligned or have no tree.
pub fn summary_features(summary: &Document, tree: Option<&DiscourseTree>) -> Result<Vec<Option<(f64, f64)>>> {
    let Some(tree) = tree else { return Ok(vec![None; summary.len()]) };
    let table = compute_edu_features(tree);
    align_sentences(summary, tree)?
        .iter()
        .map(|a| match a.edu_range {
            Some((lo, hi)) => Ok(Some((sentence_features(&table, lo, hi)?.depth_norm, a.subtree_height))),
            None => Ok(None),
        })
        .collect()
}

/// Segments the document, scores every summary sentence against every
/// segment, keeps the best segment per sentence and aggregates.
pub fn score_record(rec: &CorpusRecord, scorer: &Scorer, config: &RunConfig) -> Result<PairScores> {
    let plan = plan_document(
        &rec.document,
        rec.doc_tree.as_ref(),
        config.segmentation.effective_level(),
        config.segmentation.capacity,
    )?;
    let features = summary_features(&rec.summary, rec.summary_tree.as_ref())?;
    let n_seg = plan.len();
    let requests: Vec<ScoreRequest> = rec
        .summary
        .sentences()
        .iter()
        .enumerate()
        .flat_map(|(i, sent)| {
            plan.segments
                .iter()
                .enumerate()
                .map(move |(j, seg)| ScoreRequest::new((i * n_seg + j) as u64, seg.text.clone(), sent.text.clone()))
        })
        .collect();
    let flat = scorer.score_pairs(&requests)?;
    let matrix: Vec<Vec<f64>> = flat.chunks(n_seg).map(<[f64]>::to_vec).collect();
    let raw = max_over_segments(&matrix)?;
    let scored = score_sentences(&raw, &features, &config.aggregation)?;
    let summary_score = aggregate_summary(&scored, &config.aggregation)?;
    Ok(PairScores {
        pair_id: rec.pair_id.clone(),
        sentences: scored.iter().map(|s| SentenceLine::new(&rec.pair_id, s)).collect(),
        summary: SummaryLine {
            pair_id: rec.pair_id.clone(),
            summary_score,
            strategy: config.aggregation.strategy,
            alpha: config.aggregation.alpha,
        },
    })
}

pub fn report_header(config: &RunConfig) -> ReportHeader {
    ReportHeader {
        config_hash: config.config_hash(),
        seed: config.eval.seed,
        scorer_id: config.scorer.scorer_id.clone(),
        strategy: config.aggregation.strategy,
        alpha: config.aggregation.alpha,
    }
}

#[derive(Debug)]
pub struct ScoreRun {
    pub report_path: PathBuf,
    pub failures_path: PathBuf,
    pub scored: usize,
    pub failures: Vec<FailureRecord>,
    /// Calls that reached the backend, after cache hits.
    pub dispatched: u64,
}

impl ScoreRun {
    /// Exit status of the run: that of the first failed pair, else success.
    pub fn exit_code(&self) -> u8 {
        self.failures.first().map_or(0, |f| f.exit_code)
    }
}

pub(crate) fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Invariant(format!("cannot start worker pool: {e}")))
}

/// Scores every manifest pair. A failing pair does not stop the others; it
/// is listed in the failure file and reflected in [`ScoreRun::exit_code`].
pub fn run_score(config: &RunConfig) -> Result<ScoreRun> {
    config.validate()?;
    let manifest = config.manifest()?;
    let records = read_manifest(manifest)?;
    let base = manifest_base(manifest);
    let mut scorer = Scorer::new(config.scorer.clone())?;
    if let Some(path) = &config.cache {
        scorer = scorer.with_cache(ScoreCache::open(path)?);
    }

    let outcomes: Vec<Result<PairScores>> = thread_pool(config.workers)?.install(|| {
        records
            .par_iter()
            .map(|m| load_record(&base, m).and_then(|rec| score_record(&rec, &scorer, config)))
            .collect()
    });

    fs::create_dir_all(&config.output_dir).map_err(|e| Error::io(&config.output_dir, e))?;
    let report_path = config.output_dir.join(SCORES_FILE);
    let failures_path = config.output_dir.join(FAILURES_FILE);
    let file = fs::File::create(&report_path).map_err(|e| Error::io(&report_path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(&report_path, e);
    writeln!(out, "{}", serde_json::to_string(&report_header(config)).expect("header serializes")).map_err(io)?;
    let mut failures = Vec::new();
    let mut scored = 0;
    for (m, outcome) in records.iter().zip(outcomes) {
        match outcome {
            Ok(pair) => {
                write_pair(&mut out, &pair).map_err(io)?;
                scored += 1;
            }
            Err(e) => {
                log::error!("{}: {e}", m.pair_id);
                failures.push(FailureRecord { pair_id: m.pair_id.clone(), exit_code: e.exit_code(), error: e.to_string() });
            }
        }
    }
    out.flush().map_err(io)?;
    write_failures(&failures_path, &failures)?;
    Ok(ScoreRun { report_path, failures_path, scored, failures, dispatched: scorer.dispatched() })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRow {
    pub dataset_tag: String,
    pub metric: Metric,
    pub n: usize,
    pub value: f64,
    pub p_vs_baseline: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalTable {
    pub header: ReportHeader,
    pub rows: Vec<EvalRow>,
}

pub const MACRO_TAG: &str = "macro";

fn default_metric(kind: LabelKind) -> Metric {
    match kind {
        LabelKind::Binary => Metric::RocAuc,
        LabelKind::Continuous => Metric::KendallTau,
    }
}

fn aligned_scores(manifest: &[ManifestRecord], report: &ScoreReport, name: &str) -> Result<Vec<f64>> {
    let scores = report.summary_scores();
    let mut ids: Vec<&str> = manifest.iter().map(|m| m.pair_id.as_str()).collect();
    ids.sort_unstable();
    for (k, (want, got)) in ids.iter().zip(scores.keys()).enumerate() {
        if want != got {
            return Err(Error::invalid(format!(
                "{name} does not match the manifest at pair {}: manifest has {want:?}, report has {got:?}",
                k + 1
            )));
        }
    }
    if ids.len() != scores.len() {
        let k = ids.len().min(scores.len());
        let (side, id) = if ids.len() > k { ("report lacks", ids[k]) } else { ("manifest lacks", *scores.keys().nth(k).unwrap()) };
        return Err(Error::invalid(format!("{name} does not match the manifest at pair {}: {side} {id:?}", k + 1)));
    }
    Ok(manifest.iter().map(|m| scores[m.pair_id.as_str()]).collect())
}

/// Per-dataset metrics of report `a`, with bootstrap p-values against `b`
/// when given.
pub fn evaluate(
    manifest: &[ManifestRecord],
    a: &ScoreReport,
    b: Option<&ScoreReport>,
    options: &EvalConfig,
) -> Result<EvalTable> {
    let scores_a = aligned_scores(manifest, a, "report")?;
    let scores_b = b.map(|r| aligned_scores(manifest, r, "baseline report")).transpose()?;
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, m) in manifest.iter().enumerate() {
        groups.entry(m.dataset_tag()).or_default().push(i);
    }
    let mut rows = Vec::new();
    for (tag, idx) in &groups {
        let metric = options.metric.unwrap_or_else(|| default_metric(manifest[idx[0]].label_kind));
        let gold: Vec<f64> = idx.iter().map(|&i| manifest[i].label).collect();
        let pick = |s: &[f64]| idx.iter().map(|&i| s[i]).collect::<Vec<f64>>();
        let sa = pick(&scores_a);
        let value = metric.compute(&gold, &sa).map_err(|e| Error::invalid(format!("dataset {tag}: {e}")))?;
        let p_vs_baseline = match &scores_b {
            Some(sb) => Some(paired_bootstrap(metric, &gold, &sa, &pick(sb), options.bootstrap, options.seed)?.p_value),
            None => None,
        };
        rows.push(EvalRow { dataset_tag: tag.to_string(), metric, n: idx.len(), value, p_vs_baseline });
    }
    if options.macro_average {
        let mut by_metric: BTreeMap<Metric, Vec<&EvalRow>> = BTreeMap::new();
        for r in &rows {
            by_metric.entry(r.metric).or_default().push(r);
        }
        let macros: Vec<EvalRow> = by_metric
            .into_iter()
            .map(|(metric, rs)| EvalRow {
                dataset_tag: MACRO_TAG.into(),
                metric,
                n: rs.iter().map(|r| r.n).sum(),
                value: rs.iter().map(|r| r.value).sum::<f64>() / rs.len() as f64,
                p_vs_baseline: None,
            })
            .collect();
        rows.extend(macros);
    }
    Ok(EvalTable { header: a.header.clone(), rows })
}

fn fmt_p(p: Option<f64>) -> String {
    p.map_or_else(|| "-".into(), |p| format!("{p:.4}"))
}

impl EvalTable {
    pub fn to_text(&self) -> String {
        let h = &self.header;
        let mut s = format!("# config_hash={} seed={} scorer_id={}\n", h.config_hash, h.seed, h.scorer_id);
        let width = self.rows.iter().map(|r| r.dataset_tag.len()).max().unwrap_or(0).max("dataset_tag".len());
        writeln!(s, "{:<width$}  {:<11}  {:>5}  {:>8}  {:>13}", "dataset_tag", "metric", "n", "value", "p_vs_baseline").unwrap();
        for r in &self.rows {
            writeln!(
                s,
                "{:<width$}  {:<11}  {:>5}  {:>8.4}  {:>13}",
                r.dataset_tag,
                r.metric.to_string(),
                r.n,
                r.value,
                fmt_p(r.p_vs_baseline)
            )
            .unwrap();
        }
        s
    }

    /// Full-precision CSV with a header row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("dataset_tag,metric,n,value,p_vs_baseline\n");
        for r in &self.rows {
            let p = r.p_vs_baseline.map(|p| p.to_string()).unwrap_or_default();
            writeln!(s, "{},{},{},{},{}", r.dataset_tag, r.metric, r.n, r.value, p).unwrap();
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureTest {
    pub feature: &'static str,
    pub n_inconsistent: usize,
    pub n_consistent: usize,
    pub mean_inconsistent: f64,
    pub mean_consistent: f64,
    /// `None` when the test is undefined for these samples.
    pub t: Option<f64>,
    pub p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsplRow {
    pub dataset_tag: String,
    pub documents: usize,
    pub document_aspl: Option<f64>,
    pub summaries: usize,
    pub summary_aspl: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Analysis {
    pub inconsistent: Option<DepthHistogram>,
    pub consistent: Option<DepthHistogram>,
    pub tests: Vec<FeatureTest>,
    pub aspl: Vec<AsplRow>,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn mean_aspl(trees: &[&DiscourseTree], nodes: NodeSet) -> Result<(usize, Option<f64>)> {
    let mut values = Vec::new();
    for t in trees {
        // a single-EDU tree has no node pairs
        if t.nodes().len() >= 2 && (nodes == NodeSet::AllNodes || t.edu_count() >= 2) {
            values.push(aspl(t, nodes)?);
        }
    }
    Ok((values.len(), (!values.is_empty()).then(|| mean(&values))))
}

/// Compares discourse features of inconsistent (label 0) and consistent
/// (label 1) summary sentences, and reports mean ASPL per dataset.
pub fn analyze(records: &[CorpusRecord], nodes: NodeSet) -> Result<Analysis> {
    let mut categories: [Vec<DepthCategory>; 2] = [vec![], vec![]];
    let mut values: [Vec<FeatureValues>; 2] = [vec![], vec![]];
    for rec in records {
        let (Some(tree), Some(labels)) = (&rec.summary_tree, &rec.sentence_labels) else { continue };
        let table = compute_edu_features(tree);
        for a in align_sentences(&rec.summary, tree).map_err(|e| Error::Corpus(format!("{}: {e}", rec.pair_id)))? {
            let (Some((lo, hi)), Some(cat)) = (a.edu_range, a.category) else { continue };
            let group = usize::from(labels[a.sentence_index - 1] == 1.0);
            categories[group].push(cat);
            values[group].push(sentence_features(&table, lo, hi)?);
        }
    }
    if values.iter().all(Vec::is_empty) {
        return Err(Error::Corpus("no aligned, labelled summary sentences to analyze".into()));
    }
    let tests = FeatureValues::default()
        .named()
        .iter()
        .enumerate()
        .map(|(k, (name, _))| {
            let col = |g: usize| values[g].iter().map(|v| v.named()[k].1).collect::<Vec<f64>>();
            let (inc, con) = (col(0), col(1));
            let w = welch_t_test(&inc, &con).ok();
            FeatureTest {
                feature: name,
                n_inconsistent: inc.len(),
                n_consistent: con.len(),
                mean_inconsistent: mean(&inc),
                mean_consistent: mean(&con),
                t: w.map(|w| w.t),
                p: w.map(|w| w.p),
            }
        })
        .collect();

    let mut by_tag: BTreeMap<&str, (Vec<&DiscourseTree>, Vec<&DiscourseTree>)> = BTreeMap::new();
    for rec in records {
        let entry = by_tag.entry(rec.dataset_tag.as_str()).or_default();
        entry.0.extend(rec.doc_tree.as_ref());
        entry.1.extend(rec.summary_tree.as_ref());
    }
    let mut aspl_rows = Vec::new();
    for (tag, (docs, sums)) in by_tag {
        let (documents, document_aspl) = mean_aspl(&docs, nodes)?;
        let (summaries, summary_aspl) = mean_aspl(&sums, nodes)?;
        aspl_rows.push(AsplRow { dataset_tag: tag.to_string(), documents, document_aspl, summaries, summary_aspl });
    }
    Ok(Analysis {
        inconsistent: histogram_of(&categories[0]).ok(),
        consistent: histogram_of(&categories[1]).ok(),
        tests,
        aspl: aspl_rows,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.4}"))
}

impl Analysis {
    pub fn to_text(&self) -> String {
        let mut s = String::from("depth categories\n");
        writeln!(s, "{:<14}  {:>5}  {:>8}  {:>10}  {:>8}", "group", "n", "split", "single_edu", "subtree").unwrap();
        for (name, h) in [("inconsistent", &self.inconsistent), ("consistent", &self.consistent)] {
            match h {
                Some(h) => writeln!(
                    s,
                    "{name:<14}  {:>5}  {:>8.4}  {:>10.4}  {:>8.4}",
                    h.count, h.split, h.single_edu, h.subtree
                ),
                None => writeln!(s, "{name:<14}  {:>5}  {:>8}  {:>10}  {:>8}", 0, "-", "-", "-"),
            }
            .unwrap();
        }
        s.push_str("\nwelch t-tests (inconsistent vs consistent)\n");
        writeln!(s, "{:<16}  {:>9}  {:>9}  {:>9}  {:>8}", "feature", "mean_inc", "mean_con", "t", "p").unwrap();
        for t in &self.tests {
            writeln!(
                s,
                "{:<16}  {:>9.4}  {:>9.4}  {:>9}  {:>8}",
                t.feature,
                t.mean_inconsistent,
                t.mean_consistent,
                fmt_opt(t.t),
                fmt_opt(t.p)
            )
            .unwrap();
        }
        s.push_str("\naverage shortest path length\n");
        let width = self.aspl.iter().map(|r| r.dataset_tag.len()).max().unwrap_or(0).max("dataset_tag".len());
        writeln!(s, "{:<width$}  {:>5}  {:>8}  {:>5}  {:>8}", "dataset_tag", "docs", "doc", "summs", "summ").unwrap();
        for r in &self.aspl {
            writeln!(
                s,
                "{:<width$}  {:>5}  {:>8}  {:>5}  {:>8}",
                r.dataset_tag,
                r.documents,
                fmt_opt(r.document_aspl),
                r.summaries,
                fmt_opt(r.summary_aspl)
            )
            .unwrap();
        }
        s
    }
}
