//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use discofact::aggregate::{reweight, DEFAULT_EPSILON};
use discofact::align::{align_sentences, DepthCategory};
use discofact::eval::{kendall_tau, paired_bootstrap, roc_auc, welch_t_test, Metric};
use discofact::features::compute_edu_features;
use discofact::rst::{DiscourseTree, Nuclearity, TreeNode};
use discofact::samples::{four_edu_tree, random_document, random_tree_over};
use discofact::scorer::{builtin_overlap, ScoreCache, ScoreRequest, Scorer, ScorerSpec};
use discofact::segment::{fallback_chunk, frontier_spans, plan_document, SegmentPlan, DEFAULT_CAPACITY};
use discofact::text::Document;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::ln_gamma;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let held: bool = $cond;
        if !held {
            return Err(format!($($fmt)+));
        }
    };
}

fn golden_vectors() -> Outcome {
    let start = Instant::now();
    let tree = four_edu_tree();
    let table = compute_edu_features(&tree);
    let elapsed = start.elapsed();
    ensure!(table.ono() == [1, 0, 0, 0], "ono {:?}", table.ono());
    ensure!(table.depth() == [3, 4, 4, 4], "depth {:?}", table.depth());
    ensure!(table.promotion() == [0, 3, 3, 2], "promotion {:?}", table.promotion());
    ensure!(table.tree_depth() == 4, "D = {}", table.tree_depth());
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!("ono/depth/promotion exact, D=4, {elapsed:?} < 1s"))
}

fn split_sentence_height() -> Outcome {
    // 28 EDUs; EDUs 24..=28 cross the boundary between subtrees 1-25 and 26-28
    let leaf = |i, n| TreeNode::leaf(i, n, "span");
    fn right_chain(lo: usize, hi: usize, nuc: Nuclearity) -> TreeNode {
        if lo == hi {
            return TreeNode::leaf(lo, nuc, "span");
        }
        TreeNode::internal(
            nuc,
            "elaboration",
            vec![TreeNode::leaf(lo, Nuclearity::Nucleus, "span"), right_chain(lo + 1, hi, Nuclearity::Satellite)],
        )
    }
    let root = TreeNode::internal(
        Nuclearity::Root,
        "span",
        vec![
            right_chain(1, 25, Nuclearity::Nucleus),
            TreeNode::internal(
                Nuclearity::Satellite,
                "list",
                vec![leaf(26, Nuclearity::Nucleus), leaf(27, Nuclearity::Nucleus), leaf(28, Nuclearity::Nucleus)],
            ),
        ],
    );
    let edus: Vec<String> = (1..=28).map(|i| format!("segment{i} text")).collect();
    let refs: Vec<&str> = edus.iter().map(String::as_str).collect();
    let tree = DiscourseTree::from_edu_texts("split", &refs, root).map_err(|e| e.to_string())?;
    let mut sentences: Vec<String> = edus[..23].to_vec();
    sentences.push(edus[23..].join(" "));
    let doc = Document::from_sentences(&sentences).map_err(|e| e.to_string())?;
    let last = align_sentences(&doc, &tree).map_err(|e| e.to_string())?.pop().unwrap();
    ensure!(last.edu_range == Some((24, 28)), "range {:?}", last.edu_range);
    ensure!(last.category == Some(DepthCategory::Split), "category {:?}", last.category);
    ensure!(last.subtree_height == 2.0, "height {}", last.subtree_height);
    Ok("EDUs 24-28 split, height == 2.0 exactly".into())
}

fn reweight_fixed_points() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let s = rng.random_range(DEFAULT_EPSILON..=1.0);
        let x = rng.random_range(0.0..=1.0);
        let alpha = rng.random_range(0.0..5.0);
        let out = reweight(&[s], &[x], &[0.0], alpha, DEFAULT_EPSILON).map_err(|e| e.to_string())?;
        worst = worst.max((out[0] - s).abs());

        let j = rng.random_range(1..=12);
        let scores: Vec<f64> = (0..j).map(|_| rng.random_range(DEFAULT_EPSILON..=1.0)).collect();
        let out = reweight(&scores, &vec![x; j], &vec![0.0; j], alpha, DEFAULT_EPSILON).map_err(|e| e.to_string())?;
        for (a, b) in out.iter().zip(&scores) {
            worst = worst.max((a - b).abs());
        }
    }
    ensure!(worst <= 1e-12, "fixed-point deviation {worst:e}");

    let mut draws = 0;
    while draws < 100_000 {
        let j = rng.random_range(1..=8);
        let s: Vec<f64> = (0..j).map(|_| if rng.random_bool(0.05) { 0.0 } else { rng.random_range(0.0..=1.0) }).collect();
        let x: Vec<f64> = (0..j).map(|_| rng.random_range(0.0..=1.0)).collect();
        let h: Vec<f64> = (0..j).map(|_| rng.random_range(0.0..10.0)).collect();
        let alpha = rng.random_range(0.0..5.0);
        let out = reweight(&s, &x, &h, alpha, DEFAULT_EPSILON).map_err(|e| e.to_string())?;
        ensure!(out.iter().all(|v| (0.0..=1.0).contains(v)), "out of range for s={s:?} x={x:?} h={h:?} alpha={alpha}");
        draws += j;
    }
    Ok(format!("max fixed-point deviation {worst:e} <= 1e-12; {draws} sentence draws stay in [0, 1]"))
}

fn brute_auc(labels: &[bool], scores: &[f64]) -> f64 {
    let (mut twice, mut pairs) = (0u64, 0u64);
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li && !lj {
                pairs += 1;
                twice += if scores[i] > scores[j] { 2 } else if scores[i] == scores[j] { 1 } else { 0 };
            }
        }
    }
    twice as f64 / (2 * pairs) as f64
}

fn brute_tau(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let (mut c, mut d, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let (dx, dy) = (x[i] - x[j], y[i] - y[j]);
            if dx == 0.0 {
                tx += 1;
            }
            if dy == 0.0 {
                ty += 1;
            }
            if dx * dy > 0.0 {
                c += 1;
            } else if dx * dy < 0.0 {
                d += 1;
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    (c - d) as f64 / ((n0 - tx) as f64 * (n0 - ty) as f64).sqrt()
}

/// Two-sided Student-t p-value by composite Gauss-Legendre quadrature of the
/// density over [0, |t|].
fn quadrature_t_p(t: f64, df: f64) -> f64 {
    let log_c = ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0) - 0.5 * (df * std::f64::consts::PI).ln();
    let pdf = |u: f64| (log_c - (df + 1.0) / 2.0 * (1.0 + u * u / df).ln()).exp();
    // 5-point Gauss-Legendre nodes and weights on [-1, 1]
    const NODES: [(f64, f64); 5] = [
        (0.0, 0.568_888_888_888_888_9),
        (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
        (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
        (-0.906_179_845_938_664, 0.236_926_885_056_189_08),
        (0.906_179_845_938_664, 0.236_926_885_056_189_08),
    ];
    let panels = 4000;
    let width = t.abs() / panels as f64;
    let mut area = 0.0;
    for k in 0..panels {
        let mid = (k as f64 + 0.5) * width;
        area += NODES.iter().map(|&(z, w)| w * pdf(mid + z * width / 2.0)).sum::<f64>() * width / 2.0;
    }
    1.0 - 2.0 * area
}

fn welch_oracle(a: &[f64], b: &[f64]) -> (f64, f64) {
    let stats = |v: &[f64]| {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        (m, v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0) / n, n)
    };
    let (ma, sa, na) = stats(a);
    let (mb, sb, nb) = stats(b);
    let t = (ma - mb) / (sa + sb).sqrt();
    let df = (sa + sb).powi(2) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    (t, quadrature_t_p(t, df))
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..100 {
        let n = rng.random_range(2..=50);
        let mut labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        labels[0] = true;
        labels[1] = false;
        // coarse grid so ties are common
        let scores: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..8u8)) / 8.0).collect();
        let got = roc_auc(&labels, &scores).map_err(|e| e.to_string())?;
        let want = brute_auc(&labels, &scores);
        ensure!(got == want, "AUC case {case}: {got} != {want}");
    }
    for case in 0..100 {
        let n = rng.random_range(2..=50);
        let x: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..6u8))).collect();
        let mut y: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..6u8))).collect();
        let mut x = x;
        x[0] = -1.0;
        y[1] = -1.0;
        let got = kendall_tau(&x, &y).map_err(|e| e.to_string())?;
        let want = brute_tau(&x, &y);
        ensure!(got == want, "tau case {case}: {got} != {want}");
    }
    let mut worst: f64 = 0.0;
    let mut samples = vec![(vec![2.1, 2.5, 2.3, 2.7], vec![1.9, 2.0, 2.2])];
    for _ in 0..50 {
        let na = rng.random_range(2..20);
        let nb = rng.random_range(2..20);
        let shift = rng.random_range(0.0..2.0);
        samples.push((
            (0..na).map(|_| rng.random_range(0.0..3.0) + shift).collect(),
            (0..nb).map(|_| rng.random_range(0.0..3.0)).collect(),
        ));
    }
    for (a, b) in &samples {
        let w = welch_t_test(a, b).map_err(|e| e.to_string())?;
        let (t, p) = welch_oracle(a, b);
        ensure!((w.t - t).abs() <= 1e-6 && (w.p - p).abs() <= 1e-6, "welch t={} p={} vs oracle t={t} p={p}", w.t, w.p);
        worst = worst.max((w.p - p).abs());
    }
    Ok(format!("AUC and tau-b exact on 100 instances each; Welch p within {worst:.1e} <= 1e-6 on {} samples", samples.len()))
}

fn tiles(plan: &SegmentPlan, n: usize) -> bool {
    let mut next = 1;
    for (first, last) in plan.sentence_ranges() {
        if first != next || last < first {
            return false;
        }
        next = last + 1;
    }
    next == n + 1
}

fn segmentation_invariants() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut rechunked, mut oversized, mut plans) = (0, 0, 0);
    for case in 0..200 {
        let n = rng.random_range(1..=60);
        let max_words = if case % 10 == 0 { 400 } else { 90 };
        let mut doc = random_document(&mut rng, n, 1, max_words);
        if n > 3 && rng.random_bool(0.3) {
            doc = doc.with_article_starts(vec![rng.random_range(2..=n)]).map_err(|e| e.to_string())?;
        }
        let tree = random_tree_over(&mut rng, &doc, 12, 4);

        let lv1 = frontier_spans(&tree, 1).map_err(|e| e.to_string())?;
        let lv2 = frontier_spans(&tree, 2).map_err(|e| e.to_string())?;
        ensure!(
            lv2.iter().all(|&(lo, hi)| lv1.iter().any(|&(a, b)| a <= lo && hi <= b)),
            "case {case}: level-2 spans {lv2:?} do not refine {lv1:?}"
        );

        let candidates = [
            plan_document(&doc, Some(&tree), Some(1), DEFAULT_CAPACITY),
            plan_document(&doc, Some(&tree), Some(2), DEFAULT_CAPACITY),
            fallback_chunk(&doc, DEFAULT_CAPACITY),
        ];
        for plan in candidates {
            let plan = plan.map_err(|e| format!("case {case}: {e}"))?;
            plans += 1;
            ensure!(tiles(&plan, doc.len()), "case {case}: {:?} does not tile {} sentences", plan.sentence_ranges(), doc.len());
            for seg in &plan.segments {
                if seg.oversized {
                    oversized += 1;
                    ensure!(seg.first_sentence == seg.last_sentence && seg.word_count > DEFAULT_CAPACITY, "case {case}: bad oversized flag");
                } else {
                    ensure!(seg.word_count <= DEFAULT_CAPACITY, "case {case}: segment of {} words", seg.word_count);
                }
                ensure!(
                    (seg.first_sentence + 1..=seg.last_sentence).all(|i| !doc.is_article_start(i)),
                    "case {case}: segment crosses an article start"
                );
                rechunked += usize::from(seg.provenance == discofact::segment::Provenance::Rechunked);
            }
        }
    }
    let elapsed = start.elapsed();
    ensure!(rechunked > 0 && oversized > 0, "rechunked {rechunked}, oversized {oversized}: generator too tame");
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!("{plans} plans tile; Lv2 refines Lv1; {rechunked} rechunked and {oversized} oversized segments; {elapsed:?} < 10s"))
}

fn bootstrap_calibration() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 200;
    let gold: Vec<f64> = (0..n).map(|i| f64::from(u8::from(i % 2 == 0))).collect();
    let noise = |rng: &mut ChaCha8Rng| rng.random_range(0.0..1.0);
    let same: Vec<f64> = (0..n).map(|_| noise(&mut rng)).collect();
    let p_same = paired_bootstrap(Metric::RocAuc, &gold, &same, &same, 10_000, 7).map_err(|e| e.to_string())?;
    ensure!(p_same.p_value >= 0.9, "identical systems p = {}", p_same.p_value);

    // labels shift the score by a margin tuned for AUC near 0.85 vs 0.65
    let system = |margin: f64, rng: &mut ChaCha8Rng| -> Vec<f64> {
        gold.iter().map(|&g| g * margin + rng.random_range(0.0..1.0)).collect()
    };
    let a = system(0.5, &mut rng);
    let b = system(0.16, &mut rng);
    let r = paired_bootstrap(Metric::RocAuc, &gold, &a, &b, 10_000, 7).map_err(|e| e.to_string())?;
    let gap = r.metric_a - r.metric_b;
    ensure!((0.15..=0.25).contains(&gap), "AUC gap {gap:.3} is not about 20 points");
    ensure!(r.p_value < 0.01, "p = {} for a {gap:.3} gap", r.p_value);
    let again = paired_bootstrap(Metric::RocAuc, &gold, &a, &b, 10_000, 7).map_err(|e| e.to_string())?;
    ensure!(again.p_value == r.p_value, "same seed gave {} then {}", r.p_value, again.p_value);
    Ok(format!(
        "identical p = {} >= 0.9; gap {:.3} gives p = {} < 0.01; same seed reproduces p (B=10000)",
        p_same.p_value, gap, r.p_value
    ))
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/corpus")
}

fn cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_discofact")).args(args).output().map_err(|e| e.to_string())?;
    ensure!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    Ok(())
}

fn read_normalized(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map(|s| s.replace("\r\n", "\n")).map_err(|e| format!("{}: {e}", path.display()))
}

fn end_to_end_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let manifest = fixtures().join("manifest.jsonl");
    let m = manifest.to_str().unwrap();
    let mut runs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}"));
        let o = out.to_str().unwrap();
        cli(&["score", "--manifest", m, "--out", o])?;
        let report = out.join("scores.jsonl");
        let eval = out.join("eval.txt");
        cli(&["eval", "--manifest", m, "--report", report.to_str().unwrap(), "--macro", "--out", eval.to_str().unwrap()])?;
        runs.push((read_normalized(&report)?, read_normalized(&eval)?));
    }
    ensure!(runs[0] == runs[1], "runs differ");
    let lines = runs[0].0.lines().count();
    Ok(format!("score report ({lines} lines) and eval table byte-identical across two runs"))
}

fn protocol_conformance() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let log = dir.path().join("calls.log");
    let cache = dir.path().join("cache.jsonl");
    let stub = env!("CARGO_BIN_EXE_discofact-stub-scorer");
    let spec = ScorerSpec::subprocess(format!("'{stub}' --mode shuffle --window 6 --call-log '{}'", log.display()));
    let requests: Vec<ScoreRequest> = (0..40)
        .map(|i| ScoreRequest::new(i, format!("segment {i} about tides and {} moons", i % 5), format!("tides and {i} moons")))
        .collect();
    let want: Vec<f64> = requests.iter().map(|r| builtin_overlap(&r.premise, &r.hypothesis)).collect();

    let first = Scorer::new(spec.clone()).map_err(|e| e.to_string())?.with_cache(ScoreCache::open(&cache).map_err(|e| e.to_string())?);
    let got = first.score_pairs(&requests).map_err(|e| e.to_string())?;
    drop(first);
    ensure!(got == want, "shuffled stub returned scores out of order");
    let calls = fs::read_to_string(&log).map_err(|e| e.to_string())?.lines().count();
    ensure!(calls == 40, "first run made {calls} calls");

    let second = Scorer::new(spec).map_err(|e| e.to_string())?.with_cache(ScoreCache::open(&cache).map_err(|e| e.to_string())?);
    let replay = second.score_pairs(&requests).map_err(|e| e.to_string())?;
    let dispatched = second.dispatched();
    drop(second);
    let calls_after = fs::read_to_string(&log).map_err(|e| e.to_string())?.lines().count();
    ensure!(replay == want, "cache replay changed scores");
    ensure!(dispatched == 0 && calls_after == calls, "replay made {dispatched} dispatches, log grew to {calls_after}");
    Ok("40 shuffled responses reordered correctly; cache replay made 0 backend calls".into())
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("golden feature vectors", golden_vectors),
        ("split-sentence square-root height", split_sentence_height),
        ("re-weighting fixed points and range", reweight_fixed_points),
        ("metric oracles", metric_oracles),
        ("segmentation invariants", segmentation_invariants),
        ("bootstrap calibration", bootstrap_calibration),
        ("end-to-end determinism", end_to_end_determinism),
        ("protocol conformance", protocol_conformance),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
