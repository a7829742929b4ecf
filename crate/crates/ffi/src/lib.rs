//! C ABI over the discofact library.
//!
//! Every fallible function returns a [`DfcStatus`]; on failure a message is
//! available from [`dfc_last_error`] on the same thread. Handles are opaque
//! and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use discofact::aggregate::reweight;
use discofact::error::exit_code;
use discofact::eval::{aspl, kendall_tau, paired_bootstrap, roc_auc, welch_t_test, Metric, NodeSet};
use discofact::features::compute_edu_features;
use discofact::rst::DiscourseTree;
use discofact::scorer::{builtin_overlap, ScoreCache, ScoreRequest, Scorer, ScorerSpec};
use discofact::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DfcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidInput = 3,
    Backend = 4,
    BufferTooSmall = 5,
    Internal = 6,
}

/// A validated discourse tree.
pub struct DfcTree(DiscourseTree);

/// A scorer together with its optional cache.
pub struct DfcScorer(Scorer);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DfcEduFeatures {
    pub ono: u32,
    pub depth: u32,
    pub promo: u32,
    pub ono_norm: f64,
    pub depth_norm: f64,
    pub promo_norm: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DfcWelch {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DfcMetric {
    RocAuc = 0,
    KendallTau = 1,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> DfcStatus {
    match err.exit_code() {
        exit_code::BACKEND => DfcStatus::Backend,
        exit_code::INTERNAL => DfcStatus::Internal,
        _ => DfcStatus::InvalidInput,
    }
}

struct Fail(DfcStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(DfcStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, turning errors and panics into a status plus a thread-local message.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> DfcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DfcStatus::Ok,
        Ok(Err(Fail(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            DfcStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(DfcStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dfc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dfc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a canonical tree JSON document. On success `*out` owns a new handle.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dfc_tree_from_json(json: *const c_char, out: *mut *mut DfcTree) -> DfcStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let tree = DiscourseTree::from_json(str_arg(json, "json")?)?;
        *out = Box::into_raw(Box::new(DfcTree(tree)));
        Ok(())
    })
}

/// # Safety
/// `tree` must come from [`dfc_tree_from_json`] and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn dfc_tree_free(tree: *mut DfcTree) {
    if !tree.is_null() {
        drop(Box::from_raw(tree));
    }
}

/// Number of EDUs, or 0 for a NULL handle.
///
/// # Safety
/// `tree` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dfc_tree_edu_count(tree: *const DfcTree) -> usize {
    tree.as_ref().map_or(0, |t| t.0.edu_count())
}

/// Tree depth D: one more than the deepest leaf level.
///
/// # Safety
/// `tree` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dfc_tree_depth(tree: *const DfcTree, out: *mut u32) -> DfcStatus {
    guard(|| {
        let tree = tree.as_ref().ok_or_else(|| null("tree"))?;
        *out_arg(out, "out")? = tree.0.depth();
        Ok(())
    })
}

/// Writes the features of every EDU, in EDU order, to `out[0..len]`.
/// Fails with `BUFFER_TOO_SMALL` when `len` is below the EDU count.
///
/// # Safety
/// `tree` must be a live handle and `out` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn dfc_tree_features(tree: *const DfcTree, out: *mut DfcEduFeatures, len: usize) -> DfcStatus {
    guard(|| {
        let tree = tree.as_ref().ok_or_else(|| null("tree"))?;
        let n = tree.0.edu_count();
        if len < n {
            return Err(Fail(DfcStatus::BufferTooSmall, format!("need room for {n} EDUs, got {len}")));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let out = slice::from_raw_parts_mut(out, n);
        for (slot, (_, v)) in out.iter_mut().zip(compute_edu_features(&tree.0).iter()) {
            *slot = DfcEduFeatures {
                ono: v.ono,
                depth: v.depth,
                promo: v.promo,
                ono_norm: v.ono_norm,
                depth_norm: v.depth_norm,
                promo_norm: v.promo_norm,
            };
        }
        Ok(())
    })
}

/// Average shortest path length over all nodes, or over leaves only.
///
/// # Safety
/// `tree` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dfc_tree_aspl(tree: *const DfcTree, leaves_only: bool, out: *mut f64) -> DfcStatus {
    guard(|| {
        let tree = tree.as_ref().ok_or_else(|| null("tree"))?;
        let nodes = if leaves_only { NodeSet::Leaves } else { NodeSet::AllNodes };
        *out_arg(out, "out")? = aspl(&tree.0, nodes)?;
        Ok(())
    })
}

/// Discourse re-weighting of `n` sentence scores into `out[0..n]`.
///
/// # Safety
/// The input arrays must hold `n` values and `out` must have room for `n`.
#[no_mangle]
pub unsafe extern "C" fn dfc_reweight(
    scores: *const f64,
    depth_norms: *const f64,
    heights: *const f64,
    n: usize,
    alpha: f64,
    epsilon: f64,
    out: *mut f64,
) -> DfcStatus {
    guard(|| {
        let s = slice_arg(scores, n, "scores")?;
        let x = slice_arg(depth_norms, n, "depth_norms")?;
        let h = slice_arg(heights, n, "heights")?;
        let values = reweight(s, x, h, alpha, epsilon)?;
        if out.is_null() {
            return Err(null("out"));
        }
        slice::from_raw_parts_mut(out, n).copy_from_slice(&values);
        Ok(())
    })
}

/// Token F1 of two strings.
///
/// # Safety
/// Both strings must be NUL-terminated and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dfc_builtin_overlap(premise: *const c_char, hypothesis: *const c_char, out: *mut f64) -> DfcStatus {
    guard(|| {
        let p = str_arg(premise, "premise")?;
        let h = str_arg(hypothesis, "hypothesis")?;
        *out_arg(out, "out")? = builtin_overlap(p, h);
        Ok(())
    })
}

/// ROC-AUC of `n` scores; `labels` holds 0 or 1 per item.
///
/// # Safety
/// Arrays must hold `n` values and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn dfc_roc_auc(labels: *const u8, scores: *const f64, n: usize, out: *mut f64) -> DfcStatus {
    guard(|| {
        let labels = slice_arg(labels, n, "labels")?;
        if labels.iter().any(|&l| l > 1) {
            return Err(Fail(DfcStatus::InvalidInput, "labels must be 0 or 1".into()));
        }
        let labels: Vec<bool> = labels.iter().map(|&l| l == 1).collect();
        *out_arg(out, "out")? = roc_auc(&labels, slice_arg(scores, n, "scores")?)?;
        Ok(())
    })
}

/// Kendall's tau-b of two length-`n` series.
///
/// # Safety
/// Arrays must hold `n` values and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn dfc_kendall_tau(x: *const f64, y: *const f64, n: usize, out: *mut f64) -> DfcStatus {
    guard(|| {
        *out_arg(out, "out")? = kendall_tau(slice_arg(x, n, "x")?, slice_arg(y, n, "y")?)?;
        Ok(())
    })
}

/// Welch's two-sided t-test.
///
/// # Safety
/// `a` must hold `na` values, `b` `nb` values, and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn dfc_welch_t_test(
    a: *const f64,
    na: usize,
    b: *const f64,
    nb: usize,
    out: *mut DfcWelch,
) -> DfcStatus {
    guard(|| {
        let w = welch_t_test(slice_arg(a, na, "a")?, slice_arg(b, nb, "b")?)?;
        *out_arg(out, "out")? = DfcWelch { t: w.t, df: w.df, p: w.p };
        Ok(())
    })
}

/// One-sided paired bootstrap p-value for "A improves over B". `metric` is a
/// [`DfcMetric`] value.
///
/// # Safety
/// `gold`, `a` and `b` must hold `n` values and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn dfc_paired_bootstrap(
    metric: u32,
    gold: *const f64,
    a: *const f64,
    b: *const f64,
    n: usize,
    resamples: usize,
    seed: u64,
    out: *mut f64,
) -> DfcStatus {
    guard(|| {
        let metric = match metric {
            m if m == DfcMetric::RocAuc as u32 => Metric::RocAuc,
            m if m == DfcMetric::KendallTau as u32 => Metric::KendallTau,
            m => return Err(Fail(DfcStatus::InvalidInput, format!("unknown metric {m}"))),
        };
        let r = paired_bootstrap(
            metric,
            slice_arg(gold, n, "gold")?,
            slice_arg(a, n, "a")?,
            slice_arg(b, n, "b")?,
            resamples,
            seed,
        )?;
        *out_arg(out, "out")? = r.p_value;
        Ok(())
    })
}

/// Creates a scorer from `builtin`, `subprocess:<command>` or `http:<url>`.
/// `cache_path` may be NULL for no cache.
///
/// # Safety
/// `spec` must be NUL-terminated, `cache_path` NULL or NUL-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn dfc_scorer_new(spec: *const c_char, cache_path: *const c_char, out: *mut *mut DfcScorer) -> DfcStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let mut scorer = Scorer::new(ScorerSpec::parse(str_arg(spec, "spec")?)?)?;
        if !cache_path.is_null() {
            scorer = scorer.with_cache(ScoreCache::open(Path::new(str_arg(cache_path, "cache_path")?))?);
        }
        *out = Box::into_raw(Box::new(DfcScorer(scorer)));
        Ok(())
    })
}

/// # Safety
/// `scorer` must come from [`dfc_scorer_new`] and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn dfc_scorer_free(scorer: *mut DfcScorer) {
    if !scorer.is_null() {
        drop(Box::from_raw(scorer));
    }
}

/// Scores `n` premise/hypothesis pairs into `out[0..n]`, in order.
///
/// # Safety
/// `premises` and `hypotheses` must each hold `n` NUL-terminated strings and
/// `out` must have room for `n` values.
#[no_mangle]
pub unsafe extern "C" fn dfc_scorer_score(
    scorer: *const DfcScorer,
    premises: *const *const c_char,
    hypotheses: *const *const c_char,
    n: usize,
    out: *mut f64,
) -> DfcStatus {
    guard(|| {
        let scorer = scorer.as_ref().ok_or_else(|| null("scorer"))?;
        let premises = slice_arg(premises, n, "premises")?;
        let hypotheses = slice_arg(hypotheses, n, "hypotheses")?;
        let mut requests = Vec::with_capacity(n);
        for i in 0..n {
            requests.push(ScoreRequest::new(
                i as u64,
                str_arg(premises[i], "premise")?,
                str_arg(hypotheses[i], "hypothesis")?,
            ));
        }
        let scores = scorer.0.score_pairs(&requests)?;
        if out.is_null() {
            return Err(null("out"));
        }
        slice::from_raw_parts_mut(out, n).copy_from_slice(&scores);
        Ok(())
    })
}

/// Number of requests this scorer has sent to its backend.
///
/// # Safety
/// `scorer` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dfc_scorer_dispatched(scorer: *const DfcScorer) -> u64 {
    scorer.as_ref().map_or(0, |s| s.0.dispatched())
}
