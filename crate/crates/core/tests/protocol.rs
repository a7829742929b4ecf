use std::path::Path;

use discofact::scorer::{
    builtin_overlap, Backend, ScoreCache, ScoreRequest, Scorer, ScorerSpec, SubprocessBackend,
};
use discofact::Error;

const STUB: &str = env!("CARGO_BIN_EXE_discofact-stub-scorer");

fn stub(args: &str) -> ScorerSpec {
    ScorerSpec::subprocess(format!("'{STUB}' {args}"))
}

fn requests(n: u64) -> Vec<ScoreRequest> {
    (0..n)
        .map(|i| ScoreRequest::new(i, format!("the river rose {i} feet overnight"), format!("the river rose {} feet", i % 3)))
        .collect()
}

fn expected(reqs: &[ScoreRequest]) -> Vec<f64> {
    reqs.iter().map(|r| builtin_overlap(&r.premise, &r.hypothesis)).collect()
}

fn log_lines(path: &Path) -> usize {
    std::fs::read_to_string(path).map(|s| s.lines().count()).unwrap_or(0)
}

#[test]
fn shuffled_responses_come_back_in_request_order() {
    let reqs = requests(50);
    let scorer = Scorer::new(stub("--mode shuffle --window 5")).unwrap();
    assert_eq!(scorer.score_pairs(&reqs).unwrap(), expected(&reqs));
    // the same child is reused for a second batch
    assert_eq!(scorer.score_pairs(&reqs[..7]).unwrap(), expected(&reqs[..7]));
}

#[test]
fn wire_format_is_one_object_per_line() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("calls.log");
    let backend = SubprocessBackend::new(&stub(&format!("--call-log '{}'", log.display()))).unwrap();
    backend.score(&[ScoreRequest::new(7, "p \"q\"", "h\u{e9}")]).unwrap();
    drop(backend);
    assert_eq!(std::fs::read_to_string(&log).unwrap(), "{\"id\":7,\"premise\":\"p \\\"q\\\"\",\"hypothesis\":\"h\u{e9}\"}\n");
}

#[test]
fn cache_replay_makes_no_backend_calls() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("calls.log");
    let cache = dir.path().join("cache.jsonl");
    let spec = stub(&format!("--mode shuffle --call-log '{}'", log.display()));
    let reqs = requests(20);

    let first = Scorer::new(spec.clone()).unwrap().with_cache(ScoreCache::open(&cache).unwrap());
    let a = first.score_pairs(&reqs).unwrap();
    drop(first);
    assert_eq!(log_lines(&log), 20);

    let second = Scorer::new(spec).unwrap().with_cache(ScoreCache::open(&cache).unwrap());
    let b = second.score_pairs(&reqs).unwrap();
    assert_eq!(a, b);
    assert_eq!(second.dispatched(), 0);
    drop(second);
    assert_eq!(log_lines(&log), 20);
}

#[test]
fn crashed_child_is_restarted_and_pending_requests_resent() {
    let dir = tempfile::tempdir().unwrap();
    let marker = dir.path().join("crashed");
    let reqs = requests(12);
    let scorer = Scorer::new(stub(&format!("--crash-after 3 --crash-marker '{}'", marker.display()))).unwrap();
    assert_eq!(scorer.score_pairs(&reqs).unwrap(), expected(&reqs));
    assert!(marker.exists());
}

#[test]
fn persistent_crashes_list_missing_ids() {
    // each of the three attempts answers two requests before dying
    let spec = ScorerSpec { max_in_flight: 1, ..stub("--crash-after 2") };
    let err = Scorer::new(spec).unwrap().score_pairs(&requests(10)).unwrap_err();
    match err {
        Error::PartialResponse { missing } => assert_eq!(missing, vec![6, 7, 8, 9]),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn silent_child_times_out_as_transport_error() {
    let spec = ScorerSpec { timeout_secs: 1, retries: 0, ..stub("--hang-after 1") };
    let err = Scorer::new(spec).unwrap().score_pairs(&requests(3)).unwrap_err();
    assert!(matches!(err, Error::Transport(_)), "{err:?}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn out_of_range_score_is_a_protocol_error() {
    let err = Scorer::new(stub("--bad-score-id 4")).unwrap().score_pairs(&requests(6)).unwrap_err();
    match err {
        Error::Protocol { id, .. } => assert_eq!(id, Some(4)),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn missing_program_is_a_transport_error() {
    let err = Scorer::new(ScorerSpec::subprocess("/nonexistent/scorer-binary")).unwrap().score_pairs(&requests(1)).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn concurrent_callers_share_one_backend() {
    let scorer = Scorer::new(stub("--mode shuffle --window 3")).unwrap();
    let reqs = requests(30);
    std::thread::scope(|s| {
        let handles: Vec<_> = reqs.chunks(10).map(|c| s.spawn(|| scorer.score_pairs(c).unwrap())).collect();
        let got: Vec<f64> = handles.into_iter().flat_map(|h| h.join().unwrap()).collect();
        assert_eq!(got, expected(&reqs));
    });
}
