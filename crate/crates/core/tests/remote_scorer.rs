//! Wire-protocol tests for the remote scorer client against a stub
//! HTTP server.

use std::io::{Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use mtrl_core::scorer::{RemoteScorer, ScoreError, ScoreRequest, SemanticScorer};

/// Serves `n` requests, replying with `body` after `delay`, and
/// records the peak number of concurrently open requests.
fn stub_server(
    n: usize,
    status_line: &'static str,
    body: &'static str,
    delay: Duration,
) -> (String, Arc<AtomicUsize>, thread::JoinHandle<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let endpoint = format!("http://{}", listener.local_addr().unwrap());
    let peak = Arc::new(AtomicUsize::new(0));
    let live = Arc::new(AtomicUsize::new(0));
    let peak_clone = Arc::clone(&peak);
    let handle = thread::spawn(move || {
        let mut workers = Vec::new();
        for _ in 0..n {
            let (mut stream, _) = listener.accept().unwrap();
            let live = Arc::clone(&live);
            let peak = Arc::clone(&peak_clone);
            workers.push(thread::spawn(move || {
                let now = live.fetch_add(1, Ordering::SeqCst) + 1;
                peak.fetch_max(now, Ordering::SeqCst);
                let mut buf = Vec::new();
                let mut chunk = [0u8; 1024];
                // Read headers, then the announced body length.
                let body_len;
                loop {
                    let k = stream.read(&mut chunk).unwrap();
                    buf.extend_from_slice(&chunk[..k]);
                    if let Some(pos) = find_header_end(&buf) {
                        let headers = String::from_utf8_lossy(&buf[..pos]).to_lowercase();
                        let want: usize = headers
                            .lines()
                            .find_map(|l| l.strip_prefix("content-length:"))
                            .map(|v| v.trim().parse().unwrap())
                            .unwrap_or(0);
                        while buf.len() < pos + 4 + want {
                            let k = stream.read(&mut chunk).unwrap();
                            buf.extend_from_slice(&chunk[..k]);
                        }
                        body_len = want;
                        let _ = body_len;
                        break;
                    }
                }
                thread::sleep(delay);
                let response = format!(
                    "{status_line}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                );
                stream.write_all(response.as_bytes()).unwrap();
                live.fetch_sub(1, Ordering::SeqCst);
            }));
        }
        for w in workers {
            let _ = w.join();
        }
    });
    (endpoint, peak, handle)
}

fn find_header_end(buf: &[u8]) -> Option<usize> {
    buf.windows(4).position(|w| w == b"\r\n\r\n")
}

fn request() -> ScoreRequest {
    ScoreRequest {
        src: "s0 s1".into(),
        trans: "t0 t1".into(),
        reference: Some("t0 t1".into()),
    }
}

#[test]
fn happy_path_returns_the_service_score() {
    let (endpoint, _, server) =
        stub_server(1, "HTTP/1.1 200 OK", r#"{"score": 0.73}"#, Duration::ZERO);
    let scorer = RemoteScorer::new(&endpoint, Duration::from_secs(2), 4).unwrap();
    let got = scorer.score(&request()).unwrap();
    assert!((got - 0.73).abs() < 1e-12);
    server.join().unwrap();
}

#[test]
fn out_of_range_score_is_a_protocol_error() {
    let (endpoint, _, server) =
        stub_server(1, "HTTP/1.1 200 OK", r#"{"score": 1.7}"#, Duration::ZERO);
    let scorer = RemoteScorer::new(&endpoint, Duration::from_secs(2), 4).unwrap();
    let err = scorer.score(&request()).unwrap_err();
    assert!(matches!(err, ScoreError::ScoreOutOfRange(v) if (v - 1.7).abs() < 1e-12));
    assert!(!err.is_retriable());
    server.join().unwrap();
}

#[test]
fn malformed_body_is_retriable() {
    let (endpoint, _, server) =
        stub_server(1, "HTTP/1.1 200 OK", r#"{"scor"#, Duration::ZERO);
    let scorer = RemoteScorer::new(&endpoint, Duration::from_secs(2), 4).unwrap();
    let err = scorer.score(&request()).unwrap_err();
    assert!(matches!(err, ScoreError::Malformed(_)));
    assert!(err.is_retriable());
    server.join().unwrap();
}

#[test]
fn non_success_status_is_reported() {
    let (endpoint, _, server) = stub_server(
        1,
        "HTTP/1.1 503 Service Unavailable",
        r#"{"score": 0.5}"#,
        Duration::ZERO,
    );
    let scorer = RemoteScorer::new(&endpoint, Duration::from_secs(2), 4).unwrap();
    let err = scorer.score(&request()).unwrap_err();
    assert!(matches!(err, ScoreError::Status(503)));
    assert!(err.is_retriable());
    server.join().unwrap();
}

#[test]
fn slow_service_times_out() {
    let (endpoint, _, server) = stub_server(
        1,
        "HTTP/1.1 200 OK",
        r#"{"score": 0.5}"#,
        Duration::from_millis(900),
    );
    let scorer = RemoteScorer::new(&endpoint, Duration::from_millis(150), 4).unwrap();
    let err = scorer.score(&request()).unwrap_err();
    assert!(matches!(err, ScoreError::Timeout(_)), "{err:?}");
    assert!(err.is_retriable());
    server.join().unwrap();
}

#[test]
fn in_flight_requests_are_bounded() {
    let (endpoint, peak, server) = stub_server(
        8,
        "HTTP/1.1 200 OK",
        r#"{"score": 0.25}"#,
        Duration::from_millis(120),
    );
    let scorer = Arc::new(RemoteScorer::new(&endpoint, Duration::from_secs(5), 2).unwrap());
    let mut clients = Vec::new();
    for _ in 0..8 {
        let scorer = Arc::clone(&scorer);
        clients.push(thread::spawn(move || scorer.score(&request()).unwrap()));
    }
    for c in clients {
        assert!((c.join().unwrap() - 0.25).abs() < 1e-12);
    }
    assert!(
        peak.load(Ordering::SeqCst) <= 2,
        "peak concurrency {} exceeded the in-flight bound",
        peak.load(Ordering::SeqCst)
    );
    server.join().unwrap();
}
