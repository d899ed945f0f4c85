//! Fetcher against a local scripted HTTP server.

use std::cell::RefCell;
use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use lsm_core::ingest::fetch::{fetch_project, FetchConfig, FetchError, Fetcher};
use serde_json::Value;

struct Reply {
    status: u16,
    headers: Vec<(String, String)>,
    body: String,
}

fn ok(body: &str) -> Reply {
    Reply {
        status: 200,
        headers: vec![],
        body: body.into(),
    }
}

type Router = dyn Fn(&str, usize) -> Reply + Send + Sync;

/// Serves `route(path, nth_hit_of_path)` until the test ends. Returns the base
/// URL and the log of requested paths.
fn serve(route: Box<Router>) -> (String, Arc<Mutex<Vec<String>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let log = Arc::new(Mutex::new(Vec::new()));
    let seen = log.clone();
    thread::spawn(move || {
        let mut hits: HashMap<String, usize> = HashMap::new();
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut line = String::new();
            if reader.read_line(&mut line).is_err() {
                continue;
            }
            let path = line.split_whitespace().nth(1).unwrap_or("/").to_string();
            loop {
                let mut h = String::new();
                if reader.read_line(&mut h).unwrap_or(0) == 0 || h == "\r\n" {
                    break;
                }
            }
            let n = hits.entry(path.clone()).or_default();
            let reply = route(&path, *n);
            *n += 1;
            seen.lock().unwrap().push(path);
            let mut head = format!(
                "HTTP/1.1 {} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n",
                reply.status,
                reply.body.len()
            );
            for (k, v) in &reply.headers {
                head.push_str(&format!("{k}: {v}\r\n"));
            }
            head.push_str("\r\n");
            let _ = stream.write_all(head.as_bytes());
            let _ = stream.write_all(reply.body.as_bytes());
        }
    });
    (base, log)
}

fn config(base: &str) -> FetchConfig {
    FetchConfig {
        api_base: base.to_string(),
        per_page: 1,
        ..FetchConfig::default()
    }
}

fn repo_router(base: String, commits_fail_first: bool) -> Box<Router> {
    Box::new(move |path, nth| {
        let p = path.trim_start_matches("/repos/o/r");
        match p {
            "" => ok(r#"{"full_name":"o/r","created_at":"2014-01-01T00:00:00Z"}"#),
            "/contributors?per_page=1&anon=0" => Reply {
                status: 200,
                headers: vec![(
                    "Link".into(),
                    format!(r#"<{base}/repos/o/r/contributors?page=2>; rel="next""#),
                )],
                body: r#"[{"login":"alice","contributions":5}]"#.into(),
            },
            "/contributors?page=2" => ok(r#"[{"login":"bob","contributions":1}]"#),
            "/issues?state=all&per_page=1" if nth == 0 => Reply {
                status: 429,
                headers: vec![("Retry-After".into(), "7".into())],
                body: "{}".into(),
            },
            "/commits?per_page=1" if commits_fail_first && nth == 0 => Reply {
                status: 502,
                headers: vec![],
                body: "bad gateway".into(),
            },
            "/users/alice" => ok(r#"{"login":"alice","created_at":"2012-03-04T05:06:07Z"}"#),
            "/users/bob" => Reply {
                status: 404,
                headers: vec![],
                body: "{}".into(),
            },
            _ => ok("[]"),
        }
    })
}

#[test]
fn follows_pages_waits_on_rate_limit_and_assembles_export() {
    let (base, log) = serve_repo(false);
    let dir = tempfile::tempdir().unwrap();
    let slept = RefCell::new(Vec::new());
    let summary = Fetcher::new("tok", dir.path(), config(&base))
        .with_clock(|| 0, |d| slept.borrow_mut().push(d))
        .run("o/r")
        .unwrap();
    assert_eq!(*slept.borrow(), [Duration::from_secs(7)]);
    assert_eq!(summary.waited, Duration::from_secs(7));
    assert_eq!(summary.records["contributors"], 2);

    let export: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("api_export.json")).unwrap()).unwrap();
    assert_eq!(export["repo"]["full_name"], "o/r");
    let contributors = export["contributors"].as_array().unwrap();
    assert_eq!(contributors.len(), 2);
    assert_eq!(contributors[0]["created_at"], "2012-03-04T05:06:07Z");
    assert!(contributors[1].get("created_at").is_none());
    let paths = log.lock().unwrap();
    assert_eq!(paths.iter().filter(|p| p.starts_with("/repos/o/r/issues?")).count(), 2);
    assert!(paths.iter().any(|p| p == "/repos/o/r/contributors?page=2"));
}

fn serve_repo(commits_fail_first: bool) -> (String, Arc<Mutex<Vec<String>>>) {
    // The router needs the base URL for Link headers, which is only known once
    // bound; a shared slot bridges the two.
    let slot: Arc<Mutex<String>> = Arc::new(Mutex::new(String::new()));
    let s = slot.clone();
    let (base, log) = serve(Box::new(move |path, nth| {
        let b = s.lock().unwrap().clone();
        repo_router(b, commits_fail_first)(path, nth)
    }));
    *slot.lock().unwrap() = base.clone();
    (base, log)
}

#[test]
fn resumes_from_cursor_after_server_error() {
    let (base, log) = serve_repo(true);
    let dir = tempfile::tempdir().unwrap();
    let first = Fetcher::new("", dir.path(), config(&base)).with_clock(|| 0, |_| {}).run("o/r");
    match first {
        Err(FetchError::Status { status: 502, url, .. }) => assert!(url.ends_with("/commits?per_page=1")),
        other => panic!("{other:?}"),
    }
    let cursor: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("cursor.json")).unwrap()).unwrap();
    assert!(cursor["pending"]["commits"].as_str().unwrap().ends_with("/commits?per_page=1"));
    let before = log.lock().unwrap().len();

    Fetcher::new("", dir.path(), config(&base)).with_clock(|| 0, |_| {}).run("o/r").unwrap();
    let paths = log.lock().unwrap();
    let second = &paths[before..];
    // Completed endpoints are not requested again.
    assert!(!second.iter().any(|p| p == "/repos/o/r" || p.starts_with("/repos/o/r/contributors")));
    assert!(second.iter().any(|p| p == "/repos/o/r/commits?per_page=1"));
    assert!(dir.path().join("api_export.json").is_file());
}

#[test]
fn unauthorized_is_reported() {
    let (base, _log) = serve(Box::new(|_, _| Reply {
        status: 401,
        headers: vec![],
        body: "{}".into(),
    }));
    let dir = tempfile::tempdir().unwrap();
    let err = fetch_project("o/r", "bad", dir.path(), config(&base)).unwrap_err();
    assert!(matches!(err, FetchError::Auth { status: 401, .. }), "{err:?}");
}

#[test]
fn rate_limit_without_reset_gives_up() {
    let (base, _log) = serve(Box::new(|_, _| Reply {
        status: 403,
        headers: vec![("X-RateLimit-Remaining".into(), "0".into())],
        body: "{}".into(),
    }));
    let dir = tempfile::tempdir().unwrap();
    let err = fetch_project("o/r", "t", dir.path(), config(&base)).unwrap_err();
    assert!(matches!(err, FetchError::RateLimitExhausted { .. }), "{err:?}");
}
