mod common;

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};

use common::*;

struct Server {
    child: Child,
    addr: String,
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn start(index: &std::path::Path, extra: &[&str]) -> Server {
    let mut child = Command::new(TOOL)
        .args(["serve", "--index", path(index), "--addr", "127.0.0.1:0"])
        .args(extra)
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut stderr = BufReader::new(child.stderr.take().unwrap());
    let mut line = String::new();
    loop {
        line.clear();
        assert!(stderr.read_line(&mut line).unwrap() > 0, "server exited before listening");
        if let Some(addr) = line.trim().strip_prefix("listening on ") {
            let addr = addr.to_string();
            std::thread::spawn(move || std::io::copy(&mut stderr, &mut std::io::sink()));
            return Server { child, addr };
        }
    }
}

fn request(addr: &str, method: &str, target: &str, body: &str) -> (u16, String) {
    let mut s = TcpStream::connect(addr).unwrap();
    write!(
        s,
        "{method} {target} HTTP/1.1\r\nHost: {addr}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )
    .unwrap();
    let mut raw = String::new();
    s.read_to_string(&mut raw).unwrap();
    let (head, body) = raw.split_once("\r\n\r\n").unwrap();
    let status = head.split_whitespace().nth(1).unwrap().parse().unwrap();
    (status, body.to_string())
}

#[test]
fn http_matches_batch_resolution() {
    let dir = tempfile::tempdir().unwrap();
    let idx = build_index(dir.path(), "idx.bin");
    let corpus = fixture("corpus.jsonl");
    let server = start(&idx, &["--context", "2stage"]);

    let (status, body) = request(&server.addr, "GET", "/healthz", "");
    assert_eq!(status, 200);
    assert_eq!(serde_json::from_str::<serde_json::Value>(&body).unwrap()["status"], "ready");

    let fig1 = std::fs::read_to_string(&corpus).unwrap().lines().next().unwrap().to_string();
    let (status, body) = request(&server.addr, "POST", "/resolve", &fig1);
    assert_eq!(status, 200);
    let batch = ok(&tool(&["resolve", "--index", path(&idx), "--input", path(&corpus), "--context", "2stage"]));
    let expected: serde_json::Value = serde_json::from_str(batch.lines().next().unwrap()).unwrap();
    assert_eq!(serde_json::from_str::<serde_json::Value>(&body).unwrap(), expected);

    let bodies: Vec<String> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..8).map(|_| s.spawn(|| request(&server.addr, "POST", "/resolve", &fig1).1)).collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    assert!(bodies.iter().all(|b| *b == body));

    let bad_span = r#"{"doc_id":"x","text":"Paris","mentions":[{"start":0,"end":3,"surface":"Paris"}]}"#;
    assert_eq!(request(&server.addr, "POST", "/resolve", bad_span).0, 422);
    assert_eq!(request(&server.addr, "POST", "/resolve", "not json").0, 400);
    assert_eq!(request(&server.addr, "GET", "/nowhere", "").0, 404);
}

#[test]
fn bind_failure_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let idx = build_index(dir.path(), "idx.bin");
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = taken.local_addr().unwrap().to_string();
    let out = tool(&["serve", "--index", path(&idx), "--addr", &addr]);
    assert_eq!(out.status.code(), Some(2));
}
