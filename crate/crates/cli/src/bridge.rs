//! External reranker over a line-delimited JSON subprocess protocol.
//!
//! For each instance one request line is written to the child's stdin:
//!
//! ```json
//! {"mention": "Edmonton", "context_codes": ["CA", "01"],
//!  "candidates": [{"id": 5946768, "input_string": "[CLS] Edmonton | CA | 01 [SEP] ...",
//!                  "log_pop": 13.47, "type_code": "PPLA"}]}
//! ```
//!
//! and one response line is read back: `{"scores": [float, ...]}`, one score
//! per candidate. Scores go through a softmax. A malformed response falls back
//! to the built-in scorer for that instance; a timeout or a dead process
//! falls back for the rest of the run.

use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use toposieve::reranker::{softmax, to_input_string, CandidateScorer, RerankInstance};
use toposieve::{Error, Gazetteer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeCandidate {
    pub id: u64,
    pub input_string: String,
    pub log_pop: f64,
    pub type_code: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeRequest {
    pub mention: String,
    pub context_codes: Vec<String>,
    pub candidates: Vec<BridgeCandidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeResponse {
    pub scores: Vec<f64>,
}

impl BridgeRequest {
    pub fn new(g: &Gazetteer, instance: &RerankInstance) -> toposieve::Result<Self> {
        let candidates = instance
            .candidates
            .iter()
            .map(|c| {
                let e = g.lookup(c.entry_id).ok_or(Error::UnknownEntry(c.entry_id))?;
                Ok(BridgeCandidate {
                    id: e.id,
                    input_string: to_input_string(&instance.mention, e, &instance.context),
                    log_pop: (e.population as f64 + 1.0).ln(),
                    type_code: e.feature_code.clone(),
                })
            })
            .collect::<toposieve::Result<_>>()?;
        Ok(Self { mention: instance.mention.clone(), context_codes: instance.context.codes().to_vec(), candidates })
    }
}

#[derive(Debug, Clone)]
pub struct BridgeConfig {
    pub program: PathBuf,
    pub args: Vec<String>,
    pub timeout: Duration,
}

struct Process {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

impl Process {
    fn spawn(config: &BridgeConfig) -> std::io::Result<Self> {
        let mut child = Command::new(&config.program)
            .args(&config.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, lines) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self { child, stdin, lines })
    }

    /// Close stdin, give the process `grace` to exit, then kill it.
    fn shutdown(mut self, grace: Duration) {
        drop(self.stdin);
        let deadline = std::time::Instant::now() + grace;
        while std::time::Instant::now() < deadline {
            if matches!(self.child.try_wait(), Ok(Some(_))) {
                return;
            }
            std::thread::sleep(Duration::from_millis(10));
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

enum Exchange {
    Scores(Vec<f64>),
    /// The process answered, but not with usable scores.
    Malformed(String),
    /// The process is gone or stuck; stop using it.
    Dead(String),
}

/// Counts of how instances were scored.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BridgeStats {
    pub bridged: usize,
    pub fallbacks: usize,
}

pub struct BridgeScorer {
    config: BridgeConfig,
    process: Mutex<Option<Process>>,
    fallback: Box<dyn CandidateScorer>,
    bridged: AtomicUsize,
    fallbacks: AtomicUsize,
}

impl BridgeScorer {
    /// Start the bridge process. Spawn failures are reported to the caller.
    pub fn spawn(config: BridgeConfig, fallback: Box<dyn CandidateScorer>) -> std::io::Result<Self> {
        let process = Process::spawn(&config)?;
        Ok(Self {
            config,
            process: Mutex::new(Some(process)),
            fallback,
            bridged: AtomicUsize::new(0),
            fallbacks: AtomicUsize::new(0),
        })
    }

    pub fn stats(&self) -> BridgeStats {
        BridgeStats { bridged: self.bridged.load(Ordering::Relaxed), fallbacks: self.fallbacks.load(Ordering::Relaxed) }
    }

    /// Whether the process is still in use.
    pub fn is_alive(&self) -> bool {
        self.process.lock().unwrap().is_some()
    }

    fn exchange(&self, process: &mut Process, request: &BridgeRequest) -> Exchange {
        let mut line = match serde_json::to_string(request) {
            Ok(s) => s,
            Err(e) => return Exchange::Malformed(format!("cannot encode request: {e}")),
        };
        line.push('\n');
        if let Err(e) = process.stdin.write_all(line.as_bytes()).and_then(|_| process.stdin.flush()) {
            return Exchange::Dead(format!("write failed: {e}"));
        }
        let reply = match process.lines.recv_timeout(self.config.timeout) {
            Ok(Ok(reply)) => reply,
            Ok(Err(e)) => return Exchange::Dead(format!("read failed: {e}")),
            Err(RecvTimeoutError::Timeout) => return Exchange::Dead(format!("no response within {:?}", self.config.timeout)),
            Err(RecvTimeoutError::Disconnected) => return Exchange::Dead("process exited".into()),
        };
        match serde_json::from_str::<BridgeResponse>(&reply) {
            Ok(r) if r.scores.len() != request.candidates.len() => {
                Exchange::Malformed(format!("{} scores for {} candidates", r.scores.len(), request.candidates.len()))
            }
            Ok(r) if r.scores.iter().any(|s| !s.is_finite()) => Exchange::Malformed("non-finite score".into()),
            Ok(r) => Exchange::Scores(r.scores),
            Err(e) => Exchange::Malformed(format!("unparseable response: {e}")),
        }
    }

    fn fall_back(&self, g: &Gazetteer, instance: &RerankInstance) -> toposieve::Result<Vec<f64>> {
        self.fallbacks.fetch_add(1, Ordering::Relaxed);
        self.fallback.probabilities(g, instance)
    }
}

impl CandidateScorer for BridgeScorer {
    fn probabilities(&self, g: &Gazetteer, instance: &RerankInstance) -> toposieve::Result<Vec<f64>> {
        if instance.candidates.is_empty() {
            return Err(Error::NothingToRank);
        }
        let request = BridgeRequest::new(g, instance)?;
        let mut guard = self.process.lock().unwrap();
        let Some(process) = guard.as_mut() else {
            drop(guard);
            return self.fall_back(g, instance);
        };
        match self.exchange(process, &request) {
            Exchange::Scores(scores) => {
                self.bridged.fetch_add(1, Ordering::Relaxed);
                Ok(softmax(&scores))
            }
            Exchange::Malformed(why) => {
                drop(guard);
                log::warn!("bridge: {why}; using the built-in scorer for {:?}", instance.mention);
                self.fall_back(g, instance)
            }
            Exchange::Dead(why) => {
                log::warn!("bridge: {why}; using the built-in scorer from now on");
                if let Some(p) = guard.take() {
                    p.shutdown(Duration::ZERO);
                }
                drop(guard);
                self.fall_back(g, instance)
            }
        }
    }
}

impl Drop for BridgeScorer {
    fn drop(&mut self) {
        if let Some(p) = self.process.get_mut().ok().and_then(Option::take) {
            p.shutdown(Duration::from_secs(1));
        }
    }
}
