//! Reference implementation of the reranker bridge protocol, for testing
//! and as a template for real rerankers.
//!
//! Modes:
//!   uniform             every candidate scores 0
//!   oracle <corpus>     1 for the gold entry of the mention's surface form, else 0
//!   crash-after <n>     uniform for n requests, then exits with status 1
//!   silent              reads requests and never answers
//!   garbage             answers every request with a line that is not JSON

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use toposieve_cli::bridge::{BridgeRequest, BridgeResponse};

#[derive(Parser)]
struct Args {
    #[command(subcommand)]
    mode: Mode,
}

#[derive(Subcommand)]
enum Mode {
    Uniform,
    Oracle { corpus: PathBuf },
    CrashAfter { n: usize },
    Silent,
    Garbage,
}

/// Surface form to gold id; surfaces with conflicting golds are left out.
fn gold_by_surface(path: &PathBuf) -> std::io::Result<HashMap<String, u64>> {
    let (docs, _) = toposieve::corpus::load_canonical(BufReader::new(std::fs::File::open(path)?))
        .map_err(|e| std::io::Error::other(e.to_string()))?;
    let mut map: HashMap<String, Option<u64>> = HashMap::new();
    for (surface, gold) in toposieve::corpus::labeled_mentions(&docs) {
        map.entry(surface).and_modify(|g| if *g != Some(gold) { *g = None }).or_insert(Some(gold));
    }
    Ok(map.into_iter().filter_map(|(s, g)| Some((s, g?))).collect())
}

fn main() -> std::io::Result<()> {
    let args = Args::parse();
    let gold = match &args.mode {
        Mode::Oracle { corpus } => gold_by_surface(corpus)?,
        _ => HashMap::new(),
    };
    let stdin = std::io::stdin().lock();
    let mut stdout = std::io::stdout().lock();
    for (served, line) in stdin.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let request: BridgeRequest = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("reference-bridge: bad request: {e}");
                std::process::exit(2);
            }
        };
        let scores: Vec<f64> = match &args.mode {
            Mode::Uniform => vec![0.0; request.candidates.len()],
            Mode::Oracle { .. } => {
                let target = gold.get(&request.mention);
                request.candidates.iter().map(|c| if Some(&c.id) == target { 1.0 } else { 0.0 }).collect()
            }
            Mode::CrashAfter { n } => {
                if served >= *n {
                    std::process::exit(1);
                }
                vec![0.0; request.candidates.len()]
            }
            Mode::Silent => continue,
            Mode::Garbage => {
                writeln!(stdout, "not json")?;
                stdout.flush()?;
                continue;
            }
        };
        serde_json::to_writer(&mut stdout, &BridgeResponse { scores })?;
        stdout.write_all(b"\n")?;
        stdout.flush()?;
    }
    Ok(())
}
