//! Annotated corpora in the canonical line-delimited JSON format, splitting,
//! and assembly of reranker training instances.
//!
//! One document per line:
//!
//! ```json
//! {"doc_id": "d1", "text": "...", "mentions": [{"start": 0, "end": 6, "surface": "Canada",
//!   "gold_id": 6251999, "lat": 60.0, "lon": -95.0}]}
//! ```
//!
//! Offsets count Unicode scalar values, end exclusive.

use std::collections::{HashMap, HashSet};
use std::io::BufRead;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::context::ContextString;
use crate::error::{Error, Result};
use crate::gazetteer::Gazetteer;
use crate::index::NameIndex;
use crate::metrics::GeoPoint;
use crate::pipeline::{collect_context, ContextMode};
use crate::reranker::RerankInstance;

pub const DEFAULT_SPLIT_SEED: u64 = 13;
pub const DEFAULT_RATIOS: (f64, f64, f64) = (0.7, 0.1, 0.2);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MentionAnnotation {
    pub start: usize,
    pub end: usize,
    pub surface: String,
    #[serde(default)]
    pub gold_id: Option<u64>,
    #[serde(default)]
    pub lat: Option<f64>,
    #[serde(default)]
    pub lon: Option<f64>,
}

impl MentionAnnotation {
    pub fn gold_point(&self) -> Option<GeoPoint> {
        Some(GeoPoint::new(self.lat?, self.lon?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedDocument {
    pub doc_id: String,
    pub text: String,
    #[serde(default)]
    pub mentions: Vec<MentionAnnotation>,
}

impl AnnotatedDocument {
    pub fn validate(&self) -> std::result::Result<(), String> {
        let chars: Vec<char> = self.text.chars().collect();
        let mut spans: Vec<(usize, usize)> = Vec::with_capacity(self.mentions.len());
        for (i, m) in self.mentions.iter().enumerate() {
            if m.start >= m.end || m.end > chars.len() {
                return Err(format!("mention {i}: span {}..{} outside text of length {}", m.start, m.end, chars.len()));
            }
            let slice: String = chars[m.start..m.end].iter().collect();
            if slice != m.surface {
                return Err(format!("mention {i}: surface {:?} != text slice {slice:?}", m.surface));
            }
            if let (Some(lat), Some(lon)) = (m.lat, m.lon) {
                if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
                    return Err(format!("mention {i}: coordinates out of range"));
                }
            }
            spans.push((m.start, m.end));
        }
        spans.sort_unstable();
        if let Some(w) = spans.windows(2).find(|w| w[1].0 < w[0].1) {
            return Err(format!("overlapping spans {:?} and {:?}", w[0], w[1]));
        }
        Ok(())
    }

    pub fn mention_surfaces(&self) -> Vec<String> {
        self.mentions.iter().map(|m| m.surface.clone()).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    pub records: usize,
    pub loaded: usize,
    pub diagnostics: Vec<String>,
}

/// Read canonical records; invalid records are skipped with a diagnostic.
pub fn load_canonical(reader: impl BufRead) -> Result<(Vec<AnnotatedDocument>, LoadReport)> {
    let mut docs = Vec::new();
    let mut report = LoadReport::default();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        report.records += 1;
        match serde_json::from_str::<AnnotatedDocument>(&line) {
            Ok(doc) => match doc.validate() {
                Ok(()) => docs.push(doc),
                Err(why) => report.diagnostics.push(format!("line {}: {}: {why}", n + 1, doc.doc_id)),
            },
            Err(e) => report.diagnostics.push(format!("line {}: {e}", n + 1)),
        }
    }
    report.loaded = docs.len();
    Ok((docs, report))
}

pub fn write_canonical(docs: &[AnnotatedDocument], mut out: impl std::io::Write) -> Result<()> {
    for d in docs {
        serde_json::to_writer(&mut out, d)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusSplit {
    pub train: Vec<AnnotatedDocument>,
    pub dev: Vec<AnnotatedDocument>,
    pub test: Vec<AnnotatedDocument>,
}

/// Seeded document-level split. Dev and test sizes round to the nearest
/// document; train takes the remainder. Each split keeps input order.
pub fn split_corpus(docs: &[AnnotatedDocument], ratios: (f64, f64, f64), seed: u64) -> Result<CorpusSplit> {
    let (tr, dv, te) = ratios;
    if [tr, dv, te].iter().any(|r| !(0.0..=1.0).contains(r)) || (tr + dv + te - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidSplit(format!("ratios {ratios:?} must be in [0, 1] and sum to 1")));
    }
    let n = docs.len();
    if n < 3 {
        return Err(Error::InvalidSplit(format!("need at least 3 documents, got {n}")));
    }
    let n_dev = (dv * n as f64).round() as usize;
    let n_test = (te * n as f64).round() as usize;
    if n_dev == 0 || n_test == 0 || n_dev + n_test >= n {
        return Err(Error::InvalidSplit(format!("ratios {ratios:?} leave an empty split for {n} documents")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignment = vec![0u8; n];
    for &i in &order[..n_dev] {
        assignment[i] = 1;
    }
    for &i in &order[n_dev..n_dev + n_test] {
        assignment[i] = 2;
    }
    let mut split = CorpusSplit::default();
    for (doc, a) in docs.iter().zip(assignment) {
        match a {
            0 => split.train.push(doc.clone()),
            1 => split.dev.push(doc.clone()),
            _ => split.test.push(doc.clone()),
        }
    }
    Ok(split)
}

/// Split by explicit doc-id lists. Documents listed in none of them are
/// dropped; an id listed twice is an error.
pub fn split_by_ids(docs: &[AnnotatedDocument], train: &[String], dev: &[String], test: &[String]) -> Result<CorpusSplit> {
    let mut which: HashMap<&str, u8> = HashMap::new();
    for (tag, ids) in [(0u8, train), (1, dev), (2, test)] {
        for id in ids {
            if which.insert(id.as_str(), tag).is_some() {
                return Err(Error::InvalidSplit(format!("doc id {id:?} appears in more than one split")));
            }
        }
    }
    let mut split = CorpusSplit::default();
    for doc in docs {
        match which.get(doc.doc_id.as_str()) {
            Some(0) => split.train.push(doc.clone()),
            Some(1) => split.dev.push(doc.clone()),
            Some(_) => split.test.push(doc.clone()),
            None => {}
        }
    }
    Ok(split)
}

/// Parse a split file: one doc id per line.
pub fn read_id_list(reader: impl BufRead) -> Result<Vec<String>> {
    let mut ids = Vec::new();
    let mut seen = HashSet::new();
    for line in reader.lines() {
        let line = line?;
        let id = line.trim();
        if !id.is_empty() && seen.insert(id.to_string()) {
            ids.push(id.to_string());
        }
    }
    Ok(ids)
}

/// `(surface, gold id)` for every mention that has a gold id.
pub fn labeled_mentions(docs: &[AnnotatedDocument]) -> Vec<(String, u64)> {
    docs.iter()
        .flat_map(|d| &d.mentions)
        .filter_map(|m| Some((m.surface.clone(), m.gold_id?)))
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceReport {
    pub mentions: usize,
    pub instances: usize,
    /// Mentions without a gold id, or whose gold was not generated.
    pub excluded: usize,
}

/// One reranker instance per mention whose gold entry is among its `k`
/// generated candidates.
///
/// Under [`ContextMode::TwoStage`] each document's context is built from its
/// gold entries as stage 1 would build it from correct predictions, and is
/// attached to the mentions stage 1 would not accept. Otherwise contexts are
/// empty.
pub fn to_training_instances(
    docs: &[AnnotatedDocument],
    idx: &NameIndex,
    g: &Gazetteer,
    k: usize,
    mode: ContextMode,
) -> (Vec<RerankInstance>, InstanceReport) {
    let mut out = Vec::new();
    let mut report = InstanceReport::default();
    for doc in docs {
        let (context, accepted) = match mode {
            ContextMode::None => (ContextString::default(), vec![true; doc.mentions.len()]),
            ContextMode::TwoStage => {
                let golds: Vec<_> = doc.mentions.iter().map(|m| m.gold_id.and_then(|id| g.lookup(id))).collect();
                collect_context(&golds)
            }
        };
        for (m, accepted) in doc.mentions.iter().zip(accepted) {
            report.mentions += 1;
            let Some(gold) = m.gold_id else {
                report.excluded += 1;
                continue;
            };
            let gen = idx.generate(g, &m.surface, k);
            match gen.candidates.iter().position(|c| c.entry_id == gold) {
                Some(pos) => out.push(RerankInstance {
                    mention: m.surface.clone(),
                    candidates: gen.candidates,
                    context: if accepted { ContextString::default() } else { context.clone() },
                    gold_index: Some(pos),
                }),
                None => report.excluded += 1,
            }
        }
    }
    report.instances = out.len();
    if report.excluded > 0 {
        log::info!("excluded {} of {} mentions from training (no gold, or gold not generated)", report.excluded, report.mentions);
    }
    (out, report)
}
