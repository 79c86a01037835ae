//! Generate, rerank, and the two-stage document pass.
//!
//! Stage 1 resolves every mention without context. Predictions that are
//! countries or first- to third-level administrative divisions are final and
//! contribute their code to the document context. Stage 2 re-scores the
//! remaining mentions with that context. When stage 1 accepts nothing the
//! context is empty and its results stand unchanged.

use serde::{Deserialize, Serialize};

use crate::context::ContextString;
use crate::error::Result;
use crate::gazetteer::{AdminLevel, Gazetteer, GeoEntry};
use crate::index::{Candidate, Generation, NameIndex, Tier};
use crate::reranker::{rank_by, CandidateScorer, RerankInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextMode {
    #[default]
    None,
    #[serde(rename = "2stage")]
    TwoStage,
}

impl std::str::FromStr for ContextMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "none" => Ok(Self::None),
            "2stage" => Ok(Self::TwoStage),
            other => Err(format!("unknown context mode {other:?} (expected none or 2stage)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub entry_id: u64,
    pub tier: Tier,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionResult {
    pub mention_id: usize,
    pub mention: String,
    pub predicted_entry: Option<u64>,
    pub stage: u8,
    /// Candidates in reranked order.
    pub candidates: Vec<ScoredCandidate>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub empty_mention: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentResolution {
    pub context: ContextString,
    pub results: Vec<ResolutionResult>,
}

pub struct Resolver<'a> {
    pub index: &'a NameIndex,
    pub gazetteer: &'a Gazetteer,
    pub scorer: &'a dyn CandidateScorer,
    pub k: usize,
}

impl<'a> Resolver<'a> {
    pub fn new(index: &'a NameIndex, gazetteer: &'a Gazetteer, scorer: &'a dyn CandidateScorer, k: usize) -> Self {
        Self { index, gazetteer, scorer, k }
    }

    /// Top reranked candidate for one mention under `context`.
    pub fn resolve_mention(&self, mention_id: usize, mention: &str, context: &ContextString) -> Result<ResolutionResult> {
        let generation = self.index.generate(self.gazetteer, mention, self.k);
        self.rescore(mention_id, mention, &generation, context, 1)
    }

    fn rescore(&self, mention_id: usize, mention: &str, generation: &Generation, context: &ContextString, stage: u8) -> Result<ResolutionResult> {
        let mut result = ResolutionResult {
            mention_id,
            mention: mention.to_string(),
            predicted_entry: None,
            stage,
            candidates: Vec::new(),
            empty_mention: generation.empty_mention,
        };
        if generation.candidates.is_empty() {
            return Ok(result);
        }
        let instance = RerankInstance {
            mention: mention.to_string(),
            candidates: generation.candidates.clone(),
            context: context.clone(),
            gold_index: None,
        };
        let probs = self.scorer.probabilities(self.gazetteer, &instance)?;
        let ranked: Vec<(Candidate, f64)> = rank_by(&generation.candidates, &probs);
        result.predicted_entry = ranked.first().map(|(c, _)| c.entry_id);
        result.candidates = ranked
            .into_iter()
            .map(|(c, p)| ScoredCandidate { entry_id: c.entry_id, tier: c.tier, probability: p })
            .collect();
        Ok(result)
    }

    pub fn resolve(&self, mentions: &[String], mode: ContextMode) -> Result<DocumentResolution> {
        match mode {
            ContextMode::None => Ok(DocumentResolution {
                context: ContextString::default(),
                results: mentions
                    .iter()
                    .enumerate()
                    .map(|(i, m)| self.resolve_mention(i, m, &ContextString::default()))
                    .collect::<Result<_>>()?,
            }),
            ContextMode::TwoStage => self.resolve_document(mentions),
        }
    }

    /// Two-stage resolution of all mentions of one document.
    pub fn resolve_document(&self, mentions: &[String]) -> Result<DocumentResolution> {
        let empty = ContextString::default();
        let generations: Vec<Generation> = mentions.iter().map(|m| self.index.generate(self.gazetteer, m, self.k)).collect();

        let mut results = Vec::with_capacity(mentions.len());
        for (i, (m, gen)) in mentions.iter().zip(&generations).enumerate() {
            results.push(self.rescore(i, m, gen, &empty, 1)?);
        }
        let predicted: Vec<Option<&GeoEntry>> =
            results.iter().map(|r| r.predicted_entry.and_then(|id| self.gazetteer.lookup(id))).collect();
        let (context, accepted) = collect_context(&predicted);
        if context.is_empty() {
            return Ok(DocumentResolution { context, results });
        }

        for (i, (m, gen)) in mentions.iter().zip(&generations).enumerate() {
            if !accepted[i] {
                results[i] = self.rescore(i, m, gen, &context, 2)?;
            }
        }
        Ok(DocumentResolution { context, results })
    }
}

/// Stage-1 acceptance and the resulting context for a document's resolved
/// entries, in mention order. Countries and ADM1–ADM3 entries are accepted;
/// their codes are ordered country, admin1, admin2/3, each by first
/// occurrence.
pub fn collect_context(entries: &[Option<&GeoEntry>]) -> (ContextString, Vec<bool>) {
    let mut accepted = Vec::with_capacity(entries.len());
    let mut collected: Vec<(u8, usize, &str)> = Vec::new();
    for (i, entry) in entries.iter().enumerate() {
        let level = entry.and_then(|e| e.admin_level().map(|lvl| (lvl, e.context_code())));
        if let Some((lvl, Some(code))) = level {
            collected.push((level_group(lvl), i, code));
        }
        accepted.push(level.is_some());
    }
    collected.sort_by_key(|(group, pos, _)| (*group, *pos));
    (ContextString::new(collected.into_iter().map(|(_, _, c)| c)), accepted)
}

fn level_group(level: AdminLevel) -> u8 {
    match level {
        AdminLevel::Country => 0,
        AdminLevel::Admin1 => 1,
        AdminLevel::Admin2 | AdminLevel::Admin3 => 2,
    }
}
