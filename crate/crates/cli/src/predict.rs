//! Prediction records written by `resolve` and the HTTP service, and the
//! inputs they are computed from.

use std::io::BufRead;

use serde::{Deserialize, Serialize};
use toposieve::corpus::AnnotatedDocument;
use toposieve::index::Tier;
use toposieve::pipeline::{ContextMode, DocumentResolution, Resolver};
use toposieve::Gazetteer;

/// Mentions to resolve together, with optional spans from a canonical
/// document.
#[derive(Debug, Clone, PartialEq)]
pub struct InputDocument {
    pub doc_id: String,
    pub mentions: Vec<InputMention>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InputMention {
    pub surface: String,
    pub span: Option<(usize, usize)>,
}

impl From<&AnnotatedDocument> for InputDocument {
    fn from(d: &AnnotatedDocument) -> Self {
        Self {
            doc_id: d.doc_id.clone(),
            mentions: d
                .mentions
                .iter()
                .map(|m| InputMention { surface: m.surface.clone(), span: Some((m.start, m.end)) })
                .collect(),
        }
    }
}

/// Plain mention list: one mention per line, blank lines separate documents.
/// Documents are numbered from 1.
pub fn read_mention_list(reader: impl BufRead) -> std::io::Result<Vec<InputDocument>> {
    let mut docs = Vec::new();
    let mut current: Vec<InputMention> = Vec::new();
    let flush = |current: &mut Vec<InputMention>, docs: &mut Vec<InputDocument>| {
        if !current.is_empty() {
            docs.push(InputDocument { doc_id: (docs.len() + 1).to_string(), mentions: std::mem::take(current) });
        }
    };
    for line in reader.lines() {
        let line = line?;
        let surface = line.trim();
        if surface.is_empty() {
            flush(&mut current, &mut docs);
        } else {
            current.push(InputMention { surface: surface.to_string(), span: None });
        }
    }
    flush(&mut current, &mut docs);
    Ok(docs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub id: u64,
    pub tier: Tier,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MentionPrediction {
    pub mention_id: usize,
    pub surface: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<usize>,
    pub predicted_id: Option<u64>,
    pub lat: Option<f64>,
    pub lon: Option<f64>,
    pub stage: u8,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub empty_mention: bool,
    pub candidates: Vec<CandidateScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentPrediction {
    pub doc_id: String,
    /// Rendered context collected in stage 1; empty under context `none`.
    pub context: String,
    pub mentions: Vec<MentionPrediction>,
}

impl DocumentPrediction {
    pub fn new(doc: &InputDocument, resolution: DocumentResolution, g: &Gazetteer) -> Self {
        let mentions = resolution
            .results
            .into_iter()
            .zip(&doc.mentions)
            .map(|(r, m)| {
                let entry = r.predicted_entry.and_then(|id| g.lookup(id));
                MentionPrediction {
                    mention_id: r.mention_id,
                    surface: r.mention,
                    start: m.span.map(|s| s.0),
                    end: m.span.map(|s| s.1),
                    predicted_id: r.predicted_entry,
                    lat: entry.map(|e| e.latitude),
                    lon: entry.map(|e| e.longitude),
                    stage: r.stage,
                    empty_mention: r.empty_mention,
                    candidates: r
                        .candidates
                        .into_iter()
                        .map(|c| CandidateScore { id: c.entry_id, tier: c.tier, probability: c.probability })
                        .collect(),
                }
            })
            .collect();
        Self { doc_id: doc.doc_id.clone(), context: resolution.context.rendered(), mentions }
    }
}

pub fn predict_document(resolver: &Resolver<'_>, doc: &InputDocument, mode: ContextMode) -> toposieve::Result<DocumentPrediction> {
    let surfaces: Vec<String> = doc.mentions.iter().map(|m| m.surface.clone()).collect();
    let resolution = resolver.resolve(&surfaces, mode)?;
    Ok(DocumentPrediction::new(doc, resolution, resolver.gazetteer))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn mention_lists_split_on_blank_lines() {
        let docs = read_mention_list(Cursor::new("Edmonton\nAlberta\n\n\n  Paris \n")).unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0].mentions.len(), 2);
        assert_eq!(docs[1].doc_id, "2");
        assert_eq!(docs[1].mentions[0].surface, "Paris");
        assert!(read_mention_list(Cursor::new("")).unwrap().is_empty());
    }
}
