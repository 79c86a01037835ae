//! Best-effort conversion of LGL-style XML to canonical documents.
//!
//! Expected shape:
//!
//! ```xml
//! <articles>
//!   <article docid="38543">
//!     <text>...</text>
//!     <toponyms>
//!       <toponym>
//!         <start>2</start><end>9</end>
//!         <gaztag geonameid="4699066"><lat>29.76</lat><lon>-95.36</lon>...</gaztag>
//!         <phrase>Houston</phrase>
//!       </toponym>
//!     </toponyms>
//!   </article>
//! </articles>
//! ```
//!
//! Offsets are tried as character offsets, then as byte offsets, then the
//! phrase is searched for nearest the given start. Toponyms that cannot be
//! placed, or that overlap an earlier one, are dropped with a diagnostic.

use std::io::BufRead;

use anyhow::{Context, Result};
use quick_xml::events::Event;
use quick_xml::Reader;
use toposieve::corpus::{AnnotatedDocument, MentionAnnotation};

#[derive(Debug, Default)]
struct RawToponym {
    start: Option<usize>,
    end: Option<usize>,
    phrase: String,
    gold_id: Option<u64>,
    lat: Option<f64>,
    lon: Option<f64>,
}

#[derive(Debug, Default)]
struct RawArticle {
    doc_id: String,
    text: String,
    toponyms: Vec<RawToponym>,
}

#[derive(Debug, Default)]
pub struct Conversion {
    pub documents: Vec<AnnotatedDocument>,
    pub toponyms: usize,
    pub diagnostics: Vec<String>,
}

pub fn convert(reader: impl BufRead) -> Result<Conversion> {
    let mut xml = Reader::from_reader(reader);
    let mut buf = Vec::new();
    let mut path: Vec<String> = Vec::new();
    let mut text = String::new();
    let mut article: Option<RawArticle> = None;
    let mut toponym: Option<RawToponym> = None;
    let mut out = Conversion::default();

    loop {
        let event = xml.read_event_into(&mut buf).with_context(|| format!("XML error at byte {}", xml.buffer_position()))?;
        match event {
            Event::Start(e) => {
                let name = String::from_utf8_lossy(e.name().as_ref()).into_owned();
                match name.as_str() {
                    "article" => {
                        let id = e.try_get_attribute("docid")?.map(|a| a.unescape_value().map(|v| v.into_owned())).transpose()?;
                        article = Some(RawArticle {
                            doc_id: id.unwrap_or_else(|| (out.documents.len() + 1).to_string()),
                            ..Default::default()
                        });
                    }
                    "toponym" => toponym = Some(RawToponym::default()),
                    "gaztag" => {
                        if let Some(t) = toponym.as_mut() {
                            if let Some(a) = e.try_get_attribute("geonameid")? {
                                t.gold_id = a.unescape_value()?.trim().parse().ok();
                            }
                        }
                    }
                    _ => {}
                }
                path.push(name);
                text.clear();
            }
            Event::Text(e) => text.push_str(&e.unescape()?),
            Event::CData(e) => text.push_str(&String::from_utf8_lossy(&e)),
            Event::End(_) => {
                let name = path.pop().unwrap_or_default();
                let parent = path.last().map(String::as_str).unwrap_or("");
                match (parent, name.as_str()) {
                    ("article", "text") => {
                        if let Some(a) = article.as_mut() {
                            a.text = std::mem::take(&mut text);
                        }
                    }
                    ("toponym", field) => {
                        if let Some(t) = toponym.as_mut() {
                            let v = text.trim();
                            match field {
                                "start" => t.start = v.parse().ok(),
                                "end" => t.end = v.parse().ok(),
                                "phrase" => t.phrase = text.clone(),
                                _ => {}
                            }
                        }
                    }
                    ("gaztag", field) => {
                        if let Some(t) = toponym.as_mut() {
                            let v = text.trim();
                            match field {
                                "lat" => t.lat = v.parse().ok(),
                                "lon" => t.lon = v.parse().ok(),
                                _ => {}
                            }
                        }
                    }
                    (_, "toponym") => {
                        if let (Some(a), Some(t)) = (article.as_mut(), toponym.take()) {
                            a.toponyms.push(t);
                        }
                    }
                    (_, "article") => {
                        if let Some(a) = article.take() {
                            out.toponyms += a.toponyms.len();
                            out.documents.push(place(a, &mut out.diagnostics));
                        }
                    }
                    _ => {}
                }
                text.clear();
            }
            Event::Eof => {
                if let Some(open) = path.last() {
                    anyhow::bail!("unexpected end of file inside <{open}>");
                }
                break;
            }
            _ => {}
        }
        buf.clear();
    }
    Ok(out)
}

fn place(article: RawArticle, diagnostics: &mut Vec<String>) -> AnnotatedDocument {
    let chars: Vec<char> = article.text.chars().collect();
    let phrase_chars = |t: &RawToponym| t.phrase.chars().count();
    let mut mentions: Vec<MentionAnnotation> = Vec::new();
    for (i, t) in article.toponyms.iter().enumerate() {
        let span = locate(&article.text, &chars, t, phrase_chars(t));
        let Some((start, end)) = span else {
            diagnostics.push(format!("{}: toponym {i} {:?} could not be placed in the text", article.doc_id, t.phrase));
            continue;
        };
        if mentions.iter().any(|m| start < m.end && m.start < end) {
            diagnostics.push(format!("{}: toponym {i} {:?} overlaps an earlier one", article.doc_id, t.phrase));
            continue;
        }
        let (lat, lon) = match (t.lat, t.lon) {
            (Some(lat), Some(lon)) if (-90.0..=90.0).contains(&lat) && (-180.0..=180.0).contains(&lon) => (Some(lat), Some(lon)),
            _ => (None, None),
        };
        mentions.push(MentionAnnotation {
            start,
            end,
            surface: chars[start..end].iter().collect(),
            gold_id: t.gold_id,
            lat,
            lon,
        });
    }
    mentions.sort_by_key(|m| m.start);
    AnnotatedDocument { doc_id: article.doc_id, text: article.text, mentions }
}

fn locate(text: &str, chars: &[char], t: &RawToponym, phrase_len: usize) -> Option<(usize, usize)> {
    let slice = |s: usize, e: usize| (s < e && e <= chars.len()).then(|| chars[s..e].iter().collect::<String>());
    if t.phrase.is_empty() {
        let (s, e) = (t.start?, t.end?);
        return slice(s, e).map(|_| (s, e));
    }
    if let (Some(s), Some(e)) = (t.start, t.end) {
        if slice(s, e).as_deref() == Some(t.phrase.as_str()) {
            return Some((s, e));
        }
        if text.get(s..e) == Some(t.phrase.as_str()) {
            let cs = text[..s].chars().count();
            return Some((cs, cs + phrase_len));
        }
    }
    // nearest occurrence of the phrase to the stated start
    let target = t.start.unwrap_or(0);
    text.match_indices(t.phrase.as_str())
        .map(|(b, _)| text[..b].chars().count())
        .min_by_key(|&c| c.abs_diff(target))
        .map(|c| (c, c + phrase_len))
}
