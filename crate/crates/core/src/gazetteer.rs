//! GeoNames-style gazetteer: entries, merged alternate names, adjectival
//! country forms and the feature-code inventory.
//!
//! Ingestion is lenient. A row that cannot be parsed is skipped and counted in
//! the [`ParseReport`]; only an unreadable stream aborts the load.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAIN_TABLE_COLUMNS: usize = 19;

/// Alternate-name pseudo-languages that carry links, identifiers or postal
/// codes rather than names.
const NON_NAME_LANGUAGES: [&str; 3] = ["link", "wkdt", "post"];

/// A feature code together with its position in the loaded inventory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureType {
    pub code: String,
    pub ordinal: usize,
}

/// Administrative level of an entry, as used for context codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AdminLevel {
    Country,
    Admin1,
    Admin2,
    Admin3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoEntry {
    pub id: u64,
    pub canonical_name: String,
    /// Alternate names, deduplicated, never containing `canonical_name`.
    pub synonyms: Vec<String>,
    pub latitude: f64,
    pub longitude: f64,
    pub population: u64,
    pub feature_class: String,
    pub feature_code: String,
    pub feature_ordinal: usize,
    pub country_code: Option<String>,
    pub admin1_code: Option<String>,
    pub admin2_code: Option<String>,
    pub admin3_code: Option<String>,
}

impl GeoEntry {
    /// Canonical name followed by the synonyms.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.canonical_name.as_str()).chain(self.synonyms.iter().map(String::as_str))
    }

    /// Political entities: feature class `A` with a `PCL*` code.
    pub fn is_country(&self) -> bool {
        is_country_code(&self.feature_class, &self.feature_code)
    }

    pub fn admin_level(&self) -> Option<AdminLevel> {
        if self.is_country() {
            return Some(AdminLevel::Country);
        }
        match self.feature_code.as_str() {
            "ADM1" => Some(AdminLevel::Admin1),
            "ADM2" => Some(AdminLevel::Admin2),
            "ADM3" => Some(AdminLevel::Admin3),
            _ => None,
        }
    }

    /// `[country, admin1, admin2, admin3]` with absent levels omitted.
    pub fn admin_chain(&self) -> Vec<&str> {
        [&self.country_code, &self.admin1_code, &self.admin2_code, &self.admin3_code]
            .into_iter()
            .filter_map(|c| c.as_deref())
            .collect()
    }

    /// The code identifying this entry at its own administrative level:
    /// a country's country code, an ADM1's admin1 code, and so on.
    pub fn context_code(&self) -> Option<&str> {
        match self.admin_level()? {
            AdminLevel::Country => self.country_code.as_deref(),
            AdminLevel::Admin1 => self.admin1_code.as_deref(),
            AdminLevel::Admin2 => self.admin2_code.as_deref(),
            AdminLevel::Admin3 => self.admin3_code.as_deref(),
        }
    }
}

fn is_country_code(class: &str, code: &str) -> bool {
    class == "A" && code.starts_with("PCL")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "GazetteerParts")]
pub struct Gazetteer {
    entries: Vec<GeoEntry>,
    adjectival_forms: BTreeMap<String, u64>,
    feature_inventory: Vec<String>,
    #[serde(skip)]
    by_id: HashMap<u64, usize>,
}

#[derive(Deserialize)]
struct GazetteerParts {
    entries: Vec<GeoEntry>,
    adjectival_forms: BTreeMap<String, u64>,
    feature_inventory: Vec<String>,
}

impl From<GazetteerParts> for Gazetteer {
    fn from(p: GazetteerParts) -> Self {
        let by_id = p.entries.iter().enumerate().map(|(i, e)| (e.id, i)).collect();
        Self { entries: p.entries, adjectival_forms: p.adjectival_forms, feature_inventory: p.feature_inventory, by_id }
    }
}

impl Gazetteer {
    pub fn empty() -> Self {
        GazetteerBuilder::new().finish().0
    }

    pub fn lookup(&self, id: u64) -> Option<&GeoEntry> {
        self.by_id.get(&id).map(|&i| &self.entries[i])
    }

    pub fn position(&self, id: u64) -> Option<usize> {
        self.by_id.get(&id).copied()
    }

    pub fn entries(&self) -> &[GeoEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn adjectival_forms(&self) -> &BTreeMap<String, u64> {
        &self.adjectival_forms
    }

    pub fn feature_inventory(&self) -> &[String] {
        &self.feature_inventory
    }

    pub fn feature_type(&self, entry: &GeoEntry) -> FeatureType {
        FeatureType { code: entry.feature_code.clone(), ordinal: entry.feature_ordinal }
    }

    pub fn admin_chain<'a>(&self, entry: &'a GeoEntry) -> Vec<&'a str> {
        entry.admin_chain()
    }
}

/// Per-stream row accounting. `accepted + skipped == rows` always holds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamTally {
    pub rows: usize,
    pub accepted: usize,
    pub skipped: usize,
}

impl StreamTally {
    fn accept(&mut self) {
        self.rows += 1;
        self.accepted += 1;
    }

    fn skip(&mut self) {
        self.rows += 1;
        self.skipped += 1;
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ParseReport {
    pub feature_codes: StreamTally,
    pub main_table: StreamTally,
    pub alternate_names: StreamTally,
    pub adjectival_forms: StreamTally,
    /// First few skip reasons, for diagnostics.
    pub samples: Vec<String>,
}

impl ParseReport {
    fn note(&mut self, msg: String) {
        if self.samples.len() < 20 {
            self.samples.push(msg);
        }
    }
}

/// Incremental gazetteer loader.
///
/// Streams are fed in dependency order: the optional feature-code list, the
/// main table, then alternate names and adjectival forms, which both refer to
/// ids from the main table.
#[derive(Debug, Default)]
pub struct GazetteerBuilder {
    entries: Vec<GeoEntry>,
    by_id: HashMap<u64, usize>,
    seen_names: Vec<HashSet<String>>,
    adjectival_forms: BTreeMap<String, u64>,
    inventory: Vec<String>,
    inventory_pos: HashMap<String, usize>,
    report: ParseReport,
}

impl GazetteerBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Load the official feature-code list (`A.ADM1<TAB>name<TAB>description`).
    /// Codes are taken in file order; the class prefix is dropped.
    pub fn feature_codes(&mut self, reader: impl BufRead) -> Result<&mut Self> {
        for_each_line(reader, |line| {
            let first = line.split('\t').next().unwrap_or("").trim();
            if first.is_empty() {
                self.report.feature_codes.skip();
                return;
            }
            let code = first.split_once('.').map_or(first, |(_, c)| c);
            self.intern_feature(code);
            self.report.feature_codes.accept();
        })?;
        Ok(self)
    }

    /// Load rows in the 19-column GeoNames dump layout.
    pub fn main_table(&mut self, reader: impl BufRead) -> Result<&mut Self> {
        let mut line_no = 0usize;
        for_each_line(reader, |line| {
            line_no += 1;
            match parse_main_row(line) {
                Ok(row) if self.by_id.contains_key(&row.id) => {
                    self.report.main_table.skip();
                    self.report.note(format!("main table line {line_no}: duplicate id {}", row.id));
                }
                Ok(row) => {
                    self.insert(row);
                    self.report.main_table.accept();
                }
                Err(why) => {
                    self.report.main_table.skip();
                    self.report.note(format!("main table line {line_no}: {why}"));
                }
            }
        })?;
        Ok(self)
    }

    /// Load rows of `alternateNameId, geonameId, language, name, ...`.
    pub fn alternate_names(&mut self, reader: impl BufRead) -> Result<&mut Self> {
        let mut line_no = 0usize;
        for_each_line(reader, |line| {
            line_no += 1;
            let cols: Vec<&str> = line.split('\t').collect();
            let parsed = if cols.len() < 4 {
                Err("fewer than 4 columns".to_string())
            } else if NON_NAME_LANGUAGES.contains(&cols[2]) {
                Err(format!("non-name language {:?}", cols[2]))
            } else {
                cols[1]
                    .parse::<u64>()
                    .map_err(|_| format!("non-numeric geoname id {:?}", cols[1]))
                    .and_then(|id| self.by_id.get(&id).copied().ok_or_else(|| format!("unknown geoname id {id}")))
                    .and_then(|pos| {
                        let name = cols[3].trim();
                        if name.is_empty() { Err("empty name".to_string()) } else { Ok((pos, name)) }
                    })
            };
            match parsed {
                Ok((pos, name)) => {
                    self.add_synonym(pos, name);
                    self.report.alternate_names.accept();
                }
                Err(why) => {
                    self.report.alternate_names.skip();
                    self.report.note(format!("alternate names line {line_no}: {why}"));
                }
            }
        })?;
        Ok(self)
    }

    /// Load `form<TAB>country id` rows. Forms attach only to country entries.
    pub fn adjectival_forms(&mut self, reader: impl BufRead) -> Result<&mut Self> {
        let mut line_no = 0usize;
        for_each_line(reader, |line| {
            line_no += 1;
            let mut cols = line.split('\t');
            let form = cols.next().unwrap_or("").trim();
            let id = cols.next().map(str::trim).and_then(|s| s.parse::<u64>().ok());
            let target = id.and_then(|id| self.by_id.get(&id).copied().map(|pos| (id, pos)));
            match target {
                Some((id, pos)) if !form.is_empty() && self.entries[pos].is_country() => {
                    self.adjectival_forms.insert(form.to_string(), id);
                    self.add_synonym(pos, form);
                    self.report.adjectival_forms.accept();
                }
                _ => {
                    self.report.adjectival_forms.skip();
                    self.report.note(format!("adjectival line {line_no}: not a (form, country id) pair"));
                }
            }
        })?;
        Ok(self)
    }

    pub fn finish(self) -> (Gazetteer, ParseReport) {
        let g = Gazetteer {
            entries: self.entries,
            adjectival_forms: self.adjectival_forms,
            feature_inventory: self.inventory,
            by_id: self.by_id,
        };
        (g, self.report)
    }

    fn intern_feature(&mut self, code: &str) -> usize {
        if let Some(&i) = self.inventory_pos.get(code) {
            return i;
        }
        let i = self.inventory.len();
        self.inventory.push(code.to_string());
        self.inventory_pos.insert(code.to_string(), i);
        i
    }

    fn insert(&mut self, row: MainRow) {
        let feature_ordinal = self.intern_feature(&row.feature_code);
        let mut seen = HashSet::new();
        seen.insert(row.name.clone());
        let mut synonyms = Vec::new();
        for alt in row.alternates {
            if seen.insert(alt.clone()) {
                synonyms.push(alt);
            }
        }
        self.by_id.insert(row.id, self.entries.len());
        self.seen_names.push(seen);
        self.entries.push(GeoEntry {
            id: row.id,
            canonical_name: row.name,
            synonyms,
            latitude: row.latitude,
            longitude: row.longitude,
            population: row.population,
            feature_class: row.feature_class,
            feature_code: row.feature_code,
            feature_ordinal,
            country_code: row.country_code,
            admin1_code: row.admin1_code,
            admin2_code: row.admin2_code,
            admin3_code: row.admin3_code,
        });
    }

    fn add_synonym(&mut self, pos: usize, name: &str) {
        if self.seen_names[pos].insert(name.to_string()) {
            self.entries[pos].synonyms.push(name.to_string());
        }
    }
}

/// Parse a gazetteer from its three record streams. Pass `std::io::empty()`
/// for a stream that is not available.
pub fn parse_gazetteer(
    main_table: impl BufRead,
    alternate_names: impl BufRead,
    adjectival_map: impl BufRead,
) -> Result<(Gazetteer, ParseReport)> {
    let mut b = GazetteerBuilder::new();
    b.main_table(main_table)?.alternate_names(alternate_names)?.adjectival_forms(adjectival_map)?;
    Ok(b.finish())
}

struct MainRow {
    id: u64,
    name: String,
    alternates: Vec<String>,
    latitude: f64,
    longitude: f64,
    feature_class: String,
    feature_code: String,
    country_code: Option<String>,
    admin1_code: Option<String>,
    admin2_code: Option<String>,
    admin3_code: Option<String>,
    population: u64,
}

fn parse_main_row(line: &str) -> std::result::Result<MainRow, String> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != MAIN_TABLE_COLUMNS {
        return Err(format!("expected {MAIN_TABLE_COLUMNS} columns, found {}", cols.len()));
    }
    let id: u64 = cols[0].trim().parse().map_err(|_| format!("non-numeric id {:?}", cols[0]))?;
    if id == 0 {
        return Err("id 0".into());
    }
    let name = cols[1].trim();
    if name.is_empty() {
        return Err("empty name".into());
    }
    let latitude: f64 = cols[4].trim().parse().map_err(|_| format!("bad latitude {:?}", cols[4]))?;
    let longitude: f64 = cols[5].trim().parse().map_err(|_| format!("bad longitude {:?}", cols[5]))?;
    if !(-90.0..=90.0).contains(&latitude) || !(-180.0..=180.0).contains(&longitude) {
        return Err(format!("coordinates out of range ({latitude}, {longitude})"));
    }
    let population = match cols[14].trim() {
        "" => 0,
        p => p.parse::<u64>().map_err(|_| format!("bad population {p:?}"))?,
    };
    let opt = |s: &str| {
        let s = s.trim();
        (!s.is_empty()).then(|| s.to_string())
    };
    Ok(MainRow {
        id,
        name: name.to_string(),
        alternates: cols[3].split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect(),
        latitude,
        longitude,
        feature_class: cols[6].trim().to_string(),
        feature_code: cols[7].trim().to_string(),
        country_code: opt(cols[8]),
        admin1_code: opt(cols[10]),
        admin2_code: opt(cols[11]),
        admin3_code: opt(cols[12]),
        population,
    })
}

/// Feeds each line (without the terminator) to `f`. Lines that are not
/// valid UTF-8 are passed as an empty marker that no parser accepts.
fn for_each_line(mut reader: impl BufRead, mut f: impl FnMut(&str)) -> Result<()> {
    let mut buf = Vec::new();
    loop {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf).map_err(|e| Error::Ingestion(e.to_string()))?;
        if n == 0 {
            return Ok(());
        }
        while matches!(buf.last(), Some(b'\n' | b'\r')) {
            buf.pop();
        }
        match std::str::from_utf8(&buf) {
            Ok(line) => f(line),
            Err(_) => f("\u{0}invalid utf-8"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    pub(crate) fn row(id: u64, name: &str, alts: &str, class: &str, code: &str, cc: &str, a1: &str, pop: u64) -> String {
        format!("{id}\t{name}\t{name}\t{alts}\t10.0\t20.0\t{class}\t{code}\t{cc}\t\t{a1}\t\t\t\t{pop}\t\t100\tEurope/Vienna\t2024-01-01")
    }

    fn austria_table() -> String {
        [
            row(2782113, "Austria", "Oesterreich,Österreich,Austria", "A", "PCLI", "AT", "00", 8_847_037),
            row(2077456, "Australia", "Australie", "A", "PCLI", "AU", "00", 24_992_369),
            row(2761369, "Vienna", "Wien", "P", "PPLC", "AT", "09", 1_691_468),
        ]
        .join("\n")
    }

    #[test]
    fn parses_austria() {
        let (g, report) = parse_gazetteer(Cursor::new(austria_table()), std::io::empty(), std::io::empty()).unwrap();
        let at = g.lookup(2782113).unwrap();
        assert_eq!(at.canonical_name, "Austria");
        assert_eq!(at.feature_code, "PCLI");
        // canonical is not repeated among synonyms
        assert_eq!(at.synonyms, ["Oesterreich", "Österreich"]);
        assert_eq!(report.main_table, StreamTally { rows: 3, accepted: 3, skipped: 0 });
        assert!(g.lookup(999_999_999).is_none());
    }

    #[test]
    fn skips_malformed_rows() {
        let table = format!("{}\nabc\tBroken\n{}\n\n", austria_table(), row(1, "X", "", "P", "PPL", "", "", 0).replacen('1', "x1", 1));
        let (g, report) = parse_gazetteer(Cursor::new(table), std::io::empty(), std::io::empty()).unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!(report.main_table.rows, 6);
        assert_eq!(report.main_table.accepted + report.main_table.skipped, report.main_table.rows);
        assert_eq!(report.main_table.skipped, 3);
    }

    #[test]
    fn merges_alternate_names_and_adjectival_forms() {
        let alts = "1\t2782113\tde\tÖsterreich\n2\t2782113\ten\tRepublic of Austria\n3\t2782113\tlink\thttps://en.wikipedia.org/wiki/Austria\n4\t42\ten\tNowhere\nbad";
        let adj = "Austrian\t2782113\nViennese\t2761369\n";
        let (g, report) = parse_gazetteer(Cursor::new(austria_table()), Cursor::new(alts), Cursor::new(adj)).unwrap();
        let at = g.lookup(2782113).unwrap();
        assert_eq!(at.synonyms, ["Oesterreich", "Österreich", "Republic of Austria", "Austrian"]);
        assert_eq!(report.alternate_names, StreamTally { rows: 5, accepted: 2, skipped: 3 });
        // Vienna is not a country
        assert_eq!(report.adjectival_forms, StreamTally { rows: 2, accepted: 1, skipped: 1 });
        assert_eq!(g.adjectival_forms().get("Austrian"), Some(&2782113));
        assert!(!g.lookup(2761369).unwrap().synonyms.iter().any(|s| s == "Viennese"));
    }

    #[test]
    fn inventory_from_file_then_observed() {
        let mut b = GazetteerBuilder::new();
        b.feature_codes(Cursor::new("A.ADM1\tfirst-order\t\nP.PPLC\tcapital\t\n")).unwrap();
        b.main_table(Cursor::new(austria_table())).unwrap();
        let (g, _) = b.finish();
        assert_eq!(g.feature_inventory(), ["ADM1", "PPLC", "PCLI"]);
        assert_eq!(g.feature_type(g.lookup(2761369).unwrap()), FeatureType { code: "PPLC".into(), ordinal: 1 });
    }

    #[test]
    fn context_codes_by_level() {
        let (g, _) = parse_gazetteer(
            Cursor::new(
                [
                    row(6251999, "Canada", "", "A", "PCLI", "CA", "00", 1),
                    row(5883102, "Alberta", "", "A", "ADM1", "CA", "01", 1),
                    row(5946768, "Edmonton", "", "P", "PPLA", "CA", "01", 1),
                    row(7, "Nowhere", "", "L", "AREA", "", "", 0),
                ]
                .join("\n"),
            ),
            std::io::empty(),
            std::io::empty(),
        )
        .unwrap();
        assert_eq!(g.lookup(6251999).unwrap().context_code(), Some("CA"));
        assert_eq!(g.lookup(5883102).unwrap().context_code(), Some("01"));
        assert_eq!(g.lookup(5946768).unwrap().context_code(), None);
        assert_eq!(g.admin_chain(g.lookup(5946768).unwrap()), ["CA", "01"]);
        assert!(g.admin_chain(g.lookup(7).unwrap()).is_empty());
    }
}
