//! Tiered name index and the sieve candidate generator.
//!
//! Every (name, entry) pair becomes one [`NameRecord`]. Records are numbered
//! in population order (population descending, entry id ascending), so every
//! posting list is also sorted by population and the top-k entries of a union
//! of postings fall out of a k-way merge that stops after k distinct entries.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::gazetteer::{GeoEntry, Gazetteer};
use crate::text::{self, abbreviation_key, casefold, normalize};

/// Match strategies in sieve order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tier {
    Exact,
    Fuzzy,
    CharacterNgram,
    Token,
    Abbreviation,
    CountryCode,
}

impl Tier {
    pub const ALL: [Tier; 6] =
        [Tier::Exact, Tier::Fuzzy, Tier::CharacterNgram, Tier::Token, Tier::Abbreviation, Tier::CountryCode];

    pub fn ordinal(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Maximum edit distance of the fuzzy tier.
pub const FUZZY_MAX_EDITS: usize = 2;

/// Pure form of the per-tier match rule, independent of any index structure.
pub fn match_tier(name: &str, mention: &str, tier: Tier, entry_is_country: bool, entry_country_code: Option<&str>) -> bool {
    match tier {
        Tier::Exact => normalize(name) == normalize(mention),
        Tier::Fuzzy => {
            let d = strsim::levenshtein(&normalize(name), &normalize(mention));
            d > 0 && d <= FUZZY_MAX_EDITS
        }
        Tier::CharacterNgram => {
            let a = text::trigrams(name);
            let b = text::trigrams(mention);
            a.iter().any(|g| b.contains(g))
        }
        Tier::Token => {
            let a = text::tokens(name);
            let b = text::tokens(mention);
            a.iter().any(|t| b.contains(t))
        }
        Tier::Abbreviation => abbreviation_key(name).is_some_and(|k| k == mention),
        Tier::CountryCode => {
            entry_is_country && entry_country_code.is_some_and(|cc| casefold(cc) == casefold(mention))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NameRecord {
    pub name: String,
    /// Index into the sorted normalized-term list.
    pub term: u32,
    /// Position of the entry in the gazetteer.
    pub entry: u32,
}

/// A generated candidate for a mention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub entry_id: u64,
    pub tier: Tier,
    pub matched_name: String,
    pub population: u64,
}

/// Output of one generator call.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Generation {
    /// The tier the sieve stopped at, if any tier matched.
    pub tier: Option<Tier>,
    pub candidates: Vec<Candidate>,
    /// Set when the mention was empty after trimming.
    pub empty_mention: bool,
}

type Postings = Vec<u32>;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NameIndex {
    records: Vec<NameRecord>,
    /// Sorted, unique normalized names; doubles as the exact-match map.
    terms: Vec<String>,
    term_postings: Vec<Postings>,
    trigram_postings: Vec<([char; 3], Postings)>,
    token_postings: Vec<(String, Postings)>,
    abbreviation_postings: Vec<(String, Postings)>,
    /// Casefolded country code to country entry positions in population order.
    country_codes: BTreeMap<String, Vec<u32>>,
    /// Entry position to population rank.
    entry_rank: Vec<u32>,
}

impl NameIndex {
    pub fn build(g: &Gazetteer) -> Self {
        let entries = g.entries();
        let mut by_rank: Vec<u32> = (0..entries.len() as u32).collect();
        by_rank.sort_by_key(|&p| {
            let e = &entries[p as usize];
            (Reverse(e.population), e.id)
        });
        let mut entry_rank = vec![0u32; entries.len()];
        for (rank, &p) in by_rank.iter().enumerate() {
            entry_rank[p as usize] = rank as u32;
        }

        // records in rank order; terms resolved after sorting
        let mut records = Vec::new();
        let mut normalized = Vec::new();
        for &p in &by_rank {
            for name in entries[p as usize].names() {
                let norm = normalize(name);
                if norm.is_empty() {
                    continue;
                }
                records.push(NameRecord { name: name.to_string(), term: 0, entry: p });
                normalized.push(norm);
            }
        }

        let terms = text::dedup_sorted(normalized.clone());
        let mut term_postings = vec![Vec::new(); terms.len()];
        let mut trigrams: BTreeMap<[char; 3], Postings> = BTreeMap::new();
        let mut tokens: BTreeMap<String, Postings> = BTreeMap::new();
        let mut abbreviations: BTreeMap<String, Postings> = BTreeMap::new();
        for (rid, (rec, norm)) in records.iter_mut().zip(&normalized).enumerate() {
            let rid = rid as u32;
            let t = terms.binary_search(norm).expect("term present");
            rec.term = t as u32;
            term_postings[t].push(rid);
            for g in text::dedup_sorted(text::trigrams(&rec.name)) {
                trigrams.entry(g).or_default().push(rid);
            }
            for tok in text::dedup_sorted(text::tokens(&rec.name)) {
                tokens.entry(tok).or_default().push(rid);
            }
            if let Some(key) = abbreviation_key(&rec.name) {
                abbreviations.entry(key).or_default().push(rid);
            }
        }

        let mut country_codes: BTreeMap<String, Vec<u32>> = BTreeMap::new();
        for &p in &by_rank {
            let e = &entries[p as usize];
            if let (true, Some(cc)) = (e.is_country(), e.country_code.as_deref()) {
                country_codes.entry(casefold(cc)).or_default().push(p);
            }
        }

        Self {
            records,
            terms,
            term_postings,
            trigram_postings: trigrams.into_iter().collect(),
            token_postings: tokens.into_iter().collect(),
            abbreviation_postings: abbreviations.into_iter().collect(),
            country_codes,
            entry_rank,
        }
    }

    pub fn records(&self) -> &[NameRecord] {
        &self.records
    }

    pub fn normalized(&self, record: &NameRecord) -> &str {
        &self.terms[record.term as usize]
    }

    /// Entry ids whose normalized name equals `key` (already normalized).
    pub fn exact_ids(&self, g: &Gazetteer, key: &str) -> Vec<u64> {
        self.terms
            .binary_search_by(|t| t.as_str().cmp(key))
            .map(|t| self.term_postings[t].iter().map(|&r| g.entries()[self.records[r as usize].entry as usize].id).collect())
            .unwrap_or_default()
    }

    pub fn abbreviation_keys(&self) -> impl Iterator<Item = &str> {
        self.abbreviation_postings.iter().map(|(k, _)| k.as_str())
    }

    pub fn country_code_keys(&self) -> impl Iterator<Item = &str> {
        self.country_codes.keys().map(String::as_str)
    }

    /// Run the sieve: the first tier with any match wins, its entries are
    /// ordered by population (ties by ascending id) and truncated to `k`.
    pub fn generate(&self, g: &Gazetteer, mention: &str, k: usize) -> Generation {
        let mention = mention.trim();
        if mention.is_empty() {
            return Generation { empty_mention: true, ..Default::default() };
        }
        for tier in Tier::ALL {
            let candidates = self.search(g, mention, tier, k);
            if !candidates.is_empty() {
                return Generation { tier: Some(tier), candidates, empty_mention: false };
            }
        }
        Generation::default()
    }

    /// Candidates of a single tier, without the sieve.
    pub fn search(&self, g: &Gazetteer, mention: &str, tier: Tier, k: usize) -> Vec<Candidate> {
        if k == 0 {
            return Vec::new();
        }
        if tier == Tier::CountryCode {
            return self
                .country_codes
                .get(&casefold(mention))
                .into_iter()
                .flatten()
                .take(k)
                .map(|&p| {
                    let e = &g.entries()[p as usize];
                    candidate(e, tier, e.country_code.clone().unwrap_or_default())
                })
                .collect();
        }
        let lists = self.postings_for(mention, tier);
        self.merge_top_k(&lists, k)
            .into_iter()
            .map(|rid| {
                let rec = &self.records[rid as usize];
                candidate(&g.entries()[rec.entry as usize], tier, rec.name.clone())
            })
            .collect()
    }

    fn postings_for(&self, mention: &str, tier: Tier) -> Vec<&[u32]> {
        match tier {
            Tier::Exact => {
                let key = normalize(mention);
                self.terms.binary_search(&key).map(|t| vec![self.term_postings[t].as_slice()]).unwrap_or_default()
            }
            Tier::Fuzzy => {
                let query: Vec<char> = normalize(mention).chars().collect();
                crate::fuzzy::search(&self.terms, &query, FUZZY_MAX_EDITS)
                    .into_iter()
                    .map(|t| self.term_postings[t].as_slice())
                    .collect()
            }
            Tier::CharacterNgram => text::dedup_sorted(text::trigrams(mention))
                .iter()
                .filter_map(|g| lookup_sorted(&self.trigram_postings, g))
                .collect(),
            Tier::Token => text::dedup_sorted(text::tokens(mention))
                .iter()
                .filter_map(|t| lookup_sorted(&self.token_postings, t))
                .collect(),
            Tier::Abbreviation => lookup_sorted(&self.abbreviation_postings, &mention.to_string()).into_iter().collect(),
            Tier::CountryCode => Vec::new(),
        }
    }

    /// First record of each of the `k` best-ranked distinct entries in the
    /// union of `lists`. Relies on records being numbered in rank order.
    fn merge_top_k(&self, lists: &[&[u32]], k: usize) -> Vec<u32> {
        let mut heap: BinaryHeap<Reverse<(u32, usize, usize)>> =
            lists.iter().enumerate().filter(|(_, l)| !l.is_empty()).map(|(i, l)| Reverse((l[0], i, 0))).collect();
        let mut out: Vec<u32> = Vec::with_capacity(k);
        let mut last_entry = None;
        while let Some(Reverse((rid, li, pos))) = heap.pop() {
            let entry = self.records[rid as usize].entry;
            if last_entry != Some(entry) {
                last_entry = Some(entry);
                out.push(rid);
                if out.len() == k {
                    break;
                }
            }
            if let Some(&next) = lists[li].get(pos + 1) {
                heap.push(Reverse((next, li, pos + 1)));
            }
        }
        debug_assert!(out.windows(2).all(|w| {
            let (a, b) = (self.records[w[0] as usize].entry, self.records[w[1] as usize].entry);
            self.entry_rank[a as usize] < self.entry_rank[b as usize]
        }));
        out
    }

    /// Fraction of labeled mentions whose gold id is among the first `k`
    /// generated candidates.
    pub fn recall_at_k(&self, g: &Gazetteer, labeled: &[(String, u64)], k: usize) -> f64 {
        self.recall_at_ks(g, labeled, &[k])[0]
    }

    /// [`recall_at_k`](Self::recall_at_k) for several cutoffs from one
    /// generator pass; a top-k list is a prefix of every longer one.
    pub fn recall_at_ks(&self, g: &Gazetteer, labeled: &[(String, u64)], ks: &[usize]) -> Vec<f64> {
        use rayon::prelude::*;
        if labeled.is_empty() {
            return vec![0.0; ks.len()];
        }
        let max_k = ks.iter().copied().max().unwrap_or(0);
        let ranks: Vec<Option<usize>> = labeled
            .par_iter()
            .map(|(m, gold)| self.generate(g, m, max_k).candidates.iter().position(|c| c.entry_id == *gold))
            .collect();
        ks.iter()
            .map(|&k| ranks.iter().filter(|r| r.is_some_and(|r| r < k)).count() as f64 / labeled.len() as f64)
            .collect()
    }
}

fn lookup_sorted<'a, K: Ord>(table: &'a [(K, Postings)], key: &K) -> Option<&'a [u32]> {
    table.binary_search_by(|(k, _)| k.cmp(key)).ok().map(|i| table[i].1.as_slice())
}

fn candidate(e: &GeoEntry, tier: Tier, matched_name: String) -> Candidate {
    Candidate { entry_id: e.id, tier, matched_name, population: e.population }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gazetteer::parse_gazetteer;
    use std::io::Cursor;

    fn row(id: u64, name: &str, alts: &str, code: &str, cc: &str, pop: u64) -> String {
        let class = if code.starts_with("PCL") || code.starts_with("ADM") { "A" } else { "P" };
        format!("{id}\t{name}\t{name}\t{alts}\t1.0\t2.0\t{class}\t{code}\t{cc}\t\t\t\t\t\t{pop}\t\t\t\t")
    }

    fn gaz(rows: &[String]) -> Gazetteer {
        parse_gazetteer(Cursor::new(rows.join("\n")), std::io::empty(), std::io::empty()).unwrap().0
    }

    #[test]
    fn predicate_examples() {
        assert!(match_tier("Australia", "Australa", Tier::Fuzzy, false, None));
        assert!(!match_tier("Australia", "Australia", Tier::Fuzzy, false, None));
        assert!(match_tier("New York", "NewYork", Tier::Exact, false, None));
        assert!(match_tier("United States", "US", Tier::Abbreviation, false, None));
        assert!(!match_tier("Utah", "US", Tier::Abbreviation, false, None));
        assert!(match_tier("Bad Ischl", "Ischler", Tier::CharacterNgram, false, None));
        assert!(match_tier("Saint-Louis", "louis", Tier::Token, false, None));
        assert!(match_tier("whatever", "at", Tier::CountryCode, true, Some("AT")));
        assert!(!match_tier("whatever", "at", Tier::CountryCode, false, Some("AT")));
    }

    #[test]
    fn austria_before_australia() {
        let g = gaz(&[
            row(2782113, "Austria", "", "PCLI", "AT", 8_847_037),
            row(2077456, "Australia", "", "PCLI", "AU", 24_992_369),
        ]);
        let idx = NameIndex::build(&g);
        let gen = idx.generate(&g, "Austria", 20);
        assert_eq!(gen.tier, Some(Tier::Exact));
        assert_eq!(gen.candidates.iter().map(|c| c.entry_id).collect::<Vec<_>>(), [2782113]);
        assert_eq!(idx.exact_ids(&g, "austria"), [2782113]);

        let gen = idx.generate(&g, "Australa", 20);
        assert_eq!(gen.tier, Some(Tier::Fuzzy));
        assert_eq!(gen.candidates[0].entry_id, 2077456);
    }

    #[test]
    fn population_sort_and_truncation() {
        let g = gaz(&[
            row(10, "Springfield", "", "PPL", "US", 60_000),
            row(11, "Springfield", "", "PPL", "US", 150_000),
            row(12, "Springfield", "", "PPL", "US", 60_000),
        ]);
        let idx = NameIndex::build(&g);
        let ids = |k| idx.generate(&g, "Springfield", k).candidates.iter().map(|c| c.entry_id).collect::<Vec<_>>();
        assert_eq!(ids(1), [11]);
        assert_eq!(ids(20), [11, 10, 12]);
    }

    #[test]
    fn abbreviation_and_country_code_tiers() {
        let g = gaz(&[
            row(6252001, "United States", "", "PCLI", "US", 327_167_434),
            row(5549030, "Utah", "", "ADM1", "US", 3_000_000),
            row(3175395, "Italy", "", "PCLI", "IT", 60_000_000),
        ]);
        let idx = NameIndex::build(&g);
        assert!(idx.abbreviation_keys().any(|k| k == "US"));
        let gen = idx.generate(&g, "US", 20);
        assert_eq!(gen.tier, Some(Tier::Abbreviation));
        assert_eq!(gen.candidates[0].entry_id, 6252001);
        let gen = idx.generate(&g, "it", 20);
        assert_eq!(gen.tier, Some(Tier::CountryCode));
        assert_eq!(gen.candidates[0].entry_id, 3175395);
        assert_eq!(idx.country_code_keys().count(), 2);
    }

    #[test]
    fn empty_inputs() {
        let g = Gazetteer::empty();
        let idx = NameIndex::build(&g);
        assert!(idx.records().is_empty());
        assert_eq!(idx.generate(&g, "Austria", 20), Generation::default());
        let gen = idx.generate(&g, "   ", 20);
        assert!(gen.empty_mention && gen.candidates.is_empty());
        assert_eq!(idx.recall_at_k(&g, &[("Austria".into(), 1)], 20), 0.0);
    }

    #[test]
    fn dedups_entries_matched_by_several_names() {
        let g = gaz(&[row(1, "Wien", "Vienna,Viena,Vienne", "PPLC", "AT", 1_000)]);
        let idx = NameIndex::build(&g);
        let gen = idx.generate(&g, "Vienxa", 20);
        assert_eq!(gen.tier, Some(Tier::Fuzzy));
        assert_eq!(gen.candidates.len(), 1);
        assert_eq!(gen.candidates[0].matched_name, "Vienna");
    }
}
