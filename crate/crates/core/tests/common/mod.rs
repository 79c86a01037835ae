#![allow(dead_code)]

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use toposieve::corpus::{load_canonical, AnnotatedDocument};
use toposieve::gazetteer::{parse_gazetteer, Gazetteer, GazetteerBuilder};
use toposieve::index::{match_tier, Candidate, NameIndex, Tier};
use toposieve::metrics::GeoPoint;
use toposieve::reranker::{FeatureConfig, FeatureVector, RerankerModel, HIDDEN, LEXICAL_FEATURES};
use toposieve::text::abbreviation_key;

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/mini")
}

fn open(name: &str) -> BufReader<File> {
    BufReader::new(File::open(fixture_dir().join(name)).unwrap())
}

pub fn mini_gazetteer() -> Gazetteer {
    let mut b = GazetteerBuilder::new();
    b.feature_codes(open("featureCodes.txt")).unwrap();
    b.main_table(open("allCountries.txt")).unwrap();
    b.alternate_names(open("alternateNames.txt")).unwrap();
    b.adjectival_forms(open("adjectival.tsv")).unwrap();
    b.finish().0
}

pub fn mini() -> (Gazetteer, NameIndex) {
    let g = mini_gazetteer();
    let idx = NameIndex::build(&g);
    (g, idx)
}

pub fn mini_corpus() -> Vec<AnnotatedDocument> {
    load_canonical(open("corpus.jsonl")).unwrap().0
}

/// Brute-force sieve: evaluate every predicate against every name of every
/// entry, stop at the first tier with a match, order by population then id.
pub fn brute_force_generate(g: &Gazetteer, mention: &str, k: usize) -> (Option<Tier>, Vec<Candidate>) {
    let mention = mention.trim();
    if mention.is_empty() {
        return (None, vec![]);
    }
    for tier in Tier::ALL {
        let mut hits: Vec<Candidate> = Vec::new();
        for e in g.entries() {
            let matched = if tier == Tier::CountryCode {
                match_tier("", mention, tier, e.is_country(), e.country_code.as_deref()).then(|| e.country_code.clone().unwrap())
            } else {
                e.names()
                    .filter(|n| !toposieve::text::normalize(n).is_empty())
                    .find(|n| match_tier(n, mention, tier, e.is_country(), e.country_code.as_deref()))
                    .map(str::to_string)
            };
            if let Some(name) = matched {
                hits.push(Candidate { entry_id: e.id, tier, matched_name: name, population: e.population });
            }
        }
        if !hits.is_empty() {
            hits.sort_by(|a, b| b.population.cmp(&a.population).then(a.entry_id.cmp(&b.entry_id)));
            hits.truncate(k);
            return (Some(tier), hits);
        }
    }
    (None, vec![])
}

/// Inverse geodesic on the WGS84 ellipsoid (Vincenty), in km.
pub fn vincenty_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let (major, flat) = (6378137.0_f64, 1.0 / 298.257223563);
    let minor = major * (1.0 - flat);
    let l = (b.longitude - a.longitude).to_radians();
    let u1 = ((1.0 - flat) * a.latitude.to_radians().tan()).atan();
    let u2 = ((1.0 - flat) * b.latitude.to_radians().tan()).atan();
    let (sin_u1, cos_u1, sin_u2, cos_u2) = (u1.sin(), u1.cos(), u2.sin(), u2.cos());

    let mut lambda = l;
    for _ in 0..1000 {
        let (sin_l, cos_l) = lambda.sin_cos();
        let sin_sigma = ((cos_u2 * sin_l).powi(2) + (cos_u1 * sin_u2 - sin_u1 * cos_u2 * cos_l).powi(2)).sqrt();
        if sin_sigma == 0.0 {
            return 0.0;
        }
        let cos_sigma = sin_u1 * sin_u2 + cos_u1 * cos_u2 * cos_l;
        let sigma = sin_sigma.atan2(cos_sigma);
        let sin_alpha = cos_u1 * cos_u2 * sin_l / sin_sigma;
        let cos2_alpha = 1.0 - sin_alpha * sin_alpha;
        let cos_2sm = if cos2_alpha == 0.0 { 0.0 } else { cos_sigma - 2.0 * sin_u1 * sin_u2 / cos2_alpha };
        let c = flat / 16.0 * cos2_alpha * (4.0 + flat * (4.0 - 3.0 * cos2_alpha));
        let prev = lambda;
        lambda = l + (1.0 - c) * flat * sin_alpha * (sigma + c * sin_sigma * (cos_2sm + c * cos_sigma * (-1.0 + 2.0 * cos_2sm * cos_2sm)));
        if (lambda - prev).abs() < 1e-12 {
            let u_sq = cos2_alpha * (major * major - minor * minor) / (minor * minor);
            let big_a = 1.0 + u_sq / 16384.0 * (4096.0 + u_sq * (-768.0 + u_sq * (320.0 - 175.0 * u_sq)));
            let big_b = u_sq / 1024.0 * (256.0 + u_sq * (-128.0 + u_sq * (74.0 - 47.0 * u_sq)));
            let d_sigma = big_b
                * sin_sigma
                * (cos_2sm
                    + big_b / 4.0
                        * (cos_sigma * (-1.0 + 2.0 * cos_2sm * cos_2sm)
                            - big_b / 6.0 * cos_2sm * (-3.0 + 4.0 * sin_sigma * sin_sigma) * (-3.0 + 4.0 * cos_2sm * cos_2sm)));
            return minor * big_a * (sigma - d_sigma) / 1000.0;
        }
    }
    panic!("vincenty did not converge for {a:?} {b:?}");
}

/// Central angle from unit vectors, on the same 6371 km sphere.
pub fn vector_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let unit = |p: GeoPoint| {
        let (lat, lon) = (p.latitude.to_radians(), p.longitude.to_radians());
        [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()]
    };
    let (u, v) = (unit(a), unit(b));
    let cross = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
    let dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    let norm = (cross[0].powi(2) + cross[1].powi(2) + cross[2].powi(2)).sqrt();
    norm.atan2(dot) * 6371.0
}

pub fn typo(rng: &mut ChaCha8Rng, s: &str, edits: usize) -> String {
    let mut chars: Vec<char> = s.chars().collect();
    for _ in 0..edits {
        let pos = rng.gen_range(0..=chars.len());
        match rng.gen_range(0..3) {
            0 => chars.insert(pos, (b'a' + rng.gen_range(0..26)) as char),
            1 if !chars.is_empty() => {
                chars.remove(pos.min(chars.len() - 1));
            }
            _ if !chars.is_empty() => {
                let p = pos.min(chars.len() - 1);
                chars[p] = (b'a' + rng.gen_range(0..26)) as char;
            }
            _ => {}
        }
    }
    chars.into_iter().collect()
}

/// 200 probes: exact names, typos, token fragments, abbreviations, country
/// codes and garbage.
pub fn probes(g: &Gazetteer) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let names: Vec<&str> = g.entries().iter().flat_map(|e| e.names()).collect();
    let mut out = Vec::new();
    for _ in 0..40 {
        out.push(names.choose(&mut rng).unwrap().to_string());
    }
    for i in 0..50 {
        let n = names.choose(&mut rng).unwrap();
        out.push(typo(&mut rng, n, 1 + i % 2));
    }
    for _ in 0..30 {
        let n = names.choose(&mut rng).unwrap();
        let toks: Vec<&str> = n.split_whitespace().collect();
        out.push(toks.choose(&mut rng).unwrap().to_string());
    }
    let abbrevs: Vec<String> = names.iter().filter_map(|n| abbreviation_key(n)).collect();
    for _ in 0..20 {
        out.push(abbrevs.choose(&mut rng).unwrap().clone());
    }
    let codes: Vec<String> = g.entries().iter().filter(|e| e.is_country()).filter_map(|e| e.country_code.clone()).collect();
    for i in 0..20 {
        let c = codes.choose(&mut rng).unwrap();
        out.push(if i % 2 == 0 { c.clone() } else { c.to_lowercase() });
    }
    for _ in 0..40 {
        let len = rng.gen_range(1..7);
        out.push((0..len).map(|_| ['q', 'x', 'z', 'j', 'v', 'k', ' ', '#'][rng.gen_range(0..8)]).collect());
    }
    assert_eq!(out.len(), 200);
    out
}

pub fn random_gazetteer(names: &[(String, u64, bool)]) -> Gazetteer {
    let rows: Vec<String> = names
        .iter()
        .enumerate()
        .map(|(i, (name, pop, country))| {
            let (class, code, cc) = if *country { ("A", "PCLI", format!("C{}", i % 7)) } else { ("P", "PPL", String::new()) };
            format!("{}\t{name}\t{name}\t\t0\t0\t{class}\t{code}\t{cc}\t\t\t\t\t\t{pop}\t\t\t\t", i + 1)
        })
        .collect();
    parse_gazetteer(std::io::Cursor::new(rows.join("\n")), std::io::empty(), std::io::empty()).unwrap().0
}

/// Dense straight-line recomputation of `softmax(W2 (W1 x))`.
pub fn oracle_probs(m: &RerankerModel, feats: &[FeatureVector]) -> Vec<f64> {
    let d = m.input_dim();
    let logits: Vec<f64> = feats
        .iter()
        .map(|f| {
            let x = f.to_dense();
            let mut c = 0.0;
            for j in 0..HIDDEN {
                let mut h = 0.0;
                for k in 0..d {
                    h += m.w1()[j * d + k] * x[k];
                }
                c += m.w2()[j] * h;
            }
            c
        })
        .collect();
    let z: f64 = logits.iter().map(|c| c.exp()).sum();
    logits.iter().map(|c| c.exp() / z).collect()
}

pub fn random_features(rng: &mut ChaCha8Rng, n: usize, types: usize) -> Vec<FeatureVector> {
    (0..n)
        .map(|_| FeatureVector {
            phi: (0..LEXICAL_FEATURES.len()).map(|_| rng.gen_range(0.0..1.0)).collect(),
            log_pop: rng.gen_range(0.0..17.0),
            type_ordinal: if rng.gen_bool(0.8) { Some(rng.gen_range(0..types)) } else { None },
            type_count: types,
        })
        .collect()
}

pub fn random_config(types: usize) -> FeatureConfig {
    FeatureConfig::new((0..types).map(|i| format!("T{i}")).collect())
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}
