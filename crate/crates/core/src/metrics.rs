//! Geocoding evaluation metrics.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub const EARTH_RADIUS_KM: f64 = 6371.0;
/// Normalizing distance for the error AUC: half the Earth's circumference.
pub const MAX_ERROR_KM: f64 = 20039.0;
pub const ACCURACY_RADIUS_KM: f64 = 161.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub latitude: f64,
    pub longitude: f64,
}

impl GeoPoint {
    pub fn new(latitude: f64, longitude: f64) -> Self {
        Self { latitude, longitude }
    }
}

/// Great-circle distance on a sphere of radius 6371 km.
pub fn haversine_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let (lat1, lat2) = (a.latitude.to_radians(), b.latitude.to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.longitude - a.longitude).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Fraction of mentions whose predicted id equals the gold id. Absent
/// predictions count as wrong.
pub fn accuracy(preds: &[Option<u64>], golds: &[u64]) -> f64 {
    assert_eq!(preds.len(), golds.len());
    if golds.is_empty() {
        return 0.0;
    }
    preds.iter().zip(golds).filter(|(p, g)| **p == Some(**g)).count() as f64 / golds.len() as f64
}

/// Whether an error distance counts as a hit for accuracy@161; the bound is
/// strict.
pub fn within_accuracy_radius(error_km: f64) -> bool {
    error_km < ACCURACY_RADIUS_KM
}

/// Fraction of mentions predicted strictly within 161 km of the gold point.
pub fn accuracy_at_161(preds: &[Option<GeoPoint>], golds: &[GeoPoint]) -> f64 {
    assert_eq!(preds.len(), golds.len());
    if golds.is_empty() {
        return 0.0;
    }
    preds
        .iter()
        .zip(golds)
        .filter(|(p, g)| p.is_some_and(|p| within_accuracy_radius(haversine_km(p, **g))))
        .count() as f64
        / golds.len() as f64
}

/// Distances for the mentions that have a prediction, plus the number that
/// had none.
pub fn error_distances(preds: &[Option<GeoPoint>], golds: &[GeoPoint]) -> (Vec<f64>, usize) {
    assert_eq!(preds.len(), golds.len());
    let mut absent = 0;
    let errors = preds
        .iter()
        .zip(golds)
        .filter_map(|(p, g)| {
            if p.is_none() {
                absent += 1;
            }
            p.map(|p| haversine_km(p, *g))
        })
        .collect();
    (errors, absent)
}

/// Mean error over predictions that were made, and the count of absent ones.
pub fn mean_error_km(preds: &[Option<GeoPoint>], golds: &[GeoPoint]) -> (f64, usize) {
    let (errors, absent) = error_distances(preds, golds);
    (mean(&errors), absent)
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Log-scaled error AUC: mean of `ln(e + 1) / ln(MAX + 1)`. Errors beyond the
/// maximum are clamped.
pub fn auc_error(errors_km: &[f64]) -> f64 {
    let denom = (MAX_ERROR_KM + 1.0).ln();
    mean(&errors_km.iter().map(|&e| (e.clamp(0.0, MAX_ERROR_KM) + 1.0).ln() / denom).collect::<Vec<_>>())
}

/// Linear variant of the error AUC, `mean(e / MAX)`, reported alongside.
pub fn auc_error_linear(errors_km: &[f64]) -> f64 {
    mean(&errors_km.iter().map(|&e| e.clamp(0.0, MAX_ERROR_KM) / MAX_ERROR_KM).collect::<Vec<_>>())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TypeGroup {
    Country,
    State,
    County,
    Other,
}

impl TypeGroup {
    pub const ALL: [TypeGroup; 4] = [TypeGroup::Country, TypeGroup::State, TypeGroup::County, TypeGroup::Other];

    pub fn of(feature_class: &str, feature_code: &str) -> Self {
        if feature_class == "A" && feature_code.starts_with("PCL") {
            return Self::Country;
        }
        match feature_code {
            "ADM1" => Self::State,
            "ADM2" => Self::County,
            _ => Self::Other,
        }
    }
}

impl fmt::Display for TypeGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupScore {
    /// `None` when nothing was predicted in the group.
    pub precision: Option<f64>,
    /// `None` when the group has no gold mentions.
    pub recall: Option<f64>,
    pub correct: usize,
    pub predicted: usize,
    pub gold: usize,
}

/// Precision and recall per feature-type group. Recall groups by the gold
/// entry, precision by the predicted entry.
pub fn per_type_report(
    preds: &[Option<u64>],
    golds: &[u64],
    group_of: impl Fn(u64) -> Option<TypeGroup>,
) -> BTreeMap<TypeGroup, GroupScore> {
    assert_eq!(preds.len(), golds.len());
    let mut out: BTreeMap<TypeGroup, GroupScore> = TypeGroup::ALL.iter().map(|g| (*g, GroupScore::default())).collect();
    for (p, g) in preds.iter().zip(golds) {
        let gold_group = group_of(*g).unwrap_or(TypeGroup::Other);
        out.get_mut(&gold_group).unwrap().gold += 1;
        if let Some(p) = p {
            let pred_group = group_of(*p).unwrap_or(TypeGroup::Other);
            let s = out.get_mut(&pred_group).unwrap();
            s.predicted += 1;
            if p == g {
                s.correct += 1;
            }
        }
    }
    for s in out.values_mut() {
        s.precision = (s.predicted > 0).then(|| s.correct as f64 / s.predicted as f64);
        s.recall = (s.gold > 0).then(|| s.correct as f64 / s.gold as f64);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub name: String,
    pub n: usize,
    pub accuracy: f64,
    pub accuracy_at_161: f64,
    pub mean_error_km: f64,
    pub auc: f64,
    pub auc_linear: f64,
    /// Mentions without a prediction; excluded from the error averages.
    pub absent_predictions: usize,
    pub per_type: BTreeMap<TypeGroup, GroupScore>,
    /// `k → R@k` of the candidate generator, when computed.
    pub recall_at_k: BTreeMap<usize, f64>,
}

/// One evaluated mention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub predicted_id: Option<u64>,
    pub predicted_point: Option<GeoPoint>,
    pub gold_id: Option<u64>,
    pub gold_point: GeoPoint,
}

impl EvalReport {
    /// Aggregate all metrics. Id-based metrics consider only outcomes with a
    /// gold id; distance-based ones use every outcome.
    pub fn from_outcomes(name: &str, outcomes: &[Outcome], group_of: impl Fn(u64) -> Option<TypeGroup>) -> Self {
        let pred_points: Vec<Option<GeoPoint>> = outcomes.iter().map(|o| o.predicted_point).collect();
        let gold_points: Vec<GeoPoint> = outcomes.iter().map(|o| o.gold_point).collect();
        let (errors, absent) = error_distances(&pred_points, &gold_points);

        let with_id: Vec<&Outcome> = outcomes.iter().filter(|o| o.gold_id.is_some()).collect();
        let ids: Vec<Option<u64>> = with_id.iter().map(|o| o.predicted_id).collect();
        let golds: Vec<u64> = with_id.iter().map(|o| o.gold_id.unwrap()).collect();

        Self {
            name: name.to_string(),
            n: outcomes.len(),
            accuracy: accuracy(&ids, &golds),
            accuracy_at_161: accuracy_at_161(&pred_points, &gold_points),
            mean_error_km: mean(&errors),
            auc: auc_error(&errors),
            auc_linear: auc_error_linear(&errors),
            absent_predictions: absent,
            per_type: per_type_report(&ids, &golds, group_of),
            recall_at_k: BTreeMap::new(),
        }
    }

    /// Plain-text table in the `Acc A161 Err AUC` layout.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("{:<16} {:>6} {:>6} {:>6} {:>7} {:>6}\n", "", "n", "Acc", "A161", "Err", "AUC"));
        s.push_str(&format!(
            "{:<16} {:>6} {:>6.3} {:>6.3} {:>7.0} {:>6.3}\n",
            self.name, self.n, self.accuracy, self.accuracy_at_161, self.mean_error_km, self.auc
        ));
        if self.absent_predictions > 0 {
            s.push_str(&format!("absent predictions: {}\n", self.absent_predictions));
        }
        if !self.recall_at_k.is_empty() {
            s.push('\n');
            for (k, r) in &self.recall_at_k {
                s.push_str(&format!("R@{k:<4} {r:.3}\n"));
            }
        }
        s.push_str(&format!("\n{:<8} {:>9} {:>7} {:>6}\n", "type", "precision", "recall", "gold"));
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3}"));
        for (g, sc) in &self.per_type {
            s.push_str(&format!("{:<8} {:>9} {:>7} {:>6}\n", g.to_string(), fmt(sc.precision), fmt(sc.recall), sc.gold));
        }
        s
    }
}
