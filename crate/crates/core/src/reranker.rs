//! Softmax reranker over generated candidates.
//!
//! Each candidate is encoded as `x = φ ⊕ ln(pop + 1) ⊕ onehot(type)`, where φ
//! is a small set of lexical, tier and context features. The candidate logit
//! is `W2 · (W1 · x)` with no nonlinearity in between, and the logits of all
//! candidates of a mention go through a softmax. Training minimizes the mean
//! cross-entropy of the gold candidate.
//!
//! The type one-hot makes `x` mostly zeros, so [`FeatureVector`] keeps the
//! type as an ordinal and the matrix products touch one type column only.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::context::ContextString;
use crate::error::{Error, Result};
use crate::gazetteer::{GeoEntry, Gazetteer};
use crate::index::{Candidate, Tier};
use crate::text;

/// Width of the hidden projection.
pub const HIDDEN: usize = 150;

/// Names of the φ features, in vector order.
pub const LEXICAL_FEATURES: [&str; 14] = [
    "name_similarity",
    "exact_match",
    "token_jaccard",
    "trigram_jaccard",
    "tier_exact",
    "tier_fuzzy",
    "tier_character_ngram",
    "tier_token",
    "tier_abbreviation",
    "tier_country_code",
    "country_in_context",
    "admin1_in_context",
    "admin2_in_context",
    "context_empty",
];

const TIER_OFFSET: usize = 4;
const CONTEXT_OFFSET: usize = 10;

const MODEL_FORMAT: &str = "toposieve-reranker";
const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub lexical: Vec<String>,
    /// Feature-code inventory defining the one-hot basis.
    pub type_inventory: Vec<String>,
    /// When false the log-population slot is held at zero.
    pub population: bool,
    /// When false the type one-hot is all zeros.
    pub types: bool,
}

impl FeatureConfig {
    pub fn new(type_inventory: Vec<String>) -> Self {
        Self {
            lexical: LEXICAL_FEATURES.iter().map(|s| s.to_string()).collect(),
            type_inventory,
            population: true,
            types: true,
        }
    }

    pub fn for_gazetteer(g: &Gazetteer) -> Self {
        Self::new(g.feature_inventory().to_vec())
    }

    pub fn lexical_dim(&self) -> usize {
        self.lexical.len()
    }

    pub fn type_count(&self) -> usize {
        self.type_inventory.len()
    }

    /// `F + 1 + T`.
    pub fn input_dim(&self) -> usize {
        self.lexical_dim() + 1 + self.type_count()
    }

    fn type_ordinal(&self, code: &str) -> Option<usize> {
        if !self.types {
            return None;
        }
        self.type_inventory.iter().position(|c| c == code)
    }
}

/// Sparse encoding of one candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub phi: Vec<f64>,
    pub log_pop: f64,
    pub type_ordinal: Option<usize>,
    pub type_count: usize,
}

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.phi.len() + 1 + self.type_count
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.extend_from_slice(&self.phi);
        v.push(self.log_pop);
        v.resize(self.dim(), 0.0);
        if let Some(t) = self.type_ordinal {
            v[self.phi.len() + 1 + t] = 1.0;
        }
        v
    }

    /// The non-type part `φ ⊕ log_pop`.
    fn head(&self) -> impl Iterator<Item = f64> + '_ {
        self.phi.iter().copied().chain(std::iter::once(self.log_pop))
    }
}

/// Encode `entry` as a candidate for `mention` at `tier` under `context`.
pub fn featurize(config: &FeatureConfig, mention: &str, entry: &GeoEntry, tier: Tier, context: &ContextString) -> FeatureVector {
    let m_norm = text::normalize(mention);
    let m_tokens = text::dedup_sorted(text::tokens(mention));
    let m_grams = text::dedup_sorted(text::trigrams(mention));

    let (mut sim, mut exact, mut tok, mut tri) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for name in entry.names() {
        let n_norm = text::normalize(name);
        sim = sim.max(strsim::normalized_levenshtein(&m_norm, &n_norm));
        if n_norm == m_norm {
            exact = 1.0;
        }
        tok = tok.max(text::jaccard(&m_tokens, &text::dedup_sorted(text::tokens(name))));
        tri = tri.max(text::jaccard(&m_grams, &text::dedup_sorted(text::trigrams(name))));
    }

    let mut phi = vec![0.0; config.lexical_dim()];
    phi[0] = sim;
    phi[1] = exact;
    phi[2] = tok;
    phi[3] = tri;
    phi[TIER_OFFSET + tier.ordinal()] = 1.0;
    let in_ctx = |code: &Option<String>| code.as_deref().is_some_and(|c| context.contains(c)) as u8 as f64;
    phi[CONTEXT_OFFSET] = in_ctx(&entry.country_code);
    phi[CONTEXT_OFFSET + 1] = in_ctx(&entry.admin1_code);
    phi[CONTEXT_OFFSET + 2] = in_ctx(&entry.admin2_code);
    phi[CONTEXT_OFFSET + 3] = context.is_empty() as u8 as f64;

    FeatureVector {
        phi,
        log_pop: if config.population { (entry.population as f64 + 1.0).ln() } else { 0.0 },
        type_ordinal: config.type_ordinal(&entry.feature_code),
        type_count: config.type_count(),
    }
}

/// Text serialization of a (mention, entry) pair for external rerankers:
/// `[CLS] mention | code… [SEP] canonical [SEP] synonym [SEP] … [SEP]`.
pub fn to_input_string(mention: &str, entry: &GeoEntry, context: &ContextString) -> String {
    let mut s = format!("[CLS] {mention}");
    for code in context.codes() {
        s.push_str(" | ");
        s.push_str(code);
    }
    s.push_str(" [SEP] ");
    s.push_str(&entry.canonical_name);
    s.push_str(" [SEP]");
    for syn in &entry.synonyms {
        s.push(' ');
        s.push_str(syn);
        s.push_str(" [SEP]");
    }
    s
}

/// A mention with its generated candidates, ready for scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerankInstance {
    pub mention: String,
    pub candidates: Vec<Candidate>,
    #[serde(default)]
    pub context: ContextString,
    #[serde(default)]
    pub gold_index: Option<usize>,
}

/// Anything that turns an instance into a probability per candidate.
pub trait CandidateScorer: Send + Sync {
    fn probabilities(&self, g: &Gazetteer, instance: &RerankInstance) -> Result<Vec<f64>>;
}

/// Keeps the generator's population order: every candidate gets the same
/// probability.
#[derive(Debug, Clone, Copy, Default)]
pub struct GeneratorOrder;

impl CandidateScorer for GeneratorOrder {
    fn probabilities(&self, _g: &Gazetteer, instance: &RerankInstance) -> Result<Vec<f64>> {
        if instance.candidates.is_empty() {
            return Err(Error::NothingToRank);
        }
        let n = instance.candidates.len();
        Ok(vec![1.0 / n as f64; n])
    }
}

/// Candidates ordered by descending probability. The sort is stable, so ties
/// keep generator order.
pub fn rank_by(candidates: &[Candidate], probabilities: &[f64]) -> Vec<(Candidate, f64)> {
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| probabilities[b].total_cmp(&probabilities[a]));
    order.into_iter().map(|i| (candidates[i].clone(), probabilities[i])).collect()
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&c| (c - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|&c| (c - max).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub momentum: f64,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self { learning_rate: 1e-2, epochs: 200, batch_size: 32, momentum: 0.0, seed: 13 }
    }
}

/// Candidate features of one instance plus its gold position.
#[derive(Debug, Clone)]
pub struct FeaturizedInstance {
    pub features: Vec<FeatureVector>,
    pub gold: usize,
}

/// Gradient of the mean loss, laid out like the model weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: RerankerModel,
    /// Mean loss over the whole training set after each epoch.
    pub epoch_losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerankerModel {
    format: String,
    version: u32,
    pub config: FeatureConfig,
    hidden: usize,
    input_dim: usize,
    /// Row-major `HIDDEN × input_dim`.
    w1: Vec<f64>,
    w2: Vec<f64>,
    pub init_seed: u64,
    #[serde(default)]
    pub training: Option<TrainParams>,
}

impl RerankerModel {
    /// Weights drawn uniformly from `[-0.05, 0.05]`.
    pub fn new(config: FeatureConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Self::zeros(config);
        m.init_seed = seed;
        for w in m.w1.iter_mut().chain(m.w2.iter_mut()) {
            *w = rng.gen_range(-0.05..=0.05);
        }
        m
    }

    pub fn zeros(config: FeatureConfig) -> Self {
        let input_dim = config.input_dim();
        Self {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            config,
            hidden: HIDDEN,
            input_dim,
            w1: vec![0.0; HIDDEN * input_dim],
            w2: vec![0.0; HIDDEN],
            init_seed: 0,
            training: None,
        }
    }

    /// A model whose logit is exactly `weights · x`: the first hidden unit
    /// carries `weights`, the rest are zero.
    pub fn from_linear(config: FeatureConfig, weights: &[f64]) -> Result<Self> {
        let mut m = Self::zeros(config);
        if weights.len() != m.input_dim {
            return Err(Error::FeatureMismatch { expected: m.input_dim, actual: weights.len() });
        }
        m.w1[..m.input_dim].copy_from_slice(weights);
        m.w2[0] = 1.0;
        Ok(m)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn w1(&self) -> &[f64] {
        &self.w1
    }

    pub fn w2(&self) -> &[f64] {
        &self.w2
    }

    pub fn weights_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.w1, &mut self.w2)
    }

    pub fn featurize(&self, g: &Gazetteer, mention: &str, candidate: &Candidate, context: &ContextString) -> Result<FeatureVector> {
        let entry = g.lookup(candidate.entry_id).ok_or(Error::UnknownEntry(candidate.entry_id))?;
        Ok(featurize(&self.config, mention, entry, candidate.tier, context))
    }

    pub fn featurize_instance(&self, g: &Gazetteer, instance: &RerankInstance) -> Result<Vec<FeatureVector>> {
        instance.candidates.iter().map(|c| self.featurize(g, &instance.mention, c, &instance.context)).collect()
    }

    fn hidden_of(&self, x: &FeatureVector) -> Vec<f64> {
        let head = self.config.lexical_dim() + 1;
        (0..HIDDEN)
            .map(|j| {
                let row = &self.w1[j * self.input_dim..(j + 1) * self.input_dim];
                let mut h: f64 = row[..head].iter().zip(x.head()).map(|(w, v)| w * v).sum();
                if let Some(t) = x.type_ordinal {
                    h += row[head + t];
                }
                h
            })
            .collect()
    }

    fn check_dims(&self, features: &[FeatureVector]) -> Result<()> {
        match features.iter().find(|f| f.dim() != self.input_dim) {
            Some(f) => Err(Error::FeatureMismatch { expected: self.input_dim, actual: f.dim() }),
            None => Ok(()),
        }
    }

    /// Per-candidate scalars `c = W2 · (W1 · x)`.
    pub fn logits(&self, features: &[FeatureVector]) -> Result<Vec<f64>> {
        self.check_dims(features)?;
        Ok(features
            .iter()
            .map(|x| self.hidden_of(x).iter().zip(&self.w2).map(|(h, w)| h * w).sum())
            .collect())
    }

    pub fn score(&self, g: &Gazetteer, instance: &RerankInstance) -> Result<Vec<f64>> {
        if instance.candidates.is_empty() {
            return Err(Error::NothingToRank);
        }
        Ok(softmax(&self.logits(&self.featurize_instance(g, instance)?)?))
    }

    /// Cross-entropy `-ln ŷ[gold]`.
    pub fn loss(&self, g: &Gazetteer, instance: &RerankInstance) -> Result<f64> {
        let gold = instance.gold_index.filter(|&i| i < instance.candidates.len()).ok_or(Error::GoldAbsent)?;
        let logits = self.logits(&self.featurize_instance(g, instance)?)?;
        Ok(log_sum_exp(&logits) - logits[gold])
    }

    pub fn rerank(&self, g: &Gazetteer, instance: &RerankInstance) -> Result<Vec<(Candidate, f64)>> {
        let probs = self.score(g, instance)?;
        Ok(rank_by(&instance.candidates, &probs))
    }

    pub fn featurize_for_training(&self, g: &Gazetteer, instance: &RerankInstance) -> Result<FeaturizedInstance> {
        let gold = instance.gold_index.filter(|&i| i < instance.candidates.len()).ok_or(Error::GoldAbsent)?;
        Ok(FeaturizedInstance { features: self.featurize_instance(g, instance)?, gold })
    }

    /// Mean loss over `batch`.
    pub fn mean_loss(&self, batch: &[FeaturizedInstance]) -> Result<f64> {
        let mut total = 0.0;
        for inst in batch {
            let logits = self.logits(&inst.features)?;
            total += log_sum_exp(&logits) - logits[inst.gold];
        }
        Ok(total / batch.len().max(1) as f64)
    }

    /// Mean loss over `batch` and its analytic gradient.
    pub fn gradient(&self, batch: &[FeaturizedInstance]) -> Result<(f64, Gradient)> {
        self.gradient_of(batch.iter())
    }

    fn gradient_of<'b>(&self, batch: impl ExactSizeIterator<Item = &'b FeaturizedInstance>) -> Result<(f64, Gradient)> {
        let d = self.input_dim;
        let head = self.config.lexical_dim() + 1;
        let mut grad = Gradient { w1: vec![0.0; HIDDEN * d], w2: vec![0.0; HIDDEN] };
        if batch.len() == 0 {
            return Ok((0.0, grad));
        }
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        // s = Σ_i g_i x_i over the whole batch; dW1[j,:] = w2_j * s
        let mut s_head = vec![0.0; head];
        let mut s_type = vec![0.0; d - head];
        for inst in batch {
            self.check_dims(&inst.features)?;
            let hidden: Vec<Vec<f64>> = inst.features.iter().map(|x| self.hidden_of(x)).collect();
            let logits: Vec<f64> = hidden.iter().map(|h| h.iter().zip(&self.w2).map(|(a, b)| a * b).sum()).collect();
            loss += log_sum_exp(&logits) - logits[inst.gold];
            let probs = softmax(&logits);
            for (i, (x, h)) in inst.features.iter().zip(&hidden).enumerate() {
                let gi = (probs[i] - f64::from(u8::from(i == inst.gold))) * scale;
                if gi == 0.0 {
                    continue;
                }
                for (gw, hj) in grad.w2.iter_mut().zip(h) {
                    *gw += gi * hj;
                }
                for (s, v) in s_head.iter_mut().zip(x.head()) {
                    *s += gi * v;
                }
                if let Some(t) = x.type_ordinal {
                    s_type[t] += gi;
                }
            }
        }
        for j in 0..HIDDEN {
            let w2j = self.w2[j];
            let row = &mut grad.w1[j * d..(j + 1) * d];
            for (r, s) in row.iter_mut().zip(s_head.iter().chain(&s_type)) {
                *r = w2j * s;
            }
        }
        Ok((loss * scale, grad))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)?;
        if m.format != MODEL_FORMAT {
            return Err(Error::Model(format!("unexpected format {:?}", m.format)));
        }
        if m.version != MODEL_VERSION {
            return Err(Error::Model(format!("unsupported version {}", m.version)));
        }
        if m.hidden != HIDDEN
            || m.input_dim != m.config.input_dim()
            || m.w1.len() != HIDDEN * m.input_dim
            || m.w2.len() != HIDDEN
        {
            return Err(Error::Model("weight shapes do not match the feature configuration".into()));
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

impl CandidateScorer for RerankerModel {
    fn probabilities(&self, g: &Gazetteer, instance: &RerankInstance) -> Result<Vec<f64>> {
        self.score(g, instance)
    }
}

/// Mini-batch gradient descent on the mean cross-entropy, with optional
/// momentum. Deterministic for a given `params.seed`.
pub fn train(model: RerankerModel, g: &Gazetteer, instances: &[RerankInstance], params: TrainParams) -> Result<TrainOutcome> {
    let data = instances.iter().map(|i| model.featurize_for_training(g, i)).collect::<Result<Vec<_>>>()?;
    train_featurized(model, &data, params)
}

pub fn train_featurized(mut model: RerankerModel, data: &[FeaturizedInstance], params: TrainParams) -> Result<TrainOutcome> {
    if data.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut v1 = vec![0.0; model.w1.len()];
    let mut v2 = vec![0.0; model.w2.len()];
    let mut epoch_losses = Vec::with_capacity(params.epochs);
    let batch_size = params.batch_size.max(1);

    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch_size) {
            let (_, grad) = model.gradient_of(chunk.iter().map(|&i| &data[i]))?;
            for ((w, v), gr) in model.w1.iter_mut().zip(v1.iter_mut()).zip(&grad.w1) {
                *v = params.momentum * *v - params.learning_rate * gr;
                *w += *v;
            }
            for ((w, v), gr) in model.w2.iter_mut().zip(v2.iter_mut()).zip(&grad.w2) {
                *v = params.momentum * *v - params.learning_rate * gr;
                *w += *v;
            }
        }
        epoch_losses.push(model.mean_loss(data)?);
    }
    model.training = Some(params);
    Ok(TrainOutcome { model, epoch_losses })
}
