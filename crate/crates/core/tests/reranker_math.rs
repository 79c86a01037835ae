mod common;

use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use toposieve::context::ContextString;
use toposieve::reranker::{
    softmax, train, train_featurized, FeatureConfig, FeatureVector, FeaturizedInstance, RerankInstance, RerankerModel,
    TrainParams, HIDDEN, LEXICAL_FEATURES,
};
use toposieve::pipeline::ContextMode;
use toposieve::DEFAULT_K;

use common::{mini, oracle_probs, random_config, random_features, rel_err};

#[test]
fn score_matches_straight_line_oracle() {
    let (g, idx) = mini();
    let model = RerankerModel::new(FeatureConfig::for_gazetteer(&g), 0);
    for mention in ["Springfield", "Los Angeles", "Edmonton", "Clay County", "Australa"] {
        let inst = RerankInstance {
            mention: mention.into(),
            candidates: idx.generate(&g, mention, DEFAULT_K).candidates,
            context: ContextString::new(["US", "MN"]),
            gold_index: Some(0),
        };
        let probs = model.score(&g, &inst).unwrap();
        let expected = oracle_probs(&model, &model.featurize_instance(&g, &inst).unwrap());
        for (p, e) in probs.iter().zip(&expected) {
            assert!((p - e).abs() < 1e-9, "{mention}: {p} vs {e}");
        }
        let loss = model.loss(&g, &inst).unwrap();
        assert!((loss + expected[0].ln()).abs() < 1e-9);
    }
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let types = 5;
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for draw in 0..100 {
        let model = RerankerModel::new(random_config(types), draw);
        let batch: Vec<FeaturizedInstance> = (0..3)
            .map(|_| {
                let n = rng.gen_range(1..6);
                FeaturizedInstance { features: random_features(&mut rng, n, types), gold: rng.gen_range(0..n) }
            })
            .collect();
        let (loss, grad) = model.gradient(&batch).unwrap();
        assert!((loss - model.mean_loss(&batch).unwrap()).abs() < 1e-12);

        let d = model.input_dim();
        // a sample of W1 entries (always including the active type columns) and all of W2
        let mut w1_idx: Vec<usize> = (0..25).map(|_| rng.gen_range(0..HIDDEN * d)).collect();
        for f in batch.iter().flat_map(|b| &b.features) {
            if let Some(t) = f.type_ordinal {
                w1_idx.push(rng.gen_range(0..HIDDEN) * d + LEXICAL_FEATURES.len() + 1 + t);
            }
        }
        for &i in &w1_idx {
            let mut plus = model.clone();
            plus.weights_mut().0[i] += h;
            let mut minus = model.clone();
            minus.weights_mut().0[i] -= h;
            let fd = (plus.mean_loss(&batch).unwrap() - minus.mean_loss(&batch).unwrap()) / (2.0 * h);
            worst = worst.max(rel_err(grad.w1[i], fd));
        }
        for i in 0..HIDDEN {
            let mut plus = model.clone();
            plus.weights_mut().1[i] += h;
            let mut minus = model.clone();
            minus.weights_mut().1[i] -= h;
            let fd = (plus.mean_loss(&batch).unwrap() - minus.mean_loss(&batch).unwrap()) / (2.0 * h);
            worst = worst.max(rel_err(grad.w2[i], fd));
        }
    }
    assert!(worst < 1e-4, "worst relative error {worst}");
}

#[test]
fn softmax_is_a_distribution_and_permutation_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let types = 7;
    let model = RerankerModel::new(random_config(types), 11);
    for _ in 0..1000 {
        let n = rng.gen_range(1..21);
        let feats = random_features(&mut rng, n, types);
        let probs = softmax(&model.logits(&feats).unwrap());
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(probs.iter().all(|&p| p >= 0.0));

        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let permuted: Vec<FeatureVector> = perm.iter().map(|&i| feats[i].clone()).collect();
        let pprobs = softmax(&model.logits(&permuted).unwrap());
        for (k, &i) in perm.iter().enumerate() {
            assert!((pprobs[k] - probs[i]).abs() < 1e-12);
        }
        let argmax = |p: &[f64]| (0..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
        assert_eq!(perm[argmax(&pprobs)], argmax(&probs));
    }
}

#[test]
fn softmax_shift_invariance() {
    let (g, idx) = mini();
    let cfg = FeatureConfig::for_gazetteer(&g);
    let mut w = vec![0.0; cfg.input_dim()];
    w[0] = 1.5;
    w[LEXICAL_FEATURES.len()] = 0.3;
    let base = RerankerModel::from_linear(cfg.clone(), &w).unwrap();
    // context_empty is identical across the candidates of one instance
    w[13] = 42.0;
    let shifted = RerankerModel::from_linear(cfg, &w).unwrap();
    let inst = RerankInstance {
        mention: "Springfeld".into(),
        candidates: idx.generate(&g, "Springfeld", 20).candidates,
        context: ContextString::default(),
        gold_index: None,
    };
    let a = base.score(&g, &inst).unwrap();
    let b = shifted.score(&g, &inst).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-12);
    }
    let c = [0.1, -2.0, 3.5];
    let d: Vec<f64> = c.iter().map(|x| x + 1000.0).collect();
    for (x, y) in softmax(&c).iter().zip(softmax(&d)) {
        assert!((x - y).abs() < 1e-15);
    }
}

#[test]
fn exact_match_weight_outranks_fuzzy() {
    let (g, idx) = mini();
    let cfg = FeatureConfig::for_gazetteer(&g);
    let mut w = vec![0.0; cfg.input_dim()];
    w[1] = 10.0;
    let model = RerankerModel::from_linear(cfg, &w).unwrap();
    // "Paris" exact plus a fuzzy-only candidate in one list
    let mut candidates = idx.search(&g, "Pariss", toposieve::Tier::Fuzzy, 20);
    candidates.extend(idx.search(&g, "Paris", toposieve::Tier::Exact, 20));
    let inst = RerankInstance { mention: "Paris".into(), candidates, context: Default::default(), gold_index: None };
    let ranked = model.rerank(&g, &inst).unwrap();
    let top = g.lookup(ranked[0].0.entry_id).unwrap();
    assert!(top.names().any(|n| n == "Paris"));
    let feats = model.featurize_instance(&g, &inst).unwrap();
    let top_logit = model.logits(&feats).unwrap().into_iter().fold(f64::MIN, f64::max);
    assert!((top_logit - 10.0).abs() < 1e-12);
}

/// Instances with three candidates each; gold is the most populous.
fn population_task(rng: &mut ChaCha8Rng, n: usize, types: usize) -> Vec<FeaturizedInstance> {
    (0..n)
        .map(|_| {
            let mut feats = random_features(rng, 3, types);
            let gold = (0..3).max_by(|&a, &b| feats[a].log_pop.total_cmp(&feats[b].log_pop)).unwrap();
            // separate gold by at least one order of magnitude
            feats[gold].log_pop += 2.3;
            FeaturizedInstance { features: feats, gold }
        })
        .collect()
}

#[test]
fn learns_population_task() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let types = 4;
    let train_set = population_task(&mut rng, 300, types);
    let held_out = population_task(&mut rng, 200, types);
    let out = train_featurized(RerankerModel::new(random_config(types), 0), &train_set, TrainParams::default()).unwrap();
    let correct = held_out
        .iter()
        .filter(|inst| {
            let p = softmax(&out.model.logits(&inst.features).unwrap());
            (0..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap() == inst.gold
        })
        .count();
    assert_eq!(correct, held_out.len());
}

#[test]
fn full_batch_loss_is_non_increasing() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let data = population_task(&mut rng, 50, 3);
    let params = TrainParams { learning_rate: 1e-3, epochs: 40, batch_size: 50, momentum: 0.0, seed: 4 };
    let out = train_featurized(RerankerModel::new(random_config(3), 9), &data, params).unwrap();
    assert!(out.epoch_losses.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{:?}", out.epoch_losses);
    assert!(out.epoch_losses.last().unwrap() < out.epoch_losses.first().unwrap());
}

#[test]
fn training_is_bit_deterministic() {
    let (g, idx) = mini();
    let (instances, _) = toposieve::corpus::to_training_instances(&common::mini_corpus(), &idx, &g, DEFAULT_K, ContextMode::None);
    let params = TrainParams { epochs: 20, momentum: 0.9, ..Default::default() };
    let m = RerankerModel::new(FeatureConfig::for_gazetteer(&g), 17);
    let a = train(m.clone(), &g, &instances, params).unwrap();
    let b = train(m, &g, &instances, params).unwrap();
    assert_eq!(a.model.to_json().unwrap(), b.model.to_json().unwrap());
    assert_eq!(a.epoch_losses, b.epoch_losses);
}
