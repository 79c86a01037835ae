use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use toposieve::corpus::{self, AnnotatedDocument};
use toposieve::metrics::{EvalReport, GeoPoint, Outcome, TypeGroup};
use toposieve::pipeline::{ContextMode, Resolver};
use toposieve::reranker::{self, CandidateScorer, GeneratorOrder, RerankerModel, TrainParams};
use toposieve::{snapshot, Gazetteer, GazetteerBuilder, NameIndex};

use crate::args::*;
use crate::bridge::{BridgeConfig, BridgeScorer};
use crate::error::{Classify, CliError, CliResult};
use crate::predict::{predict_document, read_mention_list, DocumentPrediction, InputDocument};

pub fn run(command: Command) -> CliResult {
    match command {
        Command::BuildIndex(a) => build_index(&a),
        Command::Resolve(a) => resolve(&a),
        Command::Train(a) => train(&a),
        Command::Evaluate(a) => evaluate(&a),
        Command::Split(a) => split(&a),
        Command::ConvertLgl(a) => convert_lgl(&a),
        Command::Serve(a) => crate::serve::serve(&a),
    }
}

fn require_file(path: &Path, what: &str) -> CliResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::config(anyhow::anyhow!("{what} {} does not exist", path.display())))
    }
}

fn require_k(k: usize) -> CliResult {
    if k == 0 {
        return Err(CliError::config(anyhow::anyhow!("k must be at least 1")));
    }
    Ok(())
}

fn open(path: &Path, what: &str) -> CliResult<BufReader<File>> {
    require_file(path, what)?;
    File::open(path).map(BufReader::new).config_err(format!("cannot open {what} {}", path.display()))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).config_err(format!("cannot create {}", dir.display()))?;
    }
    File::create(path).map(BufWriter::new).config_err(format!("cannot create {}", path.display()))
}

/// Write one JSON value per line. A reader that hangs up early (`| head`)
/// ends output quietly.
fn write_json_lines<T: serde::Serialize>(out: &mut impl Write, items: &[T]) -> CliResult {
    let result = items
        .iter()
        .try_for_each(|item| {
            serde_json::to_writer(&mut *out, item)?;
            out.write_all(b"\n")?;
            Ok::<_, std::io::Error>(())
        })
        .and_then(|_| out.flush());
    match result {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => other.map_err(CliError::runtime),
    }
}

pub fn build_index(a: &BuildIndexArgs) -> CliResult {
    let mut builder = GazetteerBuilder::new();
    if let Some(p) = &a.feature_codes {
        builder.feature_codes(open(p, "feature-code file")?)?;
    }
    builder.main_table(open(&a.geonames, "gazetteer table")?)?;
    if let Some(p) = &a.alternate_names {
        builder.alternate_names(open(p, "alternate-names file")?)?;
    }
    if let Some(p) = &a.adjectival {
        builder.adjectival_forms(open(p, "adjectival-forms file")?)?;
    }
    let (g, report) = builder.finish();
    for s in &report.samples {
        log::warn!("{s}");
    }
    if g.is_empty() {
        return Err(CliError::data(anyhow::anyhow!("no usable entries in {}", a.geonames.display())));
    }
    let idx = NameIndex::build(&g);
    let bytes = snapshot::encode(&g, &idx)?;
    let mut out = create(&a.out)?;
    out.write_all(&bytes).and_then(|_| out.flush()).map_err(CliError::runtime)?;
    eprintln!(
        "indexed {} entries, {} names ({} rows skipped) -> {}",
        g.len(),
        idx.records().len(),
        report.main_table.skipped + report.alternate_names.skipped + report.adjectival_forms.skipped,
        a.out.display()
    );
    Ok(())
}

pub fn load_snapshot(path: &Path) -> CliResult<(Gazetteer, NameIndex)> {
    require_file(path, "index snapshot")?;
    snapshot::load(path).data_err(format!("cannot load snapshot {}", path.display()))
}

/// The scorer selected by `--model` and `--bridge`. Without a model the
/// generator order stands, and is also the bridge's fallback.
pub fn load_scorer(a: &ScorerArgs, g: &Gazetteer) -> CliResult<Box<dyn CandidateScorer>> {
    let built_in: Box<dyn CandidateScorer> = match &a.model {
        Some(p) => {
            require_file(p, "model file")?;
            let model = RerankerModel::load(p).data_err(format!("cannot load model {}", p.display()))?;
            let expected = reranker::FeatureConfig::for_gazetteer(g).input_dim();
            if model.input_dim() != expected {
                return Err(CliError::data(anyhow::anyhow!(
                    "model {} expects {} inputs but this index yields {expected}; was it trained on a different gazetteer?",
                    p.display(),
                    model.input_dim()
                )));
            }
            Box::new(model)
        }
        None => Box::new(GeneratorOrder),
    };
    let Some(program) = &a.bridge else {
        return Ok(built_in);
    };
    let config = BridgeConfig {
        program: program.clone(),
        args: a.bridge_args.clone(),
        timeout: Duration::from_millis(a.bridge_timeout_ms),
    };
    let bridge = BridgeScorer::spawn(config, built_in).config_err(format!("cannot start bridge {}", program.display()))?;
    Ok(Box::new(bridge))
}

pub fn read_documents(path: &Path, format: InputFormat) -> CliResult<Vec<InputDocument>> {
    let reader = open(path, "input")?;
    match format {
        InputFormat::Canonical => Ok(load_corpus(reader, path)?.iter().map(InputDocument::from).collect()),
        InputFormat::Mentions => read_mention_list(reader).data_err(format!("cannot read {}", path.display())),
    }
}

fn load_corpus(reader: impl std::io::BufRead, path: &Path) -> CliResult<Vec<AnnotatedDocument>> {
    let (docs, report) = corpus::load_canonical(reader).data_err(format!("cannot read {}", path.display()))?;
    for d in &report.diagnostics {
        log::warn!("{}: {d}", path.display());
    }
    Ok(docs)
}

fn load_corpus_file(path: &Path, what: &str) -> CliResult<Vec<AnnotatedDocument>> {
    load_corpus(open(path, what)?, path)
}

pub fn resolve_documents(
    g: &Gazetteer,
    idx: &NameIndex,
    scorer: &dyn CandidateScorer,
    k: usize,
    mode: ContextMode,
    docs: &[InputDocument],
) -> CliResult<Vec<DocumentPrediction>> {
    let resolver = Resolver::new(idx, g, scorer, k);
    docs.iter()
        .map(|d| predict_document(&resolver, d, mode).data_err(format!("document {}", d.doc_id)))
        .collect()
}

pub fn resolve(a: &ResolveArgs) -> CliResult {
    let o = &a.options;
    require_k(o.k)?;
    require_file(&a.input, "input")?;
    let (g, idx) = load_snapshot(&o.index)?;
    let scorer = load_scorer(&o.scorer, &g)?;
    let docs = read_documents(&a.input, a.input_format)?;
    let predictions = resolve_documents(&g, &idx, scorer.as_ref(), o.k, o.context.into(), &docs)?;
    match &a.out {
        Some(p) => write_json_lines(&mut create(p)?, &predictions)?,
        None => write_json_lines(&mut std::io::stdout().lock(), &predictions)?,
    }
    log::info!("resolved {} mentions in {} documents", predictions.iter().map(|d| d.mentions.len()).sum::<usize>(), predictions.len());
    Ok(())
}

/// Fraction of gold-labelled mentions whose prediction matches.
fn dev_accuracy(predictions: &[DocumentPrediction], gold: &[AnnotatedDocument]) -> f64 {
    let (mut hits, mut total) = (0usize, 0usize);
    for (p, d) in predictions.iter().zip(gold) {
        for (pm, gm) in p.mentions.iter().zip(&d.mentions) {
            if let Some(gid) = gm.gold_id {
                total += 1;
                hits += usize::from(pm.predicted_id == Some(gid));
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    }
}

pub fn train(a: &TrainArgs) -> CliResult {
    require_k(a.k)?;
    if a.learning_rates.is_empty() || a.learning_rates.iter().any(|lr| !(lr.is_finite() && *lr > 0.0)) {
        return Err(CliError::config(anyhow::anyhow!("learning rates must be positive")));
    }
    if a.batch_size == 0 {
        return Err(CliError::config(anyhow::anyhow!("batch size must be at least 1")));
    }
    let (g, idx) = load_snapshot(&a.index)?;
    let train_docs = load_corpus_file(&a.train, "training corpus")?;
    let dev_docs = load_corpus_file(&a.dev, "dev corpus")?;
    let mode: ContextMode = a.context.into();

    let (instances, report) = corpus::to_training_instances(&train_docs, &idx, &g, a.k, mode);
    eprintln!("training instances: {} of {} mentions ({} excluded)", report.instances, report.mentions, report.excluded);
    if instances.is_empty() {
        return Err(CliError::data(anyhow::anyhow!("no training mention has its gold entry among the generated candidates")));
    }

    let initial = RerankerModel::new(reranker::FeatureConfig::for_gazetteer(&g), a.seed);
    let featurized = instances
        .iter()
        .map(|i| initial.featurize_for_training(&g, i))
        .collect::<toposieve::Result<Vec<_>>>()?;
    let dev_inputs: Vec<InputDocument> = dev_docs.iter().map(InputDocument::from).collect();

    let mut best: Option<(f64, f64, RerankerModel)> = None;
    for &lr in &a.learning_rates {
        let params = TrainParams { learning_rate: lr, epochs: a.epochs, batch_size: a.batch_size, momentum: a.momentum, seed: a.seed };
        let outcome = reranker::train_featurized(initial.clone(), &featurized, params)?;
        let predictions = resolve_documents(&g, &idx, &outcome.model, a.k, mode, &dev_inputs)?;
        let acc = dev_accuracy(&predictions, &dev_docs);
        let final_loss = outcome.epoch_losses.last().copied().unwrap_or(f64::NAN);
        eprintln!("lr {lr}: final train loss {final_loss:.4}, dev accuracy {acc:.4}");
        if best.as_ref().map_or(true, |(b, _, _)| acc > *b) {
            best = Some((acc, lr, outcome.model));
        }
    }
    let (acc, lr, model) = best.expect("at least one learning rate");
    let mut out = create(&a.out)?;
    out.write_all(model.to_json()?.as_bytes()).and_then(|_| out.flush()).map_err(CliError::runtime)?;
    eprintln!("kept lr {lr} (dev accuracy {acc:.4}) -> {}", a.out.display());
    Ok(())
}

/// Outcomes for every evaluable gold mention, in corpus order. A mention is
/// evaluable when a gold point is known, from the corpus or the gazetteer.
pub fn outcomes(predictions: &[DocumentPrediction], gold: &[AnnotatedDocument], g: Option<&Gazetteer>) -> (Vec<Outcome>, usize) {
    let by_doc: HashMap<&str, &DocumentPrediction> = predictions.iter().map(|p| (p.doc_id.as_str(), p)).collect();
    let mut out = Vec::new();
    let mut skipped = 0;
    for d in gold {
        let pred = by_doc.get(d.doc_id.as_str());
        for (i, m) in d.mentions.iter().enumerate() {
            let gold_point =
                m.gold_point().or_else(|| m.gold_id.and_then(|id| g?.lookup(id)).map(|e| GeoPoint::new(e.latitude, e.longitude)));
            let Some(gold_point) = gold_point else {
                skipped += 1;
                continue;
            };
            let pm = pred.and_then(|p| p.mentions.iter().find(|pm| pm.mention_id == i));
            let predicted_id = pm.and_then(|pm| pm.predicted_id);
            let predicted_point = pm.and_then(|pm| Some(GeoPoint::new(pm.lat?, pm.lon?))).or_else(|| {
                let e = g?.lookup(predicted_id?)?;
                Some(GeoPoint::new(e.latitude, e.longitude))
            });
            out.push(Outcome { predicted_id, predicted_point, gold_id: m.gold_id, gold_point });
        }
    }
    (out, skipped)
}

pub fn evaluate_report(
    name: &str,
    predictions: &[DocumentPrediction],
    gold: &[AnnotatedDocument],
    snapshot: Option<&(Gazetteer, NameIndex)>,
    recall_at: &[usize],
) -> (EvalReport, usize) {
    let g = snapshot.map(|s| &s.0);
    let (outcomes, skipped) = outcomes(predictions, gold, g);
    let group_of = |id: u64| g?.lookup(id).map(|e| TypeGroup::of(&e.feature_class, &e.feature_code));
    let mut report = EvalReport::from_outcomes(name, &outcomes, group_of);
    if let Some((g, idx)) = snapshot {
        let labeled = corpus::labeled_mentions(gold);
        for (k, r) in recall_at.iter().zip(idx.recall_at_ks(g, &labeled, recall_at)) {
            report.recall_at_k.insert(*k, r);
        }
    }
    (report, skipped)
}

pub fn evaluate(a: &EvaluateArgs) -> CliResult {
    if a.recall_at.contains(&0) {
        return Err(CliError::config(anyhow::anyhow!("recall cutoffs must be at least 1")));
    }
    let reader = open(&a.predictions, "predictions")?;
    let gold = load_corpus_file(&a.gold, "gold corpus")?;
    let snapshot = a.index.as_deref().map(load_snapshot).transpose()?;
    let mut predictions = Vec::new();
    for (n, line) in std::io::BufRead::lines(reader).enumerate() {
        let line = line.data_err(format!("cannot read {}", a.predictions.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        let p: DocumentPrediction = serde_json::from_str(&line).data_err(format!("{} line {}", a.predictions.display(), n + 1))?;
        predictions.push(p);
    }
    if snapshot.is_none() {
        log::warn!("no --index: feature-type groups all count as Other and recall is not computed");
    }
    let (report, skipped) = evaluate_report(&a.name, &predictions, &gold, snapshot.as_ref(), &a.recall_at);
    if skipped > 0 {
        eprintln!("{skipped} gold mentions have no known location and were not scored");
    }
    print!("{}", report.to_table());
    if let Some(p) = &a.report {
        let mut out = create(p)?;
        serde_json::to_writer_pretty(&mut out, &report).map_err(CliError::runtime)?;
        out.write_all(b"\n").and_then(|_| out.flush()).map_err(CliError::runtime)?;
    }
    Ok(())
}

pub fn split(a: &SplitArgs) -> CliResult {
    let docs = load_corpus_file(&a.input, "corpus")?;
    let split = match &a.split_files {
        Some(files) => {
            let [train, dev, test] = files.as_slice() else {
                return Err(CliError::config(anyhow::anyhow!("--split-files takes three paths: train,dev,test")));
            };
            let ids = |p: &PathBuf| -> CliResult<Vec<String>> {
                corpus::read_id_list(open(p, "split file")?).data_err(format!("cannot read {}", p.display()))
            };
            corpus::split_by_ids(&docs, &ids(train)?, &ids(dev)?, &ids(test)?)?
        }
        None => {
            let [tr, dv, te] = a.ratios.as_slice() else {
                return Err(CliError::config(anyhow::anyhow!("--ratios takes three values: train,dev,test")));
            };
            corpus::split_corpus(&docs, (*tr, *dv, *te), a.seed)?
        }
    };
    std::fs::create_dir_all(&a.out_dir).config_err(format!("cannot create {}", a.out_dir.display()))?;
    for (name, part) in [("train", &split.train), ("dev", &split.dev), ("test", &split.test)] {
        let mut out = create(&a.out_dir.join(format!("{name}.jsonl")))?;
        corpus::write_canonical(part, &mut out)?;
        out.flush().map_err(CliError::runtime)?;
    }
    eprintln!("train {} / dev {} / test {} documents", split.train.len(), split.dev.len(), split.test.len());
    Ok(())
}

pub fn convert_lgl(a: &ConvertLglArgs) -> CliResult {
    let conversion = crate::lgl::convert(open(&a.input, "LGL file")?).data_err(format!("cannot convert {}", a.input.display()))?;
    for d in &conversion.diagnostics {
        log::warn!("{d}");
    }
    let mut out = create(&a.out)?;
    corpus::write_canonical(&conversion.documents, &mut out)?;
    out.flush().map_err(CliError::runtime)?;
    let kept: usize = conversion.documents.iter().map(|d| d.mentions.len()).sum();
    eprintln!("{} documents, {kept} of {} toponyms kept", conversion.documents.len(), conversion.toponyms);
    Ok(())
}
