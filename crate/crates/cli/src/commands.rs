use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use kgwalk::embed::{train_scorer, EmbedTrainLog, EmbeddingScorer};
use kgwalk::eval::{
    dev_filter, evaluate as evaluate_policy, evaluate_scorer, relation_breakdown, seen_unseen_breakdown, EvalMode,
    EvalReport,
};
use kgwalk::graph::{write_triples, DatasetSplits, GraphStats, KnowledgeGraph, SplitSet, Vocabulary};
use kgwalk::policy::PolicyNet;
use kgwalk::tensor::{read_checkpoint, AdamConfig};
use kgwalk::trainer::{train, TrainLog, TRAIN_LOG_HEADER};
use log::{info, warn};

use crate::config::{ExperimentConfig, ModelKind, Split, Variant};
use crate::layout::{Layout, CONFIG_FILE, CURVE_FILE, POLICY_FILE};
use crate::CliError;

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn echo_config(dir: &Path, cfg: &ExperimentConfig) -> Result<(), CliError> {
    write(&dir.join(CONFIG_FILE), &cfg.echo())
}

/// Reads the vocabulary and splits written by [`prepare`].
fn load_prepared(layout: &Layout) -> Result<DatasetSplits, CliError> {
    let dir = layout.prepared();
    if !dir.join("entities.txt").exists() {
        return Err(CliError::Data(format!(
            "no prepared data in {}; run `prepare` first",
            dir.display()
        )));
    }
    let mut vocab = Vocabulary::load(&dir)?;
    Ok(DatasetSplits::load_with(&dir, &mut vocab)?)
}

fn build_graph(splits: &DatasetSplits, cfg: &ExperimentConfig) -> Result<KnowledgeGraph, CliError> {
    Ok(KnowledgeGraph::build(&splits.train, &splits.vocab, &cfg.graph_config())?)
}

fn vocabulary_mismatch(path: &Path, what: &str, found: usize, expected: usize) -> CliError {
    CliError::Data(format!(
        "{} does not match the prepared vocabulary: {found} {what} in the checkpoint, {expected} in the data",
        path.display()
    ))
}

fn load_scorer(path: &Path, vocab: &Vocabulary) -> Result<EmbeddingScorer, CliError> {
    if !path.exists() {
        return Err(CliError::Data(format!(
            "scorer checkpoint {} not found; run `train-embedding` first or set disable_rs = true",
            path.display()
        )));
    }
    let scorer = EmbeddingScorer::load(path)?;
    if scorer.num_entities() != vocab.num_entities() {
        return Err(vocabulary_mismatch(path, "entities", scorer.num_entities(), vocab.num_entities()));
    }
    if scorer.num_relations() != vocab.num_relations() {
        return Err(vocabulary_mismatch(path, "relations", scorer.num_relations(), vocab.num_relations()));
    }
    Ok(scorer)
}

fn load_policy(path: &Path, vocab: &Vocabulary, cfg: &ExperimentConfig) -> Result<PolicyNet<f32>, CliError> {
    if !path.exists() {
        return Err(CliError::Data(format!("policy checkpoint {} not found", path.display())));
    }
    let entries = read_checkpoint(path)?;
    for (name, what, expected) in [
        ("policy.entity", "entities", vocab.num_entities()),
        ("policy.relation", "relations", vocab.num_relations()),
    ] {
        let rows = entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t.rows())
            .ok_or_else(|| CliError::Data(format!("{} has no '{name}' table", path.display())))?;
        if rows != expected {
            return Err(vocabulary_mismatch(path, what, rows, expected));
        }
    }
    let mut policy = new_policy(vocab, cfg, 0)?;
    policy.load(path)?;
    Ok(policy)
}

fn new_policy(vocab: &Vocabulary, cfg: &ExperimentConfig, seed: u64) -> Result<PolicyNet<f32>, CliError> {
    Ok(PolicyNet::new(
        cfg.policy_config(),
        vocab.num_entities(),
        vocab.num_relations(),
        AdamConfig::default(),
        seed,
    )?)
}

/// Loads raw splits, writes the indexed vocabulary and deduplicated splits,
/// and emits the dataset statistics row.
pub fn prepare(cfg: &ExperimentConfig) -> Result<GraphStats, CliError> {
    let splits = DatasetSplits::load_dir(&cfg.data_dir)?;
    let layout = Layout::new(&cfg.out_dir);
    let dir = layout.prepared();
    fs::create_dir_all(&dir)?;
    splits.vocab.save(&dir)?;
    write_triples(&dir.join("train.txt"), &splits.train, &splits.vocab)?;
    write_triples(&dir.join("dev.txt"), &splits.dev, &splits.vocab)?;
    write_triples(&dir.join("test.txt"), &splits.test, &splits.vocab)?;
    write_triples(&dir.join("removed_train.txt"), &splits.removed_from_train, &splits.vocab)?;
    for t in &splits.removed_from_train {
        info!(
            "removed training fact {}\t{}\t{} (also held out)",
            splits.vocab.entity_name(t.subject),
            splits.vocab.relation_name(t.relation),
            splits.vocab.entity_name(t.object)
        );
    }
    let stats = splits.stats();
    write(
        &layout.stats(),
        &format!(
            "dataset\t{}\ttrain\tdev\ttest\n{}\t{}\t{}\t{}\t{}\n",
            GraphStats::TSV_HEADER,
            cfg.dataset_name(),
            stats.tsv_row(),
            splits.train.len(),
            splits.dev.len(),
            splits.test.len()
        ),
    )?;
    echo_config(&dir, cfg)?;
    info!("prepared {} into {}", cfg.data_dir.display(), dir.display());
    Ok(stats)
}

/// Trains the one-hop scorer and writes its frozen checkpoint, loss log and
/// standalone filtered metrics.
pub fn train_embedding(cfg: &ExperimentConfig) -> Result<(EmbeddingScorer, EmbedTrainLog), CliError> {
    let layout = Layout::new(&cfg.out_dir);
    let splits = load_prepared(&layout)?;
    if cfg.embed_epochs == 0 {
        warn!("embed_epochs = 0: the checkpoint holds the initialization");
    }
    let (scorer, log) = train_scorer(
        &splits.train,
        splits.vocab.num_entities(),
        splits.vocab.num_relations(),
        &cfg.embed_config(cfg.embed_seed),
    )?;
    let dir = layout.scorer_dir();
    fs::create_dir_all(&dir)?;
    scorer.save(&layout.scorer_checkpoint())?;
    let mut loss = format!("epoch\tloss\n0\t{:.6}\n", log.initial_loss);
    for (i, l) in log.epoch_losses.iter().enumerate() {
        loss.push_str(&format!("{}\t{l:.6}\n", i + 1));
    }
    write(&dir.join("loss.tsv"), &loss)?;
    let dev = evaluate_scorer(&splits.dev, &scorer, &dev_filter(&splits, cfg.mode));
    let test = evaluate_scorer(&splits.test, &scorer, &splits.answers_index(SplitSet::ALL));
    write(&dir.join("summary.tsv"), &split_summary(&[("dev", &dev), ("test", &test)]))?;
    echo_config(&dir, cfg)?;
    info!("scorer: dev MRR {:.4}, test MRR {:.4}", dev.mrr(), test.mrr());
    Ok((scorer, log))
}

fn split_summary(rows: &[(&str, &EvalReport)]) -> String {
    let mut out = String::from("split\tqueries\tMRR\tHits@1\tHits@3\tHits@10\n");
    for (name, rep) in rows {
        let [m, h1, h3, h10] = rep.summary_percent();
        out.push_str(&format!("{name}\t{}\t{m:.1}\t{h1:.1}\t{h3:.1}\t{h10:.1}\n", rep.len()));
    }
    out
}

/// Outcome of one policy seed.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedResult {
    pub seed: u64,
    pub best_epoch: Option<usize>,
    pub best_dev_mrr: Option<f64>,
    /// Test MRR, Hits@1, Hits@3, Hits@10 as fractions.
    pub test: [f64; 4],
    pub log: TrainLog,
}

/// Trains one policy into `dir`, streaming the curve file as epochs finish.
fn train_one(
    splits: &DatasetSplits,
    graph: &KnowledgeGraph,
    scorer: Option<&EmbeddingScorer>,
    cfg: &ExperimentConfig,
    seed: u64,
    dir: &Path,
) -> Result<(PolicyNet<f32>, TrainLog), CliError> {
    fs::create_dir_all(dir)?;
    let mut policy = new_policy(&splits.vocab, cfg, seed)?;
    let curve_path = dir.join(CURVE_FILE);
    let mut curve = fs::File::create(&curve_path)?;
    writeln!(curve, "{TRAIN_LOG_HEADER}")?;
    let mut io_error = None;
    let log = train(splits, graph, &mut policy, scorer, &cfg.train_config(seed), &mut |row| {
        if let Err(e) = writeln!(curve, "{}", row.tsv()).and_then(|_| curve.flush()) {
            io_error.get_or_insert(e);
        }
    })?;
    if let Some(e) = io_error {
        return Err(CliError::Data(format!("cannot write {}: {e}", curve_path.display())));
    }
    policy.save(&dir.join(POLICY_FILE))?;
    Ok((policy, log))
}

fn reward_scorer(
    layout: &Layout,
    splits: &DatasetSplits,
    use_scorer: bool,
) -> Result<Option<EmbeddingScorer>, CliError> {
    if use_scorer {
        load_scorer(&layout.scorer_checkpoint(), &splits.vocab).map(Some)
    } else {
        Ok(None)
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Trains one policy per seed, each with its checkpoint and curve, then
/// writes a per-seed table with mean and standard deviation rows.
pub fn train_policy(cfg: &ExperimentConfig) -> Result<Vec<SeedResult>, CliError> {
    let layout = Layout::new(&cfg.out_dir);
    let splits = load_prepared(&layout)?;
    let scorer = reward_scorer(&layout, &splits, !cfg.disable_rs)?;
    let graph = build_graph(&splits, cfg)?;
    let test_filter = splits.answers_index(SplitSet::ALL);
    let beam = cfg.train_config(0).beam();
    let mut results = Vec::new();
    for &seed in &cfg.seeds {
        info!("training policy seed {seed}");
        let (policy, log) = train_one(&splits, &graph, scorer.as_ref(), cfg, seed, &layout.seed_dir(seed))?;
        let test = evaluate_policy(&splits.test, &policy, &graph, &test_filter, &beam, cfg.workers)?;
        results.push(SeedResult {
            seed,
            best_epoch: log.best_epoch,
            best_dev_mrr: log.best_dev_mrr,
            test: [test.mrr(), test.hits(1), test.hits(3), test.hits(10)],
            log,
        });
    }
    let pct = |x: f64| format!("{:.1}", 100.0 * x);
    let mut out = String::from("seed\tbest_epoch\tdev_MRR\ttest_MRR\ttest_Hits@1\ttest_Hits@3\ttest_Hits@10\n");
    for r in &results {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            r.seed,
            r.best_epoch.map_or("-".into(), |e| e.to_string()),
            r.best_dev_mrr.map_or("-".into(), pct),
            r.test.iter().map(|&x| pct(x)).collect::<Vec<_>>().join("\t")
        ));
    }
    let dev: Vec<f64> = results.iter().filter_map(|r| r.best_dev_mrr).collect();
    let columns: Vec<(f64, f64)> = (0..4)
        .map(|k| mean_std(&results.iter().map(|r| r.test[k]).collect::<Vec<_>>()))
        .collect();
    let dev_stats = (!dev.is_empty()).then(|| mean_std(&dev));
    for (label, pick) in [("mean", 0usize), ("std", 1)] {
        let get = |p: (f64, f64)| if pick == 0 { p.0 } else { p.1 };
        out.push_str(&format!(
            "{label}\t-\t{}\t{}\n",
            dev_stats.map_or("-".into(), |s| pct(get(s))),
            columns.iter().map(|&c| pct(get(c))).collect::<Vec<_>>().join("\t")
        ));
    }
    write(&layout.seeds_summary(), &out)?;
    echo_config(&layout.policy_dir(), cfg)?;
    Ok(results)
}

/// Ranks the configured split with a trained policy or the scorer and writes
/// the summary, per-query ranks and, optionally, the breakdown tables.
///
/// Every input is loaded and every report computed before anything is
/// written, so a failure leaves no partial output.
pub fn evaluate(cfg: &ExperimentConfig) -> Result<EvalReport, CliError> {
    let layout = Layout::new(&cfg.out_dir);
    let splits = load_prepared(&layout)?;
    let (triples, filter, mode) = match cfg.split {
        Split::Dev => (&splits.dev, dev_filter(&splits, cfg.mode), cfg.mode),
        Split::Test => (&splits.test, splits.answers_index(SplitSet::ALL), EvalMode::FullKg),
    };
    let report = match cfg.model {
        ModelKind::Policy => {
            let path = cfg
                .checkpoint
                .clone()
                .unwrap_or_else(|| layout.seed_dir(cfg.seeds[0]).join(POLICY_FILE));
            let policy = load_policy(&path, &splits.vocab, cfg)?;
            let graph = build_graph(&splits, cfg)?;
            evaluate_policy(triples, &policy, &graph, &filter, &cfg.train_config(0).beam(), cfg.workers)?
        }
        ModelKind::Scorer => {
            let path = cfg.checkpoint.clone().unwrap_or_else(|| layout.scorer_checkpoint());
            let scorer = load_scorer(&path, &splits.vocab)?;
            evaluate_scorer(triples, &scorer, &filter)
        }
    };
    let train_index = splits.answers_index(SplitSet::TRAIN);
    let tags = |r: &kgwalk::eval::QueryRecord| {
        if train_index.has_query(r.triple.subject, r.triple.relation) {
            "seen".to_string()
        } else {
            "unseen".to_string()
        }
    };
    let mut files: Vec<(PathBuf, String)> = Vec::new();
    let dir = layout.eval_dir(cfg.model, cfg.split, cfg);
    files.push((dir.join("summary.tsv"), report.summary_tsv()));
    files.push((dir.join("queries.tsv"), report.query_tsv(&splits.vocab, &tags)));
    if cfg.breakdowns {
        let header = "slice\tpercent\tMRR\tHits@10\n";
        let types = relation_breakdown(&report, &filter);
        let seen = seen_unseen_breakdown(&report, &train_index);
        let rows = |s: &[kgwalk::eval::SliceMetrics]| {
            s.iter().map(|m| m.tsv_row() + "\n").collect::<String>()
        };
        files.push((dir.join("relation_types.tsv"), format!("{header}{}", rows(&types))));
        files.push((dir.join("seen_unseen.tsv"), format!("{header}{}", rows(&seen))));
    }
    files.push((dir.join(CONFIG_FILE), cfg.echo()));
    for (path, text) in &files {
        write(path, text)?;
    }
    info!(
        "{} {} ({}): MRR {:.4} Hits@10 {:.4} over {} queries",
        cfg.model.as_str(),
        cfg.split.as_str(),
        mode.as_str(),
        report.mrr(),
        report.hits(10),
        report.len()
    );
    Ok(report)
}

/// One row of the ablation table.
#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub variant: Variant,
    /// Dev MRR, Hits@1, Hits@3, Hits@10 with test facts hidden.
    pub dev: [f64; 4],
    pub full_kg_dev_mrr: f64,
    pub unique_paths: usize,
    pub log: TrainLog,
}

/// Trains every requested variant with the first seed and compares their
/// dev metrics.
pub fn ablate(cfg: &ExperimentConfig) -> Result<Vec<AblationRow>, CliError> {
    let layout = Layout::new(&cfg.out_dir);
    let splits = load_prepared(&layout)?;
    let needs_scorer = cfg.variants.iter().any(|v| v.uses_scorer());
    let scorer = reward_scorer(&layout, &splits, needs_scorer)?;
    let graph = build_graph(&splits, cfg)?;
    let seed = cfg.seeds[0];
    let hidden = dev_filter(&splits, EvalMode::HiddenTest);
    let full = dev_filter(&splits, EvalMode::FullKg);
    let beam = cfg.train_config(seed).beam();
    let mut rows = Vec::new();
    for &variant in &cfg.variants {
        let vcfg = cfg.for_variant(variant);
        info!("ablation variant {}", variant.as_str());
        let scorer = if variant.uses_scorer() { scorer.as_ref() } else { None };
        let dir = layout.variant_dir(variant);
        let (policy, log) = train_one(&splits, &graph, scorer, &vcfg, seed, &dir)?;
        echo_config(&dir, &vcfg)?;
        let dev = evaluate_policy(&splits.dev, &policy, &graph, &hidden, &beam, cfg.workers)?;
        let dev_full = evaluate_policy(&splits.dev, &policy, &graph, &full, &beam, cfg.workers)?;
        rows.push(AblationRow {
            variant,
            dev: [dev.mrr(), dev.hits(1), dev.hits(3), dev.hits(10)],
            full_kg_dev_mrr: dev_full.mrr(),
            unique_paths: log.rows.last().map_or(0, |r| r.unique_paths),
            log,
        });
    }
    let mut out = String::from("variant\tdev_MRR\tdev_Hits@1\tdev_Hits@3\tdev_Hits@10\tfull_kg_dev_MRR\tunique_paths\n");
    for r in &rows {
        let [m, h1, h3, h10] = r.dev.map(|x| 100.0 * x);
        out.push_str(&format!(
            "{}\t{m:.1}\t{h1:.1}\t{h3:.1}\t{h10:.1}\t{:.1}\t{}\n",
            r.variant.as_str(),
            100.0 * r.full_kg_dev_mrr,
            r.unique_paths
        ));
    }
    write(&layout.ablation_table(), &out)?;
    echo_config(&layout.ablate_dir(), cfg)?;
    Ok(rows)
}
