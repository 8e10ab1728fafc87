use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use kgwalk::embed::{EmbedTrainConfig, ScorerKind};
use kgwalk::eval::EvalMode;
use kgwalk::graph::GraphConfig;
use kgwalk::policy::PolicyConfig;
use kgwalk::trainer::{table_action_dropout, TrainConfig};

use crate::CliError;

/// Which split `evaluate` reads.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Dev,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            _ => Err(format!("unknown split '{s}' (expected dev or test)")),
        }
    }
}

/// Which model `evaluate` ranks with.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Policy,
    Scorer,
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "policy" => Ok(ModelKind::Policy),
            "scorer" => Ok(ModelKind::Scorer),
            _ => Err(format!("unknown model '{s}' (expected policy or scorer)")),
        }
    }
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Policy => "policy",
            ModelKind::Scorer => "scorer",
        }
    }
}

/// Training variants compared by `ablate`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Full,
    NoShaping,
    NoDropout,
    Neither,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoShaping => "-rs",
            Variant::NoDropout => "-ad",
            Variant::Neither => "-rs-ad",
        }
    }

    pub fn uses_scorer(self) -> bool {
        matches!(self, Variant::Full | Variant::NoDropout)
    }

    pub fn uses_dropout(self) -> bool {
        matches!(self, Variant::Full | Variant::NoShaping)
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "full" => Ok(Variant::Full),
            "-rs" => Ok(Variant::NoShaping),
            "-ad" => Ok(Variant::NoDropout),
            "-rs-ad" => Ok(Variant::Neither),
            _ => Err(format!("unknown variant '{s}' (expected full, -rs, -ad or -rs-ad)")),
        }
    }
}

/// Every key, its default and a one-line description, in echo order.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("data_dir", "data/umls", "directory with train.txt, dev.txt (or valid.txt), test.txt"),
    ("out_dir", "runs/umls", "root of the output directory"),
    ("dataset", "auto", "benchmark name for per-dataset defaults; auto = last component of data_dir"),
    ("max_out_edges", "512", "fan-out cap per entity after PageRank pruning; none disables it"),
    ("scorer", "complex", "reward-shaping scorer: complex or distmult"),
    ("embed_dim", "200", "scorer embedding width"),
    ("embed_epochs", "50", "scorer training epochs"),
    ("embed_learning_rate", "0.003", "scorer Adam learning rate"),
    ("embed_batch_size", "128", "scorer queries per batch"),
    ("label_smoothing", "0.1", "scorer label smoothing"),
    ("embed_entity_dropout", "0.3", "scorer dropout on subject embeddings"),
    ("embed_relation_dropout", "0", "scorer dropout on relation embeddings"),
    ("embed_seed", "0", "scorer initialization and shuffling seed"),
    ("policy_dim", "200", "policy entity and relation embedding width"),
    ("policy_hidden", "200", "LSTM hidden width"),
    ("lstm_layers", "3", "stacked LSTM layers"),
    ("ff_dropout", "0.1", "dropout on the policy feed-forward layer"),
    ("emb_dropout", "0.3", "dropout on the policy's entity and relation features"),
    ("path_length", "3", "walk length T"),
    ("action_dropout", "auto", "action dropout rate; auto = per-dataset table, 0.5 otherwise"),
    ("epsilon", "0.00001", "smoothing added to every action under dropout"),
    ("entropy_weight", "0.02", "entropy regularization weight"),
    ("batch_size", "128", "training facts per batch"),
    ("epochs", "20", "policy training epochs"),
    ("learning_rate", "0.001", "policy Adam learning rate"),
    ("rollouts", "1", "walks per training fact per epoch"),
    ("grad_clip", "none", "global gradient-norm cap"),
    ("inverse_queries", "false", "also train on the inverse of every training fact"),
    ("reward_baseline", "false", "subtract a moving average of the batch reward"),
    ("baseline_decay", "0.9", "decay of the reward baseline"),
    ("eval_every", "1", "dev evaluation interval in epochs; 0 disables it"),
    ("dev_limit", "none", "evaluate only the first n dev facts during training"),
    ("beam_size", "128", "decoding beam width"),
    ("workers", "1", "evaluation threads"),
    ("seeds", "1", "comma-separated policy seeds"),
    ("disable_rs", "false", "train without reward shaping"),
    ("disable_ad", "false", "train without action dropout"),
    ("split", "test", "split read by evaluate: dev or test"),
    ("mode", "hidden-test", "dev filter for evaluate: hidden-test or full-kg"),
    ("model", "policy", "model ranked by evaluate: policy or scorer"),
    ("checkpoint", "auto", "policy checkpoint for evaluate; auto = first seed of train-policy"),
    ("breakdowns", "false", "also write relation-type and seen/unseen tables"),
    ("variants", "full,-rs,-ad", "variants trained by ablate"),
];

/// Fully resolved experiment settings.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    pub dataset: Option<String>,
    pub max_out_edges: Option<usize>,
    pub scorer: ScorerKind,
    pub embed_dim: usize,
    pub embed_epochs: usize,
    pub embed_learning_rate: f64,
    pub embed_batch_size: usize,
    pub label_smoothing: f64,
    pub embed_entity_dropout: f64,
    pub embed_relation_dropout: f64,
    pub embed_seed: u64,
    pub policy_dim: usize,
    pub policy_hidden: usize,
    pub lstm_layers: usize,
    pub ff_dropout: f64,
    pub emb_dropout: f64,
    pub path_length: usize,
    pub action_dropout: Option<f64>,
    pub epsilon: f64,
    pub entropy_weight: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub rollouts: usize,
    pub grad_clip: Option<f64>,
    pub inverse_queries: bool,
    pub reward_baseline: bool,
    pub baseline_decay: f64,
    pub eval_every: usize,
    pub dev_limit: Option<usize>,
    pub beam_size: usize,
    pub workers: usize,
    pub seeds: Vec<u64>,
    pub disable_rs: bool,
    pub disable_ad: bool,
    pub split: Split,
    pub mode: EvalMode,
    pub model: ModelKind,
    pub checkpoint: Option<PathBuf>,
    pub breakdowns: bool,
    pub variants: Vec<Variant>,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e| CliError::Config(format!("{key}: cannot parse '{value}': {e}")))
}

fn parse_opt<T: FromStr>(key: &str, value: &str, none: &str) -> Result<Option<T>, CliError>
where
    T::Err: Display,
{
    if value == none {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, CliError>
where
    T::Err: Display,
{
    let items = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect::<Result<Vec<T>, _>>()?;
    if items.is_empty() {
        return Err(CliError::Config(format!("{key}: empty list")));
    }
    Ok(items)
}

fn opt_str<T: Display>(v: &Option<T>, none: &str) -> String {
    v.as_ref().map_or(none.to_string(), T::to_string)
}

fn join<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(",")
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let mut cfg = Self {
            data_dir: PathBuf::new(),
            out_dir: PathBuf::new(),
            dataset: None,
            max_out_edges: None,
            scorer: ScorerKind::ComplEx,
            embed_dim: 0,
            embed_epochs: 0,
            embed_learning_rate: 0.0,
            embed_batch_size: 0,
            label_smoothing: 0.0,
            embed_entity_dropout: 0.0,
            embed_relation_dropout: 0.0,
            embed_seed: 0,
            policy_dim: 0,
            policy_hidden: 0,
            lstm_layers: 0,
            ff_dropout: 0.0,
            emb_dropout: 0.0,
            path_length: 0,
            action_dropout: None,
            epsilon: 0.0,
            entropy_weight: 0.0,
            batch_size: 0,
            epochs: 0,
            learning_rate: 0.0,
            rollouts: 0,
            grad_clip: None,
            inverse_queries: false,
            reward_baseline: false,
            baseline_decay: 0.0,
            eval_every: 0,
            dev_limit: None,
            beam_size: 0,
            workers: 0,
            seeds: Vec::new(),
            disable_rs: false,
            disable_ad: false,
            split: Split::Test,
            mode: EvalMode::HiddenTest,
            model: ModelKind::Policy,
            checkpoint: None,
            breakdowns: false,
            variants: Vec::new(),
        };
        for (key, value, _) in KEYS {
            cfg.set(key, value).expect("built-in defaults parse");
        }
        cfg
    }
}

impl ExperimentConfig {
    /// Sets one key from its text form. Unknown keys are configuration errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value.trim();
        match key {
            "data_dir" => self.data_dir = PathBuf::from(v),
            "out_dir" => self.out_dir = PathBuf::from(v),
            "dataset" => self.dataset = parse_opt(key, v, "auto")?,
            "max_out_edges" => self.max_out_edges = parse_opt(key, v, "none")?,
            "scorer" => self.scorer = parse(key, v)?,
            "embed_dim" => self.embed_dim = parse(key, v)?,
            "embed_epochs" => self.embed_epochs = parse(key, v)?,
            "embed_learning_rate" => self.embed_learning_rate = parse(key, v)?,
            "embed_batch_size" => self.embed_batch_size = parse(key, v)?,
            "label_smoothing" => self.label_smoothing = parse(key, v)?,
            "embed_entity_dropout" => self.embed_entity_dropout = parse(key, v)?,
            "embed_relation_dropout" => self.embed_relation_dropout = parse(key, v)?,
            "embed_seed" => self.embed_seed = parse(key, v)?,
            "policy_dim" => self.policy_dim = parse(key, v)?,
            "policy_hidden" => self.policy_hidden = parse(key, v)?,
            "lstm_layers" => self.lstm_layers = parse(key, v)?,
            "ff_dropout" => self.ff_dropout = parse(key, v)?,
            "emb_dropout" => self.emb_dropout = parse(key, v)?,
            "path_length" => self.path_length = parse(key, v)?,
            "action_dropout" => self.action_dropout = parse_opt(key, v, "auto")?,
            "epsilon" => self.epsilon = parse(key, v)?,
            "entropy_weight" => self.entropy_weight = parse(key, v)?,
            "batch_size" => self.batch_size = parse(key, v)?,
            "epochs" => self.epochs = parse(key, v)?,
            "learning_rate" => self.learning_rate = parse(key, v)?,
            "rollouts" => self.rollouts = parse(key, v)?,
            "grad_clip" => self.grad_clip = parse_opt(key, v, "none")?,
            "inverse_queries" => self.inverse_queries = parse(key, v)?,
            "reward_baseline" => self.reward_baseline = parse(key, v)?,
            "baseline_decay" => self.baseline_decay = parse(key, v)?,
            "eval_every" => self.eval_every = parse(key, v)?,
            "dev_limit" => self.dev_limit = parse_opt(key, v, "none")?,
            "beam_size" => self.beam_size = parse(key, v)?,
            "workers" => self.workers = parse(key, v)?,
            "seeds" => self.seeds = parse_list(key, v)?,
            "disable_rs" => self.disable_rs = parse(key, v)?,
            "disable_ad" => self.disable_ad = parse(key, v)?,
            "split" => self.split = parse(key, v)?,
            "mode" => self.mode = parse(key, v)?,
            "model" => self.model = parse(key, v)?,
            "checkpoint" => self.checkpoint = parse_opt(key, v, "auto")?,
            "breakdowns" => self.breakdowns = parse(key, v)?,
            "variants" => self.variants = parse_list(key, v)?,
            _ => return Err(CliError::Config(format!("unknown configuration key '{key}'"))),
        }
        Ok(())
    }

    /// Current value of `key` in the text form accepted by [`set`](Self::set).
    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "data_dir" => self.data_dir.display().to_string(),
            "out_dir" => self.out_dir.display().to_string(),
            "dataset" => opt_str(&self.dataset, "auto"),
            "max_out_edges" => opt_str(&self.max_out_edges, "none"),
            "scorer" => self.scorer.as_str().to_string(),
            "embed_dim" => self.embed_dim.to_string(),
            "embed_epochs" => self.embed_epochs.to_string(),
            "embed_learning_rate" => self.embed_learning_rate.to_string(),
            "embed_batch_size" => self.embed_batch_size.to_string(),
            "label_smoothing" => self.label_smoothing.to_string(),
            "embed_entity_dropout" => self.embed_entity_dropout.to_string(),
            "embed_relation_dropout" => self.embed_relation_dropout.to_string(),
            "embed_seed" => self.embed_seed.to_string(),
            "policy_dim" => self.policy_dim.to_string(),
            "policy_hidden" => self.policy_hidden.to_string(),
            "lstm_layers" => self.lstm_layers.to_string(),
            "ff_dropout" => self.ff_dropout.to_string(),
            "emb_dropout" => self.emb_dropout.to_string(),
            "path_length" => self.path_length.to_string(),
            "action_dropout" => opt_str(&self.action_dropout, "auto"),
            "epsilon" => self.epsilon.to_string(),
            "entropy_weight" => self.entropy_weight.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "epochs" => self.epochs.to_string(),
            "learning_rate" => self.learning_rate.to_string(),
            "rollouts" => self.rollouts.to_string(),
            "grad_clip" => opt_str(&self.grad_clip, "none"),
            "inverse_queries" => self.inverse_queries.to_string(),
            "reward_baseline" => self.reward_baseline.to_string(),
            "baseline_decay" => self.baseline_decay.to_string(),
            "eval_every" => self.eval_every.to_string(),
            "dev_limit" => opt_str(&self.dev_limit, "none"),
            "beam_size" => self.beam_size.to_string(),
            "workers" => self.workers.to_string(),
            "seeds" => join(&self.seeds, u64::to_string),
            "disable_rs" => self.disable_rs.to_string(),
            "disable_ad" => self.disable_ad.to_string(),
            "split" => self.split.as_str().to_string(),
            "mode" => self.mode.as_str().to_string(),
            "model" => self.model.as_str().to_string(),
            "checkpoint" => self
                .checkpoint
                .as_ref()
                .map_or("auto".to_string(), |p| p.display().to_string()),
            "breakdowns" => self.breakdowns.to_string(),
            "variants" => join(&self.variants, |v| v.as_str().to_string()),
            _ => return None,
        })
    }

    /// Applies `key = value` lines. Blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), CliError> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("{origin}:{}: expected 'key = value'", n + 1)))?;
            self.set(k.trim(), v)
                .map_err(|e| CliError::Config(format!("{origin}:{}: {}", n + 1, e.message())))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text, &path.display().to_string())?;
        Ok(cfg)
    }

    /// Replaces `auto` values with concrete ones and checks every range.
    pub fn resolve(mut self) -> Result<Self, CliError> {
        if self.dataset.is_none() {
            let name = self
                .data_dir
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            self.dataset = Some(name);
        }
        if self.action_dropout.is_none() {
            let name = self.dataset.as_deref().unwrap_or("");
            let alpha = table_action_dropout(name).unwrap_or_else(|| {
                log::warn!("no tuned action dropout rate for dataset '{name}', using 0.5");
                0.5
            });
            self.action_dropout = Some(alpha);
        }
        if self.seeds.is_empty() {
            return Err(CliError::Config("seeds: empty list".into()));
        }
        if self.workers == 0 {
            return Err(CliError::Config("workers must be at least 1".into()));
        }
        self.embed_config(self.embed_seed).validate()?;
        self.policy_config().validate()?;
        self.train_config(self.seeds[0]).validate()?;
        if self.max_out_edges == Some(0) {
            return Err(CliError::Config("max_out_edges must be at least 1".into()));
        }
        Ok(self)
    }

    /// `key = value` lines for every key, parseable by [`apply_text`](Self::apply_text).
    pub fn echo(&self) -> String {
        let mut out = String::new();
        for (key, _, doc) in KEYS {
            out.push_str(&format!("# {doc}\n{key} = {}\n", self.get(key).expect("listed key")));
        }
        out
    }

    pub fn dataset_name(&self) -> &str {
        self.dataset.as_deref().unwrap_or("")
    }

    pub fn graph_config(&self) -> GraphConfig {
        GraphConfig {
            max_out_edges: self.max_out_edges,
            ..GraphConfig::default()
        }
    }

    pub fn embed_config(&self, seed: u64) -> EmbedTrainConfig {
        EmbedTrainConfig {
            kind: self.scorer,
            dim: self.embed_dim,
            label_smoothing: self.label_smoothing,
            learning_rate: self.embed_learning_rate,
            batch_size: self.embed_batch_size,
            epochs: self.embed_epochs,
            entity_dropout: self.embed_entity_dropout,
            relation_dropout: self.embed_relation_dropout,
            seed,
        }
    }

    pub fn policy_config(&self) -> PolicyConfig {
        PolicyConfig {
            dim: self.policy_dim,
            hidden: self.policy_hidden,
            lstm_layers: self.lstm_layers,
            ff_dropout: self.ff_dropout,
            emb_dropout: self.emb_dropout,
        }
    }

    /// Walk-trainer settings for one seed; `disable_ad` forces `α = 0`.
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        let alpha = if self.disable_ad { 0.0 } else { self.action_dropout.unwrap_or(0.5) };
        TrainConfig {
            path_length: self.path_length,
            action_dropout: alpha,
            epsilon: self.epsilon,
            entropy_weight: self.entropy_weight,
            batch_size: self.batch_size,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            rollouts_per_example: self.rollouts,
            grad_clip: self.grad_clip,
            inverse_queries: self.inverse_queries,
            reward_baseline: self.reward_baseline,
            baseline_decay: self.baseline_decay,
            eval_every: self.eval_every,
            dev_limit: self.dev_limit,
            beam_size: self.beam_size,
            workers: self.workers,
            seed,
        }
    }

    /// Copy with the ablation switches set for `variant`.
    pub fn for_variant(&self, variant: Variant) -> Self {
        Self {
            disable_rs: !variant.uses_scorer(),
            disable_ad: !variant.uses_dropout(),
            ..self.clone()
        }
    }
}
