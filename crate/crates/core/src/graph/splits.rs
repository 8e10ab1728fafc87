use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use super::{load_triples, EntityId, RelationId, Triple, Vocabulary};
use crate::{Error, Result};

/// Which splits contribute to an answer lookup.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SplitSet {
    pub train: bool,
    pub dev: bool,
    pub test: bool,
}

impl SplitSet {
    pub const TRAIN: Self = Self {
        train: true,
        dev: false,
        test: false,
    };
    pub const TRAIN_DEV: Self = Self {
        train: true,
        dev: true,
        test: false,
    };
    pub const ALL: Self = Self {
        train: true,
        dev: true,
        test: true,
    };
}

/// `(subject, relation) → sorted objects`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AnswerIndex {
    map: HashMap<(EntityId, RelationId), Vec<EntityId>>,
}

impl AnswerIndex {
    pub fn from_triples<'a>(triples: impl IntoIterator<Item = &'a Triple>) -> Self {
        let mut map: HashMap<(EntityId, RelationId), Vec<EntityId>> = HashMap::new();
        for t in triples {
            map.entry((t.subject, t.relation)).or_default().push(t.object);
        }
        for v in map.values_mut() {
            v.sort_unstable();
            v.dedup();
        }
        Self { map }
    }

    /// Objects `o` with `(s, r, o)` indexed; empty if none.
    pub fn get(&self, s: EntityId, r: RelationId) -> &[EntityId] {
        self.map.get(&(s, r)).map_or(&[], Vec::as_slice)
    }

    pub fn contains(&self, s: EntityId, r: RelationId, o: EntityId) -> bool {
        self.get(s, r).binary_search(&o).is_ok()
    }

    pub fn has_query(&self, s: EntityId, r: RelationId) -> bool {
        self.map.contains_key(&(s, r))
    }

    pub fn num_queries(&self) -> usize {
        self.map.len()
    }
}

/// Train / dev / test facts over one shared vocabulary.
#[derive(Clone, Debug)]
pub struct DatasetSplits {
    pub vocab: Vocabulary,
    pub train: Vec<Triple>,
    pub dev: Vec<Triple>,
    pub test: Vec<Triple>,
    /// Training facts dropped because they also occur in dev or test.
    pub removed_from_train: Vec<Triple>,
}

fn dev_path(dir: &Path) -> Option<PathBuf> {
    ["dev.txt", "valid.txt"].iter().map(|n| dir.join(n)).find(|p| p.exists())
}

impl DatasetSplits {
    /// Builds from already-indexed triples, removing held-out facts from train.
    pub fn new(vocab: Vocabulary, train: Vec<Triple>, dev: Vec<Triple>, test: Vec<Triple>) -> Self {
        let held_out: HashSet<Triple> = dev.iter().chain(&test).copied().collect();
        let (train, removed): (Vec<Triple>, Vec<Triple>) = train.into_iter().partition(|t| !held_out.contains(t));
        if !removed.is_empty() {
            log::info!("removed {} training facts that also occur in dev/test", removed.len());
        }
        Self {
            vocab,
            train,
            dev,
            test,
            removed_from_train: removed,
        }
    }

    /// Reads `train.txt`, `dev.txt` (or `valid.txt`) and `test.txt` from `dir`,
    /// building a fresh vocabulary in that order. The vocabulary is frozen on return.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let mut vocab = Vocabulary::new();
        Self::load_with(dir, &mut vocab)
    }

    /// Like [`load_dir`](Self::load_dir) against a given vocabulary (frozen ⇒ strict).
    pub fn load_with(dir: &Path, vocab: &mut Vocabulary) -> Result<Self> {
        let train_path = dir.join("train.txt");
        let test_path = dir.join("test.txt");
        for p in [&train_path, &test_path] {
            if !p.exists() {
                return Err(Error::Io(std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    format!("missing {}", p.display()),
                )));
            }
        }
        let dev_path = dev_path(dir).ok_or_else(|| {
            Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("missing {}/dev.txt (or valid.txt)", dir.display()),
            ))
        })?;
        let train = load_triples(&train_path, vocab)?;
        let dev = load_triples(&dev_path, vocab)?;
        let test = load_triples(&test_path, vocab)?;
        if dev.is_empty() {
            log::warn!("dev split in {} is empty", dir.display());
        }
        let mut v = vocab.clone();
        v.freeze();
        Ok(Self::new(v, train, dev, test))
    }

    pub fn answers_index(&self, which: SplitSet) -> AnswerIndex {
        let mut parts: Vec<&Triple> = Vec::new();
        if which.train {
            parts.extend(&self.train);
        }
        if which.dev {
            parts.extend(&self.dev);
        }
        if which.test {
            parts.extend(&self.test);
        }
        AnswerIndex::from_triples(parts)
    }

    /// Objects of `(s, r, ·)` in the selected splits.
    pub fn answers(&self, which: SplitSet, s: EntityId, r: RelationId) -> Vec<EntityId> {
        self.answers_index(which).get(s, r).to_vec()
    }

    pub fn stats(&self) -> GraphStats {
        GraphStats::compute(&self.train, &self.vocab)
    }
}

/// Drops triples whose subject or object has no training edge. Returns the
/// surviving triples and the number removed.
pub fn filter_unseen_entities(triples: &[Triple], train: &[Triple]) -> (Vec<Triple>, usize) {
    let seen: HashSet<EntityId> = train.iter().flat_map(|t| [t.subject, t.object]).collect();
    let kept: Vec<Triple> = triples
        .iter()
        .filter(|t| seen.contains(&t.subject) && seen.contains(&t.object))
        .copied()
        .collect();
    let removed = triples.len() - kept.len();
    (kept, removed)
}

/// Dataset summary: entity / relation / fact counts and out-degree statistics
/// of the training facts.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphStats {
    pub entities: usize,
    pub relations: usize,
    pub facts: usize,
    pub mean_degree: f64,
    pub median_degree: f64,
}

impl GraphStats {
    pub fn compute(train: &[Triple], vocab: &Vocabulary) -> Self {
        let n = vocab.num_entities();
        let mut degree = vec![0usize; n];
        for t in train {
            degree[t.subject as usize] += 1;
        }
        degree.sort_unstable();
        let mean = if n == 0 { 0.0 } else { train.len() as f64 / n as f64 };
        let median = match n {
            0 => 0.0,
            _ if n % 2 == 1 => degree[n / 2] as f64,
            _ => (degree[n / 2 - 1] + degree[n / 2]) as f64 / 2.0,
        };
        Self {
            entities: n,
            relations: vocab.num_dataset_relations(),
            facts: train.len(),
            mean_degree: mean,
            median_degree: median,
        }
    }

    pub const TSV_HEADER: &'static str = "entities\trelations\tfacts\tmean_degree\tmedian_degree";

    pub fn tsv_row(&self) -> String {
        format!(
            "{}\t{}\t{}\t{:.2}\t{}",
            self.entities, self.relations, self.facts, self.mean_degree, self.median_degree
        )
    }
}
