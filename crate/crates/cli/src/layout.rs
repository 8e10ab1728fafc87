use std::path::{Path, PathBuf};

use crate::config::{ExperimentConfig, ModelKind, Split, Variant};

/// Paths of every artifact under one output directory.
#[derive(Clone, Debug)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn prepared(&self) -> PathBuf {
        self.root.join("prepared")
    }

    pub fn stats(&self) -> PathBuf {
        self.prepared().join("stats.tsv")
    }

    pub fn scorer_dir(&self) -> PathBuf {
        self.root.join("scorer")
    }

    pub fn scorer_checkpoint(&self) -> PathBuf {
        self.scorer_dir().join("scorer.ckpt")
    }

    pub fn policy_dir(&self) -> PathBuf {
        self.root.join("policy")
    }

    pub fn seed_dir(&self, seed: u64) -> PathBuf {
        self.policy_dir().join(format!("seed-{seed}"))
    }

    pub fn seeds_summary(&self) -> PathBuf {
        self.policy_dir().join("seeds.tsv")
    }

    pub fn eval_dir(&self, model: ModelKind, split: Split, cfg: &ExperimentConfig) -> PathBuf {
        let mode = match split {
            Split::Dev => cfg.mode.as_str(),
            Split::Test => "full-kg",
        };
        self.root
            .join("eval")
            .join(format!("{}-{}-{mode}", model.as_str(), split.as_str()))
    }

    pub fn ablate_dir(&self) -> PathBuf {
        self.root.join("ablate")
    }

    pub fn variant_dir(&self, v: Variant) -> PathBuf {
        self.ablate_dir().join(v.as_str())
    }

    pub fn ablation_table(&self) -> PathBuf {
        self.ablate_dir().join("ablation.tsv")
    }
}

pub const POLICY_FILE: &str = "policy.ckpt";
pub const CURVE_FILE: &str = "curve.tsv";
pub const CONFIG_FILE: &str = "config.txt";
