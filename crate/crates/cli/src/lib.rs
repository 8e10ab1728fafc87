//! Experiment runner: `prepare`, `train-embedding`, `train-policy`,
//! `evaluate` and `ablate` over a fixed output-directory layout.
//!
//! ```text
//! <out_dir>/
//!   prepared/   entities.txt relations.txt train.txt dev.txt test.txt
//!               removed_train.txt stats.tsv config.txt
//!   scorer/     scorer.ckpt loss.tsv summary.tsv config.txt
//!   policy/     seed-<s>/{policy.ckpt, curve.tsv}  seeds.tsv config.txt
//!   eval/<model>-<split>-<mode>/
//!               summary.tsv queries.tsv [relation_types.tsv seen_unseen.tsv] config.txt
//!   ablate/     <variant>/{policy.ckpt, curve.tsv, config.txt}  ablation.tsv config.txt
//! ```

mod commands;
mod config;
mod layout;

pub use commands::{ablate, evaluate, prepare, train_embedding, train_policy, AblationRow, SeedResult};
pub use config::{ExperimentConfig, ModelKind, Split, Variant, KEYS};
pub use layout::Layout;

/// Failure classes, each with its own process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub const EXIT_INTERNAL: i32 = 1;
    pub const EXIT_CONFIG: i32 = 2;
    pub const EXIT_DATA: i32 = 3;
    pub const EXIT_NUMERIC: i32 = 4;

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => Self::EXIT_CONFIG,
            CliError::Data(_) => Self::EXIT_DATA,
            CliError::Numeric(_) => Self::EXIT_NUMERIC,
            CliError::Internal(_) => Self::EXIT_INTERNAL,
        }
    }

    /// The message without the class prefix.
    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Data(m) | CliError::Numeric(m) | CliError::Internal(m) => m,
        }
    }
}

impl From<kgwalk::Error> for CliError {
    fn from(e: kgwalk::Error) -> Self {
        use kgwalk::Error as E;
        let msg = e.to_string();
        match e {
            E::Config(m) => CliError::Config(m),
            E::Numeric(m) => CliError::Numeric(m),
            E::Parse { .. } | E::Vocabulary { .. } | E::Checkpoint(_) | E::Io(_) => CliError::Data(msg),
            E::Shape { .. } | E::Contract(_) => CliError::Internal(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}
