//! One-hop scorers used as frozen reward-shaping oracles.

mod scorer;
mod train;

pub use scorer::{complex_score, distmult_score, logistic, EmbeddingScorer, ScorerKind};
pub use train::{train_scorer, EmbedTrainConfig, EmbedTrainLog};
