use crate::eval::BeamConfig;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    /// Walk length `T`.
    pub path_length: usize,
    /// Action-dropout rate `α`.
    pub action_dropout: f64,
    /// Smoothing `ε` added to every action before renormalizing.
    pub epsilon: f64,
    /// Entropy regularization weight `β`.
    pub entropy_weight: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Walks sampled per training fact in each epoch.
    pub rollouts_per_example: usize,
    /// Global gradient-norm cap; `None` disables clipping.
    pub grad_clip: Option<f64>,
    /// Also train on `(e_o, r⁻¹, e_s)` for every training fact.
    pub inverse_queries: bool,
    /// Subtract a moving average of the batch reward.
    pub reward_baseline: bool,
    pub baseline_decay: f64,
    /// Dev evaluation interval in epochs; 0 disables it.
    pub eval_every: usize,
    /// Evaluate only the first `n` dev facts when set.
    pub dev_limit: Option<usize>,
    pub beam_size: usize,
    pub workers: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            path_length: 3,
            action_dropout: 0.5,
            epsilon: 1e-5,
            entropy_weight: 0.02,
            batch_size: 128,
            epochs: 20,
            learning_rate: 1e-3,
            rollouts_per_example: 1,
            grad_clip: None,
            inverse_queries: false,
            reward_baseline: false,
            baseline_decay: 0.9,
            eval_every: 1,
            dev_limit: None,
            beam_size: 128,
            workers: 1,
            seed: 0,
        }
    }
}

/// Tuned action-dropout rate for a known benchmark name.
pub fn table_action_dropout(dataset: &str) -> Option<f64> {
    match dataset.to_ascii_lowercase().as_str() {
        "umls" => Some(0.95),
        "kinship" => Some(0.9),
        "fb15k-237" | "fb15k237" => Some(0.5),
        "wn18rr" => Some(0.1),
        "nell-995" | "nell995" => Some(0.1),
        _ => None,
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.path_length == 0 {
            return Err(Error::config("path_length must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.action_dropout) {
            return Err(Error::config("action_dropout must lie in [0, 1)"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::config("epsilon must be positive"));
        }
        if !(0.0..=0.1).contains(&self.entropy_weight) {
            return Err(Error::config("entropy_weight must lie in [0, 0.1]"));
        }
        if self.batch_size == 0 || self.rollouts_per_example == 0 || self.beam_size == 0 {
            return Err(Error::config("batch_size, rollouts_per_example and beam_size must be positive"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::config("learning_rate must be positive"));
        }
        if self.grad_clip.is_some_and(|c| !(c > 0.0)) {
            return Err(Error::config("grad_clip must be positive"));
        }
        if !(0.0..1.0).contains(&self.baseline_decay) {
            return Err(Error::config("baseline_decay must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn beam(&self) -> BeamConfig {
        BeamConfig {
            beam_size: self.beam_size,
            path_length: self.path_length,
        }
    }
}
