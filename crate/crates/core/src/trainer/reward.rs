use rand::Rng;

use crate::embed::EmbeddingScorer;
use crate::graph::{AnswerIndex, EntityId, RelationId};
use crate::tensor::Real;
use crate::Result;

/// 1 when `(e_s, r_q, e_T)` is a training fact, else 0.
pub fn binary_reward(s: EntityId, rq: RelationId, terminal: EntityId, answers: &AnswerIndex) -> f64 {
    if answers.contains(s, rq, terminal) {
        1.0
    } else {
        0.0
    }
}

/// `R_b + (1 − R_b)·f(e_s, r_q, e_T)`; plain binary reward without a scorer.
pub fn shaped_reward(
    s: EntityId,
    rq: RelationId,
    terminal: EntityId,
    answers: &AnswerIndex,
    scorer: Option<&EmbeddingScorer>,
) -> Result<f64> {
    let rb = binary_reward(s, rq, terminal, answers);
    let Some(scorer) = scorer else {
        return Ok(rb);
    };
    // Checked even for observed answers so an unfrozen scorer always fails.
    let f = scorer.score_prob(s, rq, terminal)? as f64;
    Ok(rb + (1.0 - rb) * f)
}

/// `π̃ ∝ π·m + ε` for a fixed keep-mask `m`.
pub fn perturb_with_mask<S: Real>(pi: &[S], mask: &[bool], eps: f64) -> Vec<S> {
    if !mask.iter().any(|&m| m) {
        return vec![S::one() / S::of(pi.len() as f64); pi.len()];
    }
    let eps = S::of(eps);
    let raw: Vec<S> = pi
        .iter()
        .zip(mask)
        .map(|(&p, &m)| if m { p + eps } else { eps })
        .collect();
    let z: S = raw.iter().copied().sum();
    raw.into_iter().map(|x| x / z).collect()
}

/// Action dropout: keeps each action with probability `1 − α`, then
/// smooths and renormalizes. Returns the sampling distribution and the mask.
pub fn perturb_distribution<S: Real, R: Rng>(pi: &[S], alpha: f64, eps: f64, rng: &mut R) -> (Vec<S>, Vec<bool>) {
    let mask: Vec<bool> = (0..pi.len()).map(|_| rng.random::<f64>() >= alpha).collect();
    (perturb_with_mask(pi, &mask, eps), mask)
}
