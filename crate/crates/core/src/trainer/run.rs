use std::fmt::Write as _;

use log::info;
use rand::seq::SliceRandom;

use super::{reinforce_loss, reinforce_update, rollout_batch, PathSignature, TrainConfig, UniquePaths, WalkChoice, WalkId};
use crate::embed::EmbeddingScorer;
use crate::eval::{dev_filter, evaluate, EvalMode};
use crate::graph::{DatasetSplits, KnowledgeGraph, Triple};
use crate::policy::PolicyNet;
use crate::rng::rng_for;
use crate::tensor::Tape;
use crate::{Error, Result};

const SHUFFLE_STREAM: u64 = 0x5407;

/// Seconds since the call; always 0 where the platform has no clock.
#[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
fn stopwatch() -> impl Fn() -> f64 {
    let t = std::time::Instant::now();
    move || t.elapsed().as_secs_f64()
}

#[cfg(all(target_arch = "wasm32", target_os = "unknown"))]
fn stopwatch() -> impl Fn() -> f64 {
    || 0.0
}

pub const TRAIN_LOG_HEADER: &str = "epoch\tloss\tdev_mrr\tdev_hits1\tdev_hits3\tdev_hits10\tunique_paths\tseconds";

#[derive(Clone, Debug, PartialEq)]
pub struct TrainLogRow {
    pub epoch: usize,
    pub loss: f64,
    pub mean_reward: f64,
    /// Dev MRR and Hits@1/3/10 (fractions), on evaluation epochs.
    pub dev: Option<[f64; 4]>,
    pub unique_paths: usize,
    pub seconds: f64,
}

impl TrainLogRow {
    pub fn tsv(&self) -> String {
        let mut s = format!("{}\t{:.6}", self.epoch, self.loss);
        match self.dev {
            Some(d) => d.iter().for_each(|x| {
                let _ = write!(s, "\t{x:.4}");
            }),
            None => s.push_str("\t-\t-\t-\t-"),
        }
        let _ = write!(s, "\t{}\t{:.1}", self.unique_paths, self.seconds);
        s
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub rows: Vec<TrainLogRow>,
    pub best_epoch: Option<usize>,
    pub best_dev_mrr: Option<f64>,
}

impl TrainLog {
    pub fn tsv(&self) -> String {
        let mut s = format!("{TRAIN_LOG_HEADER}\n");
        for r in &self.rows {
            s.push_str(&r.tsv());
            s.push('\n');
        }
        s
    }
}

/// On-policy training over the shuffled training facts, one example per fact.
///
/// Dev MRR is measured with test facts hidden every `eval_every` epochs; the
/// parameters of the best dev epoch are restored at the end. `on_epoch` sees
/// each log row as it is produced.
pub fn train(
    splits: &DatasetSplits,
    graph: &KnowledgeGraph,
    policy: &mut PolicyNet<f32>,
    scorer: Option<&EmbeddingScorer>,
    cfg: &TrainConfig,
    on_epoch: &mut dyn FnMut(&TrainLogRow),
) -> Result<TrainLog> {
    cfg.validate()?;
    if let Some(s) = scorer {
        if !s.is_frozen() {
            return Err(Error::contract("reward shaping needs a frozen scorer"));
        }
    }
    if cfg.epochs > 0 && splits.train.is_empty() {
        return Err(Error::contract("no training facts"));
    }
    policy.store_mut().set_learning_rate(cfg.learning_rate);
    policy.store_mut().set_clip_norm(cfg.grad_clip);
    let examples: Vec<Triple> = if cfg.inverse_queries {
        splits.train.iter().flat_map(|t| [*t, t.inverse()]).collect()
    } else {
        splits.train.clone()
    };
    let dev: Vec<Triple> = match cfg.dev_limit {
        Some(n) => splits.dev.iter().take(n).copied().collect(),
        None => splits.dev.clone(),
    };
    let filter = dev_filter(splits, EvalMode::HiddenTest);
    let beam = cfg.beam();

    let elapsed = stopwatch();
    let mut log = TrainLog::default();
    let mut best: Option<Vec<crate::tensor::Tensor<f32>>> = None;
    let mut paths = UniquePaths::default();
    let mut baseline = 0.0;
    let mut order: Vec<usize> = (0..examples.len()).collect();

    for epoch in 0..cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng_for(cfg.seed, &[SHUFFLE_STREAM, epoch as u64]));
        let (mut loss_sum, mut reward_sum, mut walks) = (0.0, 0.0, 0usize);
        for (batch_no, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let mut queries = Vec::with_capacity(chunk.len() * cfg.rollouts_per_example);
            let mut ids = Vec::with_capacity(queries.capacity());
            for &ex in chunk {
                for k in 0..cfg.rollouts_per_example {
                    queries.push(examples[ex]);
                    ids.push(WalkId {
                        example: ex as u64,
                        rollout: k as u64,
                    });
                }
            }
            let mut tape = Tape::new();
            let ro = rollout_batch(
                &mut tape,
                policy,
                graph,
                &queries,
                &ids,
                WalkChoice::Sample { epoch: epoch as u64 },
                cfg,
                scorer,
            )?;
            let batch_reward = ro.trajectories.iter().map(|t| t.reward).sum::<f64>() / ro.trajectories.len() as f64;
            let b = if cfg.reward_baseline { baseline } else { 0.0 };
            let loss = reinforce_loss(&mut tape, &ro, cfg.entropy_weight, b)?;
            let value = reinforce_update(policy, &tape, loss).map_err(|e| match e {
                Error::Numeric(m) => Error::Numeric(format!(
                    "{m} (epoch {}, batch {batch_no}, mean reward {batch_reward:.4})",
                    epoch + 1
                )),
                other => other,
            })?;
            if cfg.reward_baseline {
                baseline = cfg.baseline_decay * baseline + (1.0 - cfg.baseline_decay) * batch_reward;
            }
            for t in &ro.trajectories {
                paths.insert(PathSignature::new(t.query.subject, &t.steps));
            }
            loss_sum += value * ro.trajectories.len() as f64;
            reward_sum += batch_reward * ro.trajectories.len() as f64;
            walks += ro.trajectories.len();
        }

        let dev_metrics = if cfg.eval_every > 0 && (epoch + 1) % cfg.eval_every == 0 && !dev.is_empty() {
            let rep = evaluate(&dev, policy, graph, &filter, &beam, cfg.workers)?;
            let m = [rep.mrr(), rep.hits(1), rep.hits(3), rep.hits(10)];
            if log.best_dev_mrr.is_none_or(|b| m[0] > b) {
                log.best_dev_mrr = Some(m[0]);
                log.best_epoch = Some(epoch + 1);
                best = Some(policy.store().snapshot());
            }
            Some(m)
        } else {
            None
        };
        let row = TrainLogRow {
            epoch: epoch + 1,
            loss: loss_sum / walks.max(1) as f64,
            mean_reward: reward_sum / walks.max(1) as f64,
            dev: dev_metrics,
            unique_paths: paths.len(),
            seconds: elapsed(),
        };
        info!(
            "epoch {} loss {:.5} reward {:.4} dev {} paths {}",
            row.epoch,
            row.loss,
            row.mean_reward,
            row.dev.map_or("-".to_string(), |d| format!("{:.4}", d[0])),
            row.unique_paths
        );
        on_epoch(&row);
        log.rows.push(row);
    }
    if let Some(values) = best {
        policy.store_mut().restore(&values)?;
    }
    Ok(log)
}
