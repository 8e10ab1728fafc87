use rand::Rng as _;

use super::{perturb_distribution, shaped_reward, TrainConfig};
use crate::embed::EmbeddingScorer;
use crate::graph::{EntityId, KnowledgeGraph, RelationId, Triple, Vocabulary, NO_OP};
use crate::policy::PolicyNet;
use crate::rng::rng_for;
use crate::tensor::{Real, Tape, Tensor, Var};
use crate::{Error, Result};

const WALK_STREAM: u64 = 0x57A1;
const DROPOUT_STREAM: u64 = 0xD50F;

/// Coordinates of one sampled walk; its random stream depends only on these.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WalkId {
    pub example: u64,
    pub rollout: u64,
}

/// How each step's action is picked.
#[derive(Clone, Copy, Debug)]
pub enum WalkChoice<'a> {
    /// Sample from the action-dropout distribution `π̃`.
    Sample { epoch: u64 },
    /// Follow a given action sequence per walk (for exact enumeration).
    Forced(&'a [Vec<(RelationId, EntityId)>]),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub query: Triple,
    pub steps: Vec<(RelationId, EntityId)>,
    /// Index of each chosen action within its (masked) slate.
    pub chosen: Vec<usize>,
    pub slate_sizes: Vec<usize>,
    /// `log π_θ(a_t | s_t)` of each chosen action.
    pub log_probs: Vec<f64>,
    pub terminal: EntityId,
    pub reward: f64,
}

/// A batch of walks recorded on a tape.
#[derive(Clone, Debug)]
pub struct Rollouts {
    pub trajectories: Vec<Trajectory>,
    /// `Σ_t log π_θ(a_t | s_t)` per walk.
    pub path_log_prob: Var,
    /// Mean entropy of `π_θ` over every visited state.
    pub entropy: Var,
}

/// Actions the agent may take from `current` while answering `query`.
///
/// The query's own edge (and its inverse) is never available, and at the last
/// step every other known answer is removed so the walk cannot end on it.
/// That includes staying put on one; the self-loop is kept only when nothing
/// else is left.
pub(crate) fn permitted(
    graph: &KnowledgeGraph,
    query: &Triple,
    current: EntityId,
    last_step: bool,
) -> Vec<(RelationId, EntityId)> {
    let answers = graph.train_answers().get(query.subject, query.relation);
    let inv = if Vocabulary::is_reserved(query.relation) {
        query.relation
    } else {
        Vocabulary::inverse(query.relation)
    };
    let other_answer = |e: EntityId| last_step && e != query.object && answers.binary_search(&e).is_ok();
    let kept: Vec<_> = graph
        .actions(current)
        .iter()
        .copied()
        .filter(|&(r, e)| {
            let own = r != NO_OP
                && ((current == query.subject && r == query.relation && e == query.object)
                    || (current == query.object && r == inv && e == query.subject));
            !own && !other_answer(e)
        })
        .collect();
    if kept.is_empty() {
        vec![(NO_OP, current)]
    } else {
        kept
    }
}

/// Runs `cfg.path_length` steps for every query on `tape`.
///
/// Log-probabilities and entropies come from `π_θ`; sampling uses the
/// action-dropout distribution. Rewards use the training answers of `graph`
/// and the optional frozen `scorer`.
#[allow(clippy::too_many_arguments)]
pub fn rollout_batch<S: Real>(
    tape: &mut Tape<S>,
    policy: &PolicyNet<S>,
    graph: &KnowledgeGraph,
    queries: &[Triple],
    ids: &[WalkId],
    choice: WalkChoice,
    cfg: &TrainConfig,
    scorer: Option<&EmbeddingScorer>,
) -> Result<Rollouts> {
    if queries.is_empty() || queries.len() != ids.len() {
        return Err(Error::contract("rollout needs one walk id per query and a non-empty batch"));
    }
    if let WalkChoice::Forced(paths) = choice {
        if paths.len() != queries.len() || paths.iter().any(|p| p.len() != cfg.path_length) {
            return Err(Error::contract("forced paths must give one full walk per query"));
        }
    }
    let epoch = match choice {
        WalkChoice::Sample { epoch } => epoch,
        WalkChoice::Forced(_) => 0,
    };
    let n = queries.len();
    let mut walk_rngs: Vec<_> = ids
        .iter()
        .map(|w| rng_for(cfg.seed, &[WALK_STREAM, epoch, w.example, w.rollout]))
        .collect();
    let mut ff_rng = rng_for(cfg.seed, &[DROPOUT_STREAM, epoch, ids[0].example, ids[0].rollout]);

    let b = policy.bind(tape);
    let sources: Vec<EntityId> = queries.iter().map(|q| q.subject).collect();
    let rq: Vec<RelationId> = queries.iter().map(|q| q.relation).collect();
    let mut state = policy.initial_state(tape, &b, &sources)?;
    let mut current = sources.clone();
    let mut trajs: Vec<Trajectory> = queries
        .iter()
        .map(|&q| Trajectory {
            query: q,
            steps: Vec::with_capacity(cfg.path_length),
            chosen: Vec::with_capacity(cfg.path_length),
            slate_sizes: Vec::with_capacity(cfg.path_length),
            log_probs: Vec::with_capacity(cfg.path_length),
            terminal: q.subject,
            reward: 0.0,
        })
        .collect();
    let mut path_lp: Option<Var> = None;
    let mut entropy_sum: Option<Var> = None;

    for t in 0..cfg.path_length {
        let last = t + 1 == cfg.path_length;
        let slates: Vec<Vec<(RelationId, EntityId)>> =
            (0..n).map(|i| permitted(graph, &queries[i], current[i], last)).collect();
        let slate_refs: Vec<&[(RelationId, EntityId)]> = slates.iter().map(Vec::as_slice).collect();
        let out = policy.step(tape, &b, &state, &current, &rq, &slate_refs, true, &mut ff_rng)?;
        let lp = tape.value(out.log_probs).data().to_vec();

        let mut flat_choice = Vec::with_capacity(n);
        let mut taken = Vec::with_capacity(n);
        for i in 0..n {
            let seg = &lp[out.offsets[i]..out.offsets[i + 1]];
            let k = match choice {
                WalkChoice::Sample { .. } => {
                    let pi: Vec<f64> = seg.iter().map(|x| x.as_f64().exp()).collect();
                    let rng = &mut walk_rngs[i];
                    let (sampler, _) = perturb_distribution(&pi, cfg.action_dropout, cfg.epsilon, rng);
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    let mut pick = sampler.len() - 1;
                    for (j, p) in sampler.iter().enumerate() {
                        acc += p;
                        if u < acc {
                            pick = j;
                            break;
                        }
                    }
                    pick
                }
                WalkChoice::Forced(paths) => {
                    let want = paths[i][t];
                    slates[i].iter().position(|&a| a == want).ok_or_else(|| {
                        Error::contract(format!("forced action {want:?} is not permitted at step {t}"))
                    })?
                }
            };
            let action = slates[i][k];
            let tr = &mut trajs[i];
            tr.steps.push(action);
            tr.chosen.push(k);
            tr.slate_sizes.push(seg.len());
            tr.log_probs.push(seg[k].as_f64());
            flat_choice.push(out.offsets[i] + k);
            taken.push(action);
            current[i] = action.1;
        }

        let chosen = tape.gather(out.log_probs, &flat_choice)?;
        path_lp = Some(match path_lp {
            Some(acc) => tape.add(acc, chosen)?,
            None => chosen,
        });
        let p = tape.exp(out.log_probs);
        let plogp = tape.mul(p, out.log_probs)?;
        let neg_h = tape.segment_sum(plogp, &out.offsets)?;
        entropy_sum = Some(match entropy_sum {
            Some(acc) => tape.add(acc, neg_h)?,
            None => neg_h,
        });
        if !last {
            state = policy.lstm_step(tape, &b, &state, &taken)?;
        }
    }

    for tr in &mut trajs {
        tr.terminal = tr.steps.last().map_or(tr.query.subject, |a| a.1);
        tr.reward = shaped_reward(
            tr.query.subject,
            tr.query.relation,
            tr.terminal,
            graph.train_answers(),
            scorer,
        )?;
    }
    let neg_h = entropy_sum.expect("at least one step");
    let mean_neg_h = tape.mean(neg_h);
    let entropy = tape.scale(mean_neg_h, S::of(-1.0 / cfg.path_length as f64));
    Ok(Rollouts {
        trajectories: trajs,
        path_log_prob: path_lp.expect("at least one step"),
        entropy,
    })
}

/// `−mean_b((R_b − baseline)·Σ_t log π_θ) − β·H`.
pub fn reinforce_loss<S: Real>(tape: &mut Tape<S>, rollouts: &Rollouts, beta: f64, baseline: f64) -> Result<Var> {
    let adv: Vec<S> = rollouts.trajectories.iter().map(|t| S::of(t.reward - baseline)).collect();
    let adv = tape.constant(Tensor::vector(adv));
    let weighted = tape.mul(rollouts.path_log_prob, adv)?;
    let m = tape.mean(weighted);
    let mut loss = tape.scale(m, S::of(-1.0));
    if beta != 0.0 {
        let h = tape.scale(rollouts.entropy, S::of(beta));
        loss = tape.sub(loss, h)?;
    }
    Ok(loss)
}

/// Backpropagates `loss` and applies one Adam step. Returns the loss value.
pub fn reinforce_update<S: Real>(policy: &mut PolicyNet<S>, tape: &Tape<S>, loss: Var) -> Result<f64> {
    let value = tape.value(loss).item()?.as_f64();
    if !value.is_finite() {
        return Err(Error::Numeric(format!("policy loss is {value}")));
    }
    let grads = tape.backward(loss)?;
    let store = policy.store_mut();
    store.accumulate(&grads)?;
    let norm = store.grad_norm();
    if !norm.is_finite() {
        store.zero_grad();
        return Err(Error::Numeric(format!("policy gradient norm is {norm} at loss {value}")));
    }
    store.adam_step()?;
    Ok(value)
}
