use std::cmp::Ordering;
use std::collections::HashMap;

use crate::graph::{EntityId, KnowledgeGraph, RelationId};
use crate::policy::PolicyNet;
use crate::rng::stream_rng;
use crate::tensor::{Real, Tape, Tensor};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BeamConfig {
    pub beam_size: usize,
    pub path_length: usize,
}

impl Default for BeamConfig {
    fn default() -> Self {
        Self {
            beam_size: 128,
            path_length: 3,
        }
    }
}

/// One partial walk kept on the beam.
#[derive(Clone, Debug, PartialEq)]
pub struct Hypothesis {
    pub entity: EntityId,
    pub log_prob: f64,
    pub path: Vec<(RelationId, EntityId)>,
}

fn rank_order(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.log_prob
        .total_cmp(&a.log_prob)
        .then(a.entity.cmp(&b.entity))
        .then_with(|| a.path.cmp(&b.path))
}

fn gather_rows<S: Real>(t: &Tensor<S>, idx: &[usize]) -> Tensor<S> {
    let c = t.cols();
    let mut data = Vec::with_capacity(idx.len() * c);
    for &i in idx {
        data.extend_from_slice(t.row(i));
    }
    Tensor::new(vec![idx.len(), c], data).expect("row gather keeps width")
}

/// Beam search over `path_length`-step walks for each `(e_s, r_q)` query.
///
/// Intermediate steps keep the `beam_size` best paths per query. At the last
/// step every expansion of the surviving paths is collapsed onto its terminal
/// entity, scored by the best cumulative log-probability of any path reaching
/// it, and the `beam_size` best unique entities are returned in descending
/// score order with ties by ascending entity id.
pub fn beam_decode<S: Real>(
    policy: &PolicyNet<S>,
    graph: &KnowledgeGraph,
    queries: &[(EntityId, RelationId)],
    cfg: &BeamConfig,
) -> Result<Vec<Vec<(EntityId, f64)>>> {
    if cfg.beam_size == 0 {
        return Err(Error::config("beam_size must be at least 1"));
    }
    if queries.is_empty() {
        return Ok(Vec::new());
    }
    let mut rng = stream_rng(0, 0);
    let sources: Vec<EntityId> = queries.iter().map(|q| q.0).collect();
    // Flat list of hypotheses; `owner[i]` is the query index of hypothesis i.
    let mut beams: Vec<Hypothesis> = sources
        .iter()
        .map(|&e| Hypothesis {
            entity: e,
            log_prob: 0.0,
            path: Vec::new(),
        })
        .collect();
    let mut owner: Vec<usize> = (0..queries.len()).collect();
    let (mut h, mut c) = {
        let mut tape = Tape::new();
        let b = policy.bind(&mut tape);
        let st = policy.initial_state(&mut tape, &b, &sources)?;
        (
            st.h.iter().map(|&v| tape.value(v).clone()).collect::<Vec<_>>(),
            st.c.iter().map(|&v| tape.value(v).clone()).collect::<Vec<_>>(),
        )
    };

    for step in 0..cfg.path_length {
        let mut tape = Tape::new();
        let b = policy.bind(&mut tape);
        let st = policy.state_from_values(&mut tape, &h, &c);
        let current: Vec<EntityId> = beams.iter().map(|x| x.entity).collect();
        let rq: Vec<RelationId> = owner.iter().map(|&q| queries[q].1).collect();
        let slates: Vec<&[(RelationId, EntityId)]> = current.iter().map(|&e| graph.actions(e)).collect();
        let out = policy.step(&mut tape, &b, &st, &current, &rq, &slates, false, &mut rng)?;
        let lp = tape.value(out.log_probs).data();

        let mut per_query: Vec<Vec<(Hypothesis, usize)>> = vec![Vec::new(); queries.len()];
        for (i, hyp) in beams.iter().enumerate() {
            for (j, &action) in slates[i].iter().enumerate() {
                let mut path = hyp.path.clone();
                path.push(action);
                per_query[owner[i]].push((
                    Hypothesis {
                        entity: action.1,
                        log_prob: hyp.log_prob + lp[out.offsets[i] + j].as_f64(),
                        path,
                    },
                    i,
                ));
            }
        }
        if step + 1 == cfg.path_length {
            return Ok(per_query
                .into_iter()
                .map(|cands| unique_terminals(cands.into_iter().map(|c| c.0), cfg.beam_size))
                .collect());
        }
        let mut next = Vec::new();
        let mut next_owner = Vec::new();
        let mut parents = Vec::new();
        for (q, mut cands) in per_query.into_iter().enumerate() {
            cands.sort_by(|a, b| rank_order(&a.0, &b.0));
            cands.truncate(cfg.beam_size);
            for (hyp, parent) in cands {
                next.push(hyp);
                next_owner.push(q);
                parents.push(parent);
            }
        }
        beams = next;
        owner = next_owner;
        let mut tape = Tape::new();
        let b = policy.bind(&mut tape);
        let hp: Vec<_> = h.iter().map(|t| gather_rows(t, &parents)).collect();
        let cp: Vec<_> = c.iter().map(|t| gather_rows(t, &parents)).collect();
        let st = policy.state_from_values(&mut tape, &hp, &cp);
        let taken: Vec<_> = beams.iter().map(|x| *x.path.last().expect("non-empty path")).collect();
        let st = policy.lstm_step(&mut tape, &b, &st, &taken)?;
        h = st.h.iter().map(|&v| tape.value(v).clone()).collect();
        c = st.c.iter().map(|&v| tape.value(v).clone()).collect();
    }
    Ok(beams
        .iter()
        .zip(&owner)
        .fold(vec![Vec::new(); queries.len()], |mut acc, (hyp, &q)| {
            acc[q].push(hyp.clone());
            acc
        })
        .into_iter()
        .map(|hyps| unique_terminals(hyps.into_iter(), cfg.beam_size))
        .collect())
}

/// Best score per distinct terminal entity, the top `keep` of them in
/// descending score order with ties by ascending entity id.
fn unique_terminals(hyps: impl Iterator<Item = Hypothesis>, keep: usize) -> Vec<(EntityId, f64)> {
    let mut best = HashMap::<EntityId, f64>::new();
    for hyp in hyps {
        let slot = best.entry(hyp.entity).or_insert(f64::NEG_INFINITY);
        if hyp.log_prob > *slot {
            *slot = hyp.log_prob;
        }
    }
    let mut v: Vec<(EntityId, f64)> = best.into_iter().collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    v.truncate(keep);
    v
}
