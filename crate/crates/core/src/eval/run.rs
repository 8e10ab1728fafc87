use std::str::FromStr;

use super::{beam_decode, filtered_rank, BeamConfig, EvalReport};
use crate::embed::EmbeddingScorer;
use crate::graph::{AnswerIndex, DatasetSplits, EntityId, KnowledgeGraph, RelationId, SplitSet, Triple};
use crate::policy::PolicyNet;
use crate::tensor::Real;
use crate::{Error, Result};

/// Which facts count as known answers when filtering ranks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalMode {
    /// Dev ranks are filtered by train ∪ dev, so test facts stay hidden.
    HiddenTest,
    /// Every split is filtered by train ∪ dev ∪ test.
    FullKg,
}

impl EvalMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EvalMode::HiddenTest => "hidden-test",
            EvalMode::FullKg => "full-kg",
        }
    }
}

impl FromStr for EvalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hidden-test" => Ok(EvalMode::HiddenTest),
            "full-kg" => Ok(EvalMode::FullKg),
            other => Err(Error::config(format!("unknown evaluation mode '{other}'"))),
        }
    }
}

/// Answer filter for dev evaluation under `mode`.
pub fn dev_filter(splits: &DatasetSplits, mode: EvalMode) -> AnswerIndex {
    match mode {
        EvalMode::HiddenTest => splits.answers_index(SplitSet::TRAIN_DEV),
        EvalMode::FullKg => splits.answers_index(SplitSet::ALL),
    }
}

/// Queries decoded together; fixed so results do not depend on `workers`.
const CHUNK: usize = 64;

/// Beam-decodes every `(e_s, r_q, ?)` of `triples` and ranks its gold object
/// after removing the other answers listed in `filter`.
pub fn evaluate<S: Real>(
    triples: &[Triple],
    policy: &PolicyNet<S>,
    graph: &KnowledgeGraph,
    filter: &AnswerIndex,
    beam: &BeamConfig,
    workers: usize,
) -> Result<EvalReport> {
    let chunks: Vec<&[Triple]> = triples.chunks(CHUNK).collect();
    let rank_chunk = |chunk: &[Triple]| -> Result<Vec<usize>> {
        let queries: Vec<(EntityId, RelationId)> = chunk.iter().map(|t| (t.subject, t.relation)).collect();
        let decoded = beam_decode(policy, graph, &queries, beam)?;
        Ok(chunk
            .iter()
            .zip(decoded)
            .map(|(t, list)| {
                let ranked: Vec<EntityId> = list.into_iter().map(|x| x.0).collect();
                filtered_rank(&ranked, t.object, filter.get(t.subject, t.relation), graph.num_entities())
            })
            .collect())
    };
    let workers = workers.max(1).min(chunks.len().max(1));
    let mut per_chunk: Vec<Option<Result<Vec<usize>>>> = (0..chunks.len()).map(|_| None).collect();
    if workers == 1 {
        for (slot, chunk) in per_chunk.iter_mut().zip(&chunks) {
            *slot = Some(rank_chunk(chunk));
        }
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let chunks = &chunks;
                    let rank_chunk = &rank_chunk;
                    scope.spawn(move || {
                        (w..chunks.len())
                            .step_by(workers)
                            .map(|i| (i, rank_chunk(chunks[i])))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for h in handles {
                for (i, r) in h.join().expect("evaluation worker panicked") {
                    per_chunk[i] = Some(r);
                }
            }
        });
    }
    let mut ranks = Vec::with_capacity(triples.len());
    for r in per_chunk {
        ranks.extend(r.expect("every chunk evaluated")?);
    }
    Ok(EvalReport::from_ranks(triples, &ranks))
}

/// Filtered ranks of a one-hop scorer's full entity ranking.
pub fn evaluate_scorer(triples: &[Triple], scorer: &EmbeddingScorer, filter: &AnswerIndex) -> EvalReport {
    let ranks: Vec<usize> = triples
        .iter()
        .map(|t| {
            let ranked: Vec<EntityId> = scorer.rank(t.subject, t.relation).into_iter().map(|x| x.0).collect();
            filtered_rank(&ranked, t.object, filter.get(t.subject, t.relation), scorer.num_entities())
        })
        .collect();
    EvalReport::from_ranks(triples, &ranks)
}
