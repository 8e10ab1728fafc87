use std::collections::BTreeSet;

use super::{pagerank, AnswerIndex, EntityId, PageRankConfig, RelationId, Triple, Vocabulary, NO_OP};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct GraphConfig {
    /// Cap on non-self-loop actions per entity; `None` keeps every edge.
    pub max_out_edges: Option<usize>,
    pub pagerank: PageRankConfig,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            max_out_edges: Some(512),
            pagerank: PageRankConfig::default(),
        }
    }
}

/// The environment the agent walks: inverse-augmented, self-looped and
/// PageRank-pruned adjacency built from training facts. Immutable after build.
#[derive(Clone, Debug)]
pub struct KnowledgeGraph {
    num_entities: usize,
    num_relations: usize,
    actions: Vec<Vec<(RelationId, EntityId)>>,
    pagerank: Vec<f64>,
    train_answers: AnswerIndex,
    max_out_edges: Option<usize>,
}

impl KnowledgeGraph {
    /// Builds the graph from training triples.
    ///
    /// Each entity's action list starts with its `NO_OP` self-loop, followed by
    /// its retained edges ordered by target PageRank (descending), then target
    /// id, then relation id. PageRank runs on the augmented, unpruned graph.
    pub fn build(train: &[Triple], vocab: &Vocabulary, cfg: &GraphConfig) -> Result<Self> {
        if cfg.max_out_edges == Some(0) {
            return Err(Error::config("fan-out cap must be at least 1"));
        }
        let n = vocab.num_entities();
        let num_relations = vocab.num_relations();
        let mut edges: Vec<BTreeSet<(RelationId, EntityId)>> = vec![BTreeSet::new(); n];
        for t in train {
            if t.subject as usize >= n || t.object as usize >= n || t.relation as usize >= num_relations {
                return Err(Error::contract(format!("triple {t:?} outside vocabulary")));
            }
            if Vocabulary::is_reserved(t.relation) || Vocabulary::is_inverse(t.relation) {
                return Err(Error::contract(format!("training triple {t:?} uses a reserved or inverse relation")));
            }
            edges[t.subject as usize].insert((t.relation, t.object));
            let inv = t.inverse();
            edges[inv.subject as usize].insert((inv.relation, inv.object));
        }

        let out_links: Vec<Vec<usize>> = edges
            .iter()
            .map(|es| es.iter().map(|&(_, o)| o as usize).collect())
            .collect();
        let scores = pagerank(&out_links, &cfg.pagerank);

        let actions = edges
            .into_iter()
            .enumerate()
            .map(|(e, es)| {
                let mut es: Vec<(RelationId, EntityId)> = es.into_iter().collect();
                es.sort_by(|a, b| {
                    scores[b.1 as usize]
                        .total_cmp(&scores[a.1 as usize])
                        .then(a.1.cmp(&b.1))
                        .then(a.0.cmp(&b.0))
                });
                if let Some(cap) = cfg.max_out_edges {
                    es.truncate(cap);
                }
                let mut list = Vec::with_capacity(es.len() + 1);
                list.push((NO_OP, e as EntityId));
                list.extend(es);
                list
            })
            .collect();

        Ok(Self {
            num_entities: n,
            num_relations,
            actions,
            pagerank: scores,
            train_answers: AnswerIndex::from_triples(train.iter().flat_map(|t| [*t, t.inverse()]).collect::<Vec<_>>().iter()),
            max_out_edges: cfg.max_out_edges,
        })
    }

    pub fn num_entities(&self) -> usize {
        self.num_entities
    }

    pub fn num_relations(&self) -> usize {
        self.num_relations
    }

    /// Outgoing actions of `e`; index 0 is always the self-loop.
    pub fn actions(&self, e: EntityId) -> &[(RelationId, EntityId)] {
        &self.actions[e as usize]
    }

    pub fn pagerank_scores(&self) -> &[f64] {
        &self.pagerank
    }

    /// Answers among the training facts and their inverses, before pruning.
    pub fn train_answers(&self) -> &AnswerIndex {
        &self.train_answers
    }

    pub fn max_out_edges(&self) -> Option<usize> {
        self.max_out_edges
    }

    pub fn num_edges(&self) -> usize {
        self.actions.iter().map(Vec::len).sum()
    }
}
