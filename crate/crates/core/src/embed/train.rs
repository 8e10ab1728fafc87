use std::collections::BTreeMap;

use log::info;
use rand::seq::SliceRandom;

use super::{EmbeddingScorer, ScorerKind};
use crate::graph::{EntityId, RelationId, Triple, Vocabulary};
use crate::rng::rng_for;
use crate::tensor::{xavier_init, AdamConfig, ParameterStore, Tape, Tensor};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct EmbedTrainConfig {
    pub kind: ScorerKind,
    pub dim: usize,
    pub label_smoothing: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub entity_dropout: f64,
    pub relation_dropout: f64,
    pub seed: u64,
}

impl Default for EmbedTrainConfig {
    fn default() -> Self {
        Self {
            kind: ScorerKind::ComplEx,
            dim: 200,
            label_smoothing: 0.1,
            learning_rate: 3e-3,
            batch_size: 128,
            epochs: 50,
            entity_dropout: 0.3,
            relation_dropout: 0.0,
            seed: 0,
        }
    }
}

impl EmbedTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.batch_size == 0 {
            return Err(Error::config("scorer dim and batch_size must be positive"));
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return Err(Error::config("label_smoothing must lie in [0, 1)"));
        }
        for (name, p) in [("entity_dropout", self.entity_dropout), ("relation_dropout", self.relation_dropout)] {
            if !(0.0..=0.5).contains(&p) {
                return Err(Error::config(format!("{name} must lie in [0, 0.5]")));
            }
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::config("scorer learning_rate must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default)]
pub struct EmbedTrainLog {
    /// Full-pass loss before any update, without dropout.
    pub initial_loss: f64,
    /// Mean minibatch loss of each epoch.
    pub epoch_losses: Vec<f64>,
}

/// `(s, r) → answers` over the training facts and their inverses.
fn one_to_n_queries(train: &[Triple]) -> Vec<((EntityId, RelationId), Vec<EntityId>)> {
    let mut map: BTreeMap<(EntityId, RelationId), Vec<EntityId>> = BTreeMap::new();
    for t in train {
        for f in [*t, t.inverse()] {
            map.entry((f.subject, f.relation)).or_default().push(f.object);
        }
    }
    map.into_iter()
        .map(|(k, mut v)| {
            v.sort_unstable();
            v.dedup();
            (k, v)
        })
        .collect()
}

struct Model {
    store: ParameterStore<f32>,
    kind: ScorerKind,
    dim: usize,
}

impl Model {
    /// Mean smoothed BCE over `|batch| × |E|` logits.
    fn loss(
        &self,
        tape: &mut Tape<f32>,
        batch: &[&((EntityId, RelationId), Vec<EntityId>)],
        cfg: &EmbedTrainConfig,
        train: bool,
        rng: &mut crate::rng::Rng,
    ) -> Result<crate::tensor::Var> {
        let ids: Vec<_> = self.store.ids().collect();
        let ent = tape.param(&self.store, ids[0]);
        let rel = tape.param(&self.store, ids[1]);
        let n = self.store.value(ids[0]).rows();
        let s_ids: Vec<usize> = batch.iter().map(|q| q.0 .0 as usize).collect();
        let r_ids: Vec<usize> = batch.iter().map(|q| q.0 .1 as usize).collect();
        let s = tape.embedding_lookup(ent, &s_ids)?;
        let r = tape.embedding_lookup(rel, &r_ids)?;
        let s = tape.dropout(s, cfg.entity_dropout, train, rng)?;
        let r = tape.dropout(r, cfg.relation_dropout, train, rng)?;
        let q = match self.kind {
            ScorerKind::DistMult => tape.mul(s, r)?,
            ScorerKind::ComplEx => {
                let d = self.dim;
                let (sr, si) = (tape.slice_cols(s, 0, d)?, tape.slice_cols(s, d, d)?);
                let (rr, ri) = (tape.slice_cols(r, 0, d)?, tape.slice_cols(r, d, d)?);
                let a = tape.mul(sr, rr)?;
                let b = tape.mul(si, ri)?;
                let re = tape.sub(a, b)?;
                let c = tape.mul(sr, ri)?;
                let e = tape.mul(si, rr)?;
                let im = tape.add(c, e)?;
                tape.concat_cols(&[re, im])?
            }
        };
        let logits = tape.matmul_t(q, ent)?;
        let ls = cfg.label_smoothing as f32;
        let mut targets = vec![ls / n as f32; batch.len() * n];
        for (b, q) in batch.iter().enumerate() {
            for &o in &q.1 {
                targets[b * n + o as usize] += 1.0 - ls;
            }
        }
        tape.bce_with_logits(logits, targets)
    }
}

/// Trains a DistMult or ComplEx scorer with 1-N smoothed binary
/// cross-entropy on `train` (plus inverse-direction queries) and returns it
/// frozen.
pub fn train_scorer(
    train: &[Triple],
    num_entities: usize,
    num_relations: usize,
    cfg: &EmbedTrainConfig,
) -> Result<(EmbeddingScorer, EmbedTrainLog)> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::contract("scorer training needs at least one fact"));
    }
    if let Some(t) = train.iter().find(|t| {
        t.subject as usize >= num_entities || t.object as usize >= num_entities || t.relation as usize >= num_relations
    }) {
        return Err(Error::contract(format!("fact {t:?} is outside the vocabulary")));
    }
    if let Some(t) = train.iter().find(|t| Vocabulary::is_reserved(t.relation)) {
        return Err(Error::contract(format!("fact {t:?} uses a reserved relation")));
    }
    let width = cfg.kind.width(cfg.dim);
    let mut init_rng = rng_for(cfg.seed, &[0xE3B, 0]);
    let mut store = ParameterStore::new(AdamConfig {
        learning_rate: cfg.learning_rate,
        ..AdamConfig::default()
    });
    store.add("entity", xavier_init(&[num_entities, width], &mut init_rng)?)?;
    store.add("relation", xavier_init(&[num_relations, width], &mut init_rng)?)?;
    let model = Model {
        store,
        kind: cfg.kind,
        dim: cfg.dim,
    };
    let mut model = model;

    let queries = one_to_n_queries(train);
    let mut log = EmbedTrainLog::default();
    {
        let mut total = 0.0;
        for chunk in queries.chunks(cfg.batch_size) {
            let batch: Vec<_> = chunk.iter().collect();
            let mut tape = Tape::new();
            let loss = model.loss(&mut tape, &batch, cfg, false, &mut init_rng)?;
            total += tape.value(loss).item()? as f64 * chunk.len() as f64;
        }
        log.initial_loss = total / queries.len() as f64;
    }

    let mut order: Vec<usize> = (0..queries.len()).collect();
    for epoch in 0..cfg.epochs {
        let mut rng = rng_for(cfg.seed, &[0xE3B, 1, epoch as u64]);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for idx in order.chunks(cfg.batch_size) {
            let batch: Vec<_> = idx.iter().map(|&i| &queries[i]).collect();
            let mut tape = Tape::new();
            let loss = model.loss(&mut tape, &batch, cfg, true, &mut rng)?;
            let value = tape.value(loss).item()? as f64;
            if !value.is_finite() {
                return Err(Error::Numeric(format!("scorer loss became {value} in epoch {epoch}")));
            }
            total += value * idx.len() as f64;
            model.store.accumulate(&tape.backward(loss)?)?;
            model.store.adam_step()?;
        }
        let mean = total / queries.len() as f64;
        info!("scorer {} epoch {} loss {:.6}", cfg.kind.as_str(), epoch + 1, mean);
        log.epoch_losses.push(mean);
    }

    let mut values = model.store.snapshot().into_iter();
    let entity: Tensor<f32> = values.next().expect("entity table");
    let relation: Tensor<f32> = values.next().expect("relation table");
    Ok((EmbeddingScorer::new(cfg.kind, entity, relation)?.freeze(), log))
}
