use std::path::Path;

use crate::graph::{EntityId, RelationId, START};
use crate::rng::{rng_for, Rng};
use crate::tensor::{xavier_init, AdamConfig, ParamId, ParameterStore, Real, Tape, Tensor, Var};
use crate::{Error, Result};

const PREFIX: &str = "policy.";

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyConfig {
    /// Entity and relation embedding width `d`; actions are `2d` wide.
    pub dim: usize,
    /// LSTM hidden width.
    pub hidden: usize,
    pub lstm_layers: usize,
    /// Dropout on the scorer's hidden layer, training mode only.
    pub ff_dropout: f64,
    /// Dropout on the looked-up `e_t` and `r_q` features, training mode only.
    pub emb_dropout: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            dim: 200,
            hidden: 200,
            lstm_layers: 3,
            ff_dropout: 0.1,
            emb_dropout: 0.3,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.hidden == 0 || self.lstm_layers == 0 {
            return Err(Error::config("policy dim, hidden and lstm_layers must be positive"));
        }
        if !(0.0..=0.5).contains(&self.ff_dropout) {
            return Err(Error::config("policy ff_dropout must lie in [0, 0.5]"));
        }
        if !(0.0..=0.5).contains(&self.emb_dropout) {
            return Err(Error::config("policy emb_dropout must lie in [0, 0.5]"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct Ids {
    entity: ParamId,
    relation: ParamId,
    lstm: Vec<[ParamId; 3]>,
    w1: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
}

/// Policy parameters `θ`.
#[derive(Clone, Debug)]
pub struct PolicyNet<S: Real = f32> {
    cfg: PolicyConfig,
    store: ParameterStore<S>,
    ids: Ids,
    num_entities: usize,
    num_relations: usize,
}

/// Parameter handles on one tape.
#[derive(Clone, Debug)]
pub struct Bound {
    entity: Var,
    relation: Var,
    lstm: Vec<[Var; 3]>,
    w1: Var,
    b1: Var,
    w2: Var,
    b2: Var,
}

/// Per-layer LSTM hidden and cell states for a batch of walks.
#[derive(Clone, Debug)]
pub struct TapeState {
    pub h: Vec<Var>,
    pub c: Vec<Var>,
}

/// Log-probabilities over a batch of ragged slates.
#[derive(Clone, Debug)]
pub struct StepOutput {
    /// Flat log-probabilities, one per slate row.
    pub log_probs: Var,
    /// Segment boundaries: slate `b` occupies `offsets[b]..offsets[b+1]`.
    pub offsets: Vec<usize>,
}

impl<S: Real> PolicyNet<S> {
    /// Xavier-initialized policy; LSTM and scorer biases start at zero.
    pub fn new(
        cfg: PolicyConfig,
        num_entities: usize,
        num_relations: usize,
        adam: AdamConfig,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        let mut rng = rng_for(seed, &[0x9011C7, 0]);
        let mut store = ParameterStore::new(adam);
        let (d, h) = (cfg.dim, cfg.hidden);
        let entity = store.add("entity", xavier_init(&[num_entities, d], &mut rng)?)?;
        let relation = store.add("relation", xavier_init(&[num_relations, d], &mut rng)?)?;
        let mut lstm = Vec::new();
        for l in 0..cfg.lstm_layers {
            let input = if l == 0 { 2 * d } else { h };
            lstm.push([
                store.add(format!("lstm{l}.w_ih"), xavier_init(&[input, 4 * h], &mut rng)?)?,
                store.add(format!("lstm{l}.w_hh"), xavier_init(&[h, 4 * h], &mut rng)?)?,
                store.add(format!("lstm{l}.bias"), Tensor::zeros(&[4 * h]))?,
            ]);
        }
        let w1 = store.add("w1", xavier_init(&[2 * d + h, 2 * d], &mut rng)?)?;
        let b1 = store.add("b1", Tensor::zeros(&[2 * d]))?;
        let w2 = store.add("w2", xavier_init(&[2 * d, 2 * d], &mut rng)?)?;
        let b2 = store.add("b2", Tensor::zeros(&[2 * d]))?;
        Ok(Self {
            cfg,
            store,
            ids: Ids {
                entity,
                relation,
                lstm,
                w1,
                b1,
                w2,
                b2,
            },
            num_entities,
            num_relations,
        })
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.cfg
    }

    pub fn store(&self) -> &ParameterStore<S> {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParameterStore<S> {
        &mut self.store
    }

    pub fn num_entities(&self) -> usize {
        self.num_entities
    }

    pub fn num_relations(&self) -> usize {
        self.num_relations
    }

    /// Same parameters in another precision (fresh optimizer state).
    pub fn cast<T: Real>(&self) -> Result<PolicyNet<T>> {
        let mut store = ParameterStore::new(*self.store.adam());
        for id in self.store.ids() {
            store.add(self.store.name(id), self.store.value(id).cast())?;
        }
        Ok(PolicyNet {
            cfg: self.cfg.clone(),
            store,
            ids: self.ids.clone(),
            num_entities: self.num_entities,
            num_relations: self.num_relations,
        })
    }

    pub fn bind(&self, tape: &mut Tape<S>) -> Bound {
        let p = |tape: &mut Tape<S>, id| tape.param(&self.store, id);
        Bound {
            entity: p(tape, self.ids.entity),
            relation: p(tape, self.ids.relation),
            lstm: self
                .ids
                .lstm
                .iter()
                .map(|l| [p(tape, l[0]), p(tape, l[1]), p(tape, l[2])])
                .collect(),
            w1: p(tape, self.ids.w1),
            b1: p(tape, self.ids.b1),
            w2: p(tape, self.ids.w2),
            b2: p(tape, self.ids.b2),
        }
    }

    /// `[r; e]` rows for a list of actions.
    pub fn action_rows(&self, tape: &mut Tape<S>, bound: &Bound, actions: &[(RelationId, EntityId)]) -> Result<Var> {
        let r: Vec<usize> = actions.iter().map(|a| a.0 as usize).collect();
        let e: Vec<usize> = actions.iter().map(|a| a.1 as usize).collect();
        let r = tape.embedding_lookup(bound.relation, &r)?;
        let e = tape.embedding_lookup(bound.entity, &e)?;
        tape.concat_cols(&[r, e])
    }

    /// All-zero state for `batch` walks.
    pub fn zero_state(&self, tape: &mut Tape<S>, batch: usize) -> TapeState {
        let z = || Tensor::zeros(&[batch, self.cfg.hidden]);
        TapeState {
            h: (0..self.cfg.lstm_layers).map(|_| tape.constant(z())).collect(),
            c: (0..self.cfg.lstm_layers).map(|_| tape.constant(z())).collect(),
        }
    }

    /// Places detached per-layer `h` and `c` values on a tape.
    pub fn state_from_values(&self, tape: &mut Tape<S>, h: &[Tensor<S>], c: &[Tensor<S>]) -> TapeState {
        TapeState {
            h: h.iter().map(|t| tape.constant(t.clone())).collect(),
            c: c.iter().map(|t| tape.constant(t.clone())).collect(),
        }
    }

    /// Feeds one action per walk through the stacked LSTM.
    pub fn lstm_step(
        &self,
        tape: &mut Tape<S>,
        bound: &Bound,
        state: &TapeState,
        actions: &[(RelationId, EntityId)],
    ) -> Result<TapeState> {
        let mut x = self.action_rows(tape, bound, actions)?;
        let mut next = TapeState {
            h: Vec::with_capacity(state.h.len()),
            c: Vec::with_capacity(state.c.len()),
        };
        for (l, w) in bound.lstm.iter().enumerate() {
            let (h, c) = tape.lstm_cell(x, state.h[l], state.c[l], w[0], w[1], w[2])?;
            next.h.push(h);
            next.c.push(c);
            x = h;
        }
        Ok(next)
    }

    /// `h₀`: the zero state after consuming `[r_START; e_s]`.
    pub fn initial_state(&self, tape: &mut Tape<S>, bound: &Bound, sources: &[EntityId]) -> Result<TapeState> {
        let zero = self.zero_state(tape, sources.len());
        let start: Vec<_> = sources.iter().map(|&e| (START, e)).collect();
        self.lstm_step(tape, bound, &zero, &start)
    }

    /// `W₂·drop(relu(W₁[drop(e_t); h_t; drop(r_q)] + b₁)) + b₂`, one row per walk.
    pub fn query_vectors(
        &self,
        tape: &mut Tape<S>,
        bound: &Bound,
        state: &TapeState,
        current: &[EntityId],
        query_relations: &[RelationId],
        train: bool,
        rng: &mut Rng,
    ) -> Result<Var> {
        let e: Vec<usize> = current.iter().map(|&x| x as usize).collect();
        let r: Vec<usize> = query_relations.iter().map(|&x| x as usize).collect();
        let e = tape.embedding_lookup(bound.entity, &e)?;
        let r = tape.embedding_lookup(bound.relation, &r)?;
        let e = tape.dropout(e, self.cfg.emb_dropout, train, rng)?;
        let r = tape.dropout(r, self.cfg.emb_dropout, train, rng)?;
        let top = *state.h.last().expect("at least one layer");
        let x = tape.concat_cols(&[e, top, r])?;
        let hid = tape.matmul(x, bound.w1)?;
        let hid = tape.add_row_bias(hid, bound.b1)?;
        let hid = tape.relu(hid);
        let hid = tape.dropout(hid, self.cfg.ff_dropout, train, rng)?;
        let q = tape.matmul(hid, bound.w2)?;
        tape.add_row_bias(q, bound.b2)
    }

    /// `log softmax(A_t · q)` per walk, each over its own slate.
    ///
    /// With `q = [q_r; q_e]` the logit of action `(r, e)` is
    /// `q_r·rel[r] + q_e·ent[e]`, so both tables are scored once per walk and
    /// the slate entries gathered from those products.
    pub fn slate_log_probs(
        &self,
        tape: &mut Tape<S>,
        bound: &Bound,
        queries: Var,
        slates: &[&[(RelationId, EntityId)]],
    ) -> Result<StepOutput> {
        let d = self.cfg.dim;
        let (ne, nr) = (self.num_entities, self.num_relations);
        let mut offsets = Vec::with_capacity(slates.len() + 1);
        offsets.push(0);
        let mut r_idx = Vec::new();
        let mut e_idx = Vec::new();
        for (b, s) in slates.iter().enumerate() {
            if s.is_empty() {
                return Err(Error::contract(format!("empty action slate for walk {b}")));
            }
            for &(r, e) in s.iter() {
                r_idx.push(b * nr + r as usize);
                e_idx.push(b * ne + e as usize);
            }
            offsets.push(r_idx.len());
        }
        let q_r = tape.slice_cols(queries, 0, d)?;
        let q_e = tape.slice_cols(queries, d, d)?;
        let by_rel = tape.matmul_t(q_r, bound.relation)?;
        let by_ent = tape.matmul_t(q_e, bound.entity)?;
        let lr = tape.gather(by_rel, &r_idx)?;
        let le = tape.gather(by_ent, &e_idx)?;
        let logits = tape.add(lr, le)?;
        let log_probs = tape.segment_log_softmax(logits, &offsets)?;
        Ok(StepOutput { log_probs, offsets })
    }

    /// One full decision: query vectors for the current state, then slate log-probs.
    #[allow(clippy::too_many_arguments)]
    pub fn step(
        &self,
        tape: &mut Tape<S>,
        bound: &Bound,
        state: &TapeState,
        current: &[EntityId],
        query_relations: &[RelationId],
        slates: &[&[(RelationId, EntityId)]],
        train: bool,
        rng: &mut Rng,
    ) -> Result<StepOutput> {
        let q = self.query_vectors(tape, bound, state, current, query_relations, train, rng)?;
        self.slate_log_probs(tape, bound, q, slates)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.store.save(path, PREFIX)
    }

    /// Loads parameters into a policy built with the same configuration and vocabulary.
    pub fn load(&mut self, path: &Path) -> Result<()> {
        self.store.load(path, PREFIX)
    }
}
