use super::PolicyNet;
use crate::graph::{EntityId, KnowledgeGraph, RelationId};
use crate::rng::stream_rng;
use crate::tensor::{Real, Tape, Tensor};
use crate::{Error, Result};

/// A single walk's position and history encoding, detached from any tape.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchState<S: Real = f32> {
    pub source: EntityId,
    pub query_relation: RelationId,
    pub current: EntityId,
    pub step: usize,
    /// Per-layer `1 × hidden` LSTM outputs; the last one is `h_t`.
    pub h: Vec<Tensor<S>>,
    pub c: Vec<Tensor<S>>,
}

/// The actions available at an entity, in graph order, with their `[r; e]` rows.
#[derive(Clone, Debug)]
pub struct ActionSlate<S: Real = f32> {
    pub actions: Vec<(RelationId, EntityId)>,
    pub rows: Tensor<S>,
}

impl<S: Real> ActionSlate<S> {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Zeroes the `forbidden` entries of `dist` and renormalizes the rest.
pub fn mask_distribution<S: Real>(dist: &[S], forbidden: &[usize]) -> Result<Vec<S>> {
    let mut out = dist.to_vec();
    for &i in forbidden {
        if i >= out.len() {
            return Err(Error::contract(format!("masked index {i} outside a slate of {}", out.len())));
        }
        out[i] = S::zero();
    }
    let total: S = out.iter().copied().sum();
    if total <= S::zero() {
        return Err(Error::contract("masking removed every action"));
    }
    out.iter_mut().for_each(|x| *x /= total);
    Ok(out)
}

impl<S: Real> PolicyNet<S> {
    fn detach(tape: &Tape<S>, vars: &[crate::tensor::Var]) -> Vec<Tensor<S>> {
        vars.iter().map(|&v| tape.value(v).clone()).collect()
    }

    pub fn init_state(&self, source: EntityId, query_relation: RelationId) -> Result<SearchState<S>> {
        let mut tape = Tape::new();
        let b = self.bind(&mut tape);
        let st = self.initial_state(&mut tape, &b, &[source])?;
        Ok(SearchState {
            source,
            query_relation,
            current: source,
            step: 0,
            h: Self::detach(&tape, &st.h),
            c: Self::detach(&tape, &st.c),
        })
    }

    /// Action rows for the graph's adjacency list at `entity`.
    pub fn slate(&self, graph: &KnowledgeGraph, entity: EntityId) -> Result<ActionSlate<S>> {
        self.slate_of(graph.actions(entity).to_vec())
    }

    /// Action rows for an explicit action list.
    pub fn slate_of(&self, actions: Vec<(RelationId, EntityId)>) -> Result<ActionSlate<S>> {
        let mut tape = Tape::new();
        let b = self.bind(&mut tape);
        let rows = self.action_rows(&mut tape, &b, &actions)?;
        Ok(ActionSlate {
            rows: tape.value(rows).clone(),
            actions,
        })
    }

    /// Takes `action`, which must be in `slate`.
    pub fn advance(
        &self,
        state: &SearchState<S>,
        slate: &ActionSlate<S>,
        action: (RelationId, EntityId),
    ) -> Result<SearchState<S>> {
        if !slate.actions.contains(&action) {
            return Err(Error::contract(format!(
                "action {action:?} is not available at entity {}",
                state.current
            )));
        }
        let mut tape = Tape::new();
        let b = self.bind(&mut tape);
        let st = self.state_from_values(&mut tape, &state.h, &state.c);
        let next = self.lstm_step(&mut tape, &b, &st, &[action])?;
        Ok(SearchState {
            current: action.1,
            step: state.step + 1,
            h: Self::detach(&tape, &next.h),
            c: Self::detach(&tape, &next.c),
            ..state.clone()
        })
    }

    /// `π_θ(· | s_t)` over the slate, evaluation mode.
    pub fn action_distribution(&self, state: &SearchState<S>, slate: &ActionSlate<S>) -> Result<Vec<S>> {
        let mut tape = Tape::new();
        let b = self.bind(&mut tape);
        let st = self.state_from_values(&mut tape, &state.h, &state.c);
        let out = self.step(
            &mut tape,
            &b,
            &st,
            &[state.current],
            &[state.query_relation],
            &[&slate.actions],
            false,
            &mut stream_rng(0, 0),
        )?;
        Ok(tape.value(out.log_probs).data().iter().map(|x| x.exp()).collect())
    }
}
