//! Beam-search decoding and filtered ranking evaluation.

mod beam;
mod metrics;
mod run;

pub use beam::{beam_decode, BeamConfig, Hypothesis};
pub use metrics::{
    filtered_rank, relation_breakdown, relation_cardinality, seen_unseen_breakdown, EvalReport, QueryRecord, SliceMetrics,
    TO_MANY_THRESHOLD,
};
pub use run::{dev_filter, evaluate, evaluate_scorer, EvalMode};
