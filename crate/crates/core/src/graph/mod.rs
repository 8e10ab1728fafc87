//! Triples, vocabularies and the walkable graph environment.
//!
//! The graph the agent walks is built from training triples only. Every fact
//! `(s, r, o)` contributes the edge `s -r-> o` and its inverse `o -r⁻¹-> s`;
//! every entity gets a `NO_OP` self-loop; and each action list is capped at
//! `η` edges, keeping the targets with the highest PageRank.

mod kg;
mod pagerank;
mod splits;
mod triples;
mod vocab;

pub use kg::{GraphConfig, KnowledgeGraph};
pub use pagerank::{pagerank, PageRankConfig};
pub use splits::{filter_unseen_entities, AnswerIndex, DatasetSplits, GraphStats, SplitSet};
pub use triples::{load_triples, write_triples, Triple};
pub use vocab::{Vocabulary, NO_OP, START};

pub type EntityId = u32;
pub type RelationId = u32;
