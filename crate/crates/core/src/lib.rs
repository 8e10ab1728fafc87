//! Multi-hop query answering over incomplete knowledge graphs.
//!
//! A walk-based agent starts at the query's source entity and follows `T`
//! labelled edges; the entity it stops on is its answer. The agent is an
//! LSTM-history policy trained with REINFORCE, and two additions make that
//! training robust on incomplete graphs:
//!
//! - **reward shaping**: terminals that are not observed answers receive the
//!   probability assigned by a frozen, pretrained one-hop scorer
//!   ([`embed::EmbeddingScorer`], DistMult or ComplEx) instead of zero;
//! - **action dropout**: while sampling, outgoing edges are randomly masked so
//!   the agent keeps exploring alternative paths. Gradients are still taken
//!   under the unperturbed policy.
//!
//! Module map:
//!
//! | module      | contents                                                      |
//! |-------------|---------------------------------------------------------------|
//! | [`graph`]   | vocabulary, triple files, inverse-augmented pruned graph      |
//! | [`tensor`]  | dense tensors, reverse-mode tape, Adam, checkpoints           |
//! | [`embed`]   | DistMult / ComplEx scorers and their 1-N trainer              |
//! | [`policy`]  | LSTM path encoder and feed-forward action scorer              |
//! | [`trainer`] | rewards, action dropout, rollouts, REINFORCE, training loop   |
//! | [`eval`]    | beam decoding, filtered ranks, MRR/Hits@k and breakdowns      |

pub mod embed;
pub mod error;
pub mod eval;
pub mod graph;
pub mod policy;
pub mod rng;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
