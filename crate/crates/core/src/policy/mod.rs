//! Walk policy: history LSTM over taken actions and a two-layer scorer that
//! rates every outgoing edge of the current entity.

mod net;
mod state;

pub use net::{Bound, PolicyConfig, PolicyNet, StepOutput, TapeState};
pub use state::{mask_distribution, ActionSlate, SearchState};
