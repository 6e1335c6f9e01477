//! A grid world for two-agent communication tasks.
//!
//! A speaker sees an instruction and its concept vector; a listener sees the
//! grid and the speaker's messages, and acts.

pub mod channel;
pub mod config;
pub mod encoding;
pub mod episode;
pub mod language;
pub mod maze;
pub mod metrics;
pub mod render;
pub mod rollout;
pub mod session;
pub mod solver;
pub mod trace;
pub mod world;

pub use channel::{BaselineKind, ChannelConfig, MessageMode, MessageSet};
pub use config::FileConfig;
pub use episode::{sample_episode, Episode, EpisodeConfig};
pub use language::{ConceptVector, Instruction};
pub use session::Session;
pub use world::{apply_action, ActionId, GridState, TaskSpec};
