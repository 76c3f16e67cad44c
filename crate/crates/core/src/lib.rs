//! Workbench for pipeline-architecture, goal-oriented dialogue systems in the
//! restaurant domain.
//!
//! The crate is organised along the pipeline it evaluates:
//!
//! - [`ontology`]: slot taxonomy, value lexicon and the restaurant knowledge base.
//! - [`corpus`]: MultiWOZ-style ingestion, act-type simplification, BIO slot
//!   annotation, frame/utterance serialisation and deterministic splits.
//! - [`nn`]: a small dense network engine (ReLU MLP, masked MSE, Adam).
//! - [`agent`]: DQN and DDQN dialogue-policy agents with replay.
//! - [`simulator`]: agenda-based user simulator and success adjudication.
//! - [`dialogue`]: state tracking, state encoding, rewards, episodes and the
//!   training/evaluation protocol.
//! - [`hpo`]: search spaces, random/TPE samplers, median pruning, studies and
//!   parameter importance.
//! - [`metrics`]: BLEU, METEOR, ROUGE and NLU scoring.
//! - [`pipeline`]: semantic frames, template NLU/NLG, the component wire
//!   protocol and the chat loop.
//!
//! Every runnable capability has a matching program under `examples/`.

pub mod agent;
pub mod config;
pub mod corpus;
pub mod dialogue;
pub mod hpo;
pub mod metrics;
pub mod nn;
pub mod ontology;
pub mod pipeline;
pub mod report;
pub mod simulator;
pub mod text;

pub use agent::{AgentHyperParams, QAgent, Variant};
pub use dialogue::{AgentAction, DialogueEnv, DialogueState, RewardConfig};
pub use ontology::{DomainOntology, KbRecord};
pub use pipeline::frame::SemanticFrame;

/// Random generator used for every seeded stream in the crate.
pub type SeededRng = rand_chacha::ChaCha8Rng;

/// Builds a generator from a base seed and a stream index.
///
/// Streams are decorrelated with a splitmix64 finaliser so that
/// `(seed, 0)`, `(seed, 1)`, ... never share prefixes.
pub fn stream_rng(seed: u64, stream: u64) -> SeededRng {
    use rand::SeedableRng;
    SeededRng::seed_from_u64(mix_seed(seed, stream))
}

pub(crate) fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x632B_E59B_D9B4_E019);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
