//! Building blocks for domain-specific opinion knowledge bases.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, checkpoints and
//! the command-line pipeline live in the `opkb` companion crate.
//!
//! Data flows through the modules in this order:
//!
//! * [`text`] tokenizes reviews and datasets and produces seeded splits.
//! * [`extract`] pulls `(modifier, aspect)` opinion tuples out of sentences.
//! * [`kb`] counts tuples per entity and mines premise → conclusion facts.
//! * [`reasoner`] trains a GRU encoder-decoder on those facts; its encoder
//!   state is the commonsense vector of an opinion.
//! * [`distmult`] embeds a generic triple KB as a baseline vector source.
//! * [`comprehension`] appends commonsense vectors to token representations
//!   and trains aspect extraction, sentiment and span QA heads.
//! * [`metrics`] scores predictions.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod comprehension;
pub mod distmult;
mod error;
pub mod extract;
pub mod kb;
pub mod metrics;
pub mod nn;
pub mod reasoner;
pub mod synth;
pub mod text;

pub use error::{Error, Result};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Seeded generator used by every stochastic routine in the crate.
pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
