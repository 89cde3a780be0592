//! Character-centered video story question answering.
//!
//! The crate bundles four pieces that work together:
//!
//! * [`schema`]: the annotation data model (clips, frames, scripts, QA items),
//!   the difficulty taxonomy, validation and the JSON dataset format.
//! * [`synth`]: a seeded generator of small drama worlds with planted facts and
//!   causal links, plus five-way QA items at four difficulty levels.
//! * [`features`] and [`model`]: stream encoding and the multi-level context
//!   matching network, trained with a hand-written reverse-mode tape
//!   ([`autograd`]).
//! * [`baselines`] and [`train`]: reference baselines, the training loop,
//!   metrics, ablations and gradient checking.
//!
//! The `storyqa` binary wires these together; see [`cli`].

pub mod autograd;
pub mod baselines;
pub mod cli;
pub mod config;
mod error;
pub mod features;
pub mod model;
pub mod schema;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
