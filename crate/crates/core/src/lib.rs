//! Inter-layer network coding for layered (MRC) video over multi-hop lossy links.
//!
//! The crate is organised bottom-up:
//!
//! - [`media`]: the layered GOP grid and strategy vectors.
//! - [`gf256`] and [`codec`]: canonical triangular encoding (XOR and random
//!   linear over GF(2^8)), the prefix decodability rule, and decoding.
//! - [`spt`]: the strategy performance table and best-strategy lookup.
//! - [`heuristic`]: constant-time threshold policies.
//! - [`channel`]: Bernoulli links and probe-based PDR estimation.
//! - [`node`]: sender, relay, and receiver state machines.
//! - [`sim`]: the chain simulator, the uncoded baseline, and parameter sweeps.
//! - [`config`]: the `key = value` run configuration format.
//! - [`selftest`]: oracle checks shared by the CLI and the test suites.

pub mod channel;
pub mod codec;
pub mod config;
mod error;
pub mod gf256;
pub mod heuristic;
pub mod media;
pub mod node;
pub mod seed;
pub mod selftest;
pub mod sim;
pub mod spt;

pub use error::{Error, Result};
pub use media::{LayerGrid, StrategyVector};
