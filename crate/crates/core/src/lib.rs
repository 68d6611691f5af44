//! Toolkit for studying the adversarial robustness of link sign prediction
//! in signed directed graphs.
//!
//! The crate is organized around a small set of primitives:
//!
//! - [`graph`] — signed directed graphs, edge-list ingestion, train/test
//!   splits, random node features, and perturbation accounting.
//! - [`balance`] — the triangle balance degree, a brute-force census oracle,
//!   and analytic gradients of the balance degree over real matrices.
//! - [`attack`] — gradient-guided greedy sign flipping under a budget, plus a
//!   random-flip baseline and an exhaustive single-flip oracle.
//! - [`defense`] — the greedy balance-restoration baseline and the
//!   irreversibility experiment built on top of it.
//! - [`augment`] — the learnable flip-probability matrix, its projected
//!   gradient optimizer, and deterministic top-k view sampling.
//! - [`model`] — a signed mean-aggregation encoder with contrastive and
//!   supervised losses, hand-derived gradients, and the joint training loop.
//! - [`metrics`] — AUC and F1 metrics plus the end-to-end
//!   poison-train-evaluate pipeline.
//! - [`synth`] — a two-faction generator with controllable balance.
//!
//! The `signet` binary exposes all of the above as CLI subcommands; see
//! [`cli`].

pub mod attack;
pub mod augment;
pub mod balance;
pub mod cli;
pub mod defense;
pub mod error;
pub mod graph;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
