//! bindlab — a desk-scale laboratory for locating, validating, and steering
//! the attention heads that bind identities to their associated items in a
//! small decoder-only transformer.
//!
//! The crate covers the whole pipeline on a synthetic identity–item world:
//!
//! * [`world`] — catalog of identities and items, the training corpus that
//!   plants the associations, and factorial match/mismatch benchmark pairs.
//! * [`model`] — a from-scratch causal transformer whose forward pass exposes
//!   per-head attention and supports edge knockout and alpha-blend
//!   interventions on chosen (query-span, key-span) rectangles.
//! * [`train`] — deterministic Adam training plus an association-accuracy
//!   gate that certifies the toy model actually learned the catalog.
//! * [`metrics`] — S/K scores, pairing effects, directional preference, and
//!   generation-steering accuracies.
//! * [`discovery`] — per-head binding features, an L1 logistic solver, and
//!   item-grouped cross-validated head selection with a stability rule.
//! * [`experiments`] — baseline, knockout, random-head null, dose-response,
//!   steering, and knowledge-probe runs with auditable reports.
//! * [`stats`] — item-level aggregation, t-tests backed by a self-contained
//!   t CDF, percent changes, and empirical p-values.
//! * [`report`] — run manifests, atomic file output, and CSV/JSON/Markdown
//!   report rendering.
//!
//! Every stage is a pure function of its inputs and a seed; re-running any
//! command reproduces its outputs byte for byte. See the `examples/`
//! directory for one runnable walkthrough per capability and `src/bin` for
//! the `bindlab` CLI that wires the stages together.

pub mod cli;
pub mod discovery;
pub mod error;
pub mod experiments;
pub mod metrics;
pub mod model;
pub mod report;
pub mod rng;
pub mod stats;
pub mod train;
pub mod world;

pub use error::{Error, Result};
