//! Discourse-aware factual consistency scoring for long-document summaries.
//!
//! The pipeline works over RST discourse trees:
//!
//! * [`rst`] holds the canonical tree model and its JSON form.
//! * [`features`] derives per-EDU salience scores (Ono penalty, depth score,
//!   promotion score) and their tree-depth normalized variants.
//! * [`align`] maps sentences onto EDU ranges and measures the height of the
//!   subtree a sentence occupies.
//! * [`segment`] cuts a source document along the tree frontier at a given
//!   level, with a sentence-window fallback when no tree is available.
//! * [`scorer`] scores (segment, summary sentence) pairs through a built-in
//!   lexical scorer or an external process / HTTP backend, with a persistent
//!   cache.
//! * [`aggregate`] re-weights sentence scores with the discourse features and
//!   reduces them to a summary score.
//! * [`eval`] provides ROC-AUC, Kendall's tau-b, paired bootstrap, Welch's
//!   t-test and average shortest path length.
//! * [`pipeline`] wires everything together for the command line tool.

pub mod aggregate;
pub mod align;
pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod pipeline;
pub mod report;
pub mod rst;
pub mod samples;
pub mod scorer;
pub mod segment;
pub mod text;


pub use error::{Error, Result};
