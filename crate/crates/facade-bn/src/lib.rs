//! A discrete Bayesian-network toolkit for small categorical datasets:
//! dataset ingestion, DAG modeling with a text model-string grammar, CPT
//! estimation, BIC/BDeu scoring, conditional-independence testing,
//! constrained random structure search, exact evidence queries, forward
//! sampling, and MCMC posterior verification with convergence diagnostics.
//!
//! The built-in [`Schema::facade`](schema::Schema::facade) describes ten
//! three-level variables coding house-front traits (decoration, door,
//! pillar, roof styles and the religious-decoration and feeling grades), and
//! [`dag::initial_facade_model`] is the hand-specified starting structure
//! over them; everything else is generic over any categorical schema.
//!
//! The `facade-bn` binary exposes the whole pipeline as batch subcommands
//! with JSON output; see the book under `book/` for a guided tour.

pub mod cli;
pub mod cpt;
pub mod dag;
pub mod dataset;
pub mod error;
pub mod independence;
pub mod inference;
pub mod mcmc;
pub mod schema;
pub mod score;
pub mod search;
pub mod special;

mod seed;
#[cfg(test)]
mod testutil;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    //! Every code block in the book is compiled and run by `cargo test --doc`.
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/data-model.md")]
    mod data_model {}
    #[doc = include_str!("../../../book/src/graphs.md")]
    mod graphs {}
    #[doc = include_str!("../../../book/src/scoring.md")]
    mod scoring {}
    #[doc = include_str!("../../../book/src/independence.md")]
    mod independence {}
    #[doc = include_str!("../../../book/src/search.md")]
    mod search {}
    #[doc = include_str!("../../../book/src/inference.md")]
    mod inference {}
    #[doc = include_str!("../../../book/src/mcmc.md")]
    mod mcmc {}
}
