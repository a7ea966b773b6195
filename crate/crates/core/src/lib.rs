//! Celebrity itinerary detection from news articles.
//!
//! The pipeline runs in three stages:
//!
//! 1. [`corpus`], [`dates`] and [`geo`] ingest articles, resolve dates and
//!    extract candidate locations for each (celebrity, date).
//! 2. [`features`], [`kb`] and [`graphs`] turn each candidate into a
//!    word-article graph and each day into a trip graph.
//! 3. [`model`] scores every candidate and [`train_eval`] fits and evaluates
//!    it against ground truth and frequency baselines.

pub mod corpus;
pub mod dataset;
pub mod dates;
pub mod error;
pub mod features;
pub mod geo;
pub mod graphs;
pub mod kb;
pub mod model;
pub mod pipeline;
pub mod text;
pub mod train_eval;

pub use error::{Error, Result};
