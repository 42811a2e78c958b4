//! Core library for nowcasting influenza-like-illness (ILI) rates from
//! daily user-generated text streams.
//!
//! The pipeline: raw documents or query-session counts are reduced to
//! per-term daily frequencies ([`textpipe`]), persisted in a CSV-backed
//! append-only store ([`store`]), aggregated over a trailing week-long
//! window and mapped to ILI rates by a regularized linear model
//! ([`model`], [`inference`]), and scored against weekly syndromic
//! ground truth ([`evaluation`]). The [`synth`] module generates seeded
//! epidemic scenarios with a known planted answer so the whole chain can
//! be validated end to end without access to production data feeds.

pub mod domain;
pub mod evaluation;
pub mod inference;
pub mod model;
pub mod rng;
pub mod store;
pub mod synth;
pub mod textpipe;
