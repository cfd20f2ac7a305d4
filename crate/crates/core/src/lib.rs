//! Coordination recognition without a syntactic parser.
//!
//! The crate splits the problem in two stages. A token classifier marks the
//! coordinator spans of a sentence (`and`, `as well as`, `either ... or`,
//! `respectively`). Then, for every target coordinator, a linear-chain CRF
//! labels the sentence with a position-aware schema
//! (`O`, `C`, `B-before`, `I-before`, `B-after`, `I-after`) from which the
//! conjunct spans are read off. Around that sit the treebank conversion used
//! to build training data, span-level scoring and a sentence splitter.
//!
//! Everything here is `no_std` + `alloc`; file formats, timing and the CLI
//! live in the `conjunct` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod crf;
pub mod encoder;
pub mod evaluation;
pub mod lexicon;
pub mod models;
pub mod pipeline;
pub mod schema;
pub mod splitter;
pub mod treebank;

pub use schema::{
    Coordination, CoordinatorKind, CoordinatorSpan, DetectorLabel, IdentifierLabel, Token,
    TokenSpan,
};
