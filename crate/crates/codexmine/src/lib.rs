//! codexmine: batch knowledge discovery over a taxonomy-backed lexicon.
//!
//! The pipeline ingests a document corpus, maps surface text onto synonym
//! groups, builds an entropy-weighted semantic space, projects documents
//! onto a self-organizing map, and emits ranked candidate relations with
//! confidence scores and supporting document ids.

pub mod cli;
pub mod config;
pub mod corpus;
pub mod discovery;
pub mod lexicon;
pub mod semspace;
pub mod som;
pub mod synth;
pub mod token;

/// CLI entry point; returns the process exit code.
pub fn run() -> i32 {
    cli::run()
}
