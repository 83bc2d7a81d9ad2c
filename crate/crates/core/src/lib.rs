//! Interpreter, trace explorer and pattern linter for hierarchical state
//! machines whose states own concurrently running do-activities.
//!
//! The pipeline is `parser` → `model` (validated) → `engine` (one run under a
//! strategy) or `explorer` (every run) and `linter` (static checks). The
//! `cli` module holds the command implementations behind the `psm` binary.

pub mod model;
pub mod parser;
pub mod engine;
pub mod explorer;
pub mod linter;
pub mod cli;
