//! Population-protocol counting lab.
//!
//! A base station (BST) interacts with `n` anonymous mobile agents and has to
//! learn `n`. The crate provides the counting protocols as pure transition
//! functions, an execution engine with invariant checks, seeded schedulers,
//! exact analytical oracles, a Monte-Carlo experiment harness, and a
//! command-line front end.

pub mod cli;
pub mod engine;
pub mod experiments;
pub mod oracle;
pub mod protocols;
pub mod schedulers;
pub mod verify;
