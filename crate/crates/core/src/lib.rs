//! Synthetic chart corpus generation with dense element annotations,
//! question-answer pairs, answer encoding, and evaluation.

pub mod corpus;
pub mod encode;
pub mod eval;
pub mod oracle;
pub mod qa;
pub mod render;
pub mod synth;
pub mod table;
