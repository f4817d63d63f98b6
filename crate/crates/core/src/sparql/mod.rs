//! Compilation of programs to a SPARQL subset over the reified triple view,
//! an in-process evaluator for that subset, canonical text rendering/parsing,
//! and clause-dropping abridgement for choice harvesting.

mod ast;
mod compile;
mod eval;
mod text;

pub use ast::{
    abridge, AbridgedQuery, FilterCond, PatternElement, QueryForm, SortDir, SparqlError,
    SparqlQuery, TermPattern, TriplePattern,
};
pub use compile::compile;
pub use eval::{answers, evaluate, reconstruct_value, render_term, term_answer_key, QueryOutcome};
pub use text::{parse_sparql, render_sparql};
