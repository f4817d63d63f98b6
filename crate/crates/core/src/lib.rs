//! Engine for KoPL, a knowledge-oriented programming language for complex
//! question answering: a qualifier-aware knowledge base, an interpreter for
//! the 27-function program library, a compiler from programs to an executable
//! SPARQL subset, and a two-stage synthesizer that emits aligned
//! question/program/SPARQL/choices/answer instances.

pub mod fixture;
pub mod generator;
pub mod interpreter;
pub mod kb;
pub mod program;
pub mod sparql;
pub mod triples;
pub mod value;

pub use interpreter::{execute, Answer, Execution};
pub use kb::{KbFormat, KnowledgeBase};
pub use program::{Function, FunctionCall, Program};
pub use value::{compare, CompareOp, Value};
