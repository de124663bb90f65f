//! Mutation analysis for flat statecharts.
//!
//! Charts are loaded from a JSON dialect ([`chart`]), executed step by step
//! against test suites ([`sim`]), mutated by a rule-based generator
//! ([`baseline`]) or by prompting a language model ([`llm`]), and scored
//! ([`analysis`]). [`campaign`] ties these together into resumable runs.

pub mod analysis;
pub mod baseline;
pub mod campaign;
pub mod chart;
pub mod corpus;
pub mod expr;
pub mod gen;
pub mod llm;
pub mod sim;
pub mod validate;

pub use chart::{parse_chart, serialize_chart, Chart, ElementKind, ParseError, ParseErrorKind};
pub use expr::{Expr, Stmt, Value, ValueType};
pub use sim::{simulate, Suite, TestCase, Trace};
pub use validate::{validate, Category, ValidationError, ValidationReport, ValidationVerdict};
