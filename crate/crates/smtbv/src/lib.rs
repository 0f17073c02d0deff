//! A small SMT solver for quantifier-free bitvector formulas with
//! uninterpreted functions, speaking the SMT-LIB2 text format. Formulas are
//! bit-blasted to CNF and decided by a CDCL SAT solver.
//!
//! Usable either in-process through [`Session`] or as a subprocess via the
//! `smtbv` binary, which reads commands from stdin and answers on stdout.

pub mod blast;
pub mod sexp;
pub mod session;
pub mod term;
pub mod val;

pub use blast::ModelValue;
pub use session::{CheckResult, Response, Session, DEFAULT_GATE_LIMIT};
pub use val::BvVal;
