//! Constraint solving: SMT-LIB2 encoding of symbolic expressions and
//! dispatch to a bitvector solver (in-process by default, or any external
//! solver speaking SMT-LIB2 on stdin/stdout).

pub mod backend;
pub mod encode;
