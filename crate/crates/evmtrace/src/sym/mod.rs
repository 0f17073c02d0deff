//! Symbolic execution: expression trees over transaction inputs, per-path
//! machine state, and the bounded multi-invocation explorer.

pub mod engine;
pub mod expr;
pub mod state;
