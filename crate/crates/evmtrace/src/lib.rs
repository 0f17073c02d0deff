//! Analyzer for EVM bytecode that hunts for three classes of trace
//! vulnerabilities — contracts that leak Ether to arbitrary senders
//! (prodigal), contracts an arbitrary sender can kill (suicidal), and
//! contracts that accept Ether but can never release it (greedy) — by
//! symbolically executing up to a bounded number of transactions and then
//! confirming each finding concretely on a forked sandbox chain.

pub mod asm;
pub mod bytecode;
pub mod chainstate;
pub mod interp;
pub mod properties;
pub mod report;
pub mod smt;
pub mod sym;
pub mod validator;
pub mod word;
