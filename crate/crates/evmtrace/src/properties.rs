//! Trace properties for the three vulnerability classes. Each class is a
//! predicate set over labeled traces: a precondition on the first message,
//! a side condition every trace element must satisfy, and (for safety
//! properties) a postcondition naming the violating label. The symbolic
//! engine queries these conditions during exploration; the validator
//! re-checks them on concrete replay traces.

use primitive_types::U256;

use crate::bytecode::{contains_release_opcode, Opcode, Program};
use crate::chainstate::{ChainState, Message};
use crate::interp::Label;
use crate::word::{self, Address, Word};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Category {
    /// Leaks Ether to an arbitrary sender.
    Prodigal,
    /// Can be killed by an arbitrary sender.
    Suicidal,
    /// Accepts Ether but can never release it.
    Greedy,
}

impl Category {
    pub fn name(self) -> &'static str {
        match self {
            Category::Prodigal => "prodigal",
            Category::Suicidal => "suicidal",
            Category::Greedy => "greedy",
        }
    }
}

/// Safety: one trace reaching the postcondition is a violation (and yields
/// a witness). Liveness: a violation means *every* trace within the depth
/// bound satisfies the side condition; there is no postcondition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Safety,
    Liveness,
}

#[derive(Debug, Clone, Copy)]
pub struct TracePredicateSet {
    pub category: Category,
    pub mode: Mode,
    /// Trace-length bound (in invocations) for liveness evaluation.
    pub k: u32,
}

pub fn prodigal_predicates() -> TracePredicateSet {
    TracePredicateSet {
        category: Category::Prodigal,
        mode: Mode::Safety,
        k: 0,
    }
}

pub fn suicidal_predicates() -> TracePredicateSet {
    TracePredicateSet {
        category: Category::Suicidal,
        mode: Mode::Safety,
        k: 0,
    }
}

pub fn greedy_predicates(k: u32) -> TracePredicateSet {
    TracePredicateSet {
        category: Category::Greedy,
        mode: Mode::Liveness,
        k,
    }
}

/// Concrete values a contract's initial state already names: everything in
/// its storage image plus its own address. A sender outside this set holds
/// no privileged role in the contract.
pub fn state_image(chain: &ChainState, subject: Address) -> Vec<Word> {
    let mut image = vec![word::address_word(subject)];
    image.extend(chain.account(subject).storage.values().copied());
    image
}

pub fn sender_outside_image(chain: &ChainState, subject: Address, sender: Address) -> bool {
    let w = word::address_word(sender);
    !w.is_zero() && !state_image(chain, subject).contains(&w)
}

/// A label that moves Ether (or control over it) out of the contract.
pub fn is_release_label(label: &Label) -> bool {
    match label {
        Label::Call { msg, .. } => msg.value > U256::zero(),
        Label::DelegateCall { .. } | Label::Suicide { .. } => true,
        _ => false,
    }
}

impl TracePredicateSet {
    /// Precondition over the code and the first message of the trace.
    pub fn pre_holds(
        &self,
        program: &Program,
        chain: &ChainState,
        subject: Address,
        m0: &Message,
    ) -> bool {
        let outside = sender_outside_image(chain, subject, m0.sender);
        match self.category {
            Category::Prodigal => outside && m0.value.is_zero(),
            Category::Suicidal => {
                outside && program.opcodes().any(|op| op == Opcode::Suicide)
            }
            Category::Greedy => !chain.balance(subject).is_zero(),
        }
    }

    /// Per-element side condition. Trivially true for the safety classes;
    /// for greedy, every element must avoid releasing Ether.
    pub fn side_holds(&self, label: &Label) -> bool {
        match self.mode {
            Mode::Safety => true,
            Mode::Liveness => !is_release_label(label),
        }
    }

    /// Postcondition on a trace element, relative to the attacking sender.
    /// Liveness properties have none.
    pub fn post_holds(&self, label: &Label, attacker: Address) -> Option<bool> {
        match self.category {
            Category::Prodigal => Some(match label {
                Label::Call { target, msg } => {
                    *target == attacker && msg.value > U256::zero()
                }
                Label::DelegateCall { target } => *target == attacker,
                Label::Suicide { beneficiary } => *beneficiary == attacker,
                _ => false,
            }),
            Category::Suicidal => Some(matches!(label, Label::Suicide { .. })),
            Category::Greedy => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GreedyClass {
    /// No Ether-releasing instruction anywhere in the code: locking is a
    /// static certainty once a deposit is accepted.
    CategoryI,
    /// Release instructions exist but none was reachable in exploration;
    /// only manual analysis can confirm.
    CategoryII,
    NotGreedyCandidate,
}

pub fn greedy_classify(program: &Program, accepts_ether: bool) -> GreedyClass {
    if !accepts_ether {
        GreedyClass::NotGreedyCandidate
    } else if contains_release_opcode(program) {
        GreedyClass::CategoryII
    } else {
        GreedyClass::CategoryI
    }
}
