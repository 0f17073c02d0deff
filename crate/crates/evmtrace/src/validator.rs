//! Concrete confirmation of exploration candidates. Each candidate's
//! messages are replayed against a fork of the snapshot in the in-process
//! interpreter; only observed effects (Ether actually gained, code actually
//! cleared, deposits actually locked) upgrade a flag to a true positive.
//! The replay never touches the input state and is checked for balance
//! conservation and determinism.

use primitive_types::U256;

use crate::bytecode::{contains_release_opcode, decode};
use crate::chainstate::ChainState;
use crate::interp::{run_transaction, TxError, DEFAULT_STEP_LIMIT};
use crate::properties::{greedy_classify, Category, GreedyClass};
use crate::sym::engine::{Candidate, ENDOWMENT_WEI};
use crate::word::Address;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// The replayed exploit works against the concrete chain.
    TruePositive,
    /// The flag did not reproduce; the symbolic model diverged from the
    /// concrete chain (over-approximation, pinned block context, …).
    FalsePositive,
    /// Nothing a replay could decide (e.g. release code exists but was
    /// never reached); left to manual analysis.
    NotValidatable,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::TruePositive => "true_positive",
            Verdict::FalsePositive => "false_positive",
            Verdict::NotValidatable => "not_validatable",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Validation {
    pub verdict: Verdict,
    /// What the replay observed, for the report.
    pub detail: String,
}

#[derive(Debug, thiserror::Error)]
pub enum ValidationError {
    #[error("replay failed: {0}")]
    Replay(#[from] TxError),
    #[error("sandbox invariant violated: {0}")]
    Invariant(String),
}

/// Replays `candidate` against a fork of `chain` and judges the outcome.
/// `chain` itself is never modified.
pub fn validate(
    chain: &ChainState,
    subject: Address,
    candidate: &Candidate,
) -> Result<Validation, ValidationError> {
    let before = chain.digest();

    let first = replay(chain, subject, candidate)?;
    // Determinism: the same candidate against the same snapshot must land
    // in the same final state.
    let second = replay(chain, subject, candidate)?;
    if first.state.digest() != second.state.digest() {
        return Err(ValidationError::Invariant(
            "replay is not deterministic".into(),
        ));
    }

    if chain.digest() != before {
        return Err(ValidationError::Invariant(
            "validation mutated the input state".into(),
        ));
    }

    Ok(judge(chain, subject, candidate, &first))
}

struct Replay {
    state: ChainState,
    /// Attacker balance right before the first message.
    attacker_start: U256,
    subject_start: U256,
    all_valid: bool,
}

fn replay(
    chain: &ChainState,
    subject: Address,
    candidate: &Candidate,
) -> Result<Replay, ValidationError> {
    let mut state = chain.fork();

    // A penniless subject gets a 1-Ether endowment so a leak has something
    // to show; the same endowment the symbolic search assumed.
    if candidate.category != Category::Greedy && state.balance(subject).is_zero() {
        state.account_mut(subject).balance = U256::from(ENDOWMENT_WEI);
    }
    // The attacker needs exactly enough to pay the message values.
    let spend = candidate
        .messages
        .iter()
        .fold(U256::zero(), |acc, m| acc + m.value);
    state.account_mut(candidate.attacker).balance += spend;

    let attacker_start = state.balance(candidate.attacker);
    let subject_start = state.balance(subject);
    let total_start = state.total_balance();

    let mut all_valid = true;
    for (i, msg) in candidate.messages.iter().enumerate() {
        set_block_context(&mut state, candidate, i);
        let r = run_transaction(&state, msg, DEFAULT_STEP_LIMIT)?;
        all_valid &= r.halt.is_valid();
        state = r.state;
    }

    if state.total_balance() != total_start {
        return Err(ValidationError::Invariant(
            "replay created or destroyed Ether".into(),
        ));
    }

    Ok(Replay {
        state,
        attacker_start,
        subject_start,
        all_valid,
    })
}

/// Blocks only move forward. When the model asked for a later block than
/// the chain is at, the replay jumps there; otherwise one block is mined.
fn set_block_context(state: &mut ChainState, candidate: &Candidate, i: usize) {
    state.block.advance();
    if let Some(&n) = candidate.block_numbers.get(i) {
        if n > state.block.number {
            state.block.number = n;
        }
    }
    if let Some(&t) = candidate.timestamps.get(i) {
        if t > state.block.timestamp {
            state.block.timestamp = t;
        }
    }
}

fn judge(
    chain: &ChainState,
    subject: Address,
    candidate: &Candidate,
    replay: &Replay,
) -> Validation {
    match candidate.category {
        Category::Prodigal => {
            let attacker_end = replay.state.balance(candidate.attacker);
            let subject_end = replay.state.balance(subject);
            if attacker_end > replay.attacker_start {
                let gain = attacker_end - replay.attacker_start;
                Validation {
                    verdict: Verdict::TruePositive,
                    detail: format!("attacker gained {gain} wei over {} message(s)", candidate.messages.len()),
                }
            } else if subject_end < replay.subject_start {
                Validation {
                    verdict: Verdict::FalsePositive,
                    detail: "subject lost Ether but the attacker gained none (leak to a third address)".into(),
                }
            } else {
                Validation {
                    verdict: Verdict::FalsePositive,
                    detail: "replay moved no Ether to the attacker".into(),
                }
            }
        }
        Category::Suicidal => {
            if replay.state.code(subject).is_none() {
                Validation {
                    verdict: Verdict::TruePositive,
                    detail: "subject code cleared by replay".into(),
                }
            } else {
                Validation {
                    verdict: Verdict::FalsePositive,
                    detail: "subject still has code after replay".into(),
                }
            }
        }
        Category::Greedy => {
            let program = match chain.code(subject) {
                Some(code) => decode(code),
                None => {
                    return Validation {
                        verdict: Verdict::FalsePositive,
                        detail: "subject has no code".into(),
                    }
                }
            };
            match greedy_classify(&program, true) {
                GreedyClass::CategoryI => {
                    debug_assert!(!contains_release_opcode(&program));
                    let subject_end = replay.state.balance(subject);
                    if replay.all_valid && subject_end > replay.subject_start {
                        Validation {
                            verdict: Verdict::TruePositive,
                            detail: "deposit accepted by code with no Ether-releasing instruction".into(),
                        }
                    } else {
                        Validation {
                            verdict: Verdict::FalsePositive,
                            detail: "deposit did not reach the subject on replay".into(),
                        }
                    }
                }
                GreedyClass::CategoryII => Validation {
                    verdict: Verdict::NotValidatable,
                    detail: "release instructions exist but none was reachable within the depth bound; needs manual analysis".into(),
                },
                GreedyClass::NotGreedyCandidate => Validation {
                    verdict: Verdict::FalsePositive,
                    detail: "no accepted deposit to lock".into(),
                },
            }
        }
    }
}
