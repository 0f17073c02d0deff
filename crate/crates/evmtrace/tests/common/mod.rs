//! Hand-built corpus of vulnerable and benign contracts with the verdict
//! each one should earn. Shared by the acceptance suite and the
//! `gen_fixtures` example that writes the corpus to disk.

// Each test harness uses a different slice of this module.
#![allow(dead_code)]

use primitive_types::U256;

use evmtrace::asm::Asm;
use evmtrace::bytecode::Opcode;
use evmtrace::chainstate::{addr, ChainState};
use evmtrace::properties::Category;
use evmtrace::validator::Verdict;
use evmtrace::word::{self, Address};

pub fn subject() -> Address {
    addr("0x00000000000000000000000000000000000000c1")
}

pub fn owner() -> Address {
    addr("0x00000000000000000000000000000000000000ee")
}

pub struct Fixture {
    pub name: &'static str,
    pub chain: ChainState,
    pub category: Category,
    /// Invocations needed to flag it; 0 = must stay clean at every depth.
    pub expect_flagged_at_depth: u32,
    /// Verdict after concrete replay, when flagged.
    pub expect_verdict: Option<Verdict>,
}

fn fixture(
    name: &'static str,
    code: Vec<u8>,
    balance: u64,
    category: Category,
    depth: u32,
    verdict: Option<Verdict>,
) -> Fixture {
    let mut chain = ChainState::default();
    let acct = chain.account_mut(subject());
    acct.code = Some(code);
    acct.balance = U256::from(balance);
    Fixture {
        name,
        chain,
        category,
        expect_flagged_at_depth: depth,
        expect_verdict: verdict,
    }
}

/// CALL(gas=100k, to, value, no data, no return) — pushes in reverse.
fn call(asm: Asm) -> Asm {
    asm.push(100_000u64).op(Opcode::Call)
}

fn send_balance_to_caller(asm: Asm) -> Asm {
    let asm = asm
        .push(0u64)
        .push(0u64)
        .push(0u64)
        .push(0u64)
        .op(Opcode::Address)
        .op(Opcode::Balance)
        .op(Opcode::Caller);
    call(asm)
}

/// selector := calldataload(0) >> 224 (head of an ABI call).
fn load_selector(asm: Asm) -> Asm {
    asm.push(U256::one() << 224)
        .push(0u64)
        .op(Opcode::Calldataload)
        .op(Opcode::Div)
}

pub fn corpus() -> Vec<Fixture> {
    use Category::*;
    use Verdict::*;
    let mut out = Vec::new();

    // --- prodigal, confirmed ---

    out.push(fixture(
        "bounty_pays_anyone",
        call(Asm::new()
            .push(0u64)
            .push(0u64)
            .push(0u64)
            .push(0u64)
            .push(1u64)
            .op(Opcode::Caller))
        .op(Opcode::Stop)
        .assemble(),
        10,
        Prodigal,
        1,
        Some(TruePositive),
    ));

    out.push(fixture(
        "drains_whole_balance",
        send_balance_to_caller(Asm::new()).op(Opcode::Stop).assemble(),
        25,
        Prodigal,
        1,
        Some(TruePositive),
    ));

    out.push(fixture(
        "kill_refunds_caller",
        Asm::new().op(Opcode::Caller).op(Opcode::Suicide).assemble(),
        5,
        Prodigal,
        1,
        Some(TruePositive),
    ));

    out.push(fixture(
        "selector_gated_drain",
        send_balance_to_caller(
            load_selector(Asm::new())
                .push(0x11u64)
                .op(Opcode::Eq)
                .jumpi_to("pay")
                .op(Opcode::Stop)
                .label("pay"),
        )
        .op(Opcode::Stop)
        .assemble(),
        12,
        Prodigal,
        1,
        Some(TruePositive),
    ));

    // Recipient comes from calldata, masked to address width; the attacker
    // simply passes their own address.
    out.push(fixture(
        "sends_to_calldata_address",
        call(Asm::new()
            .push(0u64)
            .push(0u64)
            .push(0u64)
            .push(0u64)
            .push(1u64)
            .push((U256::one() << 160) - 1)
            .push(4u64)
            .op(Opcode::Calldataload)
            .op(Opcode::And))
        .op(Opcode::Stop)
        .assemble(),
        8,
        Prodigal,
        1,
        Some(TruePositive),
    ));

    out.push(fixture(
        "kill_pays_calldata_address",
        Asm::new()
            .push((U256::one() << 160) - 1)
            .push(0u64)
            .op(Opcode::Calldataload)
            .op(Opcode::And)
            .op(Opcode::Suicide)
            .assemble(),
        6,
        Prodigal,
        1,
        Some(TruePositive),
    ));

    out.push(fixture(
        "drain_after_timestamp",
        send_balance_to_caller(
            Asm::new()
                .push(1_000_000u64)
                .op(Opcode::Timestamp)
                .op(Opcode::Gt)
                .jumpi_to("pay")
                .op(Opcode::Stop)
                .label("pay"),
        )
        .op(Opcode::Stop)
        .assemble(),
        9,
        Prodigal,
        1,
        Some(TruePositive),
    ));

    out.push(fixture(
        "drain_after_block",
        send_balance_to_caller(
            Asm::new()
                .push(50_000u64)
                .op(Opcode::Number)
                .op(Opcode::Gt)
                .jumpi_to("pay")
                .op(Opcode::Invalid)
                .label("pay"),
        )
        .op(Opcode::Stop)
        .assemble(),
        9,
        Prodigal,
        1,
        Some(TruePositive),
    ));

    out.push(fixture(
        "drain_needs_two_words",
        send_balance_to_caller(
            Asm::new()
                .push(0u64)
                .op(Opcode::Calldataload)
                .push(7u64)
                .op(Opcode::Eq)
                .jumpi_to("second")
                .op(Opcode::Stop)
                .label("second")
                .push(32u64)
                .op(Opcode::Calldataload)
                .push(9u64)
                .op(Opcode::Eq)
                .jumpi_to("pay")
                .op(Opcode::Stop)
                .label("pay"),
        )
        .op(Opcode::Stop)
        .assemble(),
        11,
        Prodigal,
        1,
        Some(TruePositive),
    ));

    // Two transactions: anyone may become owner, then the owner withdraws.
    out.push(fixture(
        "takeover_then_withdraw",
        send_balance_to_caller(
            load_selector(Asm::new())
                .push(1u64)
                .op(Opcode::Eq)
                .jumpi_to("claim")
                .push(0u64)
                .op(Opcode::Sload)
                .op(Opcode::Caller)
                .op(Opcode::Eq)
                .jumpi_to("pay")
                .op(Opcode::Stop)
                .label("claim")
                .op(Opcode::Caller)
                .push(0u64)
                .op(Opcode::Sstore)
                .op(Opcode::Stop)
                .label("pay"),
        )
        .op(Opcode::Stop)
        .assemble(),
        14,
        Prodigal,
        2,
        Some(TruePositive),
    ));

    // Two transactions through a plain storage flag.
    out.push(fixture(
        "flag_then_drain",
        send_balance_to_caller(
            load_selector(Asm::new())
                .push(1u64)
                .op(Opcode::Eq)
                .jumpi_to("arm")
                .push(1u64)
                .op(Opcode::Sload)
                .push(1u64)
                .op(Opcode::Eq)
                .jumpi_to("pay")
                .op(Opcode::Stop)
                .label("arm")
                .push(1u64)
                .push(1u64)
                .op(Opcode::Sstore)
                .op(Opcode::Stop)
                .label("pay"),
        )
        .op(Opcode::Stop)
        .assemble(),
        13,
        Prodigal,
        2,
        Some(TruePositive),
    ));

    // --- prodigal, model/chain divergence: flagged but refuted ---

    // Pays out only when a block hash equals a fixed constant. The
    // symbolic search treats the hash as free and finds a "win"; the
    // replayed chain disagrees.
    out.push(fixture(
        "lottery_on_blockhash",
        send_balance_to_caller(
            Asm::new()
                .push(U256::from(0x1234_5678u64))
                .push(1u64)
                .op(Opcode::Blockhash)
                .op(Opcode::Eq)
                .jumpi_to("pay")
                .op(Opcode::Stop)
                .label("pay"),
        )
        .op(Opcode::Stop)
        .assemble(),
        15,
        Prodigal,
        1,
        Some(FalsePositive),
    ));

    // --- prodigal, safe ---

    // Pays back at most what the message itself deposited.
    out.push(fixture(
        "refund_needs_payment",
        call(Asm::new()
            .op(Opcode::Callvalue)
            .jumpi_to("refund")
            .op(Opcode::Stop)
            .label("refund")
            .push(0u64)
            .push(0u64)
            .push(0u64)
            .push(0u64)
            .op(Opcode::Callvalue)
            .op(Opcode::Caller))
        .op(Opcode::Stop)
        .assemble(),
        7,
        Prodigal,
        0,
        None,
    ));

    // Owner-only withdrawal, owner fixed in storage.
    out.push(fixture(
        "owner_only_withdraw",
        {
            let code = send_balance_to_caller(
                Asm::new()
                    .push(0u64)
                    .op(Opcode::Sload)
                    .op(Opcode::Caller)
                    .op(Opcode::Eq)
                    .jumpi_to("pay")
                    .op(Opcode::Stop)
                    .label("pay"),
            )
            .op(Opcode::Stop)
            .assemble();
            code
        },
        30,
        Prodigal,
        0,
        None,
    ));

    // --- suicidal, confirmed ---

    out.push(fixture(
        "anyone_can_kill",
        Asm::new().op(Opcode::Caller).op(Opcode::Suicide).assemble(),
        2,
        Suicidal,
        1,
        Some(TruePositive),
    ));

    out.push(fixture(
        "kill_behind_selector",
        load_selector(Asm::new())
            .push(0xdeadu64)
            .op(Opcode::Eq)
            .jumpi_to("kill")
            .op(Opcode::Stop)
            .label("kill")
            .push(0u64)
            .op(Opcode::Suicide)
            .assemble(),
        3,
        Suicidal,
        1,
        Some(TruePositive),
    ));

    out.push(fixture(
        "kill_behind_magic_word",
        Asm::new()
            .push(0u64)
            .op(Opcode::Calldataload)
            .push(42u64)
            .op(Opcode::Eq)
            .jumpi_to("kill")
            .op(Opcode::Invalid)
            .label("kill")
            .op(Opcode::Caller)
            .op(Opcode::Suicide)
            .assemble(),
        3,
        Suicidal,
        1,
        Some(TruePositive),
    ));

    out.push(fixture(
        "kill_after_block",
        Asm::new()
            .push(9_000u64)
            .op(Opcode::Number)
            .op(Opcode::Gt)
            .jumpi_to("kill")
            .op(Opcode::Stop)
            .label("kill")
            .op(Opcode::Caller)
            .op(Opcode::Suicide)
            .assemble(),
        2,
        Suicidal,
        1,
        Some(TruePositive),
    ));

    // Unowned library pattern: initialize ownership, then retire it.
    out.push(takeover_then_kill_fixture(2, Some(TruePositive)));

    // --- suicidal, safe ---

    out.push({
        let mut f = fixture(
            "owner_only_kill",
            Asm::new()
                .push(0u64)
                .op(Opcode::Sload)
                .op(Opcode::Caller)
                .op(Opcode::Eq)
                .jumpi_to("kill")
                .op(Opcode::Stop)
                .label("kill")
                .op(Opcode::Caller)
                .op(Opcode::Suicide)
                .assemble(),
            4,
            Suicidal,
            0,
            None,
        );
        f.chain
            .account_mut(subject())
            .storage_set(U256::zero(), word::address_word(owner()));
        f
    });

    // --- greedy ---

    out.push(fixture(
        "sink_accepts_and_stops",
        Asm::new().op(Opcode::Stop).assemble(),
        0,
        Greedy,
        1,
        Some(TruePositive),
    ));

    out.push(fixture(
        "sink_logs_deposit_to_storage",
        Asm::new()
            .op(Opcode::Callvalue)
            .push(3u64)
            .op(Opcode::Sstore)
            .op(Opcode::Stop)
            .assemble(),
        0,
        Greedy,
        1,
        Some(TruePositive),
    ));

    // Deposit recorded under a hashed (but concrete) storage slot.
    out.push(fixture(
        "sink_hashed_slot",
        Asm::new()
            .push(1u64)
            .push(0u64)
            .op(Opcode::Mstore)
            .op(Opcode::Callvalue)
            .push(32u64)
            .push(0u64)
            .op(Opcode::Sha3)
            .op(Opcode::Sstore)
            .op(Opcode::Stop)
            .assemble(),
        0,
        Greedy,
        1,
        Some(TruePositive),
    ));

    // Withdrawal code exists but sits behind an owner guard the attacker
    // can't pass: flagged, yet beyond what a replay can decide.
    out.push({
        let mut f = fixture(
            "walled_garden_vault",
            send_balance_to_caller(
                Asm::new()
                    .push(0u64)
                    .op(Opcode::Sload)
                    .op(Opcode::Caller)
                    .op(Opcode::Eq)
                    .jumpi_to("withdraw")
                    .op(Opcode::Stop)
                    .label("withdraw"),
            )
            .op(Opcode::Stop)
            .assemble(),
            50,
            Greedy,
            1,
            Some(NotValidatable),
        );
        f.chain
            .account_mut(subject())
            .storage_set(U256::zero(), word::address_word(owner()));
        f
    });

    // Refuses deposits outright: not greedy.
    out.push(fixture(
        "rejects_all_payments",
        Asm::new()
            .op(Opcode::Callvalue)
            .jumpi_to("reject")
            .op(Opcode::Stop)
            .label("reject")
            .push(0u64)
            .push(0u64)
            .op(Opcode::Revert)
            .assemble(),
        0,
        Greedy,
        0,
        None,
    ));

    // Takes deposits and demonstrably gives them back: not greedy.
    out.push(fixture(
        "piggy_bank_with_smash",
        {
            let asm = load_selector(Asm::new())
                .push(0x99u64)
                .op(Opcode::Eq)
                .jumpi_to("smash")
                .op(Opcode::Stop)
                .label("smash");
            send_balance_to_caller(asm).op(Opcode::Stop).assemble()
        },
        20,
        Greedy,
        0,
        None,
    ));

    out
}

pub fn takeover_then_kill_fixture(depth: u32, verdict: Option<Verdict>) -> Fixture {
    let code = load_selector(Asm::new())
        .push(1u64)
        .op(Opcode::Eq)
        .jumpi_to("claim")
        .push(0u64)
        .op(Opcode::Sload)
        .op(Opcode::Caller)
        .op(Opcode::Eq)
        .jumpi_to("kill")
        .op(Opcode::Stop)
        .label("claim")
        .op(Opcode::Caller)
        .push(0u64)
        .op(Opcode::Sstore)
        .op(Opcode::Stop)
        .label("kill")
        .op(Opcode::Caller)
        .op(Opcode::Suicide)
        .assemble();
    let mut f = fixture(
        "init_then_retire",
        code,
        1,
        Category::Suicidal,
        depth,
        verdict,
    );
    f.chain
        .account_mut(subject())
        .storage_set(U256::zero(), word::address_word(owner()));
    f
}

/// Unbounded loop with changing state: every budget has to give up on it.
pub fn endless_counter() -> Fixture {
    fixture(
        "endless_counter",
        Asm::new()
            .push(0u64)
            .label("top")
            .push(1u64)
            .op(Opcode::Add)
            .jump_to("top")
            .assemble(),
        1,
        Category::Prodigal,
        0,
        None,
    )
}
