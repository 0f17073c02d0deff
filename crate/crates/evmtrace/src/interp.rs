//! Concrete small-step EVM interpreter with labeled transitions. Executes
//! whole transactions against a ChainState, recording a projected trace of
//! the subject contract: a ⟨state, label⟩ entry for every step the subject
//! performs. Any exceptional halt reverts the entire transaction.

use std::rc::Rc;

use primitive_types::U256;

use crate::bytecode::{decode, Opcode, Program};
use crate::chainstate::{AccountState, ChainState, Message};
use crate::word::{self, Address, Word};

/// Stand-in for remaining gas; the sandbox does not meter gas.
pub const GAS_STUB: u64 = 10_000_000;

pub const DEFAULT_STEP_LIMIT: usize = 1_000_000;
const STACK_LIMIT: usize = 1024;
const MEM_LIMIT: usize = 1 << 22;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Label {
    SStore { key: Word, value: Word },
    SLoad { key: Word, value: Word },
    Call { target: Address, msg: Message },
    DelegateCall { target: Address },
    Suicide { beneficiary: Address },
    Internal,
}

impl Label {
    pub fn is_internal(&self) -> bool {
        matches!(self, Label::Internal)
    }
}

#[derive(Debug, Clone)]
pub struct TraceEntry {
    /// Snapshot of the subject contract's state when the step was taken.
    pub state: AccountState,
    pub label: Label,
}

#[derive(Debug, Clone, Default)]
pub struct Trace {
    pub subject: Address,
    pub entries: Vec<TraceEntry>,
}

impl Trace {
    pub fn labels(&self) -> impl Iterator<Item = &Label> {
        self.entries.iter().map(|e| &e.label)
    }

    pub fn significant_labels(&self) -> impl Iterator<Item = &Label> {
        self.labels().filter(|l| !l.is_internal())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HaltKind {
    /// STOP or implicit end of code.
    Stop,
    Return,
    /// Top-level SUICIDE: transfer done, code cleared, transaction valid.
    SelfKill,
    Revert,
    Exceptional(String),
}

impl HaltKind {
    pub fn is_valid(&self) -> bool {
        matches!(self, HaltKind::Stop | HaltKind::Return | HaltKind::SelfKill)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TxError {
    #[error("recipient {0:?} is not a contract")]
    NotAContract(Address),
}

struct Frame {
    program: Rc<Program>,
    /// Account whose storage and balance this frame touches.
    id: Address,
    pc: usize,
    stack: Vec<Word>,
    mem: Vec<u8>,
    msg: Message,
    /// Caller memory region awaiting RETURN data: (offset, length).
    out_region: (usize, usize),
}

impl Frame {
    fn new(program: Rc<Program>, id: Address, msg: Message, out_region: (usize, usize)) -> Self {
        Frame {
            program,
            id,
            pc: 0,
            stack: Vec::new(),
            mem: Vec::new(),
            msg,
            out_region,
        }
    }
}

/// Exceptional-halt reason; aborts and reverts the transaction.
type Exc = String;

enum StepOutcome {
    Continue,
    /// Current frame finished; carries return data when RETURNing.
    FrameDone { ret: Vec<u8>, halt: HaltKind },
}

pub struct TxResult {
    pub state: ChainState,
    pub trace: Trace,
    pub halt: HaltKind,
}

pub struct SequenceResult {
    pub state: ChainState,
    pub trace: Trace,
    pub halts: Vec<HaltKind>,
}

/// Runs one transaction. The returned state reflects all effects on a valid
/// halt, or equals the input state (minus nothing) when the transaction
/// reverts or halts exceptionally.
pub fn run_transaction(
    start: &ChainState,
    msg: &Message,
    step_limit: usize,
) -> Result<TxResult, TxError> {
    let code = start
        .code(msg.recipient)
        .ok_or(TxError::NotAContract(msg.recipient))?
        .to_vec();
    let mut work = start.fork();
    let subject = msg.recipient;
    let mut trace = Trace {
        subject,
        entries: Vec::new(),
    };

    if start.balance(msg.sender) < msg.value {
        return Ok(TxResult {
            state: start.fork(),
            trace,
            halt: HaltKind::Exceptional("sender balance below message value".into()),
        });
    }
    work.account_mut(msg.sender).balance -= msg.value;
    work.account_mut(msg.recipient).balance += msg.value;

    let mut vm = Vm {
        state: work,
        frames: vec![Frame::new(
            Rc::new(decode(&code)),
            msg.recipient,
            msg.clone(),
            (0, 0),
        )],
        origin: msg.sender,
        subject,
        trace: &mut trace,
    };

    let halt = vm.run(step_limit);
    let state = if halt.is_valid() { vm.state } else { start.fork() };
    Ok(TxResult { state, trace, halt })
}

/// Runs messages in order against the same subject, advancing the block per
/// message and concatenating the projected traces.
pub fn run_sequence(
    start: &ChainState,
    msgs: &[Message],
    step_limit: usize,
) -> Result<SequenceResult, TxError> {
    let mut state = start.fork();
    let mut trace = Trace {
        subject: msgs.first().map(|m| m.recipient).unwrap_or_default(),
        entries: Vec::new(),
    };
    let mut halts = Vec::new();
    for msg in msgs {
        state.block.advance();
        let r = run_transaction(&state, msg, step_limit)?;
        state = r.state;
        trace.entries.extend(r.trace.entries);
        halts.push(r.halt);
    }
    Ok(SequenceResult {
        state,
        trace,
        halts,
    })
}

struct Vm<'a> {
    state: ChainState,
    frames: Vec<Frame>,
    origin: Address,
    subject: Address,
    trace: &'a mut Trace,
}

impl Vm<'_> {
    fn run(&mut self, step_limit: usize) -> HaltKind {
        let mut steps = 0;
        loop {
            if self.frames.is_empty() {
                return HaltKind::Stop;
            }
            if steps >= step_limit {
                return HaltKind::Exceptional("step limit exceeded".into());
            }
            steps += 1;
            match self.step() {
                Ok(StepOutcome::Continue) => {}
                Ok(StepOutcome::FrameDone { ret, halt }) => {
                    if matches!(halt, HaltKind::Revert) {
                        return HaltKind::Revert;
                    }
                    self.frames.pop();
                    let Some(parent) = self.frames.last_mut() else {
                        return halt;
                    };
                    // Sub-call succeeded: deliver return data, push 1.
                    let (off, len) = parent.out_region;
                    let n = len.min(ret.len());
                    if n > 0 {
                        if let Err(e) = ensure_mem(&mut parent.mem, off + n) {
                            return HaltKind::Exceptional(e);
                        }
                        parent.mem[off..off + n].copy_from_slice(&ret[..n]);
                    }
                    parent.stack.push(U256::one());
                }
                Err(reason) => return HaltKind::Exceptional(reason),
            }
        }
    }

    fn record(&mut self, label: Label) {
        if self.frames.last().map(|f| f.id) == Some(self.subject) {
            let mut state = self.state.account(self.subject);
            state.code = None; // trace entries track balance and storage
            self.trace.entries.push(TraceEntry { state, label });
        }
    }

    fn step(&mut self) -> Result<StepOutcome, Exc> {
        let frame = self.frames.last_mut().expect("non-empty frame stack");
        let Some(instr) = frame.program.instr_at(frame.pc).cloned() else {
            // Ran off the end of code: implicit STOP.
            self.record(Label::Internal);
            return Ok(StepOutcome::FrameDone {
                ret: Vec::new(),
                halt: HaltKind::Stop,
            });
        };
        let op = instr.opcode;
        if !op.is_implemented() {
            return Err(format!("unimplemented opcode {}", op.name()));
        }

        // Width of this instruction, for the default pc advance.
        let next_pc = frame.pc + 1 + instr.immediate.as_ref().map_or(0, |i| i.len());

        use Opcode::*;
        let mut label = Label::Internal;
        let mut outcome = StepOutcome::Continue;

        macro_rules! pop {
            () => {
                frame.stack.pop().ok_or_else(|| "stack underflow".to_string())?
            };
        }
        macro_rules! push {
            ($v:expr) => {{
                if frame.stack.len() >= STACK_LIMIT {
                    return Err("stack overflow".into());
                }
                frame.stack.push($v);
            }};
        }
        macro_rules! binop {
            ($f:expr) => {{
                let a = pop!();
                let b = pop!();
                push!($f(a, b));
            }};
        }

        let mut jumped = false;
        match op {
            Stop => {
                self.record(Label::Internal);
                return Ok(StepOutcome::FrameDone {
                    ret: Vec::new(),
                    halt: HaltKind::Stop,
                });
            }
            Add => binop!(word::add),
            Mul => binop!(word::mul),
            Sub => binop!(word::sub),
            Div => binop!(word::div),
            Sdiv => binop!(word::sdiv),
            Mod => binop!(word::rem),
            Smod => binop!(word::smod),
            Addmod => {
                let a = pop!();
                let b = pop!();
                let n = pop!();
                push!(word::addmod(a, b, n));
            }
            Mulmod => {
                let a = pop!();
                let b = pop!();
                let n = pop!();
                push!(word::mulmod(a, b, n));
            }
            Exp => binop!(word::exp),
            Signextend => binop!(word::signextend),
            Lt => binop!(word::lt),
            Gt => binop!(word::gt),
            Slt => binop!(word::slt),
            Sgt => binop!(word::sgt),
            Eq => binop!(word::eq),
            Iszero => {
                let a = pop!();
                push!(word::iszero(a));
            }
            And => binop!(|a, b| a & b),
            Or => binop!(|a, b| a | b),
            Xor => binop!(|a, b| a ^ b),
            Not => {
                let a = pop!();
                push!(!a);
            }
            Byte => binop!(word::byte),
            Sha3 => {
                let off = usize_arg(pop!())?;
                let len = usize_arg(pop!())?;
                ensure_mem(&mut frame.mem, off + len)?;
                push!(word::keccak_word(&frame.mem[off..off + len]));
            }
            Address => push!(word::address_word(frame.id)),
            Balance => {
                let a = word::to_address(pop!());
                push!(self.state.balance(a));
            }
            Origin => push!(word::address_word(self.origin)),
            Caller => push!(word::address_word(frame.msg.sender)),
            Callvalue => push!(frame.msg.value),
            Calldataload => {
                let off = usize_arg(pop!())?;
                push!(read_padded_word(&frame.msg.data, off));
            }
            Calldatasize => push!(U256::from(frame.msg.data.len())),
            Calldatacopy => {
                let dest = usize_arg(pop!())?;
                let src = usize_arg(pop!())?;
                let len = usize_arg(pop!())?;
                ensure_mem(&mut frame.mem, dest + len)?;
                for i in 0..len {
                    frame.mem[dest + i] =
                        frame.msg.data.get(src + i).copied().unwrap_or(0);
                }
            }
            Codesize => push!(U256::from(frame.program.raw.len())),
            Codecopy => {
                let dest = usize_arg(pop!())?;
                let src = usize_arg(pop!())?;
                let len = usize_arg(pop!())?;
                ensure_mem(&mut frame.mem, dest + len)?;
                for i in 0..len {
                    frame.mem[dest + i] =
                        frame.program.raw.get(src + i).copied().unwrap_or(0);
                }
            }
            Blockhash => {
                let n = pop!();
                let h = if n <= U256::from(u64::MAX) {
                    self.state.block.blockhash(n.as_u64())
                } else {
                    U256::zero()
                };
                push!(h);
            }
            Coinbase => push!(word::address_word(self.state.block.coinbase)),
            Timestamp => push!(U256::from(self.state.block.timestamp)),
            Number => push!(U256::from(self.state.block.number)),
            Pop => {
                pop!();
            }
            Mload => {
                let off = usize_arg(pop!())?;
                ensure_mem(&mut frame.mem, off + 32)?;
                push!(U256::from_big_endian(&frame.mem[off..off + 32]));
            }
            Mstore => {
                let off = usize_arg(pop!())?;
                let v = pop!();
                ensure_mem(&mut frame.mem, off + 32)?;
                frame.mem[off..off + 32].copy_from_slice(&v.to_big_endian());
            }
            Mstore8 => {
                let off = usize_arg(pop!())?;
                let v = pop!();
                ensure_mem(&mut frame.mem, off + 1)?;
                frame.mem[off] = v.byte(0);
            }
            Sload => {
                let key = pop!();
                let value = self.state.account(frame.id).storage_get(key);
                push!(value);
                label = Label::SLoad { key, value };
            }
            Sstore => {
                let key = pop!();
                let value = pop!();
                self.state.account_mut(frame.id).storage_set(key, value);
                label = Label::SStore { key, value };
            }
            Jump => {
                let dest = usize_arg(pop!())?;
                if !frame.program.is_jumpdest(dest) {
                    return Err(format!("invalid jump destination {dest}"));
                }
                frame.pc = dest;
                jumped = true;
            }
            Jumpi => {
                let dest = usize_arg(pop!())?;
                let cond = pop!();
                if word::is_truthy(cond) {
                    if !frame.program.is_jumpdest(dest) {
                        return Err(format!("invalid jump destination {dest}"));
                    }
                    frame.pc = dest;
                    jumped = true;
                }
            }
            Pc => push!(U256::from(instr.offset)),
            Msize => push!(U256::from(frame.mem.len().div_ceil(32) * 32)),
            Gas => push!(U256::from(GAS_STUB)),
            Jumpdest => {}
            Push(_) => {
                let imm = instr.padded_immediate().expect("push has immediate");
                push!(U256::from_big_endian(&imm));
            }
            Dup(n) => {
                let n = n as usize;
                if frame.stack.len() < n {
                    return Err("stack underflow".into());
                }
                let v = frame.stack[frame.stack.len() - n];
                push!(v);
            }
            Swap(n) => {
                let n = n as usize;
                if frame.stack.len() < n + 1 {
                    return Err("stack underflow".into());
                }
                let top = frame.stack.len() - 1;
                frame.stack.swap(top, top - n);
            }
            Return => {
                let off = usize_arg(pop!())?;
                let len = usize_arg(pop!())?;
                ensure_mem(&mut frame.mem, off + len)?;
                let ret = frame.mem[off..off + len].to_vec();
                self.record(Label::Internal);
                return Ok(StepOutcome::FrameDone {
                    ret,
                    halt: HaltKind::Return,
                });
            }
            Revert => {
                return Ok(StepOutcome::FrameDone {
                    ret: Vec::new(),
                    halt: HaltKind::Revert,
                });
            }
            Invalid | Unknown(_) => {
                return Err(format!("invalid opcode {}", op.name()));
            }
            Call | Callcode | Delegatecall | Suicide => {
                // Handled below; they need &mut self beyond `frame`.
                outcome = self.call_family(op, next_pc)?;
                return Ok(outcome);
            }
            Create | Staticcall | Extcodesize | Extcodecopy | Gasprice | Log(_)
            | Difficulty | Gaslimit => unreachable!("filtered by is_implemented"),
        }

        if !jumped {
            frame.pc = next_pc;
        }
        self.record(label);
        Ok(outcome)
    }

    /// CALL / CALLCODE / DELEGATECALL / SUICIDE.
    fn call_family(&mut self, op: Opcode, next_pc: usize) -> Result<StepOutcome, Exc> {
        let frame = self.frames.last_mut().expect("frame");
        let mut pop = || frame.stack.pop().ok_or_else(|| "stack underflow".to_string());

        match op {
            Opcode::Suicide => {
                let beneficiary = word::to_address(pop()?);
                let id = frame.id;
                let balance = self.state.balance(id);
                self.state.account_mut(id).balance = U256::zero();
                if beneficiary != id {
                    self.state.account_mut(beneficiary).balance += balance;
                }
                self.state.account_mut(id).code = Some(Vec::new());
                self.record(Label::Suicide { beneficiary });
                // Non-empty caller stack: pop the record and push 1 for the
                // caller; at top level this is a valid transaction end.
                Ok(StepOutcome::FrameDone {
                    ret: Vec::new(),
                    halt: HaltKind::SelfKill,
                })
            }
            Opcode::Call => {
                let _gas = pop()?;
                let target = word::to_address(pop()?);
                let value = pop()?;
                let in_off = usize_arg(pop()?)?;
                let in_len = usize_arg(pop()?)?;
                let out_off = usize_arg(pop()?)?;
                let out_len = usize_arg(pop()?)?;
                ensure_mem(&mut frame.mem, in_off + in_len)?;
                let data = frame.mem[in_off..in_off + in_len].to_vec();
                let sender = frame.id;
                if self.state.balance(sender) < value {
                    return Err("call value exceeds balance".into());
                }
                let msg = Message {
                    sender,
                    recipient: target,
                    value,
                    data,
                };
                frame.out_region = (out_off, out_len);
                frame.pc = next_pc;
                self.record(Label::Call {
                    target,
                    msg: msg.clone(),
                });
                self.state.account_mut(sender).balance -= value;
                self.state.account_mut(target).balance += value;

                if let Some(ret) = precompile(target, &msg.data)? {
                    let parent = self.frames.last_mut().unwrap();
                    let n = out_len.min(ret.len());
                    if n > 0 {
                        ensure_mem(&mut parent.mem, out_off + n)?;
                        parent.mem[out_off..out_off + n].copy_from_slice(&ret[..n]);
                    }
                    parent.stack.push(U256::one());
                    return Ok(StepOutcome::Continue);
                }
                match self.state.code(target) {
                    None => {
                        // Plain transfer to a non-contract account.
                        self.frames.last_mut().unwrap().stack.push(U256::one());
                        Ok(StepOutcome::Continue)
                    }
                    Some(code) => {
                        let program = Rc::new(decode(code));
                        self.frames
                            .push(Frame::new(program, target, msg, (out_off, out_len)));
                        Ok(StepOutcome::Continue)
                    }
                }
            }
            Opcode::Callcode | Opcode::Delegatecall => {
                let _gas = pop()?;
                let target = word::to_address(pop()?);
                let (sender, value) = if op == Opcode::Callcode {
                    let v = pop()?;
                    (frame.id, v)
                } else {
                    (frame.msg.sender, frame.msg.value)
                };
                let in_off = usize_arg(pop()?)?;
                let in_len = usize_arg(pop()?)?;
                let out_off = usize_arg(pop()?)?;
                let out_len = usize_arg(pop()?)?;
                ensure_mem(&mut frame.mem, in_off + in_len)?;
                let data = frame.mem[in_off..in_off + in_len].to_vec();
                if op == Opcode::Callcode && self.state.balance(frame.id) < value {
                    return Err("call value exceeds balance".into());
                }
                let id = frame.id;
                let msg = Message {
                    sender,
                    recipient: id,
                    value,
                    data,
                };
                frame.pc = next_pc;
                if op == Opcode::Delegatecall {
                    self.record(Label::DelegateCall { target });
                } else {
                    self.record(Label::Call {
                        target,
                        msg: msg.clone(),
                    });
                }
                match self.state.code(target) {
                    None => {
                        self.frames.last_mut().unwrap().stack.push(U256::one());
                        Ok(StepOutcome::Continue)
                    }
                    Some(code) => {
                        let program = Rc::new(decode(code));
                        // Runs the borrowed code against this frame's own
                        // storage and balance.
                        self.frames
                            .push(Frame::new(program, id, msg, (out_off, out_len)));
                        Ok(StepOutcome::Continue)
                    }
                }
            }
            _ => unreachable!(),
        }
    }
}

fn usize_arg(w: Word) -> Result<usize, Exc> {
    if w > U256::from(MEM_LIMIT) {
        return Err("offset exceeds memory limit".into());
    }
    Ok(w.as_usize())
}

fn ensure_mem(mem: &mut Vec<u8>, size: usize) -> Result<(), Exc> {
    if size > MEM_LIMIT {
        return Err("memory limit exceeded".into());
    }
    if mem.len() < size {
        mem.resize(size.div_ceil(32) * 32, 0);
    }
    Ok(())
}

fn read_padded_word(data: &[u8], off: usize) -> Word {
    let mut buf = [0u8; 32];
    for (i, slot) in buf.iter_mut().enumerate() {
        *slot = data.get(off + i).copied().unwrap_or(0);
    }
    U256::from_big_endian(&buf)
}

/// Identity precompile at address 0x04; other precompile slots are
/// unsupported and halt exceptionally.
fn precompile(target: Address, data: &[u8]) -> Result<Option<Vec<u8>>, Exc> {
    let w = word::address_word(target);
    if w.is_zero() || w > U256::from(9u64) {
        return Ok(None);
    }
    if w == U256::from(4u64) {
        return Ok(Some(data.to_vec()));
    }
    Err(format!("unsupported precompile 0x{w:02x}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::Asm;
    use crate::chainstate::addr;

    fn contract_addr() -> Address {
        addr("0x00000000000000000000000000000000000000cc")
    }

    fn user_addr() -> Address {
        addr("0x00000000000000000000000000000000000000aa")
    }

    fn state_with(code: Vec<u8>, balance: u64) -> ChainState {
        let mut s = ChainState::default();
        let c = s.account_mut(contract_addr());
        c.code = Some(code);
        c.balance = U256::from(balance);
        s.account_mut(user_addr()).balance = U256::from(1_000_000u64);
        s
    }

    fn msg(value: u64, data: Vec<u8>) -> Message {
        Message {
            sender: user_addr(),
            recipient: contract_addr(),
            value: U256::from(value),
            data,
        }
    }

    fn run(code: Vec<u8>, m: &Message, balance: u64) -> TxResult {
        run_transaction(&state_with(code, balance), m, DEFAULT_STEP_LIMIT).unwrap()
    }

    #[test]
    fn arithmetic_and_storage() {
        // store 1+2 at slot 0, then stop
        let code = Asm::new()
            .push(1u64)
            .push(2u64)
            .op(Opcode::Add)
            .push(0u64)
            .op(Opcode::Sstore)
            .op(Opcode::Stop)
            .assemble();
        let r = run(code, &msg(0, vec![]), 0);
        assert!(r.halt.is_valid());
        assert_eq!(
            r.state.account(contract_addr()).storage_get(U256::zero()),
            U256::from(3)
        );
        let labels: Vec<&Label> = r.trace.significant_labels().collect();
        assert_eq!(
            labels,
            vec![&Label::SStore {
                key: U256::zero(),
                value: U256::from(3)
            }]
        );
    }

    #[test]
    fn value_transfer_applies_on_valid_halt() {
        let code = vec![Opcode::Stop.byte()];
        let r = run(code, &msg(7, vec![]), 0);
        assert!(r.halt.is_valid());
        assert_eq!(r.state.balance(contract_addr()), U256::from(7));
        assert_eq!(r.state.balance(user_addr()), U256::from(1_000_000 - 7));
    }

    #[test]
    fn invalid_opcode_reverts_everything() {
        // store then hit INVALID
        let code = Asm::new()
            .push(5u64)
            .push(0u64)
            .op(Opcode::Sstore)
            .op(Opcode::Invalid)
            .assemble();
        let start = state_with(code.clone(), 0);
        let r = run_transaction(&start, &msg(7, vec![]), DEFAULT_STEP_LIMIT).unwrap();
        assert!(!r.halt.is_valid());
        assert_eq!(r.state.digest(), start.digest());
    }

    #[test]
    fn suicide_transfers_and_clears_code() {
        // SUICIDE(CALLER)
        let code = Asm::new().op(Opcode::Caller).op(Opcode::Suicide).assemble();
        let r = run(code, &msg(0, vec![]), 500);
        assert_eq!(r.halt, HaltKind::SelfKill);
        assert_eq!(r.state.balance(user_addr()), U256::from(1_000_500u64));
        assert_eq!(r.state.balance(contract_addr()), U256::zero());
        assert_eq!(r.state.code(contract_addr()), None);
        assert_eq!(
            r.trace.significant_labels().collect::<Vec<_>>(),
            vec![&Label::Suicide {
                beneficiary: user_addr()
            }]
        );
    }

    #[test]
    fn suicide_to_self_burns() {
        let code = Asm::new().op(Opcode::Address).op(Opcode::Suicide).assemble();
        let r = run(code, &msg(0, vec![]), 500);
        assert_eq!(r.halt, HaltKind::SelfKill);
        assert_eq!(r.state.balance(contract_addr()), U256::zero());
        assert_eq!(r.state.code(contract_addr()), None);
    }

    #[test]
    fn call_with_insufficient_balance_is_exceptional() {
        // CALL(gas, caller, 1000 wei, no data) with contract balance 0
        let code = Asm::new()
            .push(0u64) // out len
            .push(0u64) // out off
            .push(0u64) // in len
            .push(0u64) // in off
            .push(1000u64) // value
            .op(Opcode::Caller)
            .op(Opcode::Gas)
            .op(Opcode::Call)
            .op(Opcode::Stop)
            .assemble();
        let start = state_with(code, 0);
        let r = run_transaction(&start, &msg(0, vec![]), DEFAULT_STEP_LIMIT).unwrap();
        assert!(matches!(r.halt, HaltKind::Exceptional(_)));
        assert_eq!(r.state.digest(), start.digest());
    }

    #[test]
    fn call_to_eoa_transfers_and_pushes_one() {
        let code = Asm::new()
            .push(0u64)
            .push(0u64)
            .push(0u64)
            .push(0u64)
            .push(30u64)
            .op(Opcode::Caller)
            .op(Opcode::Gas)
            .op(Opcode::Call)
            // store call result so we can observe it
            .push(0u64)
            .op(Opcode::Sstore)
            .op(Opcode::Stop)
            .assemble();
        let r = run(code, &msg(0, vec![]), 100);
        assert!(r.halt.is_valid());
        assert_eq!(r.state.balance(user_addr()), U256::from(1_000_030u64));
        assert_eq!(r.state.balance(contract_addr()), U256::from(70));
        assert_eq!(
            r.state.account(contract_addr()).storage_get(U256::zero()),
            U256::one()
        );
        assert!(r
            .trace
            .significant_labels()
            .any(|l| matches!(l, Label::Call { target, msg } if *target == user_addr() && msg.value == U256::from(30))));
    }

    #[test]
    fn calldataload_zero_pads() {
        // return calldata[0] into storage slot 0
        let code = Asm::new()
            .push(0u64)
            .op(Opcode::Calldataload)
            .push(0u64)
            .op(Opcode::Sstore)
            .op(Opcode::Stop)
            .assemble();
        let r = run(code, &msg(0, vec![0xab]), 0);
        let expected = U256::from(0xab) << 248;
        assert_eq!(
            r.state.account(contract_addr()).storage_get(U256::zero()),
            expected
        );
    }

    #[test]
    fn memory_and_sha3() {
        // keccak256 of 32 zero bytes → slot 0
        let code = Asm::new()
            .push(32u64)
            .push(0u64)
            .op(Opcode::Sha3)
            .push(0u64)
            .op(Opcode::Sstore)
            .op(Opcode::Stop)
            .assemble();
        let r = run(code, &msg(0, vec![]), 0);
        assert_eq!(
            r.state.account(contract_addr()).storage_get(U256::zero()),
            word::keccak_word(&[0u8; 32])
        );
    }

    #[test]
    fn nested_call_executes_callee() {
        // Callee: SSTORE(0, CALLVALUE); STOP
        let callee_code = Asm::new()
            .op(Opcode::Callvalue)
            .push(0u64)
            .op(Opcode::Sstore)
            .op(Opcode::Stop)
            .assemble();
        let callee = addr("0x00000000000000000000000000000000000000dd");
        // Caller calls callee with 5 wei.
        let code = Asm::new()
            .push(0u64)
            .push(0u64)
            .push(0u64)
            .push(0u64)
            .push(5u64)
            .push_bytes(callee.as_bytes())
            .op(Opcode::Gas)
            .op(Opcode::Call)
            .op(Opcode::Pop)
            .op(Opcode::Stop)
            .assemble();
        let mut s = state_with(code, 100);
        let acct = s.account_mut(callee);
        acct.code = Some(callee_code);
        let r = run_transaction(&s, &msg(0, vec![]), DEFAULT_STEP_LIMIT).unwrap();
        assert!(r.halt.is_valid());
        assert_eq!(r.state.balance(callee), U256::from(5));
        assert_eq!(r.state.account(callee).storage_get(U256::zero()), U256::from(5));
        // Callee steps are not part of the subject's projected trace.
        assert!(r
            .trace
            .significant_labels()
            .all(|l| !matches!(l, Label::SStore { .. })));
    }

    #[test]
    fn sequence_advances_blocks_and_conserves_balance() {
        let code = vec![Opcode::Stop.byte()];
        let start = state_with(code, 0);
        let total = start.total_balance();
        let msgs = vec![msg(1, vec![]), msg(1, vec![])];
        let r = run_sequence(&start, &msgs, DEFAULT_STEP_LIMIT).unwrap();
        assert_eq!(r.state.balance(contract_addr()), U256::from(2));
        assert_eq!(r.state.total_balance(), total);
        assert_eq!(r.state.block.number, start.block.number + 2);
        assert!(r.halts.iter().all(|h| h.is_valid()));
    }

    #[test]
    fn determinism() {
        let code = Asm::new()
            .op(Opcode::Timestamp)
            .op(Opcode::Number)
            .op(Opcode::Add)
            .push(3u64)
            .op(Opcode::Sstore)
            .op(Opcode::Stop)
            .assemble();
        let start = state_with(code, 9);
        let m = msg(2, vec![1, 2, 3]);
        let a = run_transaction(&start, &m, DEFAULT_STEP_LIMIT).unwrap();
        let b = run_transaction(&start, &m, DEFAULT_STEP_LIMIT).unwrap();
        assert_eq!(a.state.digest(), b.state.digest());
        assert_eq!(
            a.trace.labels().collect::<Vec<_>>(),
            b.trace.labels().collect::<Vec<_>>()
        );
    }

    #[test]
    fn not_a_contract_error() {
        let s = ChainState::default();
        let m = msg(0, vec![]);
        assert!(matches!(
            run_transaction(&s, &m, DEFAULT_STEP_LIMIT),
            Err(TxError::NotAContract(_))
        ));
    }

    #[test]
    fn bad_jump_reverts() {
        let code = Asm::new().push(1u64).op(Opcode::Jump).assemble();
        let start = state_with(code, 3);
        let r = run_transaction(&start, &msg(0, vec![]), DEFAULT_STEP_LIMIT).unwrap();
        assert!(matches!(r.halt, HaltKind::Exceptional(_)));
        assert_eq!(r.state.digest(), start.digest());
    }

    #[test]
    fn delegatecall_runs_target_code_in_caller_context() {
        // Library code: SSTORE(7, CALLER)
        let lib_code = Asm::new()
            .op(Opcode::Caller)
            .push(7u64)
            .op(Opcode::Sstore)
            .op(Opcode::Stop)
            .assemble();
        let lib = addr("0x00000000000000000000000000000000000000ee");
        let code = Asm::new()
            .push(0u64)
            .push(0u64)
            .push(0u64)
            .push(0u64)
            .push_bytes(lib.as_bytes())
            .op(Opcode::Gas)
            .op(Opcode::Delegatecall)
            .op(Opcode::Pop)
            .op(Opcode::Stop)
            .assemble();
        let mut s = state_with(code, 0);
        s.account_mut(lib).code = Some(lib_code);
        let r = run_transaction(&s, &msg(0, vec![]), DEFAULT_STEP_LIMIT).unwrap();
        assert!(r.halt.is_valid());
        // Write landed in the caller's storage, sender seen is the original.
        assert_eq!(
            r.state.account(contract_addr()).storage_get(U256::from(7)),
            word::address_word(user_addr())
        );
        assert!(r.state.account(lib).storage.is_empty());
        assert!(r
            .trace
            .significant_labels()
            .any(|l| matches!(l, Label::DelegateCall { target } if *target == lib)));
    }
}
